use serde::{Deserialize, Serialize};

use super::modulation::ModulationFormat;
use crate::error::{Error, Result};

/// One amplified fiber span. Spans are identified by the directed link
/// they belong to and their position on it, which is what two routes
/// must agree on to share the span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub from: String,
    pub to: String,
    pub index: u32,
    pub length_km: f64,
    pub connectors: u32,
    pub splices: u32,
}

impl Span {
    fn same_fiber(&self, other: &Span) -> bool {
        self.index == other.index && self.from == other.from && self.to == other.to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: String,
    pub nodes: Vec<String>,
    pub spans: Vec<Span>,
    pub roadm_count: u32,
}

impl Route {
    pub fn source(&self) -> &str {
        self.nodes.first().map(String::as_str).unwrap_or("")
    }

    pub fn destination(&self) -> &str {
        self.nodes.last().map(String::as_str).unwrap_or("")
    }

    pub fn span_count(&self) -> u32 {
        self.spans.len() as u32
    }

    pub fn length_km(&self) -> f64 {
        self.spans.iter().map(|s| s.length_km).sum()
    }

    /// Number of spans this route has in common with `other`.
    pub fn shared_with(&self, other: &Route) -> u32 {
        let mut used = vec![false; other.spans.len()];
        let mut n = 0;
        for s in &self.spans {
            if let Some(k) = (0..other.spans.len()).find(|&k| !used[k] && s.same_fiber(&other.spans[k])) {
                used[k] = true;
                n += 1;
            }
        }
        n
    }

    /// True when the route passes through `node` and continues past it.
    pub fn traverses(&self, node: &str) -> bool {
        self.nodes[..self.nodes.len().saturating_sub(1)]
            .iter()
            .any(|n| n == node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lightpath {
    pub route: Route,
    pub rate_gbps: f64,
    pub modulation: ModulationFormat,
    /// Hz
    pub bandwidth_hz: f64,
    /// Grid slot; the center frequency is derived from it.
    pub slot: i64,
    /// Hz
    pub center_frequency_hz: f64,
}

impl Lightpath {
    pub fn id(&self) -> &str {
        &self.route.id
    }

    /// Δf = ξ / c.
    pub fn bandwidth_for(rate_gbps: f64, modulation: ModulationFormat) -> f64 {
        rate_gbps * 1e9 / modulation.spectral_efficiency()
    }
}

/// Input description of a channel before grid placement.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub route: Route,
    pub rate_gbps: f64,
    pub modulation: ModulationFormat,
    pub slot: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    lightpaths: Vec<Lightpath>,
    shared: Vec<u32>,
    channel_spacing_hz: f64,
    guard_band_hz: f64,
    carrier_hz: f64,
}

impl Network {
    /// Places channels on the grid and derives the shared-span matrix.
    pub fn new(
        channels: Vec<ChannelSpec>,
        channel_spacing_hz: f64,
        guard_band_hz: f64,
        carrier_hz: f64,
    ) -> Result<Network> {
        if !(channel_spacing_hz.is_finite() && channel_spacing_hz > 0.0) {
            return Err(Error::invalid("grid.spacing_ghz", "must be positive"));
        }
        if !(guard_band_hz.is_finite() && guard_band_hz >= 0.0) {
            return Err(Error::invalid("grid.guard_ghz", "must be >= 0"));
        }
        for (a, ca) in channels.iter().enumerate() {
            for cb in &channels[a + 1..] {
                if ca.slot == cb.slot {
                    return Err(Error::DuplicateSlot {
                        slot: ca.slot,
                        first: ca.route.id.clone(),
                        second: cb.route.id.clone(),
                    });
                }
            }
        }
        let m = channels.len();
        let center = (m as f64 - 1.0) / 2.0;
        let mut lightpaths = Vec::with_capacity(m);
        for (i, c) in channels.into_iter().enumerate() {
            let path = format!("lightpaths[{i}]");
            if !(c.rate_gbps.is_finite() && c.rate_gbps > 0.0) {
                return Err(Error::invalid(format!("{path}.rate_gbps"), "must be positive"));
            }
            if c.route.spans.iter().any(|s| !(s.length_km.is_finite() && s.length_km > 0.0)) {
                return Err(Error::invalid(format!("{path}.path"), "span lengths must be positive"));
            }
            let bandwidth_hz = Lightpath::bandwidth_for(c.rate_gbps, c.modulation);
            if bandwidth_hz + guard_band_hz > channel_spacing_hz * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    format!("{path}.rate_gbps"),
                    format!(
                        "bandwidth {:.3} GHz plus guard band exceeds the {:.3} GHz channel spacing",
                        bandwidth_hz / 1e9,
                        channel_spacing_hz / 1e9
                    ),
                ));
            }
            lightpaths.push(Lightpath {
                center_frequency_hz: carrier_hz + (c.slot as f64 - center) * channel_spacing_hz,
                route: c.route,
                rate_gbps: c.rate_gbps,
                modulation: c.modulation,
                bandwidth_hz,
                slot: c.slot,
            });
        }
        let mut shared = vec![0u32; m * m];
        for i in 0..m {
            shared[i * m + i] = lightpaths[i].route.span_count();
            for j in i + 1..m {
                let n = lightpaths[i].route.shared_with(&lightpaths[j].route);
                shared[i * m + j] = n;
                shared[j * m + i] = n;
            }
        }
        Ok(Network {
            lightpaths,
            shared,
            channel_spacing_hz,
            guard_band_hz,
            carrier_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.lightpaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lightpaths.is_empty()
    }

    pub fn lightpaths(&self) -> &[Lightpath] {
        &self.lightpaths
    }

    pub fn lightpath(&self, i: usize) -> Result<&Lightpath> {
        self.lightpaths.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.len(),
        })
    }

    pub fn channel_spacing_hz(&self) -> f64 {
        self.channel_spacing_hz
    }

    pub fn guard_band_hz(&self) -> f64 {
        self.guard_band_hz
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// N_s_ij.
    pub fn shared_spans(&self, i: usize, j: usize) -> Result<u32> {
        let m = self.len();
        for index in [i, j] {
            if index >= m {
                return Err(Error::IndexOutOfRange { index, len: m });
            }
        }
        Ok(self.shared[i * m + j])
    }

    /// Row-major M×M shared-span matrix.
    pub fn shared_span_matrix(&self) -> Vec<Vec<u32>> {
        let m = self.len();
        (0..m).map(|i| self.shared[i * m..(i + 1) * m].to_vec()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.lightpaths.iter().position(|l| l.id() == id)
    }

    /// Σ_i (N_i^ROADM + N_i^span).
    pub fn route_element_sum(&self) -> u64 {
        self.lightpaths
            .iter()
            .map(|l| u64::from(l.route.roadm_count) + u64::from(l.route.span_count()))
            .sum()
    }

    fn specs(&self) -> impl Iterator<Item = ChannelSpec> + '_ {
        self.lightpaths.iter().map(|l| ChannelSpec {
            route: l.route.clone(),
            rate_gbps: l.rate_gbps,
            modulation: l.modulation,
            slot: l.slot,
        })
    }

    /// Network restricted to the channels at `keep`, in that order.
    /// Grid slots are preserved; derived quantities are recomputed.
    pub fn subset(&self, keep: &[usize]) -> Result<Network> {
        let specs: Vec<ChannelSpec> = self.specs().collect();
        let mut chosen = Vec::with_capacity(keep.len());
        for &k in keep {
            let spec = specs.get(k).ok_or(Error::IndexOutOfRange {
                index: k,
                len: specs.len(),
            })?;
            chosen.push(spec.clone());
        }
        let mut net = Network::new(chosen, self.channel_spacing_hz, self.guard_band_hz, self.carrier_hz)?;
        // Keep the surviving channels at the frequencies they had.
        for (l, &k) in net.lightpaths.iter_mut().zip(keep) {
            l.center_frequency_hz = self.lightpaths[k].center_frequency_hz;
        }
        Ok(net)
    }

    /// Network without the named routes.
    pub fn without(&self, ids: &[&str]) -> Result<(Network, Vec<usize>)> {
        for id in ids {
            if self.index_of(id).is_none() {
                return Err(Error::UnknownRoute(id.to_string()));
            }
        }
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| !ids.contains(&self.lightpaths[i].id()))
            .collect();
        Ok((self.subset(&keep)?, keep))
    }

    /// The route set repeated `times` times on consecutive grid slots.
    /// Copies share the fibers of the original routes.
    pub fn replicate(&self, times: usize) -> Result<Network> {
        let m = self.len() as i64;
        let mut specs = Vec::with_capacity(self.len() * times);
        for copy in 0..times {
            for (i, s) in self.specs().enumerate() {
                let mut s = s;
                if copy > 0 {
                    s.route.id = format!("{}.{}", s.route.id, copy + 1);
                }
                s.slot = copy as i64 * m + i as i64;
                specs.push(s);
            }
        }
        Network::new(specs, self.channel_spacing_hz, self.guard_band_hz, self.carrier_hz)
    }
}
