//! Structured-text network description.
//!
//! ```toml
//! nodes = [1, 2, 3]
//!
//! [grid]
//! spacing_ghz = 50.0
//! guard_ghz = 6.0
//!
//! [physical]
//! alpha_db_per_km = [0.22, 0.23]
//!
//! [[links]]
//! a = 1
//! b = 2
//! km = 300.0
//!
//! [[lightpaths]]
//! id = "R1"
//! source = 1
//! destination = 3
//! path = [1, 2, 3]
//! rate_gbps = 100
//! modulation = "PM-QPSK"
//! ```
//!
//! Links are bidirectional and split into `ceil(km / span_length_km)`
//! equal spans unless `spans` is given. A lightpath may set `roadms`
//! (default: every node on its path) and `slot` (default: its index).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::modulation::ModulationFormat;
use super::params::PhysicalParams;
use super::topology::{ChannelSpec, Network, Route, Span};
use crate::error::{Error, Result};
use crate::scenarios::ScenarioSpec;

/// The bundled twelve-lightpath, sixteen-node reference network.
pub const TABLE3_CONFIG: &str = include_str!("../../data/table3.cfg");

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
enum NodeId {
    Int(i64),
    Name(String),
}

impl NodeId {
    fn key(&self) -> String {
        match self {
            NodeId::Int(v) => v.to_string(),
            NodeId::Name(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    spacing_ghz: f64,
    guard_ghz: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            spacing_ghz: 50.0,
            guard_ghz: 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    a: NodeId,
    b: NodeId,
    km: f64,
    #[serde(default)]
    spans: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightpathSection {
    id: String,
    source: NodeId,
    destination: NodeId,
    path: Vec<NodeId>,
    rate_gbps: f64,
    modulation: String,
    #[serde(default)]
    roadms: Option<u32>,
    #[serde(default)]
    slot: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    nodes: Vec<NodeId>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    physical: PhysicalParams,
    #[serde(default)]
    links: Vec<LinkSection>,
    #[serde(default)]
    lightpaths: Vec<LightpathSection>,
    #[serde(default)]
    scenario: Option<ScenarioSpec>,
}

/// Everything a config document describes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub network: Network,
    pub physical: PhysicalParams,
    pub scenario: Option<ScenarioSpec>,
}

pub fn load_network(text: &str) -> Result<(Network, PhysicalParams)> {
    let c = load_config(text, &[])?;
    Ok((c.network, c.physical))
}

/// Parses a document after applying `section.key = value` overrides.
/// Values are read as TOML literals, falling back to plain strings.
pub fn load_config(text: &str, overrides: &[(String, String)]) -> Result<LoadedConfig> {
    let doc: Document = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
    } else {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        let text = toml::to_string(&table).map_err(|e| Error::Parse(e.to_string()))?;
        toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?
    };
    build(doc)
}

pub fn load_config_file(path: &Path, overrides: &[(String, String)]) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    load_config(&text, overrides).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn table3() -> Result<LoadedConfig> {
    load_config(TABLE3_CONFIG, &[])
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::invalid(key, "malformed override key"));
    }
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::invalid(key, format!("`{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

fn build(doc: Document) -> Result<LoadedConfig> {
    doc.physical.validate("physical")?;
    let physical = doc.physical;

    let declared: Vec<String> = doc.nodes.iter().map(NodeId::key).collect();
    let check_node = |path: String, id: &NodeId| -> Result<String> {
        let key = id.key();
        if !declared.is_empty() && !declared.contains(&key) {
            return Err(Error::invalid(path, format!("undeclared node `{key}`")));
        }
        Ok(key)
    };

    let mut links: HashMap<(String, String), (f64, u32)> = HashMap::new();
    for (n, link) in doc.links.iter().enumerate() {
        let a = check_node(format!("links[{n}].a"), &link.a)?;
        let b = check_node(format!("links[{n}].b"), &link.b)?;
        if a == b {
            return Err(Error::invalid(format!("links[{n}]"), "self-loop"));
        }
        if !(link.km.is_finite() && link.km > 0.0) {
            return Err(Error::invalid(format!("links[{n}].km"), "must be positive"));
        }
        let spans = match link.spans {
            Some(0) => return Err(Error::invalid(format!("links[{n}].spans"), "must be >= 1")),
            Some(s) => s,
            None => (link.km / physical.span_length_km).ceil().max(1.0) as u32,
        };
        for key in [(a.clone(), b.clone()), (b.clone(), a.clone())] {
            if links.insert(key, (link.km, spans)).is_some() {
                return Err(Error::invalid(format!("links[{n}]"), format!("duplicate link {a}-{b}")));
            }
        }
    }

    let mut channels = Vec::with_capacity(doc.lightpaths.len());
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (n, lp) in doc.lightpaths.iter().enumerate() {
        let path = format!("lightpaths[{n}]");
        if let Some(prev) = ids.insert(lp.id.as_str(), n) {
            return Err(Error::invalid(
                format!("{path}.id"),
                format!("`{}` already used by lightpaths[{prev}]", lp.id),
            ));
        }
        let modulation: ModulationFormat = lp.modulation.parse().map_err(|_| Error::UnknownModulation {
            path: format!("{path}.modulation"),
            name: lp.modulation.clone(),
        })?;
        if lp.path.len() < 2 {
            return Err(Error::invalid(format!("{path}.path"), "needs at least two nodes"));
        }
        let nodes = lp
            .path
            .iter()
            .enumerate()
            .map(|(k, id)| check_node(format!("{path}.path[{k}]"), id))
            .collect::<Result<Vec<_>>>()?;
        if nodes[0] != lp.source.key() {
            return Err(Error::invalid(format!("{path}.path"), "does not start at `source`"));
        }
        if nodes[nodes.len() - 1] != lp.destination.key() {
            return Err(Error::invalid(format!("{path}.path"), "does not end at `destination`"));
        }
        let mut spans = Vec::new();
        for (k, hop) in nodes.windows(2).enumerate() {
            let (km, count) = links.get(&(hop[0].clone(), hop[1].clone())).copied().ok_or_else(|| {
                Error::invalid(
                    format!("{path}.path[{}]", k + 1),
                    format!("no link between `{}` and `{}`", hop[0], hop[1]),
                )
            })?;
            for index in 0..count {
                spans.push(Span {
                    from: hop[0].clone(),
                    to: hop[1].clone(),
                    index,
                    length_km: km / f64::from(count),
                    connectors: physical.connectors_per_span,
                    splices: physical.splices_per_span,
                });
            }
        }
        channels.push(ChannelSpec {
            route: Route {
                id: lp.id.clone(),
                roadm_count: lp.roadms.unwrap_or(nodes.len() as u32),
                nodes,
                spans,
            },
            rate_gbps: lp.rate_gbps,
            modulation,
            slot: lp.slot.unwrap_or(n as i64),
        });
    }

    let network = Network::new(
        channels,
        doc.grid.spacing_ghz * 1e9,
        doc.grid.guard_ghz * 1e9,
        physical.carrier_hz,
    )?;
    if let Some(s) = &doc.scenario {
        s.validate(&physical, &network)?;
    }
    Ok(LoadedConfig {
        network,
        physical,
        scenario: doc.scenario,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
nodes = [1, 2, 3]

[[links]]
a = 1
b = 2
km = 150

[[links]]
a = 2
b = 3
km = 100

[[lightpaths]]
id = "A"
source = 1
destination = 3
path = [1, 2, 3]
rate_gbps = 100
modulation = "PM-QPSK"

[[lightpaths]]
id = "B"
source = 2
destination = 3
path = [2, 3]
rate_gbps = 300
modulation = "PM-64QAM"
"#;

    #[test]
    fn tiny_document() {
        let (net, phys) = load_network(TINY).unwrap();
        assert_eq!(phys, PhysicalParams::default());
        assert_eq!(net.len(), 2);
        let a = &net.lightpaths()[0];
        assert_eq!(a.route.span_count(), 3);
        assert_eq!(a.route.roadm_count, 3);
        assert!((a.route.spans[0].length_km - 75.0).abs() < 1e-12);
        assert_eq!(a.bandwidth_hz, 25e9);
        assert_eq!(net.lightpaths()[1].bandwidth_hz, 25e9);
        assert_eq!(net.shared_spans(0, 1).unwrap(), 1);
    }

    #[test]
    fn empty_lightpaths() {
        let (net, _) = load_network("nodes = []\n").unwrap();
        assert_eq!(net.len(), 0);
    }

    #[test]
    fn unknown_modulation_has_path() {
        let text = TINY.replace("PM-64QAM", "PM-7QAM");
        let err = load_network(&text).unwrap_err();
        assert!(matches!(err, Error::UnknownModulation { .. }));
        assert!(err.to_string().starts_with("lightpaths[1].modulation"), "{err}");
    }

    #[test]
    fn parse_error_reports_line() {
        let err = load_network("nodes = [1,\n[grid]\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn duplicate_slot() {
        let text = TINY.replace("modulation = \"PM-64QAM\"", "modulation = \"PM-64QAM\"\nslot = 0");
        assert!(matches!(load_network(&text), Err(Error::DuplicateSlot { .. })));
    }

    #[test]
    fn missing_link() {
        let text = TINY.replace("path = [2, 3]", "path = [2, 1, 3]");
        let err = load_network(&text).unwrap_err().to_string();
        assert!(err.starts_with("lightpaths[1].path[2]"), "{err}");
    }

    #[test]
    fn invalid_physical_field() {
        let text = format!("{TINY}\n[physical]\nlambda1 = -1.0\n");
        let err = load_network(&text).unwrap_err().to_string();
        assert!(err.starts_with("physical.lambda1"), "{err}");
    }

    #[test]
    fn overrides() {
        let ov = vec![
            ("physical.nli_scale".to_string(), "0.5".to_string()),
            ("physical.xci_span_mode".to_string(), "own".to_string()),
        ];
        let c = load_config(TINY, &ov).unwrap();
        assert_eq!(c.physical.nli_scale, 0.5);
        assert_eq!(c.physical.xci_span_mode, super::super::params::XciSpanMode::Own);
    }
}
