//! Hurricane search optimization.
//!
//! K wind parcels spiral around the eye, the best power vector found so
//! far. Parcel k moves channels i and i+1 with i = k mod (M−1) (k is
//! 1-based, i 0-based) to r·cos(θ₁+θ) and r·sin(θ₁+θ) away from the eye,
//! with r = r0·exp(z·θ). A parcel with strictly lower pressure becomes the
//! eye; one that leaves the power box restarts its spiral at a random
//! angle; otherwise its angle advances by ω (damped once r exceeds p_max).
//! The chaotic variant draws z from a logistic map, the classical one from
//! U[0, 1]. Search is carried out on linear watts.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pressure::{ModelPressure, Pressure};
use crate::qot::{PowerVector, QotModel};

pub const OMEGA_MIN: f64 = 1e-4 * PI;
pub const OMEGA_MAX: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// z from the logistic map.
    Chaotic,
    /// z from U[0, 1].
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurricaneParams {
    /// K
    pub parcels: usize,
    /// N_f
    pub iterations: usize,
    /// Initial radial increment, watts.
    pub r0: f64,
    pub omega: f64,
    pub mu: f64,
    pub upsilon: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Iterations between choosing an eye and it reaching the line.
    pub latency: usize,
}

impl HurricaneParams {
    pub fn chso() -> Self {
        HurricaneParams {
            parcels: 132,
            iterations: 180,
            r0: 5.8318e-6,
            omega: 1.6975,
            mu: 4.0,
            upsilon: 1.0,
            variant: Variant::Chaotic,
            seed: 1,
            latency: 0,
        }
    }

    pub fn hso() -> Self {
        HurricaneParams {
            parcels: 228,
            iterations: 150,
            r0: 6.1873e-7,
            omega: 0.2839,
            mu: 4.0,
            upsilon: 1.0,
            variant: Variant::Uniform,
            seed: 1,
            latency: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.parcels == 0 {
            return Err(Error::InvalidParams("parcel count K must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParams("iteration budget N_f must be >= 1".into()));
        }
        if !(self.mu > 0.0 && self.mu <= 4.0) {
            return Err(Error::InvalidParams(format!("mu must lie in (0, 4], got {}", self.mu)));
        }
        if !(self.omega >= OMEGA_MIN && self.omega <= OMEGA_MAX) {
            return Err(Error::InvalidParams(format!(
                "omega must lie in [{OMEGA_MIN}, {OMEGA_MAX}], got {}",
                self.omega
            )));
        }
        if !(self.r0.is_finite() && self.r0 >= 0.0) {
            return Err(Error::InvalidParams(format!("r0 must be finite and >= 0, got {}", self.r0)));
        }
        if !(self.upsilon.is_finite() && self.upsilon > 0.0) {
            return Err(Error::InvalidParams("upsilon must be positive".into()));
        }
        Ok(())
    }
}

pub fn logistic_step(z: f64, mu: f64) -> f64 {
    mu * z * (1.0 - z)
}

pub fn spiral_radius(r0: f64, z: f64, theta: f64) -> f64 {
    r0 * (z * theta).exp()
}

/// 0-based first channel moved by 1-based parcel `k`.
pub fn group_index(k: usize, m: usize) -> usize {
    k % (m - 1)
}

pub fn angular_update(theta: f64, omega: f64, r: f64, p_max: f64, z: f64) -> f64 {
    if r <= p_max {
        theta + omega
    } else {
        theta + omega * (p_max / r).powf(z)
    }
}

/// Per-parcel supply of z values; called once per parcel per iteration.
pub trait ZSource {
    fn draw(&mut self, k: usize) -> f64;
}

fn parcel_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Initial chaotic state of parcel k, kept away from the map's fixed
/// points and their preimages.
pub fn initial_z(seed: u64, k: usize) -> f64 {
    let mut rng = parcel_rng(seed, k);
    loop {
        let z: f64 = rng.gen();
        if [0.0, 0.25, 0.5, 0.75, 1.0].iter().all(|f| (z - f).abs() > 1e-6) {
            return z;
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticSource {
    z: Vec<f64>,
    mu: f64,
}

impl LogisticSource {
    pub fn new(seed: u64, parcels: usize, mu: f64) -> Self {
        LogisticSource {
            z: (0..parcels).map(|k| initial_z(seed, k)).collect(),
            mu,
        }
    }
}

impl ZSource for LogisticSource {
    fn draw(&mut self, k: usize) -> f64 {
        let next = logistic_step(self.z[k], self.mu);
        self.z[k] = next;
        next
    }
}

#[derive(Debug, Clone)]
pub struct UniformSource {
    rngs: Vec<ChaCha8Rng>,
}

impl UniformSource {
    pub fn new(seed: u64, parcels: usize) -> Self {
        UniformSource {
            rngs: (0..parcels).map(|k| parcel_rng(seed, k)).collect(),
        }
    }
}

impl ZSource for UniformSource {
    fn draw(&mut self, k: usize) -> f64 {
        self.rngs[k].gen()
    }
}

pub fn z_source(params: &HurricaneParams) -> Box<dyn ZSource + Send> {
    match params.variant {
        Variant::Chaotic => Box::new(LogisticSource::new(params.seed, params.parcels, params.mu)),
        Variant::Uniform => Box::new(UniformSource::new(params.seed, params.parcels)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Parcel {
    /// θ₁
    pub theta_initial: f64,
    /// accumulated θ
    pub theta: f64,
    pub z: f64,
    pub radius: f64,
}

/// Closed power box, watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn of(params: &crate::network::PhysicalParams) -> Self {
        Bounds {
            lo: params.p_min_watt(),
            hi: params.p_max_watt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurricaneState {
    pub eye: Vec<f64>,
    pub eye_pressure: f64,
    pub parcels: Vec<Parcel>,
    pub iteration: usize,
    /// M − 1
    pub group_count: usize,
}

impl HurricaneState {
    pub fn new(p0: Vec<f64>, parcels: usize) -> Result<Self> {
        if p0.len() < 2 {
            return Err(Error::TooFewChannels(p0.len()));
        }
        Ok(HurricaneState {
            group_count: p0.len() - 1,
            eye: p0,
            eye_pressure: f64::INFINITY,
            parcels: vec![Parcel::default(); parcels],
            iteration: 0,
        })
    }

    /// Candidate of 0-based parcel `k` at radius `r` and angle `angle`:
    /// the eye with channels i and i+1 displaced.
    pub fn parcel_update(&self, k: usize, r: f64, angle: f64) -> (usize, Vec<f64>) {
        let i = group_index(k + 1, self.eye.len());
        let mut p = self.eye.clone();
        p[i] += r * angle.cos();
        p[i + 1] += r * angle.sin();
        (i, p)
    }

    pub fn boundary_reset(&mut self, k: usize, z: f64) {
        let parcel = &mut self.parcels[k];
        parcel.theta_initial = 2.0 * PI * z;
        parcel.theta = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurricaneRun {
    pub params: HurricaneParams,
    /// Eye after iteration n for n = 0..=N_f; entry 0 is p₀.
    pub trace: Vec<Vec<f64>>,
    /// Eye pressure after iteration n; entry 0 is the pressure of p₀.
    pub pressure_trace: Vec<f64>,
    pub candidate_evaluations: u64,
    pub eye_evaluations: u64,
    pub accepted: u64,
    pub resets: u64,
    pub state: HurricaneState,
}

impl HurricaneRun {
    pub fn eye(&self) -> &[f64] {
        &self.state.eye
    }

    /// Powers on the line at iteration n, given the configured latency.
    pub fn applied(&self, n: usize) -> &[f64] {
        &self.trace[n.saturating_sub(self.params.latency)]
    }
}

/// Runs the search from `p0` against an arbitrary pressure.
pub fn optimize_with<P: Pressure + ?Sized>(
    p0: &[f64],
    params: &HurricaneParams,
    bounds: Bounds,
    pressure: &mut P,
    z: &mut dyn ZSource,
) -> Result<HurricaneRun> {
    params.validate()?;
    if let Some((i, &v)) = p0.iter().enumerate().find(|(_, v)| !bounds.contains(**v)) {
        return Err(Error::InfeasibleStart(format!(
            "channel {i} at {v} W lies outside [{}, {}] W",
            bounds.lo, bounds.hi
        )));
    }
    let mut state = HurricaneState::new(p0.to_vec(), params.parcels)?;
    let m = p0.len();
    let mut trace = Vec::with_capacity(params.iterations + 1);
    let mut pressure_trace = Vec::with_capacity(params.iterations + 1);
    let mut run = HurricaneRun {
        params: *params,
        trace: Vec::new(),
        pressure_trace: Vec::new(),
        candidate_evaluations: 0,
        eye_evaluations: 0,
        accepted: 0,
        resets: 0,
        state: state.clone(),
    };

    pressure.begin_iteration(0);
    state.eye_pressure = pressure.pressure(&state.eye);
    trace.push(state.eye.clone());
    pressure_trace.push(state.eye_pressure);

    for n in 1..=params.iterations {
        state.iteration = n;
        pressure.begin_iteration(n);
        state.eye_pressure = pressure.pressure(&state.eye);
        run.eye_evaluations += 1;
        for k in 0..params.parcels {
            let zk = z.draw(k);
            let parcel = state.parcels[k];
            let r = spiral_radius(params.r0, zk, parcel.theta);
            let angle = parcel.theta_initial + parcel.theta;
            let i = group_index(k + 1, m);
            // Displace the eye in place and restore it unless accepted.
            let (old_a, old_b) = (state.eye[i], state.eye[i + 1]);
            let (new_a, new_b) = (old_a + r * angle.cos(), old_b + r * angle.sin());
            state.eye[i] = new_a;
            state.eye[i + 1] = new_b;
            let pc = pressure.pressure(&state.eye);
            run.candidate_evaluations += 1;
            state.parcels[k].z = zk;
            state.parcels[k].radius = r;
            if !(bounds.contains(new_a) && bounds.contains(new_b)) {
                state.eye[i] = old_a;
                state.eye[i + 1] = old_b;
                state.boundary_reset(k, zk);
                run.resets += 1;
            } else if pc < state.eye_pressure {
                state.eye_pressure = pc;
                run.accepted += 1;
            } else {
                state.eye[i] = old_a;
                state.eye[i + 1] = old_b;
                state.parcels[k].theta = angular_update(parcel.theta, params.omega, r, bounds.hi, zk);
            }
        }
        trace.push(state.eye.clone());
        pressure_trace.push(state.eye_pressure);
    }
    run.trace = trace;
    run.pressure_trace = pressure_trace;
    run.state = state;
    Ok(run)
}

/// Runs the configured variant under perfect monitoring.
pub fn optimize(model: &QotModel, params: &HurricaneParams, p0: &PowerVector) -> Result<HurricaneRun> {
    if p0.len() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: model.len(),
            got: p0.len(),
        });
    }
    let mut pressure = ModelPressure::new(model, params.upsilon);
    let mut z = z_source(params);
    optimize_with(p0.watts(), params, Bounds::of(model.params()), &mut pressure, z.as_mut())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::table3;
    use crate::pressure::FnPressure;
    use proptest::prelude::*;

    #[test]
    fn logistic_examples() {
        assert_eq!(logistic_step(0.25, 4.0), 0.75);
        assert_eq!(logistic_step(0.5, 4.0), 1.0);
        assert_eq!(logistic_step(1.0, 4.0), 0.0);
        assert_eq!(logistic_step(0.0, 4.0), 0.0);
    }

    #[test]
    fn logistic_orbit_bounded_and_aperiodic() {
        let mut z = 0.123;
        let mut orbit = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            z = logistic_step(z, 4.0);
            assert!((0.0..=1.0).contains(&z));
            orbit.push(z);
        }
        let window = &orbit[orbit.len() - 1000..];
        for period in 1..1000 {
            let repeats = window
                .iter()
                .zip(&window[period..])
                .all(|(a, b)| a == b);
            assert!(!repeats, "period {period}");
        }
    }

    #[test]
    fn radius_examples() {
        assert_eq!(spiral_radius(2.0, 0.7, 0.0), 2.0);
        assert!((spiral_radius(3.0, 1.0, 1.0) - 3.0 * std::f64::consts::E).abs() < 1e-12);
        assert_eq!(spiral_radius(3.0, 0.0, 9.0), 3.0);
    }

    #[test]
    fn angular_examples() {
        assert_eq!(angular_update(1.0, 0.5, 0.01, 0.1, 0.3), 1.5);
        assert_eq!(angular_update(1.0, 0.5, 0.1, 0.1, 0.3), 1.5);
        assert!((angular_update(1.0, 0.5, 1.0, 0.1, 1.0) - 1.05).abs() < 1e-12);
    }

    #[test]
    fn parcel_geometry() {
        let state = HurricaneState::new(vec![1.0; 12], 132).unwrap();
        assert_eq!(state.group_count, 11);
        // Parcel k = 1 moves the second and third channels.
        let (i, p) = state.parcel_update(0, 0.25, PI / 2.0);
        assert_eq!(i, 1);
        assert!((p[1] - 1.0).abs() < 1e-15);
        assert_eq!(p[2], 1.25);
        let (_, same) = state.parcel_update(5, 0.0, 1.234);
        assert_eq!(same, state.eye);
        assert_eq!(group_index(11, 12), 0);
        assert!(matches!(HurricaneState::new(vec![1.0], 3), Err(Error::TooFewChannels(1))));
    }

    #[test]
    fn boundary_reset_restarts_spiral() {
        let mut state = HurricaneState::new(vec![1.0; 3], 2).unwrap();
        state.parcels[1].theta = 4.0;
        state.boundary_reset(1, 0.25);
        assert_eq!(state.parcels[1].theta, 0.0);
        assert!((state.parcels[1].theta_initial - PI / 2.0).abs() < 1e-15);
        assert_eq!(state.eye, vec![1.0; 3]);
    }

    struct Fixed(f64);

    impl ZSource for Fixed {
        fn draw(&mut self, _k: usize) -> f64 {
            self.0
        }
    }

    #[test]
    fn box_violation_resets_without_accepting() {
        // Moving channel 1 up by 0.3 W pushes it past the 0.1 W ceiling
        // while lowering the pressure; the eye must stay put.
        let params = HurricaneParams {
            parcels: 1,
            iterations: 1,
            r0: 0.3,
            omega: 1.0,
            ..HurricaneParams::chso()
        };
        let bounds = Bounds { lo: 1e-13, hi: 0.1 };
        let mut f = FnPressure(|p: &[f64]| -p[1]);
        let mut z = Fixed(0.0);
        let run = optimize_with(&[0.01, 0.01], &params, bounds, &mut f, &mut z).unwrap();
        assert_eq!(run.resets, 1);
        assert_eq!(run.eye(), &[0.01, 0.01]);
        assert_eq!(run.state.parcels[0].theta, 0.0);
        assert_eq!(run.state.parcels[0].theta_initial, 0.0);
    }

    #[test]
    fn degenerate_budget_returns_start() {
        let cfg = table3().unwrap();
        let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
        let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
        let params = HurricaneParams {
            parcels: 1,
            iterations: 1,
            r0: 0.0,
            ..HurricaneParams::chso()
        };
        let run = optimize(&model, &params, &p0).unwrap();
        assert_eq!(run.eye(), p0.watts());
        assert_eq!(run.candidate_evaluations, 1);
        assert_eq!(run.eye_evaluations, 1);
    }

    #[test]
    fn invalid_inputs() {
        let cfg = table3().unwrap();
        let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
        let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
        for bad in [
            HurricaneParams { parcels: 0, ..HurricaneParams::chso() },
            HurricaneParams { iterations: 0, ..HurricaneParams::chso() },
            HurricaneParams { mu: 4.5, ..HurricaneParams::chso() },
        ] {
            assert!(matches!(optimize(&model, &bad, &p0), Err(Error::InvalidParams(_))));
        }
        let hot = PowerVector::uniform_dbm(12, 25.0).unwrap();
        assert!(matches!(
            optimize(&model, &HurricaneParams::chso(), &hot),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn budget_and_monotone_eye() {
        let cfg = table3().unwrap();
        let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
        let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
        let params = HurricaneParams {
            parcels: 24,
            iterations: 40,
            ..HurricaneParams::chso()
        };
        let run = optimize(&model, &params, &p0).unwrap();
        assert_eq!(run.candidate_evaluations, 24 * 40);
        assert_eq!(run.eye_evaluations, 40);
        assert_eq!(run.trace.len(), 41);
        assert!(run.pressure_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(run.pressure_trace[40] < run.pressure_trace[0]);
        let again = optimize(&model, &params, &p0).unwrap();
        assert_eq!(run, again);
    }

    #[test]
    fn evaluation_count() {
        let cfg = table3().unwrap();
        let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
        let params = HurricaneParams {
            parcels: 12,
            iterations: 5,
            ..HurricaneParams::chso()
        };
        let mut calls = 0usize;
        let mut pr = FnPressure(|p: &[f64]| {
            calls += 1;
            model.j1(p)
        });
        let mut z = LogisticSource::new(3, 12, 4.0);
        optimize_with(&[1e-3; 12], &params, Bounds::of(&cfg.physical), &mut pr, &mut z).unwrap();
        assert_eq!(calls, 1 + 5 + 5 * 12);
    }

    proptest! {
        #[test]
        fn variant_isolation(seed in 0u64..1000) {
            let cfg = table3().unwrap();
            let model = QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap();
            let base = HurricaneParams { parcels: 11, iterations: 8, ..HurricaneParams::chso() };
            let p0 = vec![1e-3; 12];
            let mut outs = Vec::new();
            for variant in [Variant::Chaotic, Variant::Uniform] {
                let params = HurricaneParams { variant, ..base };
                let mut z = UniformSource::new(seed, params.parcels);
                let mut pr = ModelPressure::new(&model, 1.0);
                let run = optimize_with(&p0, &params, Bounds::of(&cfg.physical), &mut pr, &mut z).unwrap();
                outs.push((run.trace, run.pressure_trace));
            }
            prop_assert_eq!(&outs[0], &outs[1]);
        }

        #[test]
        fn two_coordinate_locality(
            eye in proptest::collection::vec(1e-6f64..1e-2, 2..14),
            k in 0usize..300,
            r in 1e-9f64..1e-3,
            angle in 0.0f64..10.0,
        ) {
            let state = HurricaneState::new(eye.clone(), 300).unwrap();
            let (i, p) = state.parcel_update(k, r, angle);
            prop_assert_eq!(i, (k + 1) % (eye.len() - 1));
            for c in 0..eye.len() {
                if c != i && c != i + 1 {
                    prop_assert_eq!(p[c], eye[c]);
                }
            }
            prop_assert!(p[i] != eye[i] || p[i + 1] != eye[i + 1]);
        }

        #[test]
        fn logistic_stays_in_range(z in 0.0f64..=1.0, mu in 0.01f64..=4.0) {
            let next = logistic_step(z, mu);
            prop_assert!(next >= 0.0 && next <= mu / 4.0 + 1e-15);
        }

        #[test]
        fn radius_at_least_r0(r0 in 0.0f64..1.0, z in 0.0f64..=1.0, theta in 0.0f64..50.0) {
            prop_assert!(spiral_radius(r0, z, theta) >= r0);
        }

        #[test]
        fn initial_z_avoids_fixed_points(seed in any::<u64>(), k in 0usize..500) {
            let z = initial_z(seed, k);
            prop_assert!(z > 0.0 && z < 1.0);
            prop_assert!((z - 0.5).abs() > 1e-6 && (z - 0.25).abs() > 1e-6 && (z - 0.75).abs() > 1e-6);
        }
    }
}
