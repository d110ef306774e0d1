//! Analytic body-fabric-sensor surrogate.
//!
//! Joint-angle trajectories are pushed through a per-channel stretch model
//! `s = θ + c·θ²`, an optional first-order lag, an affine gain/offset and
//! Gaussian noise, then digitized to the 10-bit sensor range.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, DatasetMeta, DomainTag, SensorFrame, READING_MAX, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    SinusoidMix,
    RampCycle,
    RandomWalk,
    Composite,
}

/// Procedural joint-angle motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub angle_min: f64,
    pub angle_max: f64,
    /// Sinusoid-mix component frequencies (Hz) and amplitudes (degrees).
    pub frequencies_hz: Vec<f64>,
    pub amplitudes_deg: Vec<f64>,
    /// Ramp-cycle: frames for one rise plus one fall, and hold time at each extreme.
    pub period_frames: usize,
    pub dwell_frames: usize,
    /// Random-walk: velocity noise (degrees/frame) and velocity damping in [0, 1).
    pub step_deg: f64,
    pub damping: f64,
    /// Composite: frames per segment; segments cycle through the three basic kinds.
    pub segment_frames: usize,
    pub seed: u64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Composite,
            angle_min: 40.0,
            angle_max: 160.0,
            frequencies_hz: vec![0.23, 0.61],
            amplitudes_deg: vec![55.0, 20.0],
            period_frames: 180,
            dwell_frames: 15,
            step_deg: 0.6,
            damping: 0.95,
            segment_frames: 500,
            seed: 1,
        }
    }
}

impl TrajectorySpec {
    pub fn with_kind(kind: TrajectoryKind, seed: u64) -> Self {
        Self { kind, seed, ..Self::default() }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.angle_min + self.angle_max)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_range = self.angle_min >= 0.0 && self.angle_max <= 180.0 && self.angle_min < self.angle_max;
        if !ok_range {
            return Err(Error::Config(format!(
                "angle range [{}, {}] must satisfy 0 <= min < max <= 180",
                self.angle_min, self.angle_max
            )));
        }
        if self.frequencies_hz.len() != self.amplitudes_deg.len() {
            return Err(Error::Config("frequencies_hz and amplitudes_deg differ in length".into()));
        }
        if self.frequencies_hz.iter().chain(&self.amplitudes_deg).any(|v| !v.is_finite()) {
            return Err(Error::Config("sinusoid parameters must be finite".into()));
        }
        if self.period_frames < 2 {
            return Err(Error::Config("period_frames must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.damping) || !(self.step_deg >= 0.0) {
            return Err(Error::Config("random walk needs damping in [0, 1) and step_deg >= 0".into()));
        }
        if self.segment_frames == 0 {
            return Err(Error::Config("segment_frames must be positive".into()));
        }
        Ok(())
    }

    fn clip(&self, v: f64) -> f64 {
        v.clamp(self.angle_min, self.angle_max)
    }

    fn sinusoid(&self, frames: usize, rng: &mut impl Rng) -> Vec<f64> {
        let phases: Vec<f64> = self.frequencies_hz.iter().map(|_| rng.random_range(0.0..TAU)).collect();
        let mid = self.midpoint();
        (0..frames)
            .map(|t| {
                let secs = t as f64 / SAMPLE_RATE_HZ;
                let v: f64 = self
                    .frequencies_hz
                    .iter()
                    .zip(&self.amplitudes_deg)
                    .zip(&phases)
                    .map(|((f, a), p)| a * (TAU * f * secs + p).sin())
                    .sum();
                self.clip(mid + v)
            })
            .collect()
    }

    /// Triangle wave starting at `angle_min`; `phase` shifts the start in frames.
    fn ramp(&self, frames: usize, phase: usize) -> Vec<f64> {
        let rise = self.period_frames / 2;
        let fall = self.period_frames - rise;
        let cycle = self.period_frames + 2 * self.dwell_frames;
        let span = self.angle_max - self.angle_min;
        (0..frames)
            .map(|t| {
                let k = (t + phase) % cycle;
                let v = if k < rise {
                    self.angle_min + span * k as f64 / rise as f64
                } else if k < rise + self.dwell_frames {
                    self.angle_max
                } else if k < rise + self.dwell_frames + fall {
                    let j = k - rise - self.dwell_frames;
                    self.angle_max - span * j as f64 / fall as f64
                } else {
                    self.angle_min
                };
                self.clip(v)
            })
            .collect()
    }

    fn random_walk(&self, frames: usize, rng: &mut impl Rng) -> Vec<f64> {
        let step = Normal::new(0.0, self.step_deg).expect("validated step");
        let (lo, hi) = (self.angle_min, self.angle_max);
        let mut theta = self.midpoint();
        let mut vel = 0.0;
        let mut out = Vec::with_capacity(frames);
        for _ in 0..frames {
            out.push(theta);
            vel = self.damping * vel + step.sample(rng);
            theta += vel;
            if theta < lo {
                theta = 2.0 * lo - theta;
                vel = -vel;
            } else if theta > hi {
                theta = 2.0 * hi - theta;
                vel = -vel;
            }
            theta = self.clip(theta);
        }
        out
    }
}

/// Generate `frames` angles (degrees). Deterministic in `spec` (including its seed).
pub fn gen_trajectory(spec: &TrajectorySpec, frames: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if frames == 0 {
        return Err(Error::Argument("trajectory needs at least one frame".into()));
    }
    let mut rng = seed::stream(spec.seed, "trajectory");
    Ok(match spec.kind {
        TrajectoryKind::SinusoidMix => spec.sinusoid(frames, &mut rng),
        TrajectoryKind::RampCycle => spec.ramp(frames, 0),
        TrajectoryKind::RandomWalk => spec.random_walk(frames, &mut rng),
        TrajectoryKind::Composite => {
            let mut out = Vec::with_capacity(frames);
            let mut segment = 0u64;
            while out.len() < frames {
                let n = spec.segment_frames.min(frames - out.len());
                let mut seg_rng = seed::stream(spec.seed, &format!("trajectory/segment/{segment}"));
                let part = match segment % 3 {
                    0 => spec.sinusoid(n, &mut seg_rng),
                    1 => {
                        let cycle = spec.period_frames + 2 * spec.dwell_frames;
                        spec.ramp(n, seg_rng.random_range(0..cycle))
                    }
                    _ => spec.random_walk(n, &mut seg_rng),
                };
                out.extend(part);
                segment += 1;
            }
            out
        }
    })
}

/// Two-channel stretch sensor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Counts per degree of stretch.
    pub gain: [f64; 2],
    /// Counts at zero stretch.
    pub offset: [f64; 2],
    /// Quadratic stretch coefficient (1/degree).
    pub quad: [f64; 2],
    /// Gaussian reading noise (counts).
    pub noise_sd: [f64; 2],
    /// First-order lag factor in [0, 1).
    pub lag: [f64; 2],
    /// Round to integer counts (always clamped to [0, 1023]).
    pub digitize: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            gain: [3.5, 3.0],
            offset: [50.0, 120.0],
            quad: [1.0e-3, 5.0e-4],
            noise_sd: [2.0, 2.0],
            lag: [0.0, 0.0],
            digitize: true,
        }
    }
}

/// Lag filter memory; unset until the first sample, which passes through unfiltered.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LagState {
    pub stretch: Option<[f64; 2]>,
}

impl SurrogateConfig {
    pub fn noiseless(mut self) -> Self {
        self.noise_sd = [0.0; 2];
        self
    }

    /// Noise-free, lag-free response before digitization.
    pub fn ideal_response(&self, theta: f64) -> [f64; 2] {
        let mut r = [0.0; 2];
        for k in 0..2 {
            r[k] = self.gain[k] * (theta + self.quad[k] * theta * theta) + self.offset[k];
        }
        r
    }

    /// Inverse of [`Self::ideal_response`] for channel `k`.
    pub fn invert_channel(&self, k: usize, reading: f64) -> f64 {
        let s = (reading - self.offset[k]) / self.gain[k];
        let c = self.quad[k];
        if c == 0.0 {
            s
        } else {
            (-1.0 + (1.0 + 4.0 * c * s).sqrt()) / (2.0 * c)
        }
    }

    pub fn validate(&self, angle_min: f64, angle_max: f64) -> Result<()> {
        for k in 0..2 {
            let ch = k + 1;
            if !(self.gain[k] > 0.0) {
                return Err(Error::Config(format!("channel {ch}: gain must be positive")));
            }
            if !(self.noise_sd[k] >= 0.0) || !self.noise_sd[k].is_finite() {
                return Err(Error::Config(format!("channel {ch}: noise_sd must be finite and >= 0")));
            }
            if !(0.0..1.0).contains(&self.lag[k]) {
                return Err(Error::Config(format!("channel {ch}: lag must be in [0, 1)")));
            }
            // Slope a·(1 + 2cθ) is linear in θ, so checking both ends suffices.
            for theta in [angle_min, angle_max] {
                if self.gain[k] * (1.0 + 2.0 * self.quad[k] * theta) <= 0.0 {
                    return Err(Error::Config(format!("channel {ch}: response not increasing at {theta} deg")));
                }
            }
            if self.digitize {
                let lo = self.ideal_response(angle_min)[k];
                let hi = self.ideal_response(angle_max)[k];
                if lo < 0.0 || hi > READING_MAX {
                    return Err(Error::Config(format!(
                        "channel {ch}: response [{lo:.1}, {hi:.1}] leaves the digitization range [0, {READING_MAX}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Shift modelling a different wearing position: gains scaled by
    /// `1 ± gain_frac` (channel 1 up, channel 2 down) and offsets raised by
    /// `offset_frac` of each channel's response span over the angle range.
    pub fn wearing_position(&self, angle_min: f64, angle_max: f64, gain_frac: f64, offset_frac: f64) -> Self {
        let lo = self.ideal_response(angle_min);
        let hi = self.ideal_response(angle_max);
        let mut out = self.clone();
        let scale = [1.0 + gain_frac, 1.0 - gain_frac];
        for k in 0..2 {
            out.gain[k] *= scale[k];
            out.offset[k] += offset_frac * (hi[k] - lo[k]);
        }
        out
    }

    /// One sensor sample for angle `theta`.
    pub fn respond(&self, theta: f64, state: &mut LagState, rng: &mut impl Rng) -> [f64; 2] {
        let mut s = [0.0; 2];
        for k in 0..2 {
            s[k] = theta + self.quad[k] * theta * theta;
        }
        let u = match state.stretch {
            None => s,
            Some(prev) => [
                self.lag[0] * prev[0] + (1.0 - self.lag[0]) * s[0],
                self.lag[1] * prev[1] + (1.0 - self.lag[1]) * s[1],
            ],
        };
        state.stretch = Some(u);
        let mut r = [0.0; 2];
        for k in 0..2 {
            let mut v = self.gain[k] * u[k] + self.offset[k];
            if self.noise_sd[k] > 0.0 {
                v += self.noise_sd[k] * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            if self.digitize {
                v = v.round();
            }
            r[k] = v.clamp(0.0, READING_MAX);
        }
        r
    }
}

/// Stateless form of [`SurrogateConfig::respond`] returning the updated state.
pub fn sensor_response(theta: f64, cfg: &SurrogateConfig, state: LagState, rng: &mut impl Rng) -> ([f64; 2], LagState) {
    let mut st = state;
    let r = cfg.respond(theta, &mut st, rng);
    (r, st)
}

/// Pass an angle series through the sensor model.
pub fn simulate_angles(angles: &[f64], cfg: &SurrogateConfig, seed: u64, provenance: String) -> Result<Dataset> {
    if angles.is_empty() {
        return Err(Error::Argument("no angles to simulate".into()));
    }
    let (lo, hi) = angles
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    cfg.validate(lo, hi.max(lo + f64::EPSILON))?;
    let mut rng = seed::stream(seed, "sim/noise");
    let mut state = LagState::default();
    let frames = angles
        .iter()
        .enumerate()
        .map(|(t, &a)| SensorFrame { t: t as i64, r: cfg.respond(a, &mut state, &mut rng) })
        .collect();
    Dataset::from_parts(frames, angles.to_vec(), DatasetMeta::new(DomainTag::Source, provenance))
}

pub fn simulate(spec: &TrajectorySpec, cfg: &SurrogateConfig, frames: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    cfg.validate(spec.angle_min, spec.angle_max)?;
    let angles = gen_trajectory(spec, frames)?;
    simulate_angles(&angles, cfg, seed, format!("simulate(frames={frames}, seed={seed}, spec={spec:?}, cfg={cfg:?})"))
}

/// Trajectory plus sensor model of one domain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    pub trajectory: TrajectorySpec,
    pub sensor: SurrogateConfig,
}

/// Source and target domain description, as stored in a simulation config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub source: DomainSpec,
    pub target: DomainSpec,
}

impl SimConfig {
    /// The standard shifted benchmark: composite source motion; target with a
    /// distinct motion kind, ±15% gains and offsets raised by 20% of range.
    pub fn standard() -> Self {
        let source = DomainSpec {
            trajectory: TrajectorySpec::with_kind(TrajectoryKind::Composite, 11),
            sensor: SurrogateConfig::default(),
        };
        let t = &source.trajectory;
        let target = DomainSpec {
            trajectory: TrajectorySpec::with_kind(TrajectoryKind::SinusoidMix, 23),
            sensor: source.sensor.wearing_position(t.angle_min, t.angle_max, 0.15, 0.20),
        };
        Self { source, target }
    }

    /// Target generated with exactly the source sensor model (no shift).
    pub fn matched() -> Self {
        let mut cfg = Self::standard();
        cfg.target.sensor = cfg.source.sensor.clone();
        cfg
    }

    pub fn noiseless(mut self) -> Self {
        self.source.sensor = self.source.sensor.noiseless();
        self.target.sensor = self.target.sensor.noiseless();
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for d in [&cfg.source, &cfg.target] {
            d.trajectory.validate()?;
            d.sensor.validate(d.trajectory.angle_min, d.trajectory.angle_max)?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Labeled source, unlabeled target, and the target's labels kept for evaluation only.
#[derive(Debug, Clone)]
pub struct DomainPair {
    pub source: Dataset,
    pub target: Dataset,
    pub target_eval: Dataset,
}

pub fn make_domain_pair(cfg: &SimConfig, frames_s: usize, frames_t: usize, seeds: (u64, u64)) -> Result<DomainPair> {
    let source = simulate(&cfg.source.trajectory, &cfg.source.sensor, frames_s, seeds.0)?.with_domain(DomainTag::Source);
    let target_eval = simulate(&cfg.target.trajectory, &cfg.target.sensor, frames_t, seeds.1)?.with_domain(DomainTag::TargetEval);
    let target = data::strip_labels(&target_eval)?.with_domain(DomainTag::Target);
    Ok(DomainPair { source, target, target_eval })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain() -> SurrogateConfig {
        SurrogateConfig {
            gain: [5.0, 4.0],
            offset: [100.0, 120.0],
            quad: [0.0; 2],
            noise_sd: [0.0; 2],
            lag: [0.0; 2],
            digitize: false,
        }
    }

    #[test]
    fn zero_amplitude_sinusoid_is_constant_midpoint() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::SinusoidMix,
            frequencies_hz: vec![0.5],
            amplitudes_deg: vec![0.0],
            ..TrajectorySpec::default()
        };
        let a = gen_trajectory(&spec, 50).unwrap();
        assert!(a.iter().all(|&v| v == 100.0));
    }

    #[test]
    fn ramp_cycle_hits_extremes() {
        let spec = TrajectorySpec {
            kind: TrajectoryKind::RampCycle,
            period_frames: 100,
            dwell_frames: 0,
            ..TrajectorySpec::default()
        };
        let a = gen_trajectory(&spec, 101).unwrap();
        assert_eq!(a[0], 40.0);
        assert_eq!(a[50], 160.0);
        assert_eq!(a[100], 40.0);
    }

    #[test]
    fn random_walk_is_bounded_and_deterministic() {
        let spec = TrajectorySpec::with_kind(TrajectoryKind::RandomWalk, 42);
        let a = gen_trajectory(&spec, 1000).unwrap();
        let b = gen_trajectory(&spec, 1000).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (40.0..=160.0).contains(v)));
        let other = gen_trajectory(&TrajectorySpec::with_kind(TrajectoryKind::RandomWalk, 43), 1000).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn composite_stays_in_range() {
        let a = gen_trajectory(&TrajectorySpec::default(), 5000).unwrap();
        assert!(a.iter().all(|v| (40.0..=160.0).contains(v)));
        let span = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - a.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(span > 110.0, "{span}");
    }

    #[test]
    fn invalid_ranges() {
        let bad = TrajectorySpec { angle_min: 100.0, angle_max: 90.0, ..TrajectorySpec::default() };
        assert!(matches!(gen_trajectory(&bad, 10), Err(Error::Config(_))));
        let bad = TrajectorySpec { angle_max: 181.0, ..TrajectorySpec::default() };
        assert!(matches!(gen_trajectory(&bad, 10), Err(Error::Config(_))));
    }

    #[test]
    fn affine_response_values() {
        let mut rng = seed::stream(0, "t");
        let cfg = plain();
        let (r, _) = sensor_response(0.0, &cfg, LagState::default(), &mut rng);
        assert_eq!(r, [100.0, 120.0]);
        let (r, _) = sensor_response(100.0, &cfg, LagState::default(), &mut rng);
        assert_eq!(r, [600.0, 520.0]);
    }

    #[test]
    fn lag_converges_geometrically() {
        let mut rng = seed::stream(0, "t");
        let cfg = SurrogateConfig { lag: [0.5, 0.5], ..plain() };
        let theta = 10.0;
        let target = plain().ideal_response(theta);
        let mut state = LagState { stretch: Some([0.0, 0.0]) };
        let mut r = [0.0; 2];
        for _ in 0..20 {
            r = cfg.respond(theta, &mut state, &mut rng);
        }
        for k in 0..2 {
            // Closed form: the gap shrinks by λ every step from a·|s − u₀|.
            let bound = 0.5f64.powi(20) * cfg.gain[k] * theta;
            let gap = (r[k] - target[k]).abs();
            assert!(gap <= bound * (1.0 + 1e-9) && gap <= 1e-4, "{gap} vs {bound}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(SurrogateConfig { gain: [0.0, 1.0], ..plain() }.validate(40.0, 160.0).is_err());
        assert!(SurrogateConfig { offset: [900.0, 0.0], digitize: true, ..plain() }.validate(40.0, 160.0).is_err());
        assert!(SurrogateConfig { quad: [-0.01, 0.0], ..plain() }.validate(40.0, 160.0).is_err());
        assert!(SurrogateConfig::default().validate(40.0, 160.0).is_ok());
        let std = SimConfig::standard();
        std.target.sensor.validate(40.0, 160.0).unwrap();
    }

    #[test]
    fn simulate_size_and_line_support() {
        let spec = TrajectorySpec::default();
        let cfg = plain();
        let ds = simulate(&spec, &cfg, 3000, 5).unwrap();
        assert_eq!(ds.len(), 3000);
        // Affine image of an interval: all points on the line through two of them.
        let p = ds.readings();
        let (a, b) = (cfg.ideal_response(40.0), cfg.ideal_response(160.0));
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        let max_dist = p
            .iter()
            .map(|q| ((q[0] - a[0]) * d[1] - (q[1] - a[1]) * d[0]).abs() / len)
            .fold(0.0, f64::max);
        assert!(max_dist < 1e-9, "{max_dist}");
    }

    #[test]
    fn simulate_30k_frames() {
        let ds = simulate(&TrajectorySpec::default(), &SurrogateConfig::default(), 30_000, 1).unwrap();
        assert_eq!(ds.len(), 30_000);
    }

    #[test]
    fn offsets_do_not_change_labels() {
        let spec = TrajectorySpec::default();
        let a = simulate(&spec, &plain(), 500, 1).unwrap();
        let b = simulate(&spec, &SurrogateConfig { offset: [150.0, 170.0], ..plain() }, 500, 1).unwrap();
        assert_eq!(a.labels(), b.labels());
        for (x, y) in a.frames().iter().zip(b.frames()) {
            assert!((y.r[0] - x.r[0] - 50.0).abs() < 1e-9 && (y.r[1] - x.r[1] - 50.0).abs() < 1e-9);
        }
    }

    #[test]
    fn domain_pairs() {
        let mut cfg = SimConfig::matched();
        cfg.target = cfg.source.clone();
        let pair = make_domain_pair(&cfg, 400, 400, (9, 9)).unwrap();
        assert_eq!(pair.source.frames(), pair.target.frames());
        assert!(!pair.target.is_labeled());
        assert_eq!(pair.target_eval.labels(), pair.source.labels());

        let mut scaled = cfg.clone();
        scaled.target.sensor.gain = [cfg.source.sensor.gain[0] * 1.3, cfg.source.sensor.gain[1] * 1.3];
        scaled.target.sensor.offset = [0.0; 2];
        scaled.source.sensor.offset = [0.0; 2];
        scaled.source.sensor = scaled.source.sensor.noiseless();
        scaled.target.sensor = scaled.target.sensor.noiseless();
        scaled.source.sensor.digitize = false;
        scaled.target.sensor.digitize = false;
        let pair = make_domain_pair(&scaled, 400, 400, (9, 9)).unwrap();
        assert_eq!(pair.target_eval.labels(), pair.source.labels());
        for (s, t) in pair.source.frames().iter().zip(pair.target.frames()) {
            assert!((t.r[0] - 1.3 * s.r[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_response_on_grid() {
        let cfg = SimConfig::standard();
        for sensor in [&cfg.source.sensor, &cfg.target.sensor] {
            let mut prev = sensor.ideal_response(40.0);
            for deg in 41..=160 {
                let r = sensor.ideal_response(deg as f64);
                assert!(r[0] > prev[0] && r[1] > prev[1]);
                prev = r;
            }
        }
    }

    #[test]
    fn inverse_response() {
        let cfg = SurrogateConfig::default();
        for deg in [40.0, 77.7, 160.0] {
            let r = cfg.ideal_response(deg);
            for k in 0..2 {
                assert!((cfg.invert_channel(k, r[k]) - deg).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn config_file_round_trip() {
        let cfg = SimConfig::standard();
        assert_eq!(SimConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(SimConfig::from_toml("[source]\nbogus = 1\n[target]\n").is_err());
    }

    #[test]
    fn determinism() {
        let cfg = SimConfig::standard();
        let a = make_domain_pair(&cfg, 2000, 1000, (1, 2)).unwrap();
        let b = make_domain_pair(&cfg, 2000, 1000, (1, 2)).unwrap();
        assert_eq!(a.source, b.source);
        assert_eq!(a.target_eval, b.target_eval);
    }
}
