//! Noise channels, backend noise models and noisy experiments.
//!
//! Channel placement inside a circuit is fixed:
//!
//! 1. each rotation runs as `Rz·SX·Rz·SX·Rz`; `Rz` is virtual (exact,
//!    zero duration), every `SX` is followed by depolarizing noise and
//!    thermal relaxation over the SX duration;
//! 2. at each of the three measurement instants the pre-measurement Z and
//!    X flips act, whether or not the setting measures at that instant;
//! 3. a measurement relaxes the qubit over the measurement duration, then
//!    projects;
//! 4. the reported bit passes through the readout confusion matrix.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit;
use crate::error::{Error, Result};
use crate::protocol::{CircuitSetting, LgiReport, ProtocolParams};
use crate::qcore::{pauli_x, pauli_z, Mat2, QubitState, C64};
use crate::sampler::{self, ExperimentRun};

const PROB_TOL: f64 = 1e-12;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Validation(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Readout confusion matrix `[[P(0|0), P(0|1)], [P(1|0), P(1|1)]]`:
/// rows are the observed bit, columns the true bit, so `p_noisy = C·p_ideal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct ConfusionMatrix {
    m: [[f64; 2]; 2],
}

impl TryFrom<[[f64; 2]; 2]> for ConfusionMatrix {
    type Error = Error;

    fn try_from(m: [[f64; 2]; 2]) -> Result<Self> {
        ConfusionMatrix::new(m)
    }
}

impl From<ConfusionMatrix> for [[f64; 2]; 2] {
    fn from(c: ConfusionMatrix) -> Self {
        c.m
    }
}

impl ConfusionMatrix {
    pub fn new(m: [[f64; 2]; 2]) -> Result<Self> {
        for row in &m {
            for &v in row {
                check_probability("confusion entry", v)?;
            }
        }
        for col in 0..2 {
            let s = m[0][col] + m[1][col];
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::Validation(format!(
                    "confusion column {col} sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Both bits flip with probability `r`.
    pub fn symmetric(r: f64) -> Result<Self> {
        Self::new([[1.0 - r, r], [r, 1.0 - r]])
    }

    /// `p10 = P(observe 1 | true 0)`, `p01 = P(observe 0 | true 1)`.
    pub fn asymmetric(p10: f64, p01: f64) -> Result<Self> {
        Self::new([[1.0 - p10, p01], [p10, 1.0 - p01]])
    }

    /// `P(observe | true)` for bit indices.
    pub fn get(&self, observed: usize, truth: usize) -> f64 {
        self.m[observed][truth]
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        self.m
    }

    /// Probability that a true bit is reported flipped.
    pub fn flip_probability(&self, truth: usize) -> f64 {
        self.m[1 - truth][truth]
    }

    /// Mean misclassification rate over the two basis states.
    pub fn error_rate(&self) -> f64 {
        0.5 * (self.m[1][0] + self.m[0][1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Durations {
    pub rz: f64,
    pub sx: f64,
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub readout: ConfusionMatrix,
    pub sx_depol_prob: f64,
    pub pre_meas_z_prob: f64,
    pub pre_meas_x_prob: f64,
    /// Relaxation time in seconds; `None` disables thermal relaxation.
    pub t1: Option<f64>,
    /// Dephasing time in seconds; requires `t2 ≤ 2·t1`.
    pub t2: Option<f64>,
    pub durations: Durations,
}

const DEVICE_LIKE_PROFILE: &str = include_str!("../../../profiles/device_like_backend.json");

impl NoiseModel {
    /// No noise at all.
    pub fn ideal() -> Self {
        Self {
            name: Some("ideal".into()),
            description: None,
            readout: ConfusionMatrix::identity(),
            sx_depol_prob: 0.0,
            pre_meas_z_prob: 0.0,
            pre_meas_x_prob: 0.0,
            t1: None,
            t2: None,
            durations: Durations {
                rz: 0.0,
                sx: 0.0,
                measure: 0.0,
            },
        }
    }

    /// Readout confusion only.
    pub fn readout_only(readout: ConfusionMatrix) -> Self {
        Self {
            readout,
            name: Some("readout-only".into()),
            ..Self::ideal()
        }
    }

    /// Z flips before every measurement instant with probability `p`.
    pub fn z_flips(p: f64) -> Result<Self> {
        let m = Self {
            pre_meas_z_prob: p,
            name: Some("pre-measurement-z".into()),
            ..Self::ideal()
        };
        m.validate()?;
        Ok(m)
    }

    /// The shipped approximate backend profile.
    pub fn device_like() -> Self {
        Self::from_json(DEVICE_LIKE_PROFILE).expect("bundled profile is valid")
    }

    /// The same model with only relaxation (T1/T2 over gate and measurement durations) kept.
    pub fn thermal_only(&self) -> Self {
        Self {
            name: Some("thermal-only".into()),
            readout: ConfusionMatrix::identity(),
            sx_depol_prob: 0.0,
            pre_meas_z_prob: 0.0,
            pre_meas_x_prob: 0.0,
            ..self.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: NoiseModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("sx_depol_prob", self.sx_depol_prob)?;
        check_probability("pre_meas_z_prob", self.pre_meas_z_prob)?;
        check_probability("pre_meas_x_prob", self.pre_meas_x_prob)?;
        match (self.t1, self.t2) {
            (Some(t1), Some(t2)) => validate_times(t1, t2)?,
            (None, None) => {}
            _ => return Err(Error::Validation("t1 and t2 must be given together".into())),
        }
        let d = &self.durations;
        for (name, v) in [("rz", d.rz), ("sx", d.sx), ("measure", d.measure)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("duration {name} = {v} must be ≥ 0")));
            }
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.readout == ConfusionMatrix::identity()
            && self.sx_depol_prob == 0.0
            && self.pre_meas_z_prob == 0.0
            && self.pre_meas_x_prob == 0.0
            && self.t1.is_none()
    }

    pub(crate) fn thermal(&self, duration: f64) -> Option<Channel> {
        match (self.t1, self.t2) {
            (Some(t1), Some(t2)) if duration > 0.0 => Some(Channel::Thermal { t1, t2, duration }),
            _ => None,
        }
    }
}

fn validate_times(t1: f64, t2: f64) -> Result<()> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::Validation(format!("t1 = {t1}, t2 = {t2} must be positive")));
    }
    if t2 > 2.0 * t1 * (1.0 + 1e-12) {
        return Err(Error::Validation(format!("t2 = {t2} exceeds 2·t1 = {}", 2.0 * t1)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Channel {
    /// `ρ → (1−p)ρ + p·𝟙/2`
    Depolarizing(f64),
    /// `ρ → (1−p)ρ + p·ZρZ`
    PhaseFlip(f64),
    /// `ρ → (1−p)ρ + p·XρX`
    BitFlip(f64),
    /// Amplitude damping with `γ = 1 − e^{−duration/t1}` followed by pure
    /// dephasing so that coherences decay as `e^{−duration/t2}` overall.
    Thermal { t1: f64, t2: f64, duration: f64 },
}

fn mix(state: &Mat2, other: &Mat2, p: f64) -> Mat2 {
    state * C64::new(1.0 - p, 0.0) + other * C64::new(p, 0.0)
}

pub fn apply_channel(state: &QubitState, channel: &Channel) -> Result<QubitState> {
    let rho = *state.matrix();
    let out = match *channel {
        Channel::Depolarizing(p) => {
            check_probability("depolarizing p", p)?;
            mix(&rho, &(crate::qcore::identity() * C64::new(0.5, 0.0)), p)
        }
        Channel::PhaseFlip(p) => {
            check_probability("phase-flip p", p)?;
            let z = pauli_z();
            mix(&rho, &(z * rho * z), p)
        }
        Channel::BitFlip(p) => {
            check_probability("bit-flip p", p)?;
            let x = pauli_x();
            mix(&rho, &(x * rho * x), p)
        }
        Channel::Thermal { t1, t2, duration } => {
            validate_times(t1, t2)?;
            if !(duration >= 0.0) {
                return Err(Error::Validation(format!("duration {duration} must be ≥ 0")));
            }
            let keep = (-duration / t1).exp();
            let gamma = 1.0 - keep;
            // Amplitude damping alone leaves coherences at e^{-d/(2 t1)}.
            let extra = (-duration / t2 + duration / (2.0 * t1)).exp().min(1.0);
            let coherence = keep.sqrt() * extra;
            let p1 = rho[(1, 1)].re;
            let mut m = rho;
            m[(0, 0)] = C64::new(rho[(0, 0)].re + gamma * p1, 0.0);
            m[(1, 1)] = C64::new(keep * p1, 0.0);
            m[(0, 1)] = rho[(0, 1)] * coherence;
            m[(1, 0)] = rho[(1, 0)] * coherence;
            m
        }
    };
    Ok(QubitState::from_matrix_unchecked(out))
}

/// `p_noisy = C · p_ideal` for a single bit.
pub fn apply_readout_noise(ideal: [f64; 2], confusion: &ConfusionMatrix) -> [f64; 2] {
    [0, 1].map(|o| confusion.get(o, 0) * ideal[0] + confusion.get(o, 1) * ideal[1])
}

/// Exact LGI report of the full noisy pipeline.
pub fn analytic_noisy_report(params: &ProtocolParams, noise: &NoiseModel) -> Result<LgiReport> {
    noise.validate()?;
    circuit::analytic_report(params, Some(noise))
}

/// Relative LGI loss caused by T1/T2 relaxation alone.
pub fn thermal_degradation(params: &ProtocolParams, noise: &NoiseModel) -> Result<f64> {
    let ideal = circuit::analytic_report(params, None)?.lgi_value;
    let thermal = circuit::analytic_report(params, Some(&noise.thermal_only()))?.lgi_value;
    Ok((ideal - thermal) / ideal)
}

/// Statistics of repeated noisy runs at one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyRow {
    pub target: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub mean_lgi: f64,
    pub spread: f64,
    pub mean_max_nsit: f64,
    pub lgi_runs: Vec<f64>,
}

pub(crate) fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the five-circuit experiment `repetitions` times per target under `noise`.
///
/// Repetition `r` of target `i` uses seed `derive_seed(seed, [i, r])`.
pub fn noisy_lgi_experiment(
    targets: &[(f64, ProtocolParams)],
    noise: &NoiseModel,
    n_shots: usize,
    seed: u64,
    repetitions: usize,
) -> Result<Vec<NoisyRow>> {
    noise.validate()?;
    targets
        .iter()
        .enumerate()
        .map(|(i, (target, params))| {
            let runs: Vec<ExperimentRun> = (0..repetitions)
                .map(|r| {
                    let s = crate::rng::derive_seed(seed, &[i as u64, r as u64]);
                    sampler::run_experiment(params, n_shots, s, Some(noise))
                })
                .collect::<Result<_>>()?;
            let lgis: Vec<f64> = runs.iter().map(|r| r.report.lgi_value).collect();
            let (mean, sd) = mean_and_sd(&lgis);
            let nsit = runs.iter().map(|r| r.report.max_nsit_residual()).sum::<f64>() / runs.len() as f64;
            Ok(NoisyRow {
                target: *target,
                theta1: params.theta1,
                theta2: params.theta2,
                mean_lgi: mean,
                spread: sd,
                mean_max_nsit: nsit,
                lgi_runs: lgis,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    Analytic,
    Sampled { n_shots: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub lgi: f64,
}

/// LGI as a function of the pre-measurement Z-flip probability.
pub fn z_noise_sweep(params: &ProtocolParams, p_grid: &[f64], mode: SweepMode) -> Result<Vec<SweepPoint>> {
    p_grid
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let model = NoiseModel::z_flips(p)?;
            let lgi = match mode {
                SweepMode::Analytic => circuit::analytic_report(params, Some(&model))?.lgi_value,
                SweepMode::Sampled { n_shots, seed } => {
                    let s = crate::rng::derive_seed(seed, &[i as u64]);
                    sampler::run_experiment(params, n_shots, s, Some(&model))?.report.lgi_value
                }
            };
            Ok(SweepPoint { p, lgi })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Rz,
    Sx,
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub rz: usize,
    pub sx: usize,
    pub measure: usize,
}

impl OpCounts {
    fn iter(&self) -> [(OpKind, usize); 3] {
        [(OpKind::Rz, self.rz), (OpKind::Sx, self.sx), (OpKind::Measure, self.measure)]
    }

    pub fn add(self, other: OpCounts) -> OpCounts {
        OpCounts {
            rz: self.rz + other.rz,
            sx: self.sx + other.sx,
            measure: self.measure + other.measure,
        }
    }
}

/// Native operations of one setting as executed by the simulator:
/// every rotation costs three `Rz` and two `SX`.
pub fn circuit_op_counts(setting: CircuitSetting) -> OpCounts {
    let rotations = match setting {
        CircuitSetting::T1T2 | CircuitSetting::M2Only => 1,
        CircuitSetting::T2T3 | CircuitSetting::T1T3 | CircuitSetting::M3Only => 2,
    };
    OpCounts {
        rz: 3 * rotations,
        sx: 2 * rotations,
        measure: setting.measurement_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutScore {
    pub qubit_id: usize,
    pub score: f64,
}

/// Per-qubit error rate of each native operation.
pub type ErrorTable = BTreeMap<usize, BTreeMap<OpKind, f64>>;

/// Ranks qubits by `Π_op (1 − error(op))^count`, best first, ties by index.
pub fn score_layouts(counts: &OpCounts, table: &ErrorTable) -> Result<Vec<LayoutScore>> {
    let mut scores = Vec::with_capacity(table.len());
    for (&qubit_id, errors) in table {
        let mut score = 1.0;
        for (kind, n) in counts.iter() {
            if n == 0 {
                continue;
            }
            let e = errors.get(&kind).copied().ok_or_else(|| {
                Error::Configuration(format!("qubit {qubit_id} has no {kind:?} error rate"))
            })?;
            check_probability("error rate", e)?;
            score *= (1.0 - e).powi(n as i32);
        }
        scores.push(LayoutScore { qubit_id, score });
    }
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.qubit_id.cmp(&b.qubit_id)));
    Ok(scores)
}
