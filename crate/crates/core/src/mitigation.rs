//! Readout-error mitigation with a calibration matrix.
//!
//! Orientation: `a[observed][true]`, so every column sums to one and
//! `p_noisy = A · p_ideal`. Bit strings index the matrix with the first
//! (earlier) bit as the most significant bit.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{mean_and_sd, ConfusionMatrix, NoiseModel};
use crate::protocol::{JointDistribution, LgiReport, Marginal, ProtocolParams, EMPIRICAL_NSIT_TOLERANCE};
use crate::rng::{chunk_rng, chunks, derive_seed};
use crate::sampler::{run_experiment, ExperimentRun};

pub const CALIBRATION_VERSION: u32 = 1;
pub const MAX_CONDITION_NUMBER: f64 = 1e6;
const COLUMN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMatrix {
    pub version: u32,
    pub n_qubits: usize,
    /// `a[observed][true]`.
    pub a: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CalibrationMethod {
    Exact,
    Empirical { n_shots: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionMode {
    Inverse,
    #[default]
    Constrained,
}

impl CalibrationMatrix {
    pub fn new(n_qubits: usize, a: Vec<Vec<f64>>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if a.len() != dim || a.iter().any(|row| row.len() != dim) {
            return Err(Error::Validation(format!("calibration matrix must be {dim}×{dim}")));
        }
        if a.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation("calibration entries must lie in [0, 1]".into()));
        }
        for t in 0..dim {
            let sum: f64 = (0..dim).map(|o| a[o][t]).sum();
            if (sum - 1.0).abs() > COLUMN_TOLERANCE {
                return Err(Error::Validation(format!("calibration column {t} sums to {sum}")));
            }
        }
        Ok(CalibrationMatrix {
            version: CALIBRATION_VERSION,
            n_qubits,
            a,
        })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let a = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        CalibrationMatrix {
            version: CALIBRATION_VERSION,
            n_qubits,
            a,
        }
    }

    /// Kronecker product of per-bit confusion matrices, first bit most significant.
    pub fn from_confusions(confusions: &[ConfusionMatrix]) -> Result<Self> {
        if confusions.is_empty() {
            return Err(Error::Validation("at least one confusion matrix required".into()));
        }
        let mut a = vec![vec![1.0]];
        for c in confusions {
            let dim = a.len();
            let mut next = vec![vec![0.0; dim * 2]; dim * 2];
            for (i, row) in a.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    for o in 0..2 {
                        for t in 0..2 {
                            next[i * 2 + o][j * 2 + t] = v * c.get(o, t);
                        }
                    }
                }
            }
            a = next;
        }
        CalibrationMatrix::new(confusions.len(), a)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.a[i][j])
    }

    /// 2-norm condition number.
    pub fn condition_number(&self) -> f64 {
        let sv = self.to_matrix().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().zip(p).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CalibrationMatrix = serde_json::from_str(text)?;
        if raw.version != CALIBRATION_VERSION {
            return Err(Error::Validation(format!(
                "unsupported calibration version {}",
                raw.version
            )));
        }
        CalibrationMatrix::new(raw.n_qubits, raw.a)
    }
}

/// Calibration for `n_qubits` ∈ {1, 2} readout bits under `noise`.
///
/// The empirical method prepares each basis string, draws `n_shots`
/// readouts and uses the observed frequencies as the matrix column.
pub fn build_calibration(noise: &NoiseModel, n_qubits: usize, method: CalibrationMethod) -> Result<CalibrationMatrix> {
    if !(1..=2).contains(&n_qubits) {
        return Err(Error::Validation(format!("n_qubits must be 1 or 2, got {n_qubits}")));
    }
    noise.validate()?;
    match method {
        CalibrationMethod::Exact => CalibrationMatrix::from_confusions(&vec![noise.readout; n_qubits]),
        CalibrationMethod::Empirical { n_shots, seed } => {
            if n_shots == 0 {
                return Err(Error::Validation("n_shots must be ≥ 1".into()));
            }
            let dim = 1usize << n_qubits;
            let mut a = vec![vec![0.0; dim]; dim];
            for truth in 0..dim {
                let counts = chunks(n_shots)
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|(k, range)| {
                        let mut rng = chunk_rng(derive_seed(seed, &[truth as u64]), k);
                        let mut c = vec![0usize; dim];
                        for _ in range {
                            let mut observed = 0;
                            for q in 0..n_qubits {
                                let bit = (truth >> (n_qubits - 1 - q)) & 1;
                                let flip = rng.gen::<f64>() < noise.readout.flip_probability(bit);
                                observed = observed << 1 | (bit ^ usize::from(flip));
                            }
                            c[observed] += 1;
                        }
                        c
                    })
                    .reduce(|| vec![0; dim], |x, y| x.iter().zip(&y).map(|(a, b)| a + b).collect());
                for (o, c) in counts.iter().enumerate() {
                    a[o][truth] = *c as f64 / n_shots as f64;
                }
            }
            CalibrationMatrix::new(n_qubits, a)
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Exact minimiser of `‖A p − b‖₂` over the simplex, by enumerating supports.
fn constrained_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Vec<f64> {
    let d = a.ncols();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
        let k = support.len();
        let a_s = DMatrix::from_fn(a.nrows(), k, |i, j| a[(i, support[j])]);
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let ata = a_s.transpose() * &a_s * 2.0;
        kkt.view_mut((0, 0), (k, k)).copy_from(&ata);
        for i in 0..k {
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from(&(a_s.transpose() * b * 2.0));
        rhs[k] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.rows(0, k).iter().any(|&x| x < -1e-14 || !x.is_finite()) {
            continue;
        }
        let mut p = vec![0.0; d];
        for (j, &i) in support.iter().enumerate() {
            p[i] = sol[j].max(0.0);
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        let r = a * DVector::from_column_slice(&p) - b;
        let obj = r.norm_squared();
        if best.as_ref().map_or(true, |(o, _)| obj < *o) {
            best = Some((obj, p));
        }
    }
    best.expect("single-point supports are always feasible").1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub p: Vec<f64>,
    pub condition_number: f64,
    pub mode: CorrectionMode,
}

/// Estimates `p_ideal` from observed counts (or frequencies).
pub fn apply_correction(noisy_counts: &[f64], cal: &CalibrationMatrix, mode: CorrectionMode) -> Result<Correction> {
    if noisy_counts.len() != cal.dim() {
        return Err(Error::Validation(format!(
            "expected {} counts, got {}",
            cal.dim(),
            noisy_counts.len()
        )));
    }
    if noisy_counts.iter().any(|c| *c < 0.0 || !c.is_finite()) {
        return Err(Error::Validation("counts must be finite and nonnegative".into()));
    }
    let total: f64 = noisy_counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::Validation("counts sum to zero".into()));
    }
    let b = DVector::from_iterator(cal.dim(), noisy_counts.iter().map(|c| c / total));
    let condition = cal.condition_number();
    let a = cal.to_matrix();
    let p = match mode {
        CorrectionMode::Inverse => {
            if condition > MAX_CONDITION_NUMBER {
                return Err(Error::IllConditioned { condition });
            }
            let raw = a.lu().solve(&b).ok_or(Error::IllConditioned { condition })?;
            project_to_simplex(raw.as_slice())
        }
        CorrectionMode::Constrained => constrained_least_squares(&a, &b),
    };
    Ok(Correction {
        p,
        condition_number: condition,
        mode,
    })
}

pub fn mitigate_joint(joint: &JointDistribution, cal2: &CalibrationMatrix, mode: CorrectionMode) -> Result<JointDistribution> {
    if cal2.n_qubits != 2 {
        return Err(Error::Usage("joint mitigation needs a 2-bit calibration".into()));
    }
    let flat: Vec<f64> = joint.p.iter().flatten().copied().collect();
    let c = apply_correction(&flat, cal2, mode)?;
    Ok(JointDistribution {
        setting: joint.setting,
        p: [[c.p[0], c.p[1]], [c.p[2], c.p[3]]],
        params: joint.params,
    })
}

pub fn mitigate_marginal(m: &Marginal, cal1: &CalibrationMatrix, mode: CorrectionMode) -> Result<Marginal> {
    if cal1.n_qubits != 1 {
        return Err(Error::Usage("marginal mitigation needs a 1-bit calibration".into()));
    }
    let c = apply_correction(&[m.p_plus, m.p_minus], cal1, mode)?;
    Ok(Marginal {
        p_plus: c.p[0],
        p_minus: c.p[1],
        ..*m
    })
}

/// LGI report of a run after correcting all five settings.
pub fn mitigated_report(run: &ExperimentRun, cal1: &CalibrationMatrix, mode: CorrectionMode) -> Result<LgiReport> {
    let cal2 = expand_to_two_bits(cal1)?;
    let j: Vec<JointDistribution> = run
        .joints
        .iter()
        .map(|j| mitigate_joint(j, &cal2, mode))
        .collect::<Result<_>>()?;
    let m2 = mitigate_marginal(&run.marginals[0], cal1, mode)?;
    let m3 = mitigate_marginal(&run.marginals[1], cal1, mode)?;
    LgiReport::from_results(&j[0], &j[1], &j[2], &m2, &m3, EMPIRICAL_NSIT_TOLERANCE)
}

/// `C ⊗ C` for a 1-bit calibration `C`.
pub fn expand_to_two_bits(cal1: &CalibrationMatrix) -> Result<CalibrationMatrix> {
    if cal1.n_qubits != 1 {
        return Err(Error::Usage("expected a 1-bit calibration".into()));
    }
    let c = ConfusionMatrix::new([[cal1.a[0][0], cal1.a[0][1]], [cal1.a[1][0], cal1.a[1][1]]])?;
    CalibrationMatrix::from_confusions(&[c, c])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseTarget {
    pub target: f64,
    /// Noiseless analytic LGI at the target's angles.
    pub expected: f64,
    pub raw_mean: f64,
    pub raw_spread: f64,
    pub mitigated_mean: f64,
    pub mitigated_spread: f64,
    pub rmse_raw: f64,
    pub rmse_mitigated: f64,
}

impl RmseTarget {
    pub fn mitigation_helped(&self) -> bool {
        (self.mitigated_mean - self.expected).abs() < (self.raw_mean - self.expected).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// Pooled over every run of every target.
    pub rmse_raw: f64,
    pub rmse_mitigated: f64,
    pub per_target: Vec<RmseTarget>,
    pub n_shots: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub mode: CorrectionMode,
    pub calibration: CalibrationMatrix,
}

fn rms(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (sum / n as f64).sqrt()
}

/// Raw vs mitigated LGI error over repeated noisy runs.
///
/// Repetition `r` of target `i` uses seed `derive_seed(seed, [i, r])`; the
/// calibration is built once with `calibration`.
pub fn rmse_experiment(
    targets: &[(f64, ProtocolParams)],
    noise: &NoiseModel,
    n_shots: usize,
    repetitions: usize,
    seed: u64,
    calibration: CalibrationMethod,
    mode: CorrectionMode,
) -> Result<RmseReport> {
    if repetitions == 0 || targets.is_empty() {
        return Err(Error::Validation("need at least one target and one repetition".into()));
    }
    let cal1 = build_calibration(noise, 1, calibration)?;
    let mut per_target = Vec::with_capacity(targets.len());
    let mut raw_err = Vec::new();
    let mut mit_err = Vec::new();
    for (i, (target, params)) in targets.iter().enumerate() {
        let expected = crate::protocol::evaluate(&params.initial, params.theta1, params.theta2).lgi_value;
        let mut raw = Vec::with_capacity(repetitions);
        let mut mit = Vec::with_capacity(repetitions);
        for r in 0..repetitions {
            let run = run_experiment(params, n_shots, derive_seed(seed, &[i as u64, r as u64]), Some(noise))?;
            raw.push(run.report.lgi_value);
            mit.push(mitigated_report(&run, &cal1, mode)?.lgi_value);
        }
        let (raw_mean, raw_spread) = mean_and_sd(&raw);
        let (mitigated_mean, mitigated_spread) = mean_and_sd(&mit);
        raw_err.extend(raw.iter().map(|v| v - expected));
        mit_err.extend(mit.iter().map(|v| v - expected));
        per_target.push(RmseTarget {
            target: *target,
            expected,
            raw_mean,
            raw_spread,
            mitigated_mean,
            mitigated_spread,
            rmse_raw: rms(raw.iter().map(|v| v - expected)),
            rmse_mitigated: rms(mit.iter().map(|v| v - expected)),
        });
    }
    Ok(RmseReport {
        rmse_raw: rms(raw_err.into_iter()),
        rmse_mitigated: rms(mit_err.into_iter()),
        per_target,
        n_shots,
        repetitions,
        seed,
        mode,
        calibration: cal1,
    })
}

/// Predicted pooled `rmse_raw / rmse_mitigated` under symmetric readout
/// flips at rate `r`, from the exact correlators.
///
/// Every correlator shrinks by `(1 − 2r)²`, giving the raw LGI a bias of
/// `((1 − 2r)² − 1)·I`; each estimated correlator has variance
/// `(1 − c²)/N`, and unbiased correction scales the variance by `(1 − 2r)⁻⁴`.
pub fn predicted_rmse_ratio(targets: &[(f64, ProtocolParams)], r: f64, n_shots: usize) -> f64 {
    let f = (1.0 - 2.0 * r).powi(2);
    let n = n_shots as f64;
    let (mut raw, mut mit) = (0.0, 0.0);
    for (_, p) in targets {
        let rep = crate::protocol::evaluate(&p.initial, p.theta1, p.theta2);
        let var: f64 = [rep.c12, rep.c23, rep.c13].iter().map(|c| (1.0 - (f * c).powi(2)) / n).sum();
        let bias = (f - 1.0) * rep.lgi_value;
        raw += bias * bias + var;
        mit += var / (f * f);
    }
    (raw / mit).sqrt()
}
