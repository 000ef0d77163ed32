//! Multistart Levenberg–Marquardt search for rotation angles that hit a
//! target LGI value with all NSIT residuals at zero.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{evaluate, exact_joint, CircuitSetting, LgiReport, LUDERS_BOUND};
use crate::qcore::QubitState;
use crate::reference::AngleUnit;
use crate::rng::derive_seed;

pub const DEFAULT_STARTS: usize = 64;
pub const ACCEPT_RESIDUAL: f64 = 1e-10;
pub const VERIFY_TOLERANCE: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-7;
const MAX_ITERATIONS: usize = 500;
/// Joint probabilities closer than this are the same family.
const FAMILY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialStateSpec {
    /// Bloch vector (0, 1, 0).
    PureProtocol,
    /// Bloch vector (0, −1, 0).
    PureConjugate,
    MaximallyMixed,
    Bloch { x: f64, y: f64, z: f64 },
}

impl InitialStateSpec {
    pub fn state(&self) -> Result<QubitState> {
        match *self {
            InitialStateSpec::PureProtocol => Ok(QubitState::protocol_pure()),
            InitialStateSpec::PureConjugate => Ok(QubitState::protocol_pure_conjugate()),
            InitialStateSpec::MaximallyMixed => Ok(QubitState::maximally_mixed()),
            InitialStateSpec::Bloch { x, y, z } => QubitState::from_bloch(x, y, z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    pub target_lgi: f64,
    pub initial: InitialStateSpec,
    /// Unit of `initial_guess` and `fixed_theta2`; results are always radians.
    pub unit_mode: AngleUnit,
    pub seed_grid: usize,
    pub seed: u64,
    /// Tried as start 0 when present.
    pub initial_guess: Option<(f64, f64)>,
    /// Holds θ₂ fixed and solves the 1-D problem in θ₁.
    pub fixed_theta2: Option<f64>,
}

impl SolveRequest {
    pub fn new(target_lgi: f64, initial: InitialStateSpec) -> Self {
        SolveRequest {
            target_lgi,
            initial,
            unit_mode: AngleUnit::Radians,
            seed_grid: DEFAULT_STARTS,
            seed: 0,
            initial_guess: None,
            fixed_theta2: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_lgi > 1.0 && self.target_lgi <= LUDERS_BOUND) {
            return Err(Error::Domain(format!(
                "target LGI {} outside (1, {LUDERS_BOUND}]",
                self.target_lgi
            )));
        }
        if self.seed_grid == 0 && self.initial_guess.is_none() {
            return Err(Error::Validation("seed_grid must be ≥ 1".into()));
        }
        self.initial.state()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub theta1: f64,
    pub theta2: f64,
    pub achieved_lgi: f64,
    pub max_nsit_residual: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub start_index: usize,
}

impl SolveResult {
    pub fn angles_in(&self, unit: AngleUnit) -> (f64, f64) {
        (unit.from_radians(self.theta1), unit.from_radians(self.theta2))
    }
}

/// Analytic report for the given angles (radians).
pub fn verify_params(theta1: f64, theta2: f64, initial: &QubitState) -> LgiReport {
    evaluate(initial, theta1, theta2)
}

fn residuals(state: &QubitState, target: f64, t1: f64, t2: f64) -> [f64; 4] {
    let r = evaluate(state, t1, t2);
    [
        r.lgi_value - target,
        r.nsit_residuals[0],
        r.nsit_residuals[1],
        r.nsit_residuals[2],
    ]
}

fn norm(r: &[f64; 4]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Central-difference Jacobian, one column per free angle.
pub fn jacobian(state: &QubitState, target: f64, t1: f64, t2: f64, free_theta2: bool) -> [[f64; 4]; 2] {
    let h = FD_STEP;
    let d1 = {
        let (p, m) = (residuals(state, target, t1 + h, t2), residuals(state, target, t1 - h, t2));
        std::array::from_fn(|i| (p[i] - m[i]) / (2.0 * h))
    };
    let d2 = if free_theta2 {
        let (p, m) = (residuals(state, target, t1, t2 + h), residuals(state, target, t1, t2 - h));
        std::array::from_fn(|i| (p[i] - m[i]) / (2.0 * h))
    } else {
        [0.0; 4]
    };
    [d1, d2]
}

#[derive(Debug, Clone, Copy)]
struct LocalRun {
    theta1: f64,
    theta2: f64,
    residual_norm: f64,
    iterations: usize,
}

fn levenberg_marquardt(state: &QubitState, target: f64, mut t1: f64, mut t2: f64, free_theta2: bool) -> LocalRun {
    let mut r = residuals(state, target, t1, t2);
    let mut f = norm(&r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && f > ACCEPT_RESIDUAL {
        iterations += 1;
        let [j1, j2] = jacobian(state, target, t1, t2, free_theta2);
        let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (a11, a12, a22) = (dot(&j1, &j1), dot(&j1, &j2), dot(&j2, &j2));
        let (g1, g2) = (dot(&j1, &r), dot(&j2, &r));
        if a11 + a22 == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let damp = mu * (a11 + a22).max(1e-300);
            let (d1, d2) = if free_theta2 {
                let (b11, b22) = (a11 + damp, a22 + damp);
                let det = b11 * b22 - a12 * a12;
                ((-g1 * b22 + g2 * a12) / det, (-g2 * b11 + g1 * a12) / det)
            } else {
                (-g1 / (a11 + damp), 0.0)
            };
            let rn = residuals(state, target, t1 + d1, t2 + d2);
            let fnew = norm(&rn);
            if fnew < f {
                t1 += d1;
                t2 += d2;
                r = rn;
                f = fnew;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    LocalRun {
        theta1: t1,
        theta2: t2,
        residual_norm: f,
        iterations,
    }
}

fn starts(req: &SolveRequest) -> Vec<(f64, f64)> {
    let fixed = req.fixed_theta2.map(|t| req.unit_mode.to_radians(t));
    let mut out = Vec::with_capacity(req.seed_grid + 1);
    if let Some((g1, g2)) = req.initial_guess {
        out.push((req.unit_mode.to_radians(g1), fixed.unwrap_or(req.unit_mode.to_radians(g2))));
    }
    for i in 0..req.seed_grid {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(req.seed, &[i as u64]));
        let mut draw = || PI - rng.gen::<f64>() * 2.0 * PI;
        let t1 = draw();
        let t2 = draw();
        out.push((t1, fixed.unwrap_or(t2)));
    }
    out
}

fn accepted(state: &QubitState, target: f64, run: &LocalRun, start_index: usize) -> Option<SolveResult> {
    if run.residual_norm > ACCEPT_RESIDUAL {
        return None;
    }
    let report = verify_params(run.theta1, run.theta2, state);
    let max_nsit = report.max_nsit_residual();
    if (report.lgi_value - target).abs() > VERIFY_TOLERANCE || max_nsit > VERIFY_TOLERANCE {
        return None;
    }
    Some(SolveResult {
        theta1: run.theta1,
        theta2: run.theta2,
        achieved_lgi: report.lgi_value,
        max_nsit_residual: max_nsit,
        residual_norm: run.residual_norm,
        iterations: run.iterations,
        start_index,
    })
}

fn run_all(req: &SolveRequest) -> Result<(Vec<SolveResult>, LocalRun)> {
    req.validate()?;
    let state = req.initial.state()?;
    let free = req.fixed_theta2.is_none();
    let runs: Vec<LocalRun> = starts(req)
        .into_par_iter()
        .map(|(t1, t2)| levenberg_marquardt(&state, req.target_lgi, t1, t2, free))
        .collect();
    let best = *runs
        .iter()
        .min_by(|a, b| a.residual_norm.total_cmp(&b.residual_norm))
        .expect("at least one start");
    let ok = runs
        .iter()
        .enumerate()
        .filter_map(|(i, run)| accepted(&state, req.target_lgi, run, i))
        .collect();
    Ok((ok, best))
}

fn convergence_error(req: &SolveRequest, best: LocalRun) -> Error {
    Error::Convergence {
        starts: req.seed_grid + usize::from(req.initial_guess.is_some()),
        best_residual: best.residual_norm,
        best_theta1: best.theta1,
        best_theta2: best.theta2,
    }
}

/// Returns the solution reached from the lowest-index converging start
/// (the user guess, when given, is start 0).
pub fn solve_angles(req: &SolveRequest) -> Result<SolveResult> {
    let (ok, best) = run_all(req)?;
    ok.into_iter().next().ok_or_else(|| convergence_error(req, best))
}

/// Angle reduced to `[0, π)`; rotations by θ and θ + π give the same statistics.
pub fn canonical_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if PI - r < 1e-12 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFamily {
    /// Canonical representative, angles in `[0, π)`.
    pub theta1: f64,
    pub theta2: f64,
    pub achieved_lgi: f64,
    pub max_nsit_residual: f64,
    /// `[T1T2, T2T3, T1T3]` joint probabilities.
    pub signature: [[[f64; 2]; 2]; 3],
    pub members: usize,
}

fn signature(state: &QubitState, t1: f64, t2: f64) -> [[[f64; 2]; 2]; 3] {
    CircuitSetting::TWO_TIME.map(|s| exact_joint(s, state, t1, t2).expect("two-time setting").p)
}

fn same_signature(a: &[[[f64; 2]; 2]; 3], b: &[[[f64; 2]; 2]; 3]) -> bool {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .all(|(x, y)| (x - y).abs() <= FAMILY_TOLERANCE)
}

/// All distinct solution families reached by the multistart, in order of
/// first discovery. Two solutions are the same family when their joint
/// distributions agree, which also fixes their LGI and NSIT values.
pub fn enumerate_families(req: &SolveRequest) -> Result<Vec<SolutionFamily>> {
    let (ok, best) = run_all(req)?;
    if ok.is_empty() {
        return Err(convergence_error(req, best));
    }
    let state = req.initial.state()?;
    let mut families: Vec<SolutionFamily> = Vec::new();
    for s in ok {
        let sig = signature(&state, s.theta1, s.theta2);
        if let Some(f) = families.iter_mut().find(|f| same_signature(&f.signature, &sig)) {
            f.members += 1;
            continue;
        }
        families.push(SolutionFamily {
            theta1: canonical_angle(s.theta1),
            theta2: canonical_angle(s.theta2),
            achieved_lgi: s.achieved_lgi,
            max_nsit_residual: s.max_nsit_residual,
            signature: sig,
            members: 1,
        });
    }
    Ok(families)
}

/// Largest LGI reachable with θ₂ fixed, from a dense scan of θ₁ over one period.
pub fn max_lgi_with_fixed_theta2(initial: &QubitState, theta2: f64, samples: usize) -> (f64, f64) {
    (0..samples)
        .map(|i| {
            let t1 = PI * i as f64 / samples as f64;
            (t1, evaluate(initial, t1, theta2).lgi_value)
        })
        .fold((0.0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc })
}
