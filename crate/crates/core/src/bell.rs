//! Two-qubit CHSH experiment on `|Φ⁺⟩ = (|00⟩ + |11⟩)/√2`.
//!
//! Measuring a qubit "at angle θ" applies [`RotationGate`] `U(θ)` to it and
//! then measures in the computational basis, so the correlation of settings
//! `(θ_a, θ_b)` is `E = cos 2(θ_a − θ_b)`. The CHSH combination is
//! `S = E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)`, which equals `+2√2` at the
//! default angles.
//!
//! Both qubits live on one simulated device, so nothing enforces spatial
//! no-signalling between them; every result is reported with
//! `certified = false`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{RotationGate, STATE_TOL};
use crate::rng::{chunk_rng, chunks};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellConfig {
    pub theta_a: f64,
    pub theta_a_prime: f64,
    pub theta_b: f64,
    pub theta_b_prime: f64,
    pub n_rounds: usize,
    pub seed: u64,
}

impl Default for BellConfig {
    fn default() -> Self {
        BellConfig {
            theta_a: 0.0,
            theta_a_prime: PI / 4.0,
            theta_b: PI / 8.0,
            theta_b_prime: 3.0 * PI / 8.0,
            n_rounds: 100_000,
            seed: 0,
        }
    }
}

impl BellConfig {
    pub fn alice(&self, x: usize) -> f64 {
        [self.theta_a, self.theta_a_prime][x]
    }

    pub fn bob(&self, y: usize) -> f64 {
        [self.theta_b, self.theta_b_prime][y]
    }
}

/// Amplitudes in the order `|00⟩, |01⟩, |10⟩, |11⟩`, first qubit most significant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitState {
    pub amplitudes: [C64; 4],
}

impl TwoQubitState {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(format!("state norm² is {norm}, expected 1")));
        }
        Ok(TwoQubitState { amplitudes })
    }

    pub fn phi_plus() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        TwoQubitState { amplitudes: [h, z, z, h] }
    }

    /// Local rotations `U(θ_a) ⊗ U(θ_b)`.
    pub fn rotated(&self, theta_a: f64, theta_b: f64) -> Self {
        let ua = RotationGate::new(theta_a).matrix();
        let ub = RotationGate::new(theta_b).matrix();
        let mut out = [C64::new(0.0, 0.0); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                *o += ua[(i >> 1, j >> 1)] * ub[(i & 1, j & 1)] * self.amplitudes[j];
            }
        }
        TwoQubitState { amplitudes: out }
    }

    /// Computational-basis probabilities `p[a][b]`, index 0 = outcome +1.
    pub fn probabilities(&self) -> [[f64; 2]; 2] {
        let p = self.amplitudes.map(|a| a.norm_sqr());
        [[p[0], p[1]], [p[2], p[3]]]
    }
}

pub fn joint_probabilities(state: &TwoQubitState, theta_a: f64, theta_b: f64) -> [[f64; 2]; 2] {
    state.rotated(theta_a, theta_b).probabilities()
}

pub fn analytic_correlation(state: &TwoQubitState, theta_a: f64, theta_b: f64) -> f64 {
    let p = joint_probabilities(state, theta_a, theta_b);
    p[0][0] + p[1][1] - p[0][1] - p[1][0]
}

const SIGNS: [[f64; 2]; 2] = [[1.0, -1.0], [1.0, 1.0]];

fn combine(e: &[[f64; 2]; 2]) -> f64 {
    (0..2).flat_map(|x| (0..2).map(move |y| SIGNS[x][y] * e[x][y])).sum()
}

/// Analytic `S` and the four correlations `[E(a,b), E(a,b′), E(a′,b), E(a′,b′)]`.
pub fn analytic_chsh(config: &BellConfig) -> (f64, [f64; 4]) {
    let state = TwoQubitState::phi_plus();
    let e: [[f64; 2]; 2] =
        std::array::from_fn(|x| std::array::from_fn(|y| analytic_correlation(&state, config.alice(x), config.bob(y))));
    (combine(&e), [e[0][0], e[0][1], e[1][0], e[1][1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellRound {
    pub x: u8,
    pub y: u8,
    /// ±1.
    pub a: i8,
    pub b: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub s: f64,
    /// `[E(a,b), E(a,b′), E(a′,b), E(a′,b′)]`.
    pub correlations: [f64; 4],
    pub counts: [usize; 4],
    /// Standard error of `s` from the per-setting round counts.
    pub sigma: f64,
    pub analytic_s: f64,
    pub config: BellConfig,
    pub certified: bool,
    pub rounds: Vec<BellRound>,
}

/// Recomputes `(S, correlations, counts, σ)` from a round log.
pub fn summarize_rounds(rounds: &[BellRound]) -> (f64, [f64; 4], [usize; 4], f64) {
    let mut sums = [[0i64; 2]; 2];
    let mut counts = [[0usize; 2]; 2];
    for r in rounds {
        sums[r.x as usize][r.y as usize] += i64::from(r.a * r.b);
        counts[r.x as usize][r.y as usize] += 1;
    }
    let e: [[f64; 2]; 2] = std::array::from_fn(|x| {
        std::array::from_fn(|y| {
            if counts[x][y] == 0 {
                0.0
            } else {
                sums[x][y] as f64 / counts[x][y] as f64
            }
        })
    });
    let var: f64 = (0..2)
        .flat_map(|x| (0..2).map(move |y| (x, y)))
        .filter(|&(x, y)| counts[x][y] > 0)
        .map(|(x, y)| (1.0 - e[x][y] * e[x][y]) / counts[x][y] as f64)
        .sum();
    (
        combine(&e),
        [e[0][0], e[0][1], e[1][0], e[1][1]],
        [counts[0][0], counts[0][1], counts[1][0], counts[1][1]],
        var.sqrt(),
    )
}

/// Runs `n_rounds` rounds; each draws `(x, y)` uniformly and samples the
/// outcome pair from the rotated Bell state.
pub fn chsh_run(config: &BellConfig) -> Result<ChshResult> {
    if config.n_rounds == 0 {
        return Err(Error::Validation("n_rounds must be ≥ 1".into()));
    }
    let state = TwoQubitState::phi_plus();
    let tables: [[[f64; 4]; 2]; 2] = std::array::from_fn(|x| {
        std::array::from_fn(|y| {
            let p = joint_probabilities(&state, config.alice(x), config.bob(y));
            [p[0][0], p[0][1], p[1][0], p[1][1]]
        })
    });
    let parts: Vec<Vec<BellRound>> = chunks(config.n_rounds)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, range)| {
            let mut rng = chunk_rng(config.seed, k);
            range
                .map(|_| {
                    let x = rng.gen_range(0..2u8);
                    let y = rng.gen_range(0..2u8);
                    let p = &tables[x as usize][y as usize];
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut idx = 3;
                    for (i, pi) in p.iter().enumerate() {
                        acc += pi;
                        if u < acc {
                            idx = i;
                            break;
                        }
                    }
                    let sign = |bit: usize| if bit == 0 { 1 } else { -1 };
                    BellRound {
                        x,
                        y,
                        a: sign(idx >> 1),
                        b: sign(idx & 1),
                    }
                })
                .collect()
        })
        .collect();
    let rounds = parts.concat();
    let (s, correlations, counts, sigma) = summarize_rounds(&rounds);
    Ok(ChshResult {
        s,
        correlations,
        counts,
        sigma,
        analytic_s: analytic_chsh(config).0,
        config: *config,
        certified: false,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_is_cos_of_angle_difference() {
        let s = TwoQubitState::phi_plus();
        for &(a, b) in &[(0.0, 0.0), (0.3, -1.2), (2.0, 0.7), (-4.0, 5.5)] {
            let e = analytic_correlation(&s, a, b);
            assert!((e - (2.0 * (a - b)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn default_angles_reach_tsirelson() {
        let (s, _) = analytic_chsh(&BellConfig::default());
        assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn equal_angles_give_two() {
        let c = BellConfig {
            theta_a: 0.4,
            theta_a_prime: 0.4,
            theta_b: 0.4,
            theta_b_prime: 0.4,
            ..BellConfig::default()
        };
        assert!((analytic_chsh(&c).0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn norm_is_validated() {
        let z = C64::new(0.0, 0.0);
        assert!(TwoQubitState::new([C64::new(1.0, 0.0), z, z, C64::new(0.1, 0.0)]).is_err());
    }

    #[test]
    fn rounds_reproduce_summary() {
        let cfg = BellConfig { n_rounds: 5000, seed: 3, ..BellConfig::default() };
        let r = chsh_run(&cfg).unwrap();
        assert!(!r.certified);
        assert_eq!(r.rounds.len(), 5000);
        let (s, ..) = summarize_rounds(&r.rounds);
        assert_eq!(s, r.s);
        assert_eq!(chsh_run(&cfg).unwrap(), r);
        assert!(chsh_run(&BellConfig { n_rounds: 0, ..cfg }).is_err());
    }
}
