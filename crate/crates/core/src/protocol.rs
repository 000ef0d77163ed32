//! Infinite-shot evaluation of the five circuit settings.
//!
//! Three settings measure at two of the times `t₁ < t₂ < t₃` and feed the
//! correlators `⟨Q₁Q₂⟩`, `⟨Q₂Q₃⟩`, `⟨Q₁Q₃⟩`; two more measure only once, at
//! `t₂` or `t₃`, and supply the reference marginals for the
//! no-signaling-in-time (NSIT) checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{apply_matrix, apply_unitary, measure, Outcome, QubitState, RotationGate};

/// NSIT tolerance for exact (analytic) evaluations.
pub const ANALYTIC_NSIT_TOLERANCE: f64 = 1e-9;

/// NSIT tolerance for shot-sampled runs.
pub const EMPIRICAL_NSIT_TOLERANCE: f64 = 1e-2;

/// Largest LGI value reachable by projective measurements on a qubit.
pub const LUDERS_BOUND: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CircuitSetting {
    /// measure, U₁, measure
    T1T2,
    /// U₁, measure, U₂, measure
    T2T3,
    /// measure, U₂U₁, measure
    T1T3,
    /// U₁, measure
    M2Only,
    /// U₁, U₂, measure
    M3Only,
}

/// One of the three measurement instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSlot {
    T1,
    T2,
    T3,
}

impl CircuitSetting {
    pub const ALL: [CircuitSetting; 5] = [
        CircuitSetting::T1T2,
        CircuitSetting::T2T3,
        CircuitSetting::T1T3,
        CircuitSetting::M2Only,
        CircuitSetting::M3Only,
    ];

    pub const TWO_TIME: [CircuitSetting; 3] =
        [CircuitSetting::T1T2, CircuitSetting::T2T3, CircuitSetting::T1T3];

    pub fn is_joint(self) -> bool {
        matches!(self, CircuitSetting::T1T2 | CircuitSetting::T2T3 | CircuitSetting::T1T3)
    }

    pub fn measures_at(self, slot: TimeSlot) -> bool {
        use CircuitSetting::*;
        use TimeSlot::*;
        matches!(
            (self, slot),
            (T1T2, T1) | (T1T2, T2) | (T2T3, T2) | (T2T3, T3) | (T1T3, T1) | (T1T3, T3) | (M2Only, T2) | (M3Only, T3)
        )
    }

    pub fn measurement_count(self) -> usize {
        if self.is_joint() {
            2
        } else {
            1
        }
    }

    /// Stable index used for seed derivation and serialization.
    pub fn index(self) -> usize {
        match self {
            CircuitSetting::T1T2 => 0,
            CircuitSetting::T2T3 => 1,
            CircuitSetting::T1T3 => 2,
            CircuitSetting::M2Only => 3,
            CircuitSetting::M3Only => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CircuitSetting::T1T2 => "t1t2",
            CircuitSetting::T2T3 => "t2t3",
            CircuitSetting::T1T3 => "t1t3",
            CircuitSetting::M2Only => "m2",
            CircuitSetting::M3Only => "m3",
        }
    }
}

/// Everything that determines the statistics of a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub theta1: f64,
    pub theta2: f64,
    pub initial: QubitState,
}

impl ProtocolParams {
    pub fn new(initial: QubitState, theta1: f64, theta2: f64) -> Self {
        Self {
            theta1,
            theta2,
            initial,
        }
    }
}

/// `P(a_i, a_j | Q_i, Q_j)`, indexed `p[first][second]` with index 0 for `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub setting: CircuitSetting,
    pub p: [[f64; 2]; 2],
    /// Parameters the distribution was produced from, when known.
    pub params: Option<ProtocolParams>,
}

impl JointDistribution {
    pub fn new(setting: CircuitSetting, p: [[f64; 2]; 2]) -> Result<Self> {
        if !setting.is_joint() {
            return Err(Error::Usage(format!(
                "{} is a single-measurement setting",
                setting.label()
            )));
        }
        let mut total = 0.0;
        for row in &p {
            for &v in row {
                if !(0.0..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::Validation(format!("joint entry {v} outside [0,1]")));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("joint distribution sums to {total}")));
        }
        Ok(Self {
            setting,
            p,
            params: None,
        })
    }

    pub fn with_params(mut self, params: ProtocolParams) -> Self {
        self.params = Some(params);
        self
    }

    pub fn get(&self, first: Outcome, second: Outcome) -> f64 {
        self.p[first.index()][second.index()]
    }

    pub fn first_marginal(&self, a: Outcome) -> f64 {
        self.p[a.index()][0] + self.p[a.index()][1]
    }

    pub fn second_marginal(&self, b: Outcome) -> f64 {
        self.p[0][b.index()] + self.p[1][b.index()]
    }
}

/// Single-time outcome distribution from `M2Only` or `M3Only`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub setting: CircuitSetting,
    pub p_plus: f64,
    pub p_minus: f64,
    pub params: Option<ProtocolParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgiReport {
    pub c12: f64,
    pub c23: f64,
    pub c13: f64,
    pub lgi_value: f64,
    pub alpha: f64,
    /// Signed residuals of the three NSIT conditions, in the order
    /// (Q₂ vs Q₁Q₂), (Q₃ vs Q₁Q₃), (Q₃ vs Q₂Q₃).
    pub nsit_residuals: [f64; 3],
    pub nsit_tolerance: f64,
}

impl LgiReport {
    pub fn nsit_pass(&self) -> bool {
        self.nsit_residuals.iter().all(|r| r.abs() <= self.nsit_tolerance)
    }

    pub fn max_nsit_residual(&self) -> f64 {
        self.nsit_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Assembles a report from the five setting results.
    pub fn from_results(
        j12: &JointDistribution,
        j23: &JointDistribution,
        j13: &JointDistribution,
        m2: &Marginal,
        m3: &Marginal,
        nsit_tolerance: f64,
    ) -> Result<Self> {
        let nsit = nsit_residuals(j12, j23, j13, m2, m3)?;
        let (c12, c23, c13) = (correlation(j12), correlation(j23), correlation(j13));
        let lgi = lgi_value(c12, c23, c13);
        Ok(Self {
            c12,
            c23,
            c13,
            lgi_value: lgi,
            alpha: lgi - 1.0,
            nsit_residuals: nsit,
            nsit_tolerance,
        })
    }
}

fn two_measurement_joint(
    state: &QubitState,
    between: impl Fn(&QubitState) -> QubitState,
) -> [[f64; 2]; 2] {
    let mut p = [[0.0; 2]; 2];
    for first in measure(state) {
        let Some(post) = first.post_state else { continue };
        let evolved = between(&post);
        for second in measure(&evolved) {
            p[first.outcome.index()][second.outcome.index()] = first.probability * second.probability;
        }
    }
    p
}

/// Sequential Born-rule joint distribution of a two-time setting.
pub fn exact_joint(
    setting: CircuitSetting,
    initial: &QubitState,
    theta1: f64,
    theta2: f64,
) -> Result<JointDistribution> {
    let u1 = RotationGate::new(theta1);
    let u2 = RotationGate::new(theta2);
    let p = match setting {
        CircuitSetting::T1T2 => two_measurement_joint(initial, |s| apply_unitary(s, &u1)),
        CircuitSetting::T2T3 => {
            let at_t2 = apply_unitary(initial, &u1);
            two_measurement_joint(&at_t2, |s| apply_unitary(s, &u2))
        }
        CircuitSetting::T1T3 => {
            let product = u2.matrix() * u1.matrix();
            two_measurement_joint(initial, |s| apply_matrix(s, &product))
        }
        CircuitSetting::M2Only | CircuitSetting::M3Only => {
            return Err(Error::Usage(format!(
                "{} measures once; use exact_marginal",
                setting.label()
            )))
        }
    };
    Ok(JointDistribution {
        setting,
        p,
        params: Some(ProtocolParams::new(*initial, theta1, theta2)),
    })
}

/// One-time outcome probabilities for `M2Only` / `M3Only`.
pub fn exact_marginal(
    setting: CircuitSetting,
    initial: &QubitState,
    theta1: f64,
    theta2: f64,
) -> Result<Marginal> {
    let u1 = RotationGate::new(theta1);
    let state = match setting {
        CircuitSetting::M2Only => apply_unitary(initial, &u1),
        CircuitSetting::M3Only => apply_unitary(&apply_unitary(initial, &u1), &RotationGate::new(theta2)),
        _ => {
            return Err(Error::Usage(format!(
                "{} measures twice; use exact_joint",
                setting.label()
            )))
        }
    };
    let p_plus = state.probability(Outcome::Plus);
    Ok(Marginal {
        setting,
        p_plus,
        p_minus: 1.0 - p_plus,
        params: Some(ProtocolParams::new(*initial, theta1, theta2)),
    })
}

/// `⟨Q_iQ_j⟩ = Σ a_i a_j P(a_i, a_j)`.
pub fn correlation(dist: &JointDistribution) -> f64 {
    let mut acc = 0.0;
    for a in Outcome::ALL {
        for b in Outcome::ALL {
            acc += f64::from(a.value() * b.value()) * dist.get(a, b);
        }
    }
    acc
}

pub fn lgi_value(c12: f64, c23: f64, c13: f64) -> f64 {
    c12 + c23 - c13
}

fn check_setting(expected: CircuitSetting, got: CircuitSetting) -> Result<()> {
    if expected != got {
        return Err(Error::Usage(format!(
            "expected a {} result, got {}",
            expected.label(),
            got.label()
        )));
    }
    Ok(())
}

/// Signed NSIT residuals:
///
/// * `P(+|Q₂) − [P(++|Q₁Q₂) + P(−+|Q₁Q₂)]`
/// * `P(+|Q₃) − [P(++|Q₁Q₃) + P(−+|Q₁Q₃)]`
/// * `P(+|Q₃) − [P(++|Q₂Q₃) + P(−+|Q₂Q₃)]`
pub fn nsit_residuals(
    j12: &JointDistribution,
    j23: &JointDistribution,
    j13: &JointDistribution,
    m2: &Marginal,
    m3: &Marginal,
) -> Result<[f64; 3]> {
    check_setting(CircuitSetting::T1T2, j12.setting)?;
    check_setting(CircuitSetting::T2T3, j23.setting)?;
    check_setting(CircuitSetting::T1T3, j13.setting)?;
    check_setting(CircuitSetting::M2Only, m2.setting)?;
    check_setting(CircuitSetting::M3Only, m3.setting)?;

    let provenance = [j12.params, j23.params, j13.params, m2.params, m3.params];
    let known: Vec<&ProtocolParams> = provenance.iter().flatten().collect();
    if let Some(first) = known.first() {
        for other in &known[1..] {
            let same = (first.theta1 - other.theta1).abs() <= 1e-12
                && (first.theta2 - other.theta2).abs() <= 1e-12
                && first.initial.max_abs_diff(&other.initial) <= 1e-12;
            if !same {
                return Err(Error::Consistency(
                    "setting results come from different (θ₁, θ₂, initial state)".into(),
                ));
            }
        }
    }

    let plus = Outcome::Plus;
    Ok([
        m2.p_plus - j12.second_marginal(plus),
        m3.p_plus - j13.second_marginal(plus),
        m3.p_plus - j23.second_marginal(plus),
    ])
}

/// Full analytic report at `(θ₁, θ₂)`.
pub fn evaluate(initial: &QubitState, theta1: f64, theta2: f64) -> LgiReport {
    let joint = |s| exact_joint(s, initial, theta1, theta2).expect("two-time setting");
    let marginal = |s| exact_marginal(s, initial, theta1, theta2).expect("one-time setting");
    LgiReport::from_results(
        &joint(CircuitSetting::T1T2),
        &joint(CircuitSetting::T2T3),
        &joint(CircuitSetting::T1T3),
        &marginal(CircuitSetting::M2Only),
        &marginal(CircuitSetting::M3Only),
        ANALYTIC_NSIT_TOLERANCE,
    )
    .expect("consistent by construction")
}
