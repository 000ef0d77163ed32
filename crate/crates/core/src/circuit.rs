//! Gate-level execution of a setting, with or without noise.
//!
//! Unlike [`crate::protocol`], which composes ideal rotations directly, this
//! path runs every rotation in its transpiled `Rz·SX·Rz·SX·Rz` form and
//! inserts the channels of a [`NoiseModel`]. The result is an
//! [`OutcomeTree`]: the exact probabilities of the true measurement records
//! plus the readout map, from which both analytic distributions and
//! per-shot samples are drawn.

use rand::Rng;

use crate::error::Result;
use crate::noise::{apply_channel, Channel, ConfusionMatrix, NoiseModel};
use crate::protocol::{
    CircuitSetting, JointDistribution, LgiReport, Marginal, ProtocolParams, TimeSlot, ANALYTIC_NSIT_TOLERANCE,
};
use crate::qcore::{apply_matrix, apply_unitary, decompose_zxzxz, measure, rz, sx, Outcome, QubitState, RotationGate};

#[derive(Debug, Clone, Copy, PartialEq)]
enum TrueDistribution {
    Joint([[f64; 2]; 2]),
    Single([f64; 2]),
}

/// Exact outcome probabilities of one setting plus its readout map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeTree {
    pub setting: CircuitSetting,
    dist: TrueDistribution,
    readout: ConfusionMatrix,
}

struct Branch {
    prob: f64,
    outcomes: [Option<Outcome>; 2],
    depth: usize,
    state: QubitState,
}

fn apply_gate(state: &QubitState, theta: f64, noise: Option<&NoiseModel>) -> Result<QubitState> {
    let gate = RotationGate::new(theta);
    let Some(noise) = noise else {
        return Ok(apply_unitary(state, &gate));
    };
    let d = decompose_zxzxz(&gate);
    let rz_relax = noise.thermal(noise.durations.rz);
    let sx_relax = noise.thermal(noise.durations.sx);
    let mut s = *state;
    let virtual_z = |s: &QubitState, lambda: f64| -> Result<QubitState> {
        let out = apply_matrix(s, &rz(lambda));
        match &rz_relax {
            Some(ch) => apply_channel(&out, ch),
            None => Ok(out),
        }
    };
    s = virtual_z(&s, d.lambda1)?;
    for lambda in [d.lambda2, d.lambda3] {
        s = apply_matrix(&s, &sx());
        if noise.sx_depol_prob > 0.0 {
            s = apply_channel(&s, &Channel::Depolarizing(noise.sx_depol_prob))?;
        }
        if let Some(ch) = &sx_relax {
            s = apply_channel(&s, ch)?;
        }
        s = virtual_z(&s, lambda)?;
    }
    Ok(s)
}

fn pre_measurement(state: &QubitState, noise: &NoiseModel) -> Result<QubitState> {
    let mut s = *state;
    if noise.pre_meas_z_prob > 0.0 {
        s = apply_channel(&s, &Channel::PhaseFlip(noise.pre_meas_z_prob))?;
    }
    if noise.pre_meas_x_prob > 0.0 {
        s = apply_channel(&s, &Channel::BitFlip(noise.pre_meas_x_prob))?;
    }
    Ok(s)
}

/// Evolves `params.initial` through `setting`, branching at every measurement.
pub fn outcome_tree(setting: CircuitSetting, params: &ProtocolParams, noise: Option<&NoiseModel>) -> Result<OutcomeTree> {
    let mut branches = vec![Branch {
        prob: 1.0,
        outcomes: [None, None],
        depth: 0,
        state: params.initial,
    }];

    let slots = [TimeSlot::T1, TimeSlot::T2, TimeSlot::T3];
    for (k, slot) in slots.into_iter().enumerate() {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for b in branches {
            let mut state = b.state;
            if let Some(n) = noise {
                state = pre_measurement(&state, n)?;
            }
            if setting.measures_at(slot) {
                if let Some(ch) = noise.and_then(|n| n.thermal(n.durations.measure)) {
                    state = apply_channel(&state, &ch)?;
                }
                for m in measure(&state) {
                    let Some(post) = m.post_state else { continue };
                    let mut outcomes = b.outcomes;
                    outcomes[b.depth] = Some(m.outcome);
                    next.push(Branch {
                        prob: b.prob * m.probability,
                        outcomes,
                        depth: b.depth + 1,
                        state: post,
                    });
                }
            } else {
                next.push(Branch { state, ..b });
            }
        }
        branches = next;
        // Gates run between instants only while a later measurement remains.
        let theta = match k {
            0 => Some(params.theta1),
            1 if setting.measures_at(TimeSlot::T3) => Some(params.theta2),
            _ => None,
        };
        if let Some(theta) = theta {
            for b in &mut branches {
                b.state = apply_gate(&b.state, theta, noise)?;
            }
        }
    }

    let dist = if setting.is_joint() {
        let mut p = [[0.0; 2]; 2];
        for b in &branches {
            let (a, c) = (b.outcomes[0].expect("two outcomes"), b.outcomes[1].expect("two outcomes"));
            p[a.index()][c.index()] += b.prob;
        }
        TrueDistribution::Joint(p)
    } else {
        let mut p = [0.0; 2];
        for b in &branches {
            p[b.outcomes[0].expect("one outcome").index()] += b.prob;
        }
        TrueDistribution::Single(p)
    };
    let readout = noise.map(|n| n.readout).unwrap_or_else(ConfusionMatrix::identity);
    Ok(OutcomeTree { setting, dist, readout })
}

impl OutcomeTree {
    /// Distribution of the reported (post-readout) outcome pair.
    pub fn observed_joint(&self) -> Option<[[f64; 2]; 2]> {
        let TrueDistribution::Joint(p) = self.dist else { return None };
        let c = &self.readout;
        let mut out = [[0.0; 2]; 2];
        for (oa, row) in out.iter_mut().enumerate() {
            for (ob, cell) in row.iter_mut().enumerate() {
                *cell = (0..2)
                    .flat_map(|a| (0..2).map(move |b| (a, b)))
                    .map(|(a, b)| c.get(oa, a) * c.get(ob, b) * p[a][b])
                    .sum();
            }
        }
        Some(out)
    }

    pub fn observed_single(&self) -> Option<[f64; 2]> {
        let TrueDistribution::Single(p) = self.dist else { return None };
        Some(crate::noise::apply_readout_noise(p, &self.readout))
    }

    fn read(&self, truth: Outcome, rng: &mut impl Rng) -> Outcome {
        let flip = self.readout.flip_probability(truth.index());
        if flip > 0.0 && rng.gen::<f64>() < flip {
            truth.flipped()
        } else {
            truth
        }
    }

    /// One shot: sequential Born sampling of the true outcomes, then readout.
    pub(crate) fn sample(&self, rng: &mut impl Rng) -> (Outcome, Option<Outcome>) {
        match self.dist {
            TrueDistribution::Single(p) => {
                let a = if rng.gen::<f64>() < p[0] { Outcome::Plus } else { Outcome::Minus };
                (self.read(a, rng), None)
            }
            TrueDistribution::Joint(p) => {
                let p_first_plus = p[0][0] + p[0][1];
                let a = if rng.gen::<f64>() < p_first_plus { Outcome::Plus } else { Outcome::Minus };
                let row = p[a.index()];
                let cond_plus = row[0] / (row[0] + row[1]);
                let b = if rng.gen::<f64>() < cond_plus { Outcome::Plus } else { Outcome::Minus };
                (self.read(a, rng), Some(self.read(b, rng)))
            }
        }
    }
}

/// Exact report of the gate-level pipeline.
pub fn analytic_report(params: &ProtocolParams, noise: Option<&NoiseModel>) -> Result<LgiReport> {
    let tree = |s| outcome_tree(s, params, noise);
    let joint = |s| -> Result<JointDistribution> {
        let p = tree(s)?.observed_joint().expect("two-time setting");
        Ok(JointDistribution { setting: s, p, params: Some(*params) })
    };
    let marginal = |s| -> Result<Marginal> {
        let p = tree(s)?.observed_single().expect("one-time setting");
        Ok(Marginal { setting: s, p_plus: p[0], p_minus: p[1], params: Some(*params) })
    };
    LgiReport::from_results(
        &joint(CircuitSetting::T1T2)?,
        &joint(CircuitSetting::T2T3)?,
        &joint(CircuitSetting::T1T3)?,
        &marginal(CircuitSetting::M2Only)?,
        &marginal(CircuitSetting::M3Only)?,
        ANALYTIC_NSIT_TOLERANCE,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{evaluate, exact_joint};

    #[test]
    fn noiseless_transpiled_path_matches_protocol() {
        let ideal = NoiseModel::ideal();
        let params = ProtocolParams::new(QubitState::from_bloch(0.2, 0.4, -0.5).unwrap(), 0.7, -1.9);
        for setting in CircuitSetting::TWO_TIME {
            let direct = exact_joint(setting, &params.initial, params.theta1, params.theta2).unwrap();
            for noise in [None, Some(&ideal)] {
                let tree = outcome_tree(setting, &params, noise).unwrap();
                let p = tree.observed_joint().unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((p[i][j] - direct.p[i][j]).abs() < 1e-12);
                    }
                }
            }
        }
        let a = analytic_report(&params, Some(&ideal)).unwrap();
        let b = evaluate(&params.initial, params.theta1, params.theta2);
        assert!((a.lgi_value - b.lgi_value).abs() < 1e-12);
    }

    #[test]
    fn symmetric_readout_scales_correlations() {
        let r = 0.02;
        let noise = NoiseModel::readout_only(ConfusionMatrix::symmetric(r).unwrap());
        let params = ProtocolParams::new(QubitState::protocol_pure(), -75.922, -75.922);
        let noisy = analytic_report(&params, Some(&noise)).unwrap();
        let ideal = evaluate(&params.initial, params.theta1, params.theta2);
        let f = (1.0 - 2.0 * r) * (1.0 - 2.0 * r);
        assert!((noisy.lgi_value - f * ideal.lgi_value).abs() < 1e-12);
    }
}
