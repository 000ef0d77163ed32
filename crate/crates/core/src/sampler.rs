//! Seeded shot execution, bit extraction and randomness certification.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{outcome_tree, OutcomeTree};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::protocol::{
    CircuitSetting, JointDistribution, LgiReport, Marginal, ProtocolParams, EMPIRICAL_NSIT_TOLERANCE, LUDERS_BOUND,
};
use crate::qcore::Outcome;
use crate::rng::{chunk_rng, chunks, derive_seed};

/// Conditional probabilities are skipped for first outcomes rarer than this.
const MIN_CONDITIONING_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotOutcomes {
    Pairs(Vec<[Outcome; 2]>),
    Singles(Vec<Outcome>),
}

impl ShotOutcomes {
    pub fn len(&self) -> usize {
        match self {
            ShotOutcomes::Pairs(v) => v.len(),
            ShotOutcomes::Singles(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub setting: CircuitSetting,
    pub n_shots: usize,
    pub seed: u64,
    pub params: ProtocolParams,
    pub noisy: bool,
    pub outcomes: ShotOutcomes,
}

fn sample_chunked(tree: &OutcomeTree, n_shots: usize, seed: u64) -> Vec<(Outcome, Option<Outcome>)> {
    let parts: Vec<Vec<_>> = chunks(n_shots)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, range)| {
            let mut rng = chunk_rng(seed, k);
            range.map(|_| tree.sample(&mut rng)).collect()
        })
        .collect();
    parts.concat()
}

/// Runs `n_shots` independent executions of one setting.
///
/// Output is a pure function of the arguments; it does not depend on the
/// size of the rayon pool.
pub fn run_shots(
    setting: CircuitSetting,
    params: &ProtocolParams,
    n_shots: usize,
    seed: u64,
    noise: Option<&NoiseModel>,
) -> Result<ShotRecord> {
    if n_shots == 0 {
        return Err(Error::Validation("n_shots must be ≥ 1".into()));
    }
    if let Some(n) = noise {
        n.validate()?;
    }
    let tree = outcome_tree(setting, params, noise)?;
    let raw = sample_chunked(&tree, n_shots, seed);
    let outcomes = if setting.is_joint() {
        ShotOutcomes::Pairs(raw.into_iter().map(|(a, b)| [a, b.expect("pair")]).collect())
    } else {
        ShotOutcomes::Singles(raw.into_iter().map(|(a, _)| a).collect())
    };
    Ok(ShotRecord {
        setting,
        n_shots,
        seed,
        params: *params,
        noisy: noise.is_some_and(|n| !n.is_ideal()),
        outcomes,
    })
}

pub fn estimate_joint(record: &ShotRecord) -> Result<JointDistribution> {
    let ShotOutcomes::Pairs(pairs) = &record.outcomes else {
        return Err(Error::Usage(format!(
            "{} record has single outcomes; use estimate_marginal",
            record.setting.label()
        )));
    };
    let mut counts = [[0usize; 2]; 2];
    for [a, b] in pairs {
        counts[a.index()][b.index()] += 1;
    }
    let n = pairs.len() as f64;
    let p = counts.map(|row| row.map(|c| c as f64 / n));
    Ok(JointDistribution {
        setting: record.setting,
        p,
        params: Some(record.params),
    })
}

pub fn estimate_marginal(record: &ShotRecord) -> Result<Marginal> {
    let ShotOutcomes::Singles(v) = &record.outcomes else {
        return Err(Error::Usage(format!(
            "{} record has outcome pairs; use estimate_joint",
            record.setting.label()
        )));
    };
    let plus = v.iter().filter(|o| **o == Outcome::Plus).count();
    let p_plus = plus as f64 / v.len() as f64;
    Ok(Marginal {
        setting: record.setting,
        p_plus,
        p_minus: (v.len() - plus) as f64 / v.len() as f64,
        params: Some(record.params),
    })
}

/// Which bits of the raw outcome stream are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscardPolicy {
    /// Both outcomes of every shot are kept except the very first bit of
    /// each sub-run: `2N − 1` bits per record.
    FirstOfSubRun,
    /// Only the later-time outcome of each shot is kept: `N` bits per record.
    FirstOfEachShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitProvenance {
    pub settings: Vec<CircuitSetting>,
    pub seeds: Vec<u64>,
    pub shots_per_record: Vec<usize>,
    pub discard_policy: DiscardPolicy,
    pub discarded: usize,
    pub n_bits: usize,
    pub params: Option<ProtocolParams>,
    pub warnings: Vec<String>,
}

/// Extracted bits, one `u8` (0 or 1) per bit. `+1 → 0`, `−1 → 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitStream {
    pub bits: Vec<u8>,
    pub provenance: BitProvenance,
}

impl BitStream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Packs bits most-significant-bit first; the last byte is zero-padded.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }
}

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect()
}

pub fn unpack_bits(bytes: &[u8], n_bits: usize) -> Vec<u8> {
    (0..n_bits.min(bytes.len() * 8))
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
        .collect()
}

/// Turns two-time shot records into a bit stream, in record order and
/// time order within each shot.
pub fn extract_bits(records: &[ShotRecord], policy: DiscardPolicy) -> BitStream {
    let mut bits = Vec::new();
    let mut discarded = 0;
    let mut warnings = Vec::new();
    let mut settings = Vec::new();
    let mut seeds = Vec::new();
    let mut shots = Vec::new();
    for record in records {
        let ShotOutcomes::Pairs(pairs) = &record.outcomes else {
            warnings.push(format!("skipped single-outcome {} record", record.setting.label()));
            continue;
        };
        settings.push(record.setting);
        seeds.push(record.seed);
        shots.push(pairs.len());
        match policy {
            DiscardPolicy::FirstOfSubRun => {
                let mut stream = pairs.iter().flat_map(|[a, b]| [a.index() as u8, b.index() as u8]);
                if stream.next().is_some() {
                    discarded += 1;
                }
                bits.extend(stream);
            }
            DiscardPolicy::FirstOfEachShot => {
                discarded += pairs.len();
                bits.extend(pairs.iter().map(|[_, b]| b.index() as u8));
            }
        }
    }
    if records.is_empty() || bits.is_empty() {
        warnings.push("no bits extracted".into());
    }
    let n_bits = bits.len();
    BitStream {
        bits,
        provenance: BitProvenance {
            settings,
            seeds,
            shots_per_record: shots,
            discard_policy: policy,
            discarded,
            n_bits,
            params: records.first().map(|r| r.params),
            warnings,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenuineRandomness {
    /// `−log₂ max P(a_i, a_j)`, bits per outcome pair.
    pub h_inf_joint: f64,
    /// `−log₂ max P(a_j | a_i)`, bits per second outcome.
    pub h_inf_conditional: f64,
    /// A first outcome never occurred; the conditional figure covers only
    /// the supported branch.
    pub degenerate: bool,
}

pub fn genuine_randomness(dist: &JointDistribution) -> GenuineRandomness {
    let max_joint = dist.p.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let mut max_cond = 0.0f64;
    let mut degenerate = false;
    for a in Outcome::ALL {
        let pa = dist.first_marginal(a);
        if pa < MIN_CONDITIONING_MASS {
            degenerate = true;
            continue;
        }
        for b in Outcome::ALL {
            max_cond = max_cond.max(dist.get(a, b) / pa);
        }
    }
    GenuineRandomness {
        h_inf_joint: -max_joint.log2(),
        h_inf_conditional: -max_cond.min(1.0).log2(),
        degenerate,
    }
}

/// Minimum min-entropy certified by an LGI value:
/// `−log₂((1 + α + √(1 − 2α)) / 2)` with `α = lgi − 1`.
pub fn randomness_bound(lgi_value: f64) -> Result<f64> {
    if !(1.0..=LUDERS_BOUND).contains(&lgi_value) {
        return Err(Error::Domain(format!(
            "LGI value {lgi_value} outside [1, {LUDERS_BOUND}]"
        )));
    }
    let alpha = lgi_value - 1.0;
    let bound = -((1.0 + alpha + (1.0 - 2.0 * alpha).sqrt()) / 2.0).log2();
    Ok(bound.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomnessCertificate {
    pub lgi_value: f64,
    pub alpha: f64,
    /// Smallest joint min-entropy over the three two-time settings.
    pub h_inf_joint: f64,
    /// Smallest conditional min-entropy over the three two-time settings.
    pub h_inf_conditional: f64,
    pub bound: f64,
    /// Observed LGI exceeded the qubit maximum (sampling fluctuation);
    /// the bound was evaluated at the maximum.
    pub lgi_above_quantum_max: bool,
    pub nsit_residuals: [f64; 3],
    pub nsit_tolerance: f64,
    pub nsit_pass: bool,
    pub certified: bool,
}

/// Certificate from an LGI report and the per-setting entropies.
///
/// `certified ⇔ lgi > 1 ∧ NSIT holds ∧ bound > 0`; entropies never
/// override a failed NSIT or LGI check.
pub fn certify(report: &LgiReport, randomness: &[GenuineRandomness]) -> RandomnessCertificate {
    let lgi = report.lgi_value;
    let above = lgi > LUDERS_BOUND;
    let bound = if lgi <= 1.0 {
        0.0
    } else {
        randomness_bound(lgi.min(LUDERS_BOUND)).expect("clamped into domain")
    };
    let h_joint = randomness.iter().map(|g| g.h_inf_joint).fold(f64::INFINITY, f64::min);
    let h_cond = randomness.iter().map(|g| g.h_inf_conditional).fold(f64::INFINITY, f64::min);
    let nsit_pass = report.nsit_pass();
    RandomnessCertificate {
        lgi_value: lgi,
        alpha: report.alpha,
        h_inf_joint: h_joint,
        h_inf_conditional: h_cond,
        bound,
        lgi_above_quantum_max: above,
        nsit_residuals: report.nsit_residuals,
        nsit_tolerance: report.nsit_tolerance,
        nsit_pass,
        certified: lgi > 1.0 && nsit_pass && bound > 0.0,
    }
}

/// One full five-circuit run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub params: ProtocolParams,
    pub n_shots: usize,
    pub seed: u64,
    /// In [`CircuitSetting::ALL`] order.
    pub records: Vec<ShotRecord>,
    /// `T1T2`, `T2T3`, `T1T3`.
    pub joints: [JointDistribution; 3],
    /// `M2Only`, `M3Only`.
    pub marginals: [Marginal; 2],
    pub report: LgiReport,
    pub randomness: [GenuineRandomness; 3],
}

impl ExperimentRun {
    pub fn certificate(&self) -> RandomnessCertificate {
        certify(&self.report, &self.randomness)
    }

    pub fn two_time_records(&self) -> &[ShotRecord] {
        &self.records[..3]
    }
}

/// Seed of setting `s` inside an experiment seeded with `seed`.
pub fn setting_seed(seed: u64, setting: CircuitSetting) -> u64 {
    derive_seed(seed, &[setting.index() as u64])
}

/// Runs all five settings for `n_shots` each.
pub fn run_experiment(
    params: &ProtocolParams,
    n_shots: usize,
    seed: u64,
    noise: Option<&NoiseModel>,
) -> Result<ExperimentRun> {
    let records = CircuitSetting::ALL
        .iter()
        .map(|&s| run_shots(s, params, n_shots, setting_seed(seed, s), noise))
        .collect::<Result<Vec<_>>>()?;
    experiment_from_records(records, EMPIRICAL_NSIT_TOLERANCE)
}

/// Rebuilds an [`ExperimentRun`] from five records in [`CircuitSetting::ALL`] order.
pub fn experiment_from_records(records: Vec<ShotRecord>, nsit_tolerance: f64) -> Result<ExperimentRun> {
    if records.len() != 5 {
        return Err(Error::Usage(format!("expected 5 records, got {}", records.len())));
    }
    let joints = [
        estimate_joint(&records[0])?,
        estimate_joint(&records[1])?,
        estimate_joint(&records[2])?,
    ];
    let marginals = [estimate_marginal(&records[3])?, estimate_marginal(&records[4])?];
    let report = LgiReport::from_results(
        &joints[0],
        &joints[1],
        &joints[2],
        &marginals[0],
        &marginals[1],
        nsit_tolerance,
    )?;
    let randomness = joints.map(|j| genuine_randomness(&j));
    Ok(ExperimentRun {
        params: records[0].params,
        n_shots: records[0].n_shots,
        seed: records[0].seed,
        records,
        joints,
        marginals,
        report,
        randomness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSweepRow {
    pub length: usize,
    pub mean_lgi: f64,
    pub spread: f64,
    pub repetitions: usize,
}

/// LGI estimated from a random-setting stream of `length` shots: each shot
/// runs one of the three two-time settings chosen uniformly by the seed.
/// A setting that never got chosen contributes a zero correlator.
pub fn random_setting_lgi(trees: &[OutcomeTree; 3], length: usize, seed: u64) -> f64 {
    let mut sums = [0i64; 3];
    let mut counts = [0usize; 3];
    for (k, range) in chunks(length) {
        let mut rng = chunk_rng(seed, k);
        for _ in range {
            let s = rng.gen_range(0..3);
            let (a, b) = trees[s].sample(&mut rng);
            sums[s] += i64::from(a.value() * b.expect("two-time setting").value());
            counts[s] += 1;
        }
    }
    let c = |i: usize| if counts[i] == 0 { 0.0 } else { sums[i] as f64 / counts[i] as f64 };
    c(0) + c(1) - c(2)
}

/// Mean and sample standard deviation of the random-setting LGI estimate
/// per stream length.
pub fn seed_sweep(
    params: &ProtocolParams,
    lengths: &[usize],
    repetitions: usize,
    seed: u64,
    noise: Option<&NoiseModel>,
) -> Result<Vec<SeedSweepRow>> {
    if lengths.iter().any(|&l| l == 0) {
        return Err(Error::Validation("seed lengths must be ≥ 1".into()));
    }
    if repetitions == 0 {
        return Err(Error::Validation("repetitions must be ≥ 1".into()));
    }
    let trees = [
        outcome_tree(CircuitSetting::T1T2, params, noise)?,
        outcome_tree(CircuitSetting::T2T3, params, noise)?,
        outcome_tree(CircuitSetting::T1T3, params, noise)?,
    ];
    Ok(lengths
        .iter()
        .map(|&length| {
            let values: Vec<f64> = (0..repetitions)
                .into_par_iter()
                .map(|r| random_setting_lgi(&trees, length, derive_seed(seed, &[length as u64, r as u64])))
                .collect();
            let (mean, spread) = crate::noise::mean_and_sd(&values);
            SeedSweepRow {
                length,
                mean_lgi: mean,
                spread,
                repetitions,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::exact_joint;
    use crate::qcore::QubitState;

    fn params(t1: f64, t2: f64) -> ProtocolParams {
        ProtocolParams::new(QubitState::protocol_pure(), t1, t2)
    }

    #[test]
    fn identity_run_on_ket0_is_all_plus() {
        let p = ProtocolParams::new(QubitState::ket0(), 0.0, 0.0);
        let rec = run_shots(CircuitSetting::T1T3, &p, 1000, 3, None).unwrap();
        let ShotOutcomes::Pairs(v) = &rec.outcomes else { panic!() };
        assert!(v.iter().all(|o| *o == [Outcome::Plus, Outcome::Plus]));
        let j = estimate_joint(&rec).unwrap();
        assert_eq!(j.p[0][0], 1.0);
    }

    #[test]
    fn zero_shots_rejected() {
        assert!(run_shots(CircuitSetting::T1T2, &params(0.1, 0.2), 0, 1, None).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let p = params(0.4, -0.9);
        let a = run_shots(CircuitSetting::T2T3, &p, 100_000, 42, None).unwrap();
        let b = run_shots(CircuitSetting::T2T3, &p, 100_000, 42, None).unwrap();
        let c = run_shots(CircuitSetting::T2T3, &p, 100_000, 43, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.outcomes, c.outcomes);
    }

    #[test]
    fn estimates_are_normalized_and_typed() {
        let p = params(0.4, -0.9);
        let rec = run_shots(CircuitSetting::T1T2, &p, 777, 5, None).unwrap();
        let j = estimate_joint(&rec).unwrap();
        let total: f64 = j.p.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(matches!(estimate_marginal(&rec), Err(Error::Usage(_))));
        let single = run_shots(CircuitSetting::M2Only, &p, 10, 5, None).unwrap();
        assert!(matches!(estimate_joint(&single), Err(Error::Usage(_))));
    }

    #[test]
    fn bit_extraction_lengths_and_mapping() {
        let p = ProtocolParams::new(QubitState::ket0(), 0.0, 0.0);
        let recs: Vec<_> = CircuitSetting::TWO_TIME
            .iter()
            .map(|&s| run_shots(s, &p, 50, 1, None).unwrap())
            .collect();
        let bits = extract_bits(&recs, DiscardPolicy::FirstOfSubRun);
        assert_eq!(bits.len(), 6 * 50 - 3);
        assert!(bits.bits.iter().all(|&b| b == 0));
        assert_eq!(bits.provenance.discarded, 3);
        let per_shot = extract_bits(&recs, DiscardPolicy::FirstOfEachShot);
        assert_eq!(per_shot.len(), 150);

        let empty = extract_bits(&[], DiscardPolicy::FirstOfSubRun);
        assert!(empty.is_empty());
        assert!(!empty.provenance.warnings.is_empty());
    }

    #[test]
    fn minus_maps_to_one() {
        let p = ProtocolParams::new(QubitState::ket1(), 0.0, 0.0);
        let rec = run_shots(CircuitSetting::T1T2, &p, 4, 1, None).unwrap();
        let bits = extract_bits(&[rec], DiscardPolicy::FirstOfSubRun);
        assert_eq!(bits.bits, vec![1; 7]);
    }

    #[test]
    fn packing_is_msb_first() {
        let bits = [1, 0, 1, 1, 0, 0, 0, 0, 1];
        let packed = pack_bits(&bits);
        assert_eq!(packed, vec![0b1011_0000, 0b1000_0000]);
        assert_eq!(unpack_bits(&packed, 9), bits);
    }

    #[test]
    fn entropy_examples() {
        let uniform = JointDistribution::new(CircuitSetting::T1T2, [[0.25; 2]; 2]).unwrap();
        let g = genuine_randomness(&uniform);
        assert!((g.h_inf_joint - 2.0).abs() < 1e-15);
        assert!((g.h_inf_conditional - 1.0).abs() < 1e-15);
        let det = JointDistribution::new(CircuitSetting::T1T2, [[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let g = genuine_randomness(&det);
        assert_eq!(g.h_inf_joint, 0.0);
        assert_eq!(g.h_inf_conditional, 0.0);
        assert!(g.degenerate);
    }

    #[test]
    fn entropy_at_maximal_violation() {
        let j = exact_joint(CircuitSetting::T1T2, &QubitState::protocol_pure(), -75.922, -75.922).unwrap();
        let g = genuine_randomness(&j);
        assert!(g.h_inf_joint >= 0.4150);
        assert!(g.h_inf_conditional <= g.h_inf_joint);
    }

    #[test]
    fn bound_endpoints_and_domain() {
        assert_eq!(randomness_bound(1.0).unwrap(), 0.0);
        assert!((randomness_bound(1.5).unwrap() - 0.415_037_499_278_843_8).abs() < 1e-12);
        assert!(matches!(randomness_bound(1.5000001), Err(Error::Domain(_))));
        assert!(matches!(randomness_bound(0.9), Err(Error::Domain(_))));
    }

    #[test]
    fn certificate_requires_violation_and_nsit() {
        let run = run_experiment(&ProtocolParams::new(QubitState::protocol_pure(), 0.0, 0.0), 2000, 9, None).unwrap();
        let cert = run.certificate();
        assert!(!cert.certified);
        assert_eq!(cert.bound, 0.0);
    }

    #[test]
    fn seed_sweep_rejects_zero_length() {
        assert!(seed_sweep(&params(0.1, 0.2), &[0], 3, 1, None).is_err());
        let rows = seed_sweep(&params(0.1, 0.2), &[1], 50, 1, None).unwrap();
        // One shot gives a single ±1 product: the estimate is 0 or ±1.
        assert!(rows[0].spread > 0.3);
    }
}
