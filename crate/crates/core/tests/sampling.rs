use lgcert::noise::{ConfusionMatrix, NoiseModel};
use lgcert::protocol::{evaluate, exact_joint, CircuitSetting, LgiReport, Marginal, ProtocolParams, EMPIRICAL_NSIT_TOLERANCE};
use lgcert::qcore::{Outcome, QubitState};
use lgcert::reference::{PURE_STATE_TABLE, TABLE_ANGLE_UNIT};
use lgcert::sampler::{
    certify, estimate_joint, estimate_marginal, extract_bits, randomness_bound, run_experiment, run_shots,
    DiscardPolicy, ShotOutcomes,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table_params(lgi: f64) -> ProtocolParams {
    let row = PURE_STATE_TABLE.iter().find(|r| (r.lgi - lgi).abs() < 1e-9).unwrap();
    let (t1, t2) = row.angles(TABLE_ANGLE_UNIT);
    ProtocolParams::new(QubitState::protocol_pure(), t1, t2)
}

fn lgi_sigma(params: &ProtocolParams, n: usize) -> f64 {
    let r = evaluate(&params.initial, params.theta1, params.theta2);
    ([r.c12, r.c23, r.c13].iter().map(|c| 1.0 - c * c).sum::<f64>() / n as f64).sqrt()
}

/// 240 joint cells at 3σ: about 0.65 are expected outside by chance, so
/// more than two is a failure (chance ≈ 3%).
#[test]
fn million_shot_joints_match_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let mut outside = 0;
    for k in 0..20 {
        let v: [f64; 3] = loop {
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if v.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
                break v;
            }
        };
        let params = ProtocolParams::new(
            QubitState::from_bloch(v[0], v[1], v[2]).unwrap(),
            rng.gen_range(-3.2..3.2),
            rng.gen_range(-3.2..3.2),
        );
        for setting in CircuitSetting::TWO_TIME {
            let rec = run_shots(setting, &params, n, 1000 + k, None).unwrap();
            let est = estimate_joint(&rec).unwrap();
            let exact = exact_joint(setting, &params.initial, params.theta1, params.theta2).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let p = exact.p[i][j];
                    let sd = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
                    if (est.p[i][j] - p).abs() > 3.0 * sd {
                        outside += 1;
                    }
                }
            }
        }
    }
    assert!(outside <= 2, "{outside} of 240 cells outside 3σ");
}

#[test]
fn table_row_1_30_within_three_sigma() {
    let params = table_params(1.30);
    let run = run_experiment(&params, 50_000, 77, None).unwrap();
    let sigma = lgi_sigma(&params, 50_000);
    assert!((sigma - 0.006).abs() < 0.002);
    assert!((run.report.lgi_value - 1.30).abs() <= 3.0 * sigma, "{}", run.report.lgi_value);
}

#[test]
fn row_1_40_estimate_and_normalization() {
    let params = table_params(1.40);
    let run = run_experiment(&params, 50_000, 78, None).unwrap();
    assert!((run.report.lgi_value - 1.40).abs() <= 3.0 * lgi_sigma(&params, 50_000));
    for j in &run.joints {
        assert_eq!(j.p.iter().flatten().sum::<f64>(), 1.0);
    }
    for r in &run.records {
        assert_eq!(r.outcomes.len(), 50_000);
    }
}

#[test]
fn per_shot_readout_flips_match_matrix_product() {
    let r = 0.02;
    let noise = NoiseModel::readout_only(ConfusionMatrix::symmetric(r).unwrap());
    let params = ProtocolParams::new(QubitState::ket0(), 0.0, 0.0);
    let n = 1_000_000;
    let rec = run_shots(CircuitSetting::M2Only, &params, n, 9, Some(&noise)).unwrap();
    let m = estimate_marginal(&rec).unwrap();
    let sd = (r * (1.0 - r) / n as f64).sqrt();
    assert!((m.p_minus - r).abs() <= 3.0 * sd, "{}", m.p_minus);

    let rec = run_shots(CircuitSetting::T1T2, &params, n, 10, Some(&noise)).unwrap();
    let j = estimate_joint(&rec).unwrap();
    let expect = [[(1.0 - r) * (1.0 - r), (1.0 - r) * r], [r * (1.0 - r), r * r]];
    for a in 0..2 {
        for b in 0..2 {
            let p = expect[a][b];
            assert!((j.p[a][b] - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let params = table_params(1.45);
    let noise = NoiseModel::device_like();
    let run_in = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let run = run_experiment(&params, 200_000, 123, Some(&noise)).unwrap();
                let bits = extract_bits(run.two_time_records(), DiscardPolicy::FirstOfSubRun);
                (run, bits)
            })
    };
    let (a, bits_a) = run_in(1);
    let (b, bits_b) = run_in(3);
    let (c, bits_c) = run_in(8);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(bits_a.to_packed_bytes(), bits_b.to_packed_bytes());
    assert_eq!(bits_a.to_packed_bytes(), bits_c.to_packed_bytes());
}

#[test]
fn bit_stream_length_and_balance_at_maximal_violation() {
    let params = table_params(1.50);
    let n = 200_000;
    let run = run_experiment(&params, n, 5, None).unwrap();
    let bits = extract_bits(run.two_time_records(), DiscardPolicy::FirstOfSubRun);
    assert_eq!(bits.len(), 6 * n - 3);
    assert_eq!(bits.provenance.discarded, 3);
    assert_eq!(bits.provenance.settings, CircuitSetting::TWO_TIME.to_vec());
    // Outcomes are marginally uniform; the two bits of a shot agree with
    // probability (1 + c)/2, which inflates the variance of the ones count.
    let r = evaluate(&params.initial, params.theta1, params.theta2);
    let var: f64 = [r.c12, r.c23, r.c13].iter().map(|c| n as f64 * (2.0 + 2.0 * c) / 4.0).sum();
    let ones = bits.bits.iter().filter(|&&b| b == 1).count() as f64;
    let expected = bits.len() as f64 / 2.0;
    assert!((ones - expected).abs() <= 3.0 * var.sqrt(), "{ones} vs {expected}");
}

#[test]
fn deterministic_run_gives_zero_stream_and_no_certificate() {
    let params = ProtocolParams::new(QubitState::ket0(), 0.0, 0.0);
    let run = run_experiment(&params, 1000, 1, None).unwrap();
    let bits = extract_bits(run.two_time_records(), DiscardPolicy::FirstOfSubRun);
    assert!(bits.bits.iter().all(|&b| b == 0));
    assert!(!run.certificate().certified);
    let zero = run_experiment(&ProtocolParams::new(QubitState::protocol_pure(), 0.0, 0.0), 1000, 2, None).unwrap();
    assert!(!zero.certificate().certified);
}

#[test]
fn certification_at_1_40_over_seeds() {
    let params = table_params(1.40);
    let mut certified = 0;
    let mut above = 0;
    for seed in 0..100 {
        let cert = run_experiment(&params, 50_000, seed, None).unwrap().certificate();
        certified += usize::from(cert.certified);
        above += usize::from(cert.h_inf_joint >= cert.bound);
    }
    assert!(certified >= 95, "certified {certified}/100");
    assert!(above >= 95, "H∞ ≥ bound {above}/100");
}

#[test]
fn injected_signalling_breaks_certification() {
    let params = table_params(1.40);
    let run = run_experiment(&params, 50_000, 3, None).unwrap();
    assert!(run.certificate().certified);
    let shift = |m: &Marginal| Marginal {
        p_plus: m.p_plus + 0.05,
        p_minus: m.p_minus - 0.05,
        ..*m
    };
    let tampered = LgiReport::from_results(
        &run.joints[0],
        &run.joints[1],
        &run.joints[2],
        &shift(&run.marginals[0]),
        &run.marginals[1],
        EMPIRICAL_NSIT_TOLERANCE,
    )
    .unwrap();
    let cert = certify(&tampered, &run.randomness);
    assert!(!cert.nsit_pass);
    assert!(!cert.certified);
    assert!(cert.h_inf_joint > 0.0);
}

#[test]
fn certificate_clamps_above_quantum_maximum() {
    let params = table_params(1.50);
    let mut seen = false;
    for seed in 0..40 {
        let run = run_experiment(&params, 20_000, seed, None).unwrap();
        let cert = run.certificate();
        if run.report.lgi_value > 1.5 {
            seen = true;
            assert!(cert.lgi_above_quantum_max);
            assert_eq!(cert.bound, randomness_bound(1.5).unwrap());
        } else {
            assert!(!cert.lgi_above_quantum_max);
        }
    }
    assert!(seen, "no run fluctuated above 1.5");
}

#[test]
fn single_records_carry_single_outcomes() {
    let params = table_params(1.20);
    let rec = run_shots(CircuitSetting::M3Only, &params, 100, 4, None).unwrap();
    assert!(matches!(rec.outcomes, ShotOutcomes::Singles(ref v) if v.len() == 100));
    let m = estimate_marginal(&rec).unwrap();
    assert_eq!(m.p_plus + m.p_minus, 1.0);
    let ShotOutcomes::Singles(v) = &rec.outcomes else { unreachable!() };
    assert!(v.contains(&Outcome::Plus) && v.contains(&Outcome::Minus));
}
