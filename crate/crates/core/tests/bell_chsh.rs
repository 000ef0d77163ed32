use lgcert::bell::{analytic_chsh, analytic_correlation, chsh_run, summarize_rounds, BellConfig, TwoQubitState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sampled_s_within_three_sigma() {
    let cfg = BellConfig { n_rounds: 100_000, seed: 99, ..BellConfig::default() };
    let run = chsh_run(&cfg).unwrap();
    assert!((run.s - 2.0 * 2f64.sqrt()).abs() <= 3.0 * run.sigma, "{} ± {}", run.s, run.sigma);
    assert!(!run.certified);
    assert_eq!(run.counts.iter().sum::<usize>(), 100_000);
    let (s, e, counts, sigma) = summarize_rounds(&run.rounds);
    assert_eq!((s, e, counts, sigma), (run.s, run.correlations, run.counts, run.sigma));
}

#[test]
fn tsirelson_bound_holds_for_random_angles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..30 {
        let mut angle = || rng.gen_range(-3.2..3.2);
        let cfg = BellConfig {
            theta_a: angle(),
            theta_a_prime: angle(),
            theta_b: angle(),
            theta_b_prime: angle(),
            n_rounds: 20_000,
            seed: k,
        };
        let (s, _) = analytic_chsh(&cfg);
        assert!(s.abs() <= 2.0 * 2f64.sqrt() + 1e-12);
        let run = chsh_run(&cfg).unwrap();
        assert!(run.s.abs() <= 2.0 * 2f64.sqrt() + 3.0 * run.sigma);
    }
}

#[test]
fn correlation_convention() {
    let state = TwoQubitState::phi_plus();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (a, b) = (rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0));
        assert!((analytic_correlation(&state, a, b) - (2.0 * (a - b)).cos()).abs() <= 1e-12);
    }
}

#[test]
fn summary_serializes_uncertified_flag() {
    let run = chsh_run(&BellConfig { n_rounds: 10, ..BellConfig::default() }).unwrap();
    let json = serde_json::to_value(&run).unwrap();
    assert_eq!(json["certified"], serde_json::Value::Bool(false));
}
