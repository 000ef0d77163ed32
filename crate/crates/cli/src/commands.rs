use std::path::Path;

use lgcert::mitigation::{
    build_calibration, mitigated_report, predicted_rmse_ratio, rmse_experiment, CalibrationMethod, CorrectionMode,
};
use lgcert::noise::{z_noise_sweep, NoiseModel, SweepMode};
use lgcert::protocol::{evaluate, exact_joint, CircuitSetting, LgiReport, Marginal, ProtocolParams, EMPIRICAL_NSIT_TOLERANCE};
use lgcert::qcore::QubitState;
use lgcert::reference::{AngleUnit, ReferenceRow, MIXED_STATE_TABLE, PURE_STATE_TABLE, TABLE_ANGLE_UNIT};
use lgcert::rng::derive_seed;
use lgcert::sampler::{certify, extract_bits, run_experiment, seed_sweep, setting_seed, RandomnessCertificate};
use lgcert::solver::{enumerate_families, solve_angles, InitialStateSpec, SolveRequest};
use lgcert::stats::stat_tests;
use lgcert::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{num, Artifacts};
use crate::config::*;

/// How a command that ran to completion ended.
pub enum Status {
    Done,
    NotCertified,
}

/// Calibration seed tag for `mitigate-demo --calibration-shots`.
const CALIBRATION_TAG: u64 = 0xCA1B;

pub fn seeds(config: &RunConfig) -> Value {
    let per_setting = |seed: u64| -> Value { CircuitSetting::ALL.iter().map(|&s| setting_seed(seed, s)).collect() };
    match config {
        RunConfig::Solve(a) => json!({ "seed": a.seed }),
        RunConfig::Run(a) => json!({ "seed": a.seed, "per_run": "derive_seed(seed, [target_index, rep])" }),
        RunConfig::Bits(a) => json!({ "seed": a.seed, "per_setting": per_setting(a.seed) }),
        RunConfig::Certify(a) => json!({ "seed": a.seed, "per_setting": per_setting(a.seed) }),
        RunConfig::NoiseSweep(a) => json!({ "seed": a.seed }),
        RunConfig::SeedSweep(a) => json!({ "seed": a.seed, "per_rep": "derive_seed(seed, [length, rep])" }),
        RunConfig::Bell(a) => json!({ "seed": a.seed }),
        RunConfig::MitigateDemo(a) => json!({
            "seed": a.seed,
            "per_run": "derive_seed(seed, [target_index, rep])",
            "calibration": a.calibration_shots.map(|_| derive_seed(a.seed, &[CALIBRATION_TAG])),
        }),
        RunConfig::Stats(_) => Value::Null,
    }
}

pub fn execute(config: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    match config {
        RunConfig::Solve(a) => solve(a, out),
        RunConfig::Run(a) => run(a, out),
        RunConfig::Bits(a) => bits(a, out),
        RunConfig::Certify(a) => certify_cmd(a, out),
        RunConfig::NoiseSweep(a) => noise_sweep(a, out),
        RunConfig::SeedSweep(a) => seed_sweep_cmd(a, out),
        RunConfig::Bell(a) => bell(a, out),
        RunConfig::MitigateDemo(a) => mitigate_demo(a, out),
        RunConfig::Stats(a) => stats(a, out),
    }
}

fn resolve_noise(spec: &str) -> Result<NoiseModel> {
    match spec {
        "ideal" => Ok(NoiseModel::ideal()),
        "device-like" => Ok(NoiseModel::device_like()),
        "device-like-readout" => Ok(NoiseModel::readout_only(NoiseModel::device_like().readout)),
        path => NoiseModel::load(Path::new(path)),
    }
}

fn noise_option(noise: &NoiseModel) -> Option<&NoiseModel> {
    (!noise.is_ideal()).then_some(noise)
}

fn reference_table(state: &InitialStateSpec) -> Option<&'static [ReferenceRow; 10]> {
    match state {
        InitialStateSpec::PureProtocol | InitialStateSpec::PureConjugate => Some(&PURE_STATE_TABLE),
        InitialStateSpec::MaximallyMixed => Some(&MIXED_STATE_TABLE),
        InitialStateSpec::Bloch { .. } => None,
    }
}

fn table_row(state: &InitialStateSpec, lgi: f64) -> Option<ReferenceRow> {
    reference_table(state)?.iter().find(|r| (r.lgi - lgi).abs() < 1e-9).copied()
}

fn resolve_point(p: &PointArgs, default_row: f64) -> Result<ProtocolParams> {
    let state = p.state.state()?;
    if let (Some(t1), Some(t2)) = (p.theta1, p.theta2) {
        let unit = AngleUnit::from(p.unit);
        return Ok(ProtocolParams::new(state, unit.to_radians(t1), unit.to_radians(t2)));
    }
    let lgi = p.row.unwrap_or(default_row);
    let row = table_row(&p.state, lgi).ok_or_else(|| {
        Error::Validation(format!("no reference row {lgi} for this state; pass --theta1 and --theta2"))
    })?;
    let (t1, t2) = row.angles(TABLE_ANGLE_UNIT);
    Ok(ProtocolParams::new(state, t1, t2))
}

fn signature_distance(state: &QubitState, a: (f64, f64), b: (f64, f64)) -> f64 {
    CircuitSetting::TWO_TIME
        .iter()
        .map(|&s| {
            let pa = exact_joint(s, state, a.0, a.1).expect("two-time setting").p;
            let pb = exact_joint(s, state, b.0, b.1).expect("two-time setting").p;
            pa.iter().flatten().zip(pb.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn solve(a: &SolveArgs, out: &mut Artifacts) -> Result<Status> {
    let targets = match (a.target, &a.grid) {
        (Some(t), _) => vec![t],
        (None, Some(g)) => g.0.clone(),
        (None, None) => lgcert::reference::target_grid(),
    };
    let unit = AngleUnit::from(a.unit);
    let state = a.state.state()?;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut family_rows = Vec::new();
    let mut json_families = Vec::new();
    for &target in &targets {
        let table_guess = table_row(&a.state, target).filter(|_| !a.no_table_guess).map(|row| {
            let (t1, t2) = row.angles(TABLE_ANGLE_UNIT);
            (unit.from_radians(t1), unit.from_radians(t2))
        });
        let req = SolveRequest {
            unit_mode: unit,
            seed_grid: a.starts,
            seed: a.seed,
            initial_guess: a.guess.or(table_guess),
            fixed_theta2: a.fixed_theta2,
            ..SolveRequest::new(target, a.state)
        };
        let s = solve_angles(&req)?;
        let report = evaluate(&state, s.theta1, s.theta2);
        let (t1, t2) = s.angles_in(unit);
        let reference = table_row(&a.state, target).map(|row| {
            let angles = row.angles(TABLE_ANGLE_UNIT);
            let lgi = evaluate(&state, angles.0, angles.1).lgi_value;
            (row, lgi, signature_distance(&state, (s.theta1, s.theta2), angles))
        });
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        rows.push(vec![
            num(target),
            num(t1),
            num(t2),
            num(s.achieved_lgi),
            num(s.max_nsit_residual),
            num(s.residual_norm),
            s.iterations.to_string(),
            s.start_index.to_string(),
            num(report.c12),
            num(report.c23),
            num(report.c13),
            opt(reference.map(|r| r.0.theta1)),
            opt(reference.map(|r| r.0.theta2)),
            opt(reference.map(|r| r.1)),
            opt(reference.map(|r| r.2)),
        ]);
        json_rows.push(json!({
            "target": target,
            "theta1": t1,
            "theta2": t2,
            "result": s,
            "report": report,
            "reference_row": reference.map(|r| json!({
                "theta1": r.0.theta1,
                "theta2": r.0.theta2,
                "evaluated_lgi": r.1,
                "signature_distance": r.2,
            })),
        }));
        println!(
            "target {target}: theta=({t1:.6}, {t2:.6}) LGI={:.10} NSIT={:.2e}",
            s.achieved_lgi, s.max_nsit_residual
        );
        if a.families {
            let fams = enumerate_families(&req)?;
            for (k, f) in fams.iter().enumerate() {
                family_rows.push(vec![
                    num(target),
                    k.to_string(),
                    num(unit.from_radians(f.theta1)),
                    num(unit.from_radians(f.theta2)),
                    num(f.achieved_lgi),
                    num(f.max_nsit_residual),
                    f.members.to_string(),
                ]);
            }
            json_families.push(json!({ "target": target, "families": fams }));
        }
    }
    out.csv(
        "solve.csv",
        &[
            "target",
            "theta1",
            "theta2",
            "achieved_lgi",
            "max_nsit_residual",
            "residual_norm",
            "iterations",
            "start_index",
            "c12",
            "c23",
            "c13",
            "table_theta1",
            "table_theta2",
            "table_evaluated_lgi",
            "table_signature_distance",
        ],
        &rows,
    )?;
    let mut doc = json!({ "unit": unit, "state": a.state, "rows": json_rows });
    if a.families {
        out.csv(
            "families.csv",
            &["target", "family", "theta1", "theta2", "achieved_lgi", "max_nsit_residual", "members"],
            &family_rows,
        )?;
        doc["families"] = Value::Array(json_families);
    }
    out.json("solve.json", doc)?;
    Ok(Status::Done)
}

fn grid_targets(grid: &Option<Grid>, state: &InitialStateSpec, seed: u64) -> Result<Vec<(f64, ProtocolParams)>> {
    let initial = state.state()?;
    match grid {
        Some(g) => g
            .0
            .iter()
            .map(|&target| {
                let s = solve_angles(&SolveRequest { seed, ..SolveRequest::new(target, *state) })?;
                Ok((target, ProtocolParams::new(initial, s.theta1, s.theta2)))
            })
            .collect(),
        None => {
            let table = reference_table(state).ok_or_else(|| {
                Error::Validation("no reference table for a custom Bloch state; pass --grid".into())
            })?;
            Ok(table
                .iter()
                .map(|row| {
                    let (t1, t2) = row.angles(TABLE_ANGLE_UNIT);
                    (row.lgi, ProtocolParams::new(initial, t1, t2))
                })
                .collect())
        }
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn run(a: &RunArgs, out: &mut Artifacts) -> Result<Status> {
    if a.reps == 0 {
        return Err(Error::Validation("--reps must be ≥ 1".into()));
    }
    let targets = grid_targets(&a.grid, &a.state, a.seed)?;
    let noise = resolve_noise(&a.noise.noise)?;
    let cal = if a.mitigate { Some(build_calibration(&noise, 1, CalibrationMethod::Exact)?) } else { None };
    let mode = CorrectionMode::from(a.mode);
    let mut summary = Vec::new();
    let mut reps = Vec::new();
    let mut json_rows = Vec::new();
    for (i, (target, params)) in targets.iter().enumerate() {
        let expected = evaluate(&params.initial, params.theta1, params.theta2).lgi_value;
        let (mut lgi, mut nsit, mut h, mut mit) = (vec![], vec![], vec![], vec![]);
        for r in 0..a.reps {
            let seed = derive_seed(a.seed, &[i as u64, r as u64]);
            let run = run_experiment(params, a.shots, seed, noise_option(&noise))?;
            let cert = run.certificate();
            let mut row = vec![
                num(*target),
                r.to_string(),
                seed.to_string(),
                num(run.report.lgi_value),
                num(run.report.nsit_residuals[0]),
                num(run.report.nsit_residuals[1]),
                num(run.report.nsit_residuals[2]),
                num(cert.h_inf_joint),
                num(cert.h_inf_conditional),
                num(cert.bound),
                cert.certified.to_string(),
            ];
            if let Some(cal) = &cal {
                let m = mitigated_report(&run, cal, mode)?.lgi_value;
                row.push(num(m));
                mit.push(m);
            }
            reps.push(row);
            lgi.push(run.report.lgi_value);
            nsit.push(run.report.max_nsit_residual());
            h.push(cert.h_inf_joint);
        }
        let (mean, sd) = mean_sd(&lgi);
        let mean_nsit = nsit.iter().sum::<f64>() / nsit.len() as f64;
        let mean_h = h.iter().sum::<f64>() / h.len() as f64;
        let mut row = vec![
            num(*target),
            num(expected),
            num(params.theta1),
            num(params.theta2),
            num(mean),
            num(sd),
            num(mean_nsit),
            num(mean_h),
        ];
        let mut doc = json!({
            "target": target,
            "expected": expected,
            "theta1": params.theta1,
            "theta2": params.theta2,
            "mean_lgi": mean,
            "sd_lgi": sd,
            "mean_max_nsit": mean_nsit,
            "mean_h_inf_joint": mean_h,
        });
        if a.mitigate {
            let (m_mean, m_sd) = mean_sd(&mit);
            row.extend([num(m_mean), num(m_sd)]);
            doc["mitigated_mean_lgi"] = json!(m_mean);
            doc["mitigated_sd_lgi"] = json!(m_sd);
            println!("target {target}: raw {mean:.4} ± {sd:.4}, mitigated {m_mean:.4} ± {m_sd:.4}");
        } else {
            println!("target {target}: {mean:.4} ± {sd:.4} (expected {expected:.4}), NSIT {mean_nsit:.2e}");
        }
        summary.push(row);
        json_rows.push(doc);
    }
    let mut header = vec![
        "target",
        "expected_lgi",
        "theta1",
        "theta2",
        "mean_lgi",
        "sd_lgi",
        "mean_max_nsit",
        "mean_h_inf_joint",
    ];
    let mut rep_header = vec![
        "target",
        "rep",
        "seed",
        "lgi",
        "nsit_t2",
        "nsit_t3",
        "nsit_t3_given_t1",
        "h_inf_joint",
        "h_inf_conditional",
        "bound",
        "certified",
    ];
    if a.mitigate {
        header.extend(["mitigated_mean_lgi", "mitigated_sd_lgi"]);
        rep_header.push("mitigated_lgi");
    }
    out.csv("run_summary.csv", &header, &summary)?;
    out.csv("run_reps.csv", &rep_header, &reps)?;
    out.json(
        "run.json",
        json!({
            "n_shots": a.shots,
            "repetitions": a.reps,
            "noise": noise,
            "mitigation": a.mitigate.then_some(mode),
            "rows": json_rows,
        }),
    )?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct CertificateDoc<'a> {
    params: &'a ProtocolParams,
    n_shots: usize,
    noise: &'a NoiseModel,
    report: &'a LgiReport,
    certificate: &'a RandomnessCertificate,
}

fn bits(a: &BitsArgs, out: &mut Artifacts) -> Result<Status> {
    let params = resolve_point(&a.point, 1.5)?;
    let noise = resolve_noise(&a.noise.noise)?;
    let run = run_experiment(&params, a.shots, a.seed, noise_option(&noise))?;
    let cert = run.certificate();
    let stream = extract_bits(run.two_time_records(), a.policy.into());
    let doc = CertificateDoc { params: &params, n_shots: a.shots, noise: &noise, report: &run.report, certificate: &cert };
    let mut value = serde_json::to_value(&doc)?;
    value["n_bits"] = json!(stream.len());
    value["bit_file_written"] = json!(cert.certified || a.force);
    out.json("certificate.json", value)?;
    println!(
        "LGI {:.4}, H∞ {:.4} ≥ bound {:.4}: certified={}",
        cert.lgi_value, cert.h_inf_joint, cert.bound, cert.certified
    );
    if cert.certified || a.force {
        out.binary("bits.bin", &stream.to_packed_bytes(), &stream.provenance)?;
        println!("wrote {} bits to {}", stream.len(), out.path("bits.bin").display());
    } else {
        println!("not certified; no bit file written (use --force to override)");
    }
    Ok(if cert.certified { Status::Done } else { Status::NotCertified })
}

fn certify_cmd(a: &CertifyArgs, out: &mut Artifacts) -> Result<Status> {
    let params = resolve_point(&a.point, 1.5)?;
    let noise = resolve_noise(&a.noise.noise)?;
    let run = run_experiment(&params, a.shots, a.seed, noise_option(&noise))?;
    let report = if a.tamper_marginal != 0.0 {
        let m = &run.marginals[0];
        let shifted = Marginal {
            p_plus: m.p_plus + a.tamper_marginal,
            p_minus: m.p_minus - a.tamper_marginal,
            ..*m
        };
        if !(0.0..=1.0).contains(&shifted.p_plus) || !(0.0..=1.0).contains(&shifted.p_minus) {
            return Err(Error::Domain(format!("marginal shift {} leaves [0, 1]", a.tamper_marginal)));
        }
        LgiReport::from_results(
            &run.joints[0],
            &run.joints[1],
            &run.joints[2],
            &shifted,
            &run.marginals[1],
            EMPIRICAL_NSIT_TOLERANCE,
        )?
    } else {
        run.report.clone()
    };
    let cert = certify(&report, &run.randomness);
    let doc = CertificateDoc { params: &params, n_shots: a.shots, noise: &noise, report: &report, certificate: &cert };
    let mut value = serde_json::to_value(&doc)?;
    value["tamper_marginal"] = json!(a.tamper_marginal);
    out.json("certificate.json", value)?;
    println!(
        "LGI {:.4}, NSIT pass {}, H∞ {:.4} ≥ bound {:.4}: certified={}",
        cert.lgi_value, cert.nsit_pass, cert.h_inf_joint, cert.bound, cert.certified
    );
    Ok(if cert.certified { Status::Done } else { Status::NotCertified })
}

fn noise_sweep(a: &NoiseSweepArgs, out: &mut Artifacts) -> Result<Status> {
    let params = resolve_point(&a.point, 1.4)?;
    let analytic = z_noise_sweep(&params, &a.grid.0, SweepMode::Analytic)?;
    let sampled = match a.shots {
        Some(n) => Some(z_noise_sweep(&params, &a.grid.0, SweepMode::Sampled { n_shots: n, seed: a.seed })?),
        None => None,
    };
    let mut header = vec!["p", "lgi_analytic"];
    if sampled.is_some() {
        header.push("lgi_sampled");
    }
    let rows: Vec<Vec<String>> = analytic
        .iter()
        .enumerate()
        .map(|(k, pt)| {
            let mut row = vec![num(pt.p), num(pt.lgi)];
            if let Some(s) = &sampled {
                row.push(num(s[k].lgi));
            }
            row
        })
        .collect();
    for pt in &analytic {
        println!("p={:.3}: LGI {:.6}", pt.p, pt.lgi);
    }
    out.csv("noise_sweep.csv", &header, &rows)?;
    out.json(
        "noise_sweep.json",
        json!({ "params": params, "n_shots": a.shots, "analytic": analytic, "sampled": sampled }),
    )?;
    Ok(Status::Done)
}

/// Least-squares slope of `ln y` against `ln x` over positive points.
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn seed_sweep_cmd(a: &SeedSweepArgs, out: &mut Artifacts) -> Result<Status> {
    let params = resolve_point(&a.point, 1.4)?;
    let noise = resolve_noise(&a.noise.noise)?;
    let lengths = match &a.lengths {
        Some(l) => l.0.clone(),
        None => (1..=6).map(|k| 10usize.pow(k)).collect(),
    };
    let rows = seed_sweep(&params, &lengths, a.reps, a.seed, noise_option(&noise))?;
    let expected = lgcert::noise::analytic_noisy_report(&params, &noise)?.lgi_value;
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.length.to_string(), num(r.mean_lgi), num(r.spread), r.repetitions.to_string(), num(expected)])
        .collect();
    for r in &rows {
        println!("length {}: LGI {:.4} ± {:.4}", r.length, r.mean_lgi, r.spread);
    }
    let slope = log_log_slope(&rows.iter().map(|r| (r.length as f64, r.spread)).collect::<Vec<_>>());
    out.csv("seed_sweep.csv", &["length", "mean_lgi", "spread", "repetitions", "expected_lgi"], &csv)?;
    out.json(
        "seed_sweep.json",
        json!({ "params": params, "expected_lgi": expected, "spread_log_log_slope": slope, "rows": rows }),
    )?;
    Ok(Status::Done)
}

fn bell(a: &BellArgs, out: &mut Artifacts) -> Result<Status> {
    let cfg = lgcert::bell::BellConfig {
        theta_a: a.theta_a,
        theta_a_prime: a.theta_a_prime,
        theta_b: a.theta_b,
        theta_b_prime: a.theta_b_prime,
        n_rounds: a.rounds,
        seed: a.seed,
    };
    let result = lgcert::bell::chsh_run(&cfg)?;
    let rows: Vec<Vec<String>> = result
        .rounds
        .iter()
        .enumerate()
        .map(|(k, r)| vec![k.to_string(), r.x.to_string(), r.y.to_string(), r.a.to_string(), r.b.to_string()])
        .collect();
    out.csv("bell_rounds.csv", &["round", "x", "y", "a", "b"], &rows)?;
    out.json(
        "bell.json",
        json!({
            "s": result.s,
            "sigma": result.sigma,
            "analytic_s": result.analytic_s,
            "correlations": result.correlations,
            "counts": result.counts,
            "config": result.config,
            "certified": false,
            "note": "Bell outcomes from one device without spatial separation are not certifiable randomness.",
        }),
    )?;
    println!("S = {:.4} ± {:.4} (analytic {:.4}); certified=false", result.s, result.sigma, result.analytic_s);
    Ok(Status::Done)
}

fn mitigate_demo(a: &MitigateArgs, out: &mut Artifacts) -> Result<Status> {
    let noise = resolve_noise(&a.noise)?;
    let targets: Vec<(f64, ProtocolParams)> = PURE_STATE_TABLE
        .iter()
        .map(|row| {
            let (t1, t2) = row.angles(TABLE_ANGLE_UNIT);
            (row.lgi, ProtocolParams::new(QubitState::protocol_pure(), t1, t2))
        })
        .collect();
    let method = match a.calibration_shots {
        Some(n) => CalibrationMethod::Empirical { n_shots: n, seed: derive_seed(a.seed, &[CALIBRATION_TAG]) },
        None => CalibrationMethod::Exact,
    };
    let report = rmse_experiment(&targets, &noise, a.shots, a.reps, a.seed, method, a.mode.into())?;
    let predicted = predicted_rmse_ratio(&targets, noise.readout.error_rate(), a.shots);
    let rows: Vec<Vec<String>> = report
        .per_target
        .iter()
        .map(|t| {
            vec![
                num(t.target),
                num(t.expected),
                num(t.raw_mean),
                num(t.raw_spread),
                num(t.mitigated_mean),
                num(t.mitigated_spread),
                num(t.rmse_raw),
                num(t.rmse_mitigated),
            ]
        })
        .collect();
    out.csv(
        "mitigation.csv",
        &[
            "target",
            "expected_lgi",
            "raw_mean",
            "raw_sd",
            "mitigated_mean",
            "mitigated_sd",
            "rmse_raw",
            "rmse_mitigated",
        ],
        &rows,
    )?;
    out.json("calibration.json", &report.calibration)?;
    out.json(
        "mitigation.json",
        json!({
            "rmse_raw": report.rmse_raw,
            "rmse_mitigated": report.rmse_mitigated,
            "observed_ratio": report.rmse_raw / report.rmse_mitigated,
            "predicted_ratio_symmetric_readout": predicted,
            "condition_number": report.calibration.condition_number(),
            "n_shots": report.n_shots,
            "repetitions": report.repetitions,
            "mode": report.mode,
            "noise": noise,
            "per_target": report.per_target,
        }),
    )?;
    println!(
        "RMSE raw {:.5} → mitigated {:.5} (ratio {:.2}, predicted {:.2})",
        report.rmse_raw,
        report.rmse_mitigated,
        report.rmse_raw / report.rmse_mitigated,
        predicted
    );
    Ok(Status::Done)
}

fn stats(a: &StatsArgs, out: &mut Artifacts) -> Result<Status> {
    let bytes = std::fs::read(&a.input)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", a.input.display())))?;
    let n_bits = match a.n_bits {
        Some(n) => n,
        None => {
            let mut side = a.input.clone().into_os_string();
            side.push(".json");
            match std::fs::read_to_string(&side) {
                Ok(text) => serde_json::from_str::<Value>(&text)?["n_bits"]
                    .as_u64()
                    .ok_or_else(|| Error::Validation("sidecar has no n_bits".into()))? as usize,
                Err(_) => bytes.len() * 8,
            }
        }
    };
    if n_bits > bytes.len() * 8 || n_bits == 0 {
        return Err(Error::Validation(format!("{n_bits} bits requested from a {}-byte file", bytes.len())));
    }
    let bits = lgcert::sampler::unpack_bits(&bytes, n_bits);
    let report = stat_tests(&bits, a.alpha);
    println!(
        "{} bits: monobit z={:.3} p={:.4} pass={}; runs z={:.3} p={:.4} pass={}",
        report.n_bits,
        report.monobit.z,
        report.monobit.p_value,
        report.monobit.pass,
        report.runs.z,
        report.runs.p_value,
        report.runs.pass
    );
    out.json("stats.json", json!({ "input_sha256": crate::artifacts::sha256_hex(&bytes), "report": report }))?;
    Ok(Status::Done)
}
