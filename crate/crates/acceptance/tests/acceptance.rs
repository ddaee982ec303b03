//! Acceptance suite. Runs every criterion at its pinned tolerance and prints
//! one `[PASS]` / `[FAIL]` line per criterion. Exits non-zero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use serde_json::json;
use xyz_tradeoff::analysis::{self, Figure, SweepConfig, SweepRow};
use xyz_tradeoff::measures::{self, MeasureRecord};
use xyz_tradeoff::model::{self, ModelParams};
use xyz_tradeoff::Route;
use xyz_tradeoff_acceptance::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn base() -> ModelParams {
    ModelParams::default()
}

/// Records of every figure trajectory, per route, computed once.
fn figure_rows() -> &'static Vec<(Figure, Route, Vec<SweepRow>)> {
    static ROWS: OnceLock<Vec<(Figure, Route, Vec<SweepRow>)>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let mut out = Vec::new();
        for fig in Figure::ALL {
            for route in [Route::Analytic, Route::Integrator] {
                let config = SweepConfig { routes: vec![route], ..fig.sweep_config(analysis::FIG2_P_NODES).unwrap() };
                out.push((fig, route, analysis::run_sweep(&config).expect("figure sweep")));
            }
        }
        out
    })
}

fn random_corpus() -> &'static Vec<(usize, Vec<MeasureRecord>)> {
    static CORPUS: OnceLock<Vec<(usize, Vec<MeasureRecord>)>> = OnceLock::new();
    CORPUS.get_or_init(|| (1..=4).map(|rank| (rank, analysis::random_records(rank, SAMPLES, SEED).unwrap())).collect())
}

fn all_records() -> impl Iterator<Item = &'static MeasureRecord> {
    random_corpus()
        .iter()
        .flat_map(|(_, r)| r.iter())
        .chain(figure_rows().iter().flat_map(|(_, _, rows)| rows.iter().map(|r| &r.record)))
}

fn records_for(params: &ModelParams, route: Route, times: &[f64]) -> Vec<MeasureRecord> {
    let traj = analysis::build_trajectory(params, times, route, DT).expect("trajectory");
    analysis::measure_trajectory(&traj).expect("measures")
}

fn default_grid() -> Vec<f64> {
    analysis::time_grid(analysis::DEFAULT_T_END, analysis::DEFAULT_NODES).unwrap()
}

fn c1_conservation_identity() -> Outcome {
    let random_max = random_corpus().iter().flat_map(|(_, r)| r.iter()).map(|r| r.residual.abs()).fold(0.0, f64::max);
    let figure_max = figure_rows()
        .iter()
        .flat_map(|(_, _, rows)| rows.iter())
        .map(|r| r.record.residual.abs())
        .fold(0.0, f64::max);
    let n = all_records().count();
    outcome(
        random_max <= RESIDUAL_TOL && figure_max <= RESIDUAL_TOL,
        format!("max |IC^2+F^2-purity| random {random_max:.2e}, figures {figure_max:.2e} over {n} records (tol {RESIDUAL_TOL:.0e})"),
    )
}

fn c2_lower_bound() -> Outcome {
    let worst = all_records().map(|r| r.lower_gap()).fold(f64::NEG_INFINITY, f64::max);
    outcome(worst <= LOWER_BOUND_TOL, format!("max C-IC = {worst:.3e} (tol {LOWER_BOUND_TOL:.0e})"))
}

fn c3_upper_bound_falsification() -> Outcome {
    let times = default_grid();
    let mut parts = Vec::new();
    let mut pass = true;
    for gamma in [0.0, analysis::DAMPED_GAMMA] {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for p in analysis::time_grid(1.0, analysis::FIG2_P_NODES).unwrap() {
            let params = ModelParams { chi: 1.0, gamma, p, ..base() };
            for r in records_for(&params, Route::Analytic, &times) {
                if r.upper_excess() > best.0 {
                    best = (r.upper_excess(), p, r.t);
                }
            }
        }
        pass &= best.0 > UPPER_FALSIFY_MIN;
        parts.push(format!("gamma={gamma}: max IC-sqrt((1+C^2)/2) = {:.3e} at p={}, t={}", best.0, best.1, best.2));
    }
    outcome(pass, format!("{} (need > {UPPER_FALSIFY_MIN:.0e} for each)", parts.join("; ")))
}

fn c4_rank_dependence() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (rank, records) in random_corpus().iter().filter(|(rank, _)| *rank <= 2) {
        let flagged = records.iter().filter(|r| r.upper_excess() > RANK_VIOLATION_THRESHOLD).count();
        let intervals = analysis::find_violations(records, &base()).len();
        let max = records.iter().map(|r| r.upper_excess()).fold(f64::NEG_INFINITY, f64::max);
        pass &= flagged == 0 && intervals == 0;
        parts.push(format!("rank {rank}: {flagged} violations, max excess {max:.3e}"));
    }
    outcome(pass, parts.join("; "))
}

fn c5_pure_complementarity() -> Outcome {
    let audit = analysis::audit_pure(SAMPLES, SEED).unwrap();
    outcome(
        audit.max_complementarity <= PURE_COMPLEMENTARITY_TOL && audit.max_route_gap <= PURE_ROUTE_TOL,
        format!(
            "max |C^2+F^2-1| = {:.2e} (tol {PURE_COMPLEMENTARITY_TOL:.0e}), max |C_pure-C_mixed| = {:.2e} (tol {PURE_ROUTE_TOL:.0e})",
            audit.max_complementarity, audit.max_route_gap
        ),
    )
}

fn c6_separable_line() -> Outcome {
    let times = default_grid();
    let mut worst = (0.0, 0.0, 0.0, 0.0);
    for chi in [0.0, 0.5, 1.0] {
        for gamma in [0.0, analysis::DAMPED_GAMMA] {
            let params = ModelParams { chi, gamma, p: 0.0, ..base() };
            for r in records_for(&params, Route::Analytic, &times) {
                if r.concurrence > worst.0 {
                    worst = (r.concurrence, chi, gamma, r.t);
                }
            }
        }
    }
    outcome(
        worst.0 <= SEPARABLE_C_TOL,
        format!("p=0: max C = {:.6} at chi={}, gamma={}, t={} (tol {SEPARABLE_C_TOL:.0e})", worst.0, worst.1, worst.2, worst.3),
    )
}

fn c7_bell_line() -> Outcome {
    let params = ModelParams { p: 1.0, gamma: 0.0, chi: 1.0, ..base() };
    let gap = records_for(&params, Route::Analytic, &default_grid())
        .iter()
        .map(|r| (r.concurrence - r.intrinsic_concurrence).abs())
        .fold(0.0, f64::max);
    // Independent closed form for the minimum.
    let u_oracle = (params.jx + params.jy) / ((params.jx + params.jy).powi(2) + 4.0 * params.chi * params.chi).sqrt();
    let dense = analysis::time_grid(analysis::DEFAULT_T_END, BELL_DENSE_NODES).unwrap();
    let min_c = dense
        .iter()
        .map(|&t| measures::concurrence(&model::analytic_state(&params, t).unwrap()).unwrap())
        .fold(f64::INFINITY, f64::min);
    outcome(
        gap <= BELL_C_IC_TOL && (min_c - u_oracle).abs() <= BELL_MIN_TOL,
        format!("max |C-IC| = {gap:.2e}; dense min C = {min_c:.10} vs u = {u_oracle:.10}"),
    )
}

fn c8_unitary_cross_validation() -> Outcome {
    let times = default_grid();
    let mut points: Vec<ModelParams> = Figure::Fig3.sweep_config(analysis::FIG2_P_NODES).unwrap().grid_points();
    points.extend(
        Figure::Fig2
            .sweep_config(analysis::FIG2_P_NODES)
            .unwrap()
            .grid_points()
            .into_iter()
            .filter(|p| p.gamma == 0.0),
    );
    let mut worst = (0.0, base());
    for params in &points {
        let trajs: Vec<_> = [Route::Analytic, Route::Propagator, Route::Integrator]
            .iter()
            .map(|&route| analysis::build_trajectory(params, &times, route, DT).unwrap())
            .collect();
        for i in 0..times.len() {
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                let d = trajs[a].states[i].matrix().max_abs_diff(trajs[b].states[i].matrix());
                if d > worst.0 {
                    worst = (d, *params);
                }
            }
        }
    }
    outcome(
        worst.0 <= ROUTE_AGREEMENT_TOL,
        format!(
            "{} (p,chi) points: max pairwise element deviation {:.2e} at p={}, chi={} (tol {ROUTE_AGREEMENT_TOL:.0e})",
            points.len(),
            worst.0,
            worst.1.p,
            worst.1.chi
        ),
    )
}

fn c9_dissipative_ground_truth() -> Outcome {
    let mut max_drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut report = Vec::new();
    let mut max_dev: f64 = 0.0;
    for params in Figure::Fig4.sweep_config(analysis::FIG2_P_NODES).unwrap().grid_points() {
        let cmp = analysis::compare_routes(&params, analysis::DEFAULT_T_END, DT).unwrap();
        let traj = analysis::build_trajectory(&params, &cmp.times, Route::Integrator, DT).unwrap();
        max_drift = max_drift.max(traj.max_trace_drift());
        min_eig = min_eig.min(traj.min_eigenvalue().unwrap());
        max_dev = max_dev.max(cmp.max_deviation);
        report.push(json!({ "p": params.p, "chi": params.chi, "gamma": params.gamma, "max_deviation": cmp.max_deviation }));
    }
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("analytic_vs_integrator_gamma0.25.json");
    let doc = json!({ "schema": 1, "dt": DT, "t_end": analysis::DEFAULT_T_END, "panels": report });
    fs::write(&path, xyz_tradeoff::cli::to_json_string(&doc)).unwrap();
    outcome(
        max_drift <= DAMPED_TRACE_TOL && min_eig >= DAMPED_MIN_EIG && path.exists(),
        format!(
            "trace drift {max_drift:.2e}, min eigenvalue {min_eig:.2e}; analytic vs integrator max deviation {max_dev:.3e} archived at {}",
            path.display()
        ),
    )
}

fn describe(deaths: &[(f64, f64)]) -> String {
    let shown: Vec<String> = deaths.iter().take(4).map(|(a, b)| format!("[{a:.3},{b:.3}]")).collect();
    format!("{} intervals {}{}", deaths.len(), shown.join(" "), if deaths.len() > 4 { " ..." } else { "" })
}

fn c10_death_and_revival() -> Outcome {
    let times = default_grid();
    let undamped = records_for(&ModelParams { p: 0.33, chi: 1.0, gamma: 0.0, ..base() }, Route::Analytic, &times);
    let deaths0 = analysis::death_intervals(&undamped);
    let revival = deaths0.iter().any(|&(_, end)| analysis::revives_after(&undamped, end));
    let min_c0 = undamped.iter().map(|r| r.concurrence).fold(f64::INFINITY, f64::min);

    let damped =
        records_for(&ModelParams { p: 0.33, chi: 1.0, gamma: analysis::DAMPED_GAMMA, ..base() }, Route::Analytic, &times);
    let deaths1 = analysis::death_intervals(&damped);
    let final_death = deaths1.last().copied();
    let no_late_revival = final_death.is_some_and(|(start, _)| !analysis::revives_after(&damped, start));

    outcome(
        !deaths0.is_empty() && revival && no_late_revival,
        format!(
            "gamma=0: {} (min C {min_c0:.2e}, threshold {DEATH_THRESHOLD:.0e}), revival {revival}; gamma=0.25: {}, no revival after final death {no_late_revival}",
            describe(&deaths0),
            describe(&deaths1)
        ),
    )
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("xyz-tradeoff").chain(args.iter().copied());
    let code = xyz_tradeoff::cli::run(argv, &mut out, &mut err);
    assert_eq!(code, 0, "{args:?}: {}", String::from_utf8_lossy(&err));
    out
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c11_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_cli(&["figure", "fig3", "--out", a.path().to_str().unwrap()]);
    run_cli(&["figure", "fig3", "--out", b.path().to_str().unwrap()]);
    let (fa, fb) = (dir_contents(a.path()), dir_contents(b.path()));
    let audit1 = run_cli(&["random-audit", "--seed", "7"]);
    let audit2 = run_cli(&["random-audit", "--seed", "7"]);
    outcome(
        fa == fb && fa.len() == 13 && audit1 == audit2 && !audit1.is_empty(),
        format!(
            "fig3: {} files identical {}; random-audit --seed 7: {} bytes identical {}",
            fa.len(),
            fa == fb,
            audit1.len(),
            audit1 == audit2
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("conservation identity", c1_conservation_identity),
        ("lower bound C <= IC", c2_lower_bound),
        ("upper bound falsification", c3_upper_bound_falsification),
        ("rank-1/rank-2 upper bound", c4_rank_dependence),
        ("pure-state complementarity", c5_pure_complementarity),
        ("separable line C = 0", c6_separable_line),
        ("Bell line C = IC", c7_bell_line),
        ("unitary cross-validation", c8_unitary_cross_validation),
        ("dissipative ground truth", c9_dissipative_ground_truth),
        ("death and revival", c10_death_and_revival),
        ("determinism", c11_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let start = Instant::now();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {:>2} {name}: {} ({:.1}s)",
            if result.pass { "PASS" } else { "FAIL" },
            k + 1,
            result.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
