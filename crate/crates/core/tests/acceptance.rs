//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any of them fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use shapeopt::constraints::{obstacle_volume, volume_residual, DIM};
use shapeopt::deform::Strategy;
use shapeopt::derivcheck::{check_lagrangian_gradient, probe_state};
use shapeopt::fem::{FESpace, Field};
use shapeopt::mesh::{deformed_design_points, mesh_quality, shoelace, upstream_tip, TriMesh};
use shapeopt::run::{self, Problem, HISTORY_FILE, NEWTON_FILE};
use shapeopt::solver::{backtrack_alpha, ContinuationLog};
use shapeopt::testing::{lb_eigen_error, stokes_mms_errors};
use shapeopt::RunConfig;

const DERIV_TOL: f64 = 1e-5;
const DERIV_BUDGET: Duration = Duration::from_secs(120);
const GRADIENT_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];
/// Observed order counted as 2.
const GRADIENT_MIN_ORDER: f64 = 1.8;
const MMS_MESHES: [usize; 4] = [8, 16, 32, 64];
const MMS_VELOCITY_ORDER: f64 = 2.7;
const MMS_PRESSURE_ORDER: f64 = 1.7;
const LB_CURVES: [usize; 3] = [20, 40, 80];
const LB_MIN_FACTOR: f64 = 3.5;
const SHOELACE_SAMPLES: usize = 50;
const SHOELACE_TOL: f64 = 1e-10;
const SHOELACE_MIN_J: f64 = 0.5;
const E2E_BUDGET: Duration = Duration::from_secs(15 * 60);
const GEO_TOL: f64 = 1e-8;
const MIN_J_SLACK: f64 = 1e-3;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn coarse_config() -> RunConfig {
    RunConfig {
        mesh: root().join("meshes/channel_coarse.msh"),
        ..Default::default()
    }
}

fn e2e_config() -> RunConfig {
    RunConfig {
        strategy: Strategy::S3,
        alpha_init: 1e-2,
        alpha_dec: 1.0 / 64.0,
        alpha_target: 1e-6,
        ..coarse_config()
    }
}

type Verdict = (bool, String);

fn derivatives() -> Verdict {
    let problem = Problem::new(&coarse_config()).unwrap();
    let t = Instant::now();
    let checks = run::check_derivatives(&problem).unwrap();
    let elapsed = t.elapsed();
    let worst = checks
        .iter()
        .map(|(_, c)| c.max_rel_error)
        .fold(0.0, f64::max);
    let uniform = checks
        .iter()
        .all(|(_, c)| c.active_points == 0 || c.active_points == c.total_points);
    let dirs = checks
        .iter()
        .all(|(_, c)| c.errors.len() == run::CHECK_DIRECTIONS);
    let pass = worst <= DERIV_TOL && uniform && dirs && elapsed <= DERIV_BUDGET;
    let regimes: Vec<String> = checks
        .iter()
        .map(|(p, c)| {
            format!(
                "eta {} active {}/{}",
                p.eta, c.active_points, c.total_points
            )
        })
        .collect();
    (
        pass,
        format!(
            "max rel error {worst:.3e} (tol {DERIV_TOL:e}), {}, {:.1}s",
            regimes.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn lagrangian_gradient() -> Verdict {
    let cfg = coarse_config();
    let problem = Problem::new(&cfg).unwrap();
    let st = probe_state(&problem.system, 2024, 1e-3).unwrap();
    let params = cfg.params(cfg.alpha_init);
    let checks =
        check_lagrangian_gradient(&problem.system, &st, &params, &GRADIENT_STEPS, 7).unwrap();
    let failing: Vec<String> = checks
        .iter()
        .filter(|c| !c.passes(GRADIENT_MIN_ORDER))
        .map(|c| {
            format!(
                "{:?} errors {:?} orders {:?}",
                c.block,
                c.errors,
                c.observed_orders()
            )
        })
        .collect();
    let orders: Vec<f64> = checks.iter().flat_map(|c| c.observed_orders()).collect();
    let lo = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (
        failing.is_empty() && !checks.is_empty(),
        if failing.is_empty() {
            format!(
                "{} blocks, measurable orders in [{lo:.2}, {hi:.2}], others at rounding level",
                checks.len()
            )
        } else {
            failing.join("; ")
        },
    )
}

fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn stokes_mms() -> Verdict {
    let errs: Vec<(f64, f64)> = MMS_MESHES
        .iter()
        .map(|&n| stokes_mms_errors(n).unwrap())
        .collect();
    let ov: Vec<f64> = errs.windows(2).map(|e| rate(e[0].0, e[1].0)).collect();
    let op: Vec<f64> = errs.windows(2).map(|e| rate(e[0].1, e[1].1)).collect();
    let pass =
        ov.iter().all(|&o| o >= MMS_VELOCITY_ORDER) && op.iter().all(|&o| o >= MMS_PRESSURE_ORDER);
    (
        pass,
        format!("velocity orders {ov:.2?}, pressure orders {op:.2?}"),
    )
}

fn laplace_beltrami() -> Verdict {
    let errs: Vec<f64> = LB_CURVES
        .iter()
        .map(|&n| lb_eigen_error(n).unwrap())
        .collect();
    let factors: Vec<f64> = errs.windows(2).map(|e| e[0] / e[1]).collect();
    (
        factors.iter().all(|&f| f >= LB_MIN_FACTOR),
        format!("errors {errs:.3?}, reduction factors {factors:.3?}"),
    )
}

/// Smooth random displacement: a few Fourier modes with amplitude `amp`.
fn random_displacement(mesh: &TriMesh, rng: &mut ChaCha8Rng, amp: f64) -> Field {
    let modes: Vec<[f64; 6]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..1.5),
                rng.gen_range(0.2..1.5),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.0..2.0 * PI),
            ]
        })
        .collect();
    Field::interpolate(mesh, FESpace::volume_p1_vector(mesh), |x| {
        modes.iter().fold([0.0, 0.0], |acc, m| {
            [
                acc[0] + amp * m[0] * (m[2] * x[0] + m[4]).sin() * (m[3] * x[1]).cos(),
                acc[1] + amp * m[1] * (m[3] * x[1] + m[5]).sin() * (m[2] * x[0]).cos(),
            ]
        })
    })
}

fn shoelace_agreement() -> Verdict {
    let problem = Problem::new(&coarse_config()).unwrap();
    let mesh = problem.mesh();
    let vol = obstacle_volume(mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut min_j = f64::INFINITY;
    for _ in 0..SHOELACE_SAMPLES {
        let amp = rng.gen_range(0.005..0.05);
        let w = random_displacement(mesh, &mut rng, amp);
        min_j = min_j.min(mesh_quality(mesh, &w).unwrap().min_jacobian);
        let r = volume_residual(mesh, &w).unwrap();
        let area = shoelace(&deformed_design_points(mesh, &w).unwrap());
        worst = worst.max((vol + r / DIM - area).abs());
    }
    (
        worst <= SHOELACE_TOL && min_j > SHOELACE_MIN_J,
        format!("{SHOELACE_SAMPLES} deformations, min J {min_j:.3}, max |area defect| {worst:.2e} (tol {SHOELACE_TOL:e})"),
    )
}

struct E2E {
    dir: tempfile::TempDir,
    log: ContinuationLog,
    vol: f64,
    baseline: f64,
    elapsed: Duration,
}

fn end_to_end(cfg: &RunConfig) -> E2E {
    let problem = Problem::new(cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let outcome = run::optimize(&problem, dir.path()).unwrap();
    let elapsed = t.elapsed();
    let baseline = run::reference_state(&problem).unwrap().1.dissipation;
    E2E {
        dir,
        log: outcome.log,
        vol: obstacle_volume(problem.mesh()).unwrap(),
        baseline,
        elapsed,
    }
}

fn s3_run(run: &E2E, cfg: &RunConfig) -> Verdict {
    let log = &run.log;
    let Some(last) = log.entries.last() else {
        return (false, format!("no accepted problem: {:?}", log.aborted));
    };
    let iters: Vec<usize> = log.entries.iter().map(|e| e.report.iterations).collect();
    let converged = log.aborted.is_none()
        && log.failures.is_empty()
        && iters.iter().all(|&k| k <= cfg.newton_max_iter)
        && last.alpha <= cfg.alpha_target / cfg.alpha_dec;
    let bc = last.barycenter_defect[0].hypot(last.barycenter_defect[1]);
    let pass = converged
        && last.volume_defect.abs() <= GEO_TOL * run.vol
        && bc <= GEO_TOL
        && last.min_jacobian >= cfg.eta - MIN_J_SLACK
        && last.dissipation < run.baseline
        && run.elapsed <= E2E_BUDGET;
    (
        pass,
        format!(
            "newton iterations {iters:?}, failures {}, |vol defect| {:.1e}, |bc defect| {:.1e}, min J {:.4}, dissipation {:.8} < baseline {:.8}, {:.0}s",
            log.failures.len(),
            last.volume_defect.abs(),
            bc,
            last.min_jacobian,
            last.dissipation,
            run.baseline,
            run.elapsed.as_secs_f64()
        ),
    )
}

#[derive(Deserialize)]
struct ContrastFixture {
    mesh: PathBuf,
    alpha_target: f64,
    recorded_tip_angle: std::collections::BTreeMap<String, f64>,
    min_ratio: f64,
}

fn tip_angle(strategy: Strategy, fx: &ContrastFixture) -> Result<(f64, f64), String> {
    let cfg = RunConfig {
        mesh: root().join(&fx.mesh),
        strategy,
        alpha_target: fx.alpha_target,
        ..Default::default()
    };
    let problem = Problem::new(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = run::optimize(&problem, dir.path()).unwrap().log;
    if let Some(reason) = log.aborted {
        return Err(format!("{strategy:?} aborted: {reason}"));
    }
    let last = log.entries.last().ok_or("no accepted problem")?;
    let pts = deformed_design_points(problem.mesh(), &last.report.final_state.w).unwrap();
    Ok((upstream_tip(&pts).1, last.alpha))
}

fn strategy_contrast() -> Verdict {
    let text = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/strategy_contrast.json"),
    )
    .unwrap();
    let fx: ContrastFixture = serde_json::from_str(&text).unwrap();
    let (s1, s3) = match (tip_angle(Strategy::S1, &fx), tip_angle(Strategy::S3, &fx)) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return (false, format!("{:?} {:?}", a.err(), b.err())),
    };
    let ratio = s3.0 / s1.0;
    (
        ratio >= fx.min_ratio,
        format!(
            "alpha_target {:e}: tip angle S1 {:.4} (alpha {:.2e}, recorded {:.4}), S3 {:.4} (alpha {:.2e}, recorded {:.4}), ratio {ratio:.3} (min {})",
            fx.alpha_target,
            s1.0,
            s1.1,
            fx.recorded_tip_angle["S1"],
            s3.0,
            s3.1,
            fx.recorded_tip_angle["S3"],
            fx.min_ratio
        ),
    )
}

fn determinism(first: &E2E, cfg: &RunConfig) -> Verdict {
    let second = end_to_end(cfg);
    let mut notes = Vec::new();
    let mut pass = true;
    for f in [HISTORY_FILE, NEWTON_FILE] {
        let a = std::fs::read(first.dir.path().join(f)).unwrap();
        let b = std::fs::read(second.dir.path().join(f)).unwrap();
        pass &= a == b && !a.is_empty();
        notes.push(format!(
            "{f} {} bytes {}",
            a.len(),
            if a == b { "identical" } else { "DIFFER" }
        ));
    }
    (pass, notes.join(", "))
}

fn backtracking() -> Verdict {
    let a = backtrack_alpha(1e-4, 1.0 / 64.0);
    (
        (a - 3.15e-3).abs() <= 1e-15,
        format!("backtrack_alpha(1e-4, 1/64) = {a:e}"),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, (pass, detail): Verdict| {
        println!(
            "criterion {n}: {} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!pass);
    };
    report(1, "jacobian vs finite differences", guarded(derivatives));
    report(
        2,
        "residual vs lagrangian differences",
        guarded(lagrangian_gradient),
    );
    report(3, "stokes manufactured solution", guarded(stokes_mms));
    report(
        4,
        "laplace-beltrami eigenfunction",
        guarded(laplace_beltrami),
    );
    report(5, "volume vs shoelace", guarded(shoelace_agreement));
    let cfg = e2e_config();
    match catch_unwind(AssertUnwindSafe(|| end_to_end(&cfg))) {
        Ok(run) => {
            report(6, "S3 end-to-end run", guarded(|| s3_run(&run, &cfg)));
            report(7, "S1/S3 tip contrast", guarded(strategy_contrast));
            report(
                8,
                "deterministic histories",
                guarded(|| determinism(&run, &cfg)),
            );
        }
        Err(_) => {
            report(6, "S3 end-to-end run", (false, "run panicked".into()));
            report(7, "S1/S3 tip contrast", guarded(strategy_contrast));
            report(8, "deterministic histories", (false, "no first run".into()));
        }
    }
    report(9, "backtracking rule", guarded(backtracking));
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
