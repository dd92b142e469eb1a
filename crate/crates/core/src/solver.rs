//! Semismooth Newton on the optimality system and the α-continuation
//! driver with backtracking.

use crate::constraints::geo_residuals;
use crate::error::{Error, Result};
use crate::fem::sparse::{norm2, LuSolver};
use crate::fem::{deformation_gradient, Field};
use crate::flow::{dissipation, penalty_integral};
use crate::kkt::{KKTState, KktParams, KktSystem};
use crate::mesh::TriMesh;

/// Below this initial residual norm a state counts as already converged.
pub const ZERO_RESIDUAL: f64 = 1e-14;

/// Absolute residual norm treated as converged: the rounding level of the
/// assembled residual. Warm starts can begin so close to the solution that
/// `tol * |R_0|` lies below it.
pub const ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Relative residual tolerance `ε_ssn`.
    pub tol: f64,
    /// Iteration budget `n_ssn`.
    pub max_iter: usize,
    /// Absolute residual norm that also counts as converged.
    pub abs_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 40,
            abs_tol: ABS_FLOOR,
        }
    }
}

/// One Newton iterate as reported to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonIterate {
    pub iteration: usize,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub min_jacobian: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    /// Relative residual norms, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub abs_residual_history: Vec<f64>,
    pub final_state: KKTState,
    /// Why the iteration stopped early, if it did.
    pub failure: Option<String>,
}

pub fn min_jacobian(mesh: &TriMesh, w: &Field) -> Result<f64> {
    let mut m = f64::INFINITY;
    for t in 0..mesh.n_triangles() {
        m = m.min(deformation_gradient(mesh, w, t)?.determinant());
    }
    Ok(m)
}

/// Full-step semismooth Newton: `K δ = -R`, `x ← x + δ` until
/// `|R| / |R_0| ≤ tol` (or `|R| ≤ abs_tol`) or the budget is spent.
pub fn newton_solve(
    sys: &KktSystem,
    state0: &KKTState,
    params: &KktParams,
    opts: &NewtonOptions,
    observer: &mut dyn FnMut(&NewtonIterate),
) -> NewtonReport {
    let mut state = state0.clone();
    let mut report = NewtonReport {
        converged: false,
        iterations: 0,
        residual_history: Vec::new(),
        abs_residual_history: Vec::new(),
        final_state: state0.clone(),
        failure: None,
    };
    let fail = |mut report: NewtonReport, state: KKTState, e: Error| {
        report.failure = Some(e.to_string());
        report.final_state = state;
        report
    };
    let mut r = match sys.residual(&state, params) {
        Ok(r) => r,
        Err(e) => return fail(report, state, e),
    };
    let r0 = norm2(&r);
    let emit =
        |observer: &mut dyn FnMut(&NewtonIterate), it: usize, abs: f64, rel: f64, st: &KKTState| {
            let mj = min_jacobian(sys.mesh(), &st.w).unwrap_or(f64::NAN);
            observer(&NewtonIterate {
                iteration: it,
                abs_residual: abs,
                rel_residual: rel,
                min_jacobian: mj,
            });
        };
    if r0 <= ZERO_RESIDUAL {
        report.residual_history.push(0.0);
        report.abs_residual_history.push(r0);
        report.converged = true;
        emit(observer, 0, r0, 0.0, &state);
        report.final_state = state;
        return report;
    }
    report.residual_history.push(1.0);
    report.abs_residual_history.push(r0);
    emit(observer, 0, r0, 1.0, &state);
    for it in 1..=opts.max_iter {
        let step = sys
            .jacobian(&state, params)
            .and_then(|k| LuSolver::new(&k))
            .and_then(|lu| {
                let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
                lu.solve(&rhs)
            })
            .and_then(|dx| state.add_flat(sys.layout(), 1.0, &dx));
        if let Err(e) = step {
            return fail(report, state, e);
        }
        r = match sys.residual(&state, params) {
            Ok(r) => r,
            Err(e) => {
                report.iterations = it;
                return fail(report, state, e);
            }
        };
        let abs = norm2(&r);
        let rel = abs / r0;
        report.iterations = it;
        report.residual_history.push(rel);
        report.abs_residual_history.push(abs);
        emit(observer, it, abs, rel, &state);
        if !abs.is_finite() {
            return fail(report, state, Error::NonFinite("residual"));
        }
        if rel <= opts.tol || abs <= opts.abs_tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        report.failure = Some(format!(
            "no convergence within {} iterations",
            opts.max_iter
        ));
    }
    report.final_state = state;
    report
}

/// Retry weight after a failed solve at `alpha`: `½ (α/α_dec - α)`.
pub fn backtrack_alpha(alpha: f64, alpha_dec: f64) -> f64 {
    0.5 * (alpha / alpha_dec - alpha)
}

/// Retry weight given the last accepted weight: `½ (α_acc - α)`. Equals
/// [`backtrack_alpha`] when `α = α_dec α_acc`, and stays below `α_acc`
/// after repeated failures.
pub fn backtrack_from(accepted: f64, alpha: f64) -> f64 {
    0.5 * (accepted - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub alpha_init: f64,
    pub alpha_target: f64,
    pub alpha_dec: f64,
    pub gamma: f64,
    pub eta: f64,
    pub newton: NewtonOptions,
    /// Consecutive failed solves tolerated before giving up.
    pub max_backtracks: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            alpha_init: 1e-2,
            alpha_target: 1e-10,
            alpha_dec: 1.0 / 64.0,
            gamma: 1e3,
            eta: 8e-2,
            newton: NewtonOptions::default(),
            max_backtracks: 20,
        }
    }
}

impl ContinuationOptions {
    pub fn params(&self, alpha: f64) -> KktParams {
        KktParams {
            alpha,
            gamma: self.gamma,
            eta: self.eta,
        }
    }

    /// The weights visited when every solve succeeds.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut a = self.alpha_init;
        while a >= self.alpha_target {
            out.push(a);
            a *= self.alpha_dec;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.alpha_target > 0.0 && self.alpha_target <= self.alpha_init) {
            return bad("alpha_target must satisfy 0 < α_target ≤ α_init");
        }
        if !(self.alpha_dec > 0.0 && self.alpha_dec < 1.0) {
            return bad("α_dec must lie in (0,1)");
        }
        if !(self.gamma >= 0.0) {
            return bad("γ₁ must be ≥ 0");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("η₁ must lie in (0,1)");
        }
        if !(self.newton.tol > 0.0) || self.newton.max_iter == 0 {
            return bad("ε_ssn must be > 0 and n_ssn ≥ 1");
        }
        if !(self.newton.abs_tol >= 0.0) {
            return bad("absolute Newton tolerance must be ≥ 0");
        }
        Ok(())
    }
}

/// Summary of an accepted solve.
#[derive(Debug, Clone)]
pub struct ContinuationEntry {
    pub problem_index: usize,
    pub alpha: f64,
    pub report: NewtonReport,
    pub objective: f64,
    pub dissipation: f64,
    pub volume_defect: f64,
    pub barycenter_defect: [f64; 2],
    pub min_jacobian: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationLog {
    pub entries: Vec<ContinuationEntry>,
    /// Failed attempts as `(alpha, cause)`, in order.
    pub failures: Vec<(f64, String)>,
    pub aborted: Option<String>,
}

impl ContinuationLog {
    pub fn final_state(&self) -> Option<&KKTState> {
        self.entries.last().map(|e| &e.report.final_state)
    }
}

/// Objective and geometric diagnostics of a state.
pub fn evaluate(
    sys: &KktSystem,
    st: &KKTState,
    params: &KktParams,
) -> Result<(f64, f64, f64, [f64; 2], f64)> {
    let mesh = sys.mesh();
    let diss = dissipation(mesh, &st.w, &st.v, sys.setup().degree)?;
    let mc = sys.control_mass().mul_vec(&st.c.coeffs);
    let reg: f64 = st.c.coeffs.iter().zip(&mc).map(|(a, b)| a * b).sum();
    let pen = penalty_integral(mesh, &st.w, params.eta)?;
    let objective = diss + 0.5 * params.alpha * reg + 0.5 * params.gamma * pen;
    let geo = geo_residuals(mesh, &st.w)?;
    let mj = min_jacobian(mesh, &st.w)?;
    Ok((
        objective,
        diss,
        geo.volume_defect,
        geo.barycenter_defect,
        mj,
    ))
}

/// Solves the sequence of problems `α_init, α_init α_dec, ...` down to
/// `α_target`, warm-starting each from the last accepted state. A failed
/// solve is retried from that state at `½ (α/α_dec - α)`, with `α/α_dec`
/// read as the last accepted weight so accepted weights keep decreasing;
/// the schedule then continues from the retried weight.
pub fn continuation(
    sys: &KktSystem,
    opts: &ContinuationOptions,
    observer: &mut dyn FnMut(usize, f64, &NewtonIterate),
) -> Result<ContinuationLog> {
    opts.validate()?;
    let mut log = ContinuationLog {
        entries: Vec::new(),
        failures: Vec::new(),
        aborted: None,
    };
    let mut state = sys.initial_state();
    let mut alpha = opts.alpha_init;
    let mut backtracks = 0;
    let mut attempt = 0;
    while alpha >= opts.alpha_target {
        let params = opts.params(alpha);
        let report = newton_solve(sys, &state, &params, &opts.newton, &mut |it| {
            observer(attempt, alpha, it)
        });
        attempt += 1;
        if report.converged {
            let (objective, dissipation, volume_defect, barycenter_defect, min_jacobian) =
                evaluate(sys, &report.final_state, &params)?;
            state = report.final_state.clone();
            log.entries.push(ContinuationEntry {
                problem_index: log.entries.len(),
                alpha,
                report,
                objective,
                dissipation,
                volume_defect,
                barycenter_defect,
                min_jacobian,
            });
            backtracks = 0;
            alpha *= opts.alpha_dec;
        } else {
            let cause = report.failure.unwrap_or_default();
            log.failures.push((alpha, cause.clone()));
            backtracks += 1;
            if backtracks > opts.max_backtracks {
                log.aborted = Some(format!(
                    "{} consecutive failed solves, last at α = {alpha:e}: {cause}",
                    backtracks
                ));
                break;
            }
            alpha = match log.entries.last() {
                Some(e) => backtrack_from(e.alpha, alpha),
                None => backtrack_alpha(alpha, opts.alpha_dec),
            };
        }
    }
    Ok(log)
}
