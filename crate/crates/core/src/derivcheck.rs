//! Finite-difference checks of the assembled residual and Jacobian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fem::sparse::{dot, norm2};
use crate::kkt::{Block, KKTState, KktParams, KktSystem};

/// Outcome of comparing `K d` with `(R(x + h d) - R(x - h d)) / 2h`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianCheck {
    pub h: f64,
    /// `|FD - K d| / |K d|` per direction.
    pub errors: Vec<f64>,
    pub max_rel_error: f64,
    /// Quadrature points with `η - J > 0` at the probe state.
    pub active_points: usize,
    pub total_points: usize,
}

/// Per-block comparison of `R_b · d_b` with central differences of the
/// Lagrangian along `d_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGradientCheck {
    pub block: Block,
    pub hs: Vec<f64>,
    pub errors: Vec<f64>,
    /// Rounding level of the difference quotient at each `h`.
    pub floors: Vec<f64>,
    pub derivative: f64,
}

impl BlockGradientCheck {
    /// Orders `log10(e_i / e_{i+1}) / log10(h_i / h_{i+1})` between
    /// consecutive step sizes whose errors lie above rounding level.
    pub fn observed_orders(&self) -> Vec<f64> {
        (1..self.hs.len())
            .filter(|&i| self.errors[i] > self.floors[i] && self.errors[i - 1] > self.floors[i - 1])
            .map(|i| {
                (self.errors[i - 1] / self.errors[i]).log10()
                    / (self.hs[i - 1] / self.hs[i]).log10()
            })
            .collect()
    }

    /// Errors at rounding level for every `h` (the Lagrangian is at most
    /// quadratic along the block), or second-order decay where measurable.
    pub fn passes(&self, min_order: f64) -> bool {
        if self.errors.iter().zip(&self.floors).all(|(e, f)| e <= f) {
            return true;
        }
        let orders = self.observed_orders();
        !orders.is_empty() && orders.iter().all(|&o| o >= min_order)
    }
}

/// Deterministic probe point: small random `w` (so `J` stays near one),
/// order-one values in every other free dof.
pub fn probe_state(sys: &KktSystem, seed: u64, w_scale: f64) -> Result<KKTState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = sys.layout();
    let mut st = sys.initial_state();
    let x: Vec<f64> = (0..layout.len())
        .map(|k| {
            let s = if layout.locate(k).0 == Block::W {
                w_scale
            } else {
                1.0
            };
            s * rng.gen_range(-1.0..1.0)
        })
        .collect();
    st.add_flat(layout, 1.0, &x)?;
    Ok(st)
}

pub fn direction(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn shifted(sys: &KktSystem, st: &KKTState, a: f64, d: &[f64]) -> Result<KKTState> {
    let mut s = st.clone();
    s.add_flat(sys.layout(), a, d)?;
    Ok(s)
}

/// Compares the Jacobian with central differences of the residual along
/// `n_dirs` seeded directions.
pub fn check_jacobian(
    sys: &KktSystem,
    st: &KKTState,
    params: &KktParams,
    n_dirs: usize,
    h: f64,
) -> Result<JacobianCheck> {
    let k = sys.jacobian(st, params)?;
    let active = sys.active_set(st, params)?;
    let n = sys.layout().len();
    let mut errors = Vec::with_capacity(n_dirs);
    for i in 0..n_dirs {
        let d = direction(n, 1000 + i as u64);
        let kd = k.mul_vec(&d);
        let rp = sys.residual(&shifted(sys, st, h, &d)?, params)?;
        let rm = sys.residual(&shifted(sys, st, -h, &d)?, params)?;
        let diff: Vec<f64> = rp
            .iter()
            .zip(&rm)
            .zip(&kd)
            .map(|((a, b), c)| (a - b) / (2.0 * h) - c)
            .collect();
        errors.push(norm2(&diff) / norm2(&kd).max(f64::MIN_POSITIVE));
    }
    Ok(JacobianCheck {
        h,
        max_rel_error: errors.iter().cloned().fold(0.0, f64::max),
        errors,
        active_points: active.n_active(),
        total_points: active.chi.len(),
    })
}

/// Checks every block of the residual against the Lagrangian.
pub fn check_lagrangian_gradient(
    sys: &KktSystem,
    st: &KKTState,
    params: &KktParams,
    hs: &[f64],
    seed: u64,
) -> Result<Vec<BlockGradientCheck>> {
    let layout = sys.layout();
    let r = sys.residual(st, params)?;
    let full = direction(layout.len(), seed);
    let mut out = Vec::new();
    for block in Block::ALL {
        let d: Vec<f64> = (0..layout.len())
            .map(|k| {
                if layout.locate(k).0 == block {
                    full[k]
                } else {
                    0.0
                }
            })
            .collect();
        if d.iter().all(|v| *v == 0.0) {
            continue;
        }
        let derivative = dot(&r, &d);
        let mut errors = Vec::new();
        let mut floors = Vec::new();
        for &h in hs {
            let lp = sys.lagrangian(&shifted(sys, st, h, &d)?, params)?;
            let lm = sys.lagrangian(&shifted(sys, st, -h, &d)?, params)?;
            errors.push(((lp - lm) / (2.0 * h) - derivative).abs());
            // A few hundred ulps of the summed Lagrangian, divided by 2h.
            floors.push(256.0 * f64::EPSILON * lp.abs().max(lm.abs()).max(1.0) / (2.0 * h));
        }
        out.push(BlockGradientCheck {
            block,
            hs: hs.to_vec(),
            errors,
            floors,
            derivative,
        });
    }
    Ok(out)
}
