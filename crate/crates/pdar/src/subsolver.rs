//! Per-block subproblem solver.
//!
//! Each outer iteration asks every block to minimize its augmented
//! objective `L(x_i) = cost(x_i, anchor_{-i}) + lam * ||x_i - anchor_i||^2`
//! over the block's feasible set. The solver is projected gradient with
//! a backtracking sufficient-decrease rule: generic enough for any smooth
//! cost with a projectable feasible set, and monotone by construction.
//!
//! Also hosts the Euclidean projection onto the scaled probability
//! simplex used by the resource-allocation benchmark.

use crate::core::{BlockVector, Problem};
use crate::error::{Error, Result};

/// Inner-solver knobs.
#[derive(Clone, Copy, Debug)]
pub struct SubsolverConfig {
    /// Stationarity tolerance on the projected-gradient norm.
    pub tol: f64,
    /// Cap on inner iterations.
    pub max_inner_iters: usize,
    /// Sufficient-decrease constant, in (0, 1).
    pub armijo_c: f64,
    /// Step shrink factor, in (0, 1).
    pub backtrack_factor: f64,
    /// Initial trial step length.
    pub init_step: f64,
}

impl Default for SubsolverConfig {
    fn default() -> Self {
        SubsolverConfig {
            tol: 1e-8,
            max_inner_iters: 500,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            init_step: 1.0,
        }
    }
}

impl SubsolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::Domain("armijo_c must be in (0, 1)".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Domain("backtrack_factor must be in (0, 1)".into()));
        }
        if !(self.init_step > 0.0) {
            return Err(Error::Domain("init_step must be > 0".into()));
        }
        Ok(())
    }
}

/// The augmented objective `L_i(x_i; anchor)` of one block.
pub fn augmented_value(
    problem: &dyn Problem,
    i: usize,
    x_i: &[f64],
    anchor: &BlockVector,
    lam: f64,
) -> Result<f64> {
    let y = anchor.replace_block(i, x_i)?;
    let anchor_i = anchor.block(i);
    let penalty: f64 = x_i
        .iter()
        .zip(anchor_i)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(problem.block_cost(i, &y) + lam * penalty)
}

/// Euclidean projection of `v` onto `{w : w >= 0, sum(w) = total}`.
///
/// Sort-and-threshold construction: descending sort with index
/// tie-breaking, then clip at the unique threshold. O(n log n) and
/// deterministic.
pub fn project_simplex(v: &[f64], total: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain("cannot project an empty vector".into()));
    }
    if !(total > 0.0) {
        return Err(Error::Domain(format!("total must be > 0, got {total}")));
    }
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));

    // Largest support size rho with sorted[rho-1] - (cumsum - total)/rho > 0.
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &idx) in order.iter().enumerate() {
        cumsum += v[idx];
        let t = (cumsum - total) / (j + 1) as f64;
        if v[idx] - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| (x - tau).max(0.0)).collect())
}

/// Minimizes one block's augmented objective over its feasible set.
///
/// Starts from the anchor block, so the result is never worse than not
/// moving. Returns the new block and the number of inner iterations.
/// `lam = 0` runs the unregularized subproblem.
pub fn solve_block(
    problem: &dyn Problem,
    i: usize,
    anchor: &BlockVector,
    lam: f64,
    cfg: &SubsolverConfig,
) -> Result<(Vec<f64>, usize)> {
    cfg.validate()?;
    if lam < 0.0 {
        return Err(Error::Domain(format!("lam must be >= 0, got {lam}")));
    }

    let anchor_i = anchor.block(i).to_vec();
    let mut y = anchor.clone();
    let mut x = anchor_i.clone();

    let value = |y: &BlockVector, x: &[f64]| -> f64 {
        let penalty: f64 = x
            .iter()
            .zip(&anchor_i)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        problem.block_cost(i, y) + lam * penalty
    };
    let grad = |y: &BlockVector, x: &[f64]| -> Vec<f64> {
        let mut g = problem.block_cost_grad(i, y);
        for (gj, (&xj, &aj)) in g.iter_mut().zip(x.iter().zip(&anchor_i)) {
            *gj += 2.0 * lam * (xj - aj);
        }
        g
    };
    let numerical = |detail: String| Error::Numerical {
        block: i,
        outer_iter: 0,
        detail,
    };

    let mut f_cur = value(&y, &x);
    if !f_cur.is_finite() {
        return Err(numerical(format!("non-finite objective at start: {f_cur}")));
    }

    // The proximal term contributes curvature 2*lam, so a sensible step
    // is at most ~1/(2*lam); starting the line search there instead of at
    // init_step avoids a long halving cascade when lam is large. Accepted
    // steps carry over to the next inner iteration (nudged one factor up)
    // so the search also adapts to the cost's own curvature.
    let t_cap = cfg.init_step / (1.0 + 2.0 * lam);
    let mut t_start = t_cap;

    for iter in 0..cfg.max_inner_iters {
        let g = grad(&y, &x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(numerical(format!("non-finite gradient at inner iter {iter}")));
        }

        // Stationarity: unit-step projected-gradient residual.
        let probe: Vec<f64> = x.iter().zip(&g).map(|(&xj, &gj)| xj - gj).collect();
        let probe = problem.project_block(i, &probe);
        let residual = x
            .iter()
            .zip(&probe)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if residual <= cfg.tol {
            return Ok((x, iter));
        }

        // Backtracking on L(P(x - t g)) <= L(x) - (c/t) ||P(x - t g) - x||^2.
        let mut t = t_start;
        let mut accepted = false;
        while t > 1e-20 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(&xj, &gj)| xj - t * gj).collect();
            let cand = problem.project_block(i, &trial);
            let d2: f64 = cand
                .iter()
                .zip(&x)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if d2 == 0.0 {
                // Projection pinned the iterate; nothing to gain from
                // shrinking further.
                return Ok((x, iter));
            }
            y.set_block(i, &cand);
            let f_cand = value(&y, &cand);
            if !f_cand.is_finite() {
                return Err(numerical(format!(
                    "non-finite objective during backtracking at inner iter {iter}"
                )));
            }
            if f_cand <= f_cur - (cfg.armijo_c / t) * d2 {
                x = cand;
                f_cur = f_cand;
                accepted = true;
                t_start = (t / cfg.backtrack_factor).min(t_cap);
                break;
            }
            t *= cfg.backtrack_factor;
        }
        if !accepted {
            // No step satisfies sufficient decrease; treat as stationary.
            y.set_block(i, &x);
            return Ok((x, iter));
        }
    }
    Ok((x, cfg.max_inner_iters))
}
