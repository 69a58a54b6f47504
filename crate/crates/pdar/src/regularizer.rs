//! The adaptive regularization coefficient and its step-norm map.
//!
//! The coefficient has two phases split by an iteration threshold `K`.
//! Before `K` it reacts to the previous step norm through a nondecreasing
//! map `phi`, floored at `beta`: agents that moved a lot get a stiffer
//! penalty next round so the others can react. From `K` on it grows
//! linearly as `alpha * k` to fine-tune toward a stationary point.

use crate::error::{Error, Result};

/// Step-norm map used inside the phase-1 coefficient. Must be
/// nondecreasing in its first argument.
pub type PhiMap = fn(step_norm: f64, n_agents: usize) -> f64;

/// Default map: `N^2 * ||h||`.
pub fn default_phi(step_norm: f64, n_agents: usize) -> f64 {
    (n_agents * n_agents) as f64 * step_norm
}

/// Checked wrapper around the default step-norm map.
pub fn phi(step_norm: f64, n_agents: usize) -> Result<f64> {
    if step_norm < 0.0 {
        return Err(Error::Domain(format!(
            "step norm must be nonnegative, got {step_norm}"
        )));
    }
    Ok(default_phi(step_norm, n_agents))
}

/// Parameters of the two-phase coefficient schedule.
#[derive(Clone, Copy, Debug)]
pub struct RegularizerParams {
    /// Phase-2 slope: coefficient is `alpha * k` for `k >= k_threshold`.
    pub alpha: f64,
    /// Phase-1 floor.
    pub beta: f64,
    /// Iteration index `K` at which phase 2 starts.
    pub k_threshold: usize,
    /// Number of agents, used inside the step-norm map.
    pub n_agents: usize,
    /// Pluggable step-norm map; defaults to `N^2 * ||h||`.
    pub phi: PhiMap,
}

impl RegularizerParams {
    pub fn new(alpha: f64, beta: f64, k_threshold: usize, n_agents: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
        }
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta must be > 0, got {beta}")));
        }
        if k_threshold < 1 {
            return Err(Error::Domain("k_threshold must be >= 1".into()));
        }
        if n_agents < 1 {
            return Err(Error::Domain("n_agents must be >= 1".into()));
        }
        Ok(RegularizerParams {
            alpha,
            beta,
            k_threshold,
            n_agents,
            phi: default_phi,
        })
    }
}

impl Default for RegularizerParams {
    /// Order-one defaults; convergence is not sensitive to these choices.
    fn default() -> Self {
        RegularizerParams {
            alpha: 1.0,
            beta: 1.0,
            k_threshold: 50,
            n_agents: 1,
            phi: default_phi,
        }
    }
}

/// The coefficient `lambda_i^k(||h_i^{k-1}||)`.
///
/// Phase 1 (`k < K`): `max(phi(||h||), beta)`. Phase 2 (`k >= K`):
/// `alpha * k`. `k = K` belongs to phase 2. The convention `h^0 = 0`
/// makes the first iteration's coefficient equal to `beta`.
pub fn lambda_coeff(k: usize, prev_step_norm: f64, params: &RegularizerParams) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("iteration index must be >= 1".into()));
    }
    if prev_step_norm < 0.0 {
        return Err(Error::Domain(format!(
            "step norm must be nonnegative, got {prev_step_norm}"
        )));
    }
    let lam = if k < params.k_threshold {
        ((params.phi)(prev_step_norm, params.n_agents)).max(params.beta)
    } else {
        params.alpha * k as f64
    };
    debug_assert!(lam > 0.0);
    Ok(lam)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, beta: f64, k_threshold: usize, n_agents: usize) -> RegularizerParams {
        RegularizerParams::new(alpha, beta, k_threshold, n_agents).unwrap()
    }

    #[test]
    fn phi_scales_by_n_squared() {
        assert_eq!(phi(0.5, 10).unwrap(), 50.0);
        assert_eq!(phi(0.0, 7).unwrap(), 0.0);
        assert_eq!(phi(1.0, 100).unwrap(), 10000.0);
    }

    #[test]
    fn phi_rejects_negative_norm() {
        assert!(matches!(phi(-1.0, 3).unwrap_err(), Error::Domain(_)));
    }

    #[test]
    fn first_iteration_uses_floor() {
        let p = params(1.0, 1.0, 50, 10);
        assert_eq!(lambda_coeff(1, 0.0, &p).unwrap(), 1.0);
    }

    #[test]
    fn phase_one_tracks_step_norm() {
        let p = params(1.0, 1.0, 50, 10);
        assert_eq!(lambda_coeff(10, 0.5, &p).unwrap(), 50.0);
    }

    #[test]
    fn phase_two_is_linear_in_k() {
        let p = params(0.1, 1.0, 50, 10);
        assert_eq!(lambda_coeff(100, 0.0, &p).unwrap(), 10.0);
    }

    #[test]
    fn phase_boundary_belongs_to_phase_two() {
        let p = params(2.0, 1.0, 50, 10);
        assert_eq!(lambda_coeff(50, 100.0, &p).unwrap(), 100.0);
    }

    #[test]
    fn phase_two_increment_is_alpha_exactly() {
        let p = params(0.25, 1.0, 3, 4);
        for k in 3..100 {
            let a = lambda_coeff(k, 0.0, &p).unwrap();
            let b = lambda_coeff(k + 1, 0.0, &p).unwrap();
            assert_eq!(b - a, p.alpha);
        }
    }

    #[test]
    fn phase_one_nondecreasing_in_step_norm() {
        let p = params(1.0, 0.3, 50, 5);
        let mut last = 0.0;
        for j in 0..200 {
            let norm = j as f64 * 0.01;
            let lam = lambda_coeff(10, norm, &p).unwrap();
            assert!(lam >= last);
            assert!(lam > 0.0);
            last = lam;
        }
    }
}
