//! Shared test fixtures and independent oracles.
//!
//! Everything here is deliberately implemented without touching the
//! library's own evaluation or projection paths, so tests compare two
//! independent routes to the same value.
//!
//! Not every test target uses every helper.
#![allow(dead_code)]

use pdar::benchmark::ResourceAllocationInstance;
use pdar::core::{BlockVector, Problem};

/// Coupled convex quadratic on unconstrained blocks:
/// `f(x) = sum_i ||x_i - c_i||^2 + gamma ||sum_i x_i - s||^2`.
///
/// Smooth, coupled through the shared sum, and block-unconstrained, so
/// the phase-2 step identity applies at interior minimizers.
pub struct QuadraticProblem {
    pub targets: Vec<Vec<f64>>,
    pub shared_target: Vec<f64>,
    pub gamma: f64,
}

impl QuadraticProblem {
    pub fn block_sum(&self, x: &BlockVector) -> Vec<f64> {
        let dim = self.shared_target.len();
        let mut s = vec![0.0; dim];
        for b in x.blocks() {
            for (acc, &v) in s.iter_mut().zip(b) {
                *acc += v;
            }
        }
        s
    }
}

impl Problem for QuadraticProblem {
    fn dims(&self) -> Vec<usize> {
        self.targets.iter().map(Vec::len).collect()
    }

    fn eval(&self, x: &BlockVector) -> f64 {
        let mut total = 0.0;
        for (b, t) in x.blocks().iter().zip(&self.targets) {
            total += b
                .iter()
                .zip(t)
                .map(|(&a, &c)| (a - c) * (a - c))
                .sum::<f64>();
        }
        let s = self.block_sum(x);
        total
            + self.gamma
                * s.iter()
                    .zip(&self.shared_target)
                    .map(|(&a, &c)| (a - c) * (a - c))
                    .sum::<f64>()
    }

    fn block_grad(&self, i: usize, x: &BlockVector) -> Vec<f64> {
        let s = self.block_sum(x);
        x.block(i)
            .iter()
            .zip(&self.targets[i])
            .zip(s.iter().zip(&self.shared_target))
            .map(|((&a, &c), (&sv, &st))| 2.0 * (a - c) + 2.0 * self.gamma * (sv - st))
            .collect()
    }

    fn project_block(&self, _i: usize, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn block_is_unconstrained(&self, _i: usize) -> bool {
        true
    }
}

/// Brute-force Euclidean simplex projection by active-set enumeration.
///
/// Projects onto the affine hull of every support set, keeps the
/// candidates that land inside the simplex, and returns the closest one.
/// Exponential in the dimension; fine for the test sizes (<= 10).
pub fn simplex_projection_oracle(v: &[f64], total: f64) -> Vec<f64> {
    let n = v.len();
    assert!(n >= 1 && n <= 20, "oracle is exponential in dimension");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let sum_s: f64 = support.iter().map(|&j| v[j]).sum();
        let shift = (total - sum_s) / support.len() as f64;
        let mut w = vec![0.0; n];
        let mut feasible = true;
        for &j in &support {
            w[j] = v[j] + shift;
            if w[j] < -1e-12 {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        for wj in &mut w {
            *wj = wj.max(0.0);
        }
        let dist: f64 = w.iter().zip(v).map(|(&a, &b)| (a - b) * (a - b)).sum();
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            best = Some((dist, w));
        }
    }
    best.expect("full support is always feasible for total > 0").1
}

/// Central finite-difference gradient of `f` with respect to block `i`.
pub fn fd_block_grad(
    f: &dyn Fn(&BlockVector) -> f64,
    x: &BlockVector,
    i: usize,
    h: f64,
) -> Vec<f64> {
    let n = x.block(i).len();
    let mut g = vec![0.0; n];
    for j in 0..n {
        let mut plus = x.block(i).to_vec();
        let mut minus = plus.clone();
        plus[j] += h;
        minus[j] -= h;
        let fp = f(&x.replace_block(i, &plus).unwrap());
        let fm = f(&x.replace_block(i, &minus).unwrap());
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Independent scalar re-implementation of the benchmark objective:
/// a literal triple loop over agents, bins, and agents again, reading
/// only the instance's raw preference entries.
pub fn triple_loop_objective(inst: &ResourceAllocationInstance, x: &BlockVector) -> f64 {
    let n = inst.n_agents();
    let m = inst.n_bins();
    let mut total = 0.0;
    for i in 0..n {
        for bin in 0..m {
            let mut load = 0.0;
            for j in 0..n {
                load += x.block(j)[bin];
            }
            total += inst.pref(i, bin) * x.block(i)[bin] * load * load;
        }
    }
    total
}

/// Independent scalar re-implementation of one agent's cost.
pub fn triple_loop_local(inst: &ResourceAllocationInstance, i: usize, x: &BlockVector) -> f64 {
    let n = inst.n_agents();
    let m = inst.n_bins();
    let mut total = 0.0;
    for bin in 0..m {
        let mut load = 0.0;
        for j in 0..n {
            load += x.block(j)[bin];
        }
        total += inst.pref(i, bin) * x.block(i)[bin] * load * load;
    }
    total
}
