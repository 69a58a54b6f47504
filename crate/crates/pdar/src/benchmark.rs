//! The N-agent three-bin resource-allocation benchmark.
//!
//! Each agent `i` spreads one unit of resource over `m` bins,
//! `x_i` on the unit simplex. Bin congestion is `g_m = (sum_i x_{i,m})^2`
//! and agent `i` pays `f_i = x_i' P_i g(x)` with a diagonal, nonnegative
//! preference matrix `P_i`. The joint objective is `sum_i f_i`.
//!
//! Gradients are analytic for both cost modes. With `S_m = sum_j x_{j,m}`
//! and `Q_m = sum_j p_{j,m} x_{j,m}`:
//!
//! - joint:  `dF/dx_{i,m} = p_{i,m} S_m^2 + 2 S_m Q_m`
//! - local:  `df_i/dx_{i,m} = p_{i,m} S_m^2 + 2 S_m p_{i,m} x_{i,m}`

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::{BlockVector, CostMode, Problem};
use crate::error::{Error, Result};
use crate::subsolver::project_simplex;

const INSTANCE_HEADER: &str = "pdar-instance v1";

/// Fixed benchmark data: one diagonal preference matrix per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourceAllocationInstance {
    n_agents: usize,
    n_bins: usize,
    seed: u64,
    /// Row-major `n_agents x n_bins`, all entries nonnegative.
    preferences: Vec<f64>,
}

impl ResourceAllocationInstance {
    pub fn new(n_agents: usize, n_bins: usize, seed: u64, preferences: Vec<f64>) -> Result<Self> {
        if n_agents < 1 {
            return Err(Error::Domain("n_agents must be >= 1".into()));
        }
        if n_bins < 2 {
            return Err(Error::Domain("n_bins must be >= 2".into()));
        }
        if preferences.len() != n_agents * n_bins {
            return Err(Error::Dimension(format!(
                "expected {} preference entries, got {}",
                n_agents * n_bins,
                preferences.len()
            )));
        }
        if preferences.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Domain("preferences must be nonnegative".into()));
        }
        Ok(ResourceAllocationInstance {
            n_agents,
            n_bins,
            seed,
            preferences,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Preference of agent `i` for bin `m`.
    pub fn pref(&self, i: usize, m: usize) -> f64 {
        self.preferences[i * self.n_bins + m]
    }

    /// The uniform feasible starting point: every block `[1/m, ..., 1/m]`.
    pub fn uniform_start(&self) -> BlockVector {
        let block = vec![1.0 / self.n_bins as f64; self.n_bins];
        BlockVector::new(vec![block; self.n_agents]).expect("valid dims")
    }

    /// A random feasible starting point (each block uniform on its
    /// simplex via normalized exponentials), deterministic in `seed`.
    pub fn random_start(&self, seed: u64) -> BlockVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = (0..self.n_agents)
            .map(|_| {
                let raw: Vec<f64> = (0..self.n_bins)
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|&r| r / s).collect()
            })
            .collect();
        BlockVector::new(blocks).expect("valid dims")
    }

    /// Two identical agents that both dread bin 1: without coordination
    /// they flee and return to the same bins in lockstep, so the
    /// unregularized parallel iteration oscillates.
    pub fn antagonistic_fixture() -> Self {
        let eps = 0.01;
        ResourceAllocationInstance::new(2, 3, 0, vec![1.0, eps, eps, 1.0, eps, eps])
            .expect("fixture is valid")
    }

    /// Writes the versioned plain-text form: header, dimensions, seed,
    /// then one row of 17-significant-digit preferences per agent.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(INSTANCE_HEADER);
        out.push('\n');
        out.push_str(&format!("n_agents {}\n", self.n_agents));
        out.push_str(&format!("n_bins {}\n", self.n_bins));
        out.push_str(&format!("seed {}\n", self.seed));
        for i in 0..self.n_agents {
            let row: Vec<String> = (0..self.n_bins)
                .map(|m| format!("{:.16e}", self.pref(i, m)))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Parses the format written by [`ResourceAllocationInstance::write_to`].
    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, detail: String| Error::Parse {
            path: path.display().to_string(),
            line,
            detail,
        };
        let mut lines = text.lines().enumerate();

        let (ln, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        if header.trim() != INSTANCE_HEADER {
            return Err(parse_err(ln + 1, format!("expected '{INSTANCE_HEADER}'")));
        }
        let mut field = |name: &str| -> Result<u64> {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("missing '{name}' line")))?;
            let rest = line
                .strip_prefix(name)
                .ok_or_else(|| parse_err(ln + 1, format!("expected '{name} <value>'")))?;
            rest.trim()
                .parse::<u64>()
                .map_err(|e| parse_err(ln + 1, format!("bad {name}: {e}")))
        };
        let n_agents = field("n_agents")? as usize;
        let n_bins = field("n_bins")? as usize;
        let seed = field("seed")?;

        let mut preferences = Vec::with_capacity(n_agents * n_bins);
        for _ in 0..n_agents {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, "missing preference row".into()))?;
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let row = row.map_err(|e| parse_err(ln + 1, format!("bad preference: {e}")))?;
            if row.len() != n_bins {
                return Err(parse_err(
                    ln + 1,
                    format!("expected {n_bins} entries, got {}", row.len()),
                ));
            }
            preferences.extend(row);
        }
        ResourceAllocationInstance::new(n_agents, n_bins, seed, preferences)
    }
}

/// Draws a fresh instance with i.i.d. Uniform(0,1) diagonal preferences.
/// The same seed always yields the same instance.
pub fn gen_instance(n_agents: usize, n_bins: usize, seed: u64) -> Result<ResourceAllocationInstance> {
    if n_agents < 1 {
        return Err(Error::Domain("n_agents must be >= 1".into()));
    }
    if n_bins < 2 {
        return Err(Error::Domain("n_bins must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let preferences: Vec<f64> = (0..n_agents * n_bins).map(|_| rng.gen::<f64>()).collect();
    ResourceAllocationInstance::new(n_agents, n_bins, seed, preferences)
}

fn check_allocation(x: &BlockVector, n_bins: usize) -> Result<()> {
    if x.dims().iter().any(|&n| n != n_bins) {
        return Err(Error::Dimension(format!(
            "every block must have length {n_bins}, got dims {:?}",
            x.dims()
        )));
    }
    Ok(())
}

/// Bin congestion `g_m = (sum_i x_{i,m})^2`, length `n_bins`.
pub fn eval_g(x: &BlockVector) -> Result<Vec<f64>> {
    let n_bins = x.block(0).len();
    check_allocation(x, n_bins)?;
    let mut g = vec![0.0; n_bins];
    for b in x.blocks() {
        for (m, &v) in b.iter().enumerate() {
            g[m] += v;
        }
    }
    for gm in &mut g {
        *gm *= *gm;
    }
    Ok(g)
}

fn column_sums(x: &BlockVector, n_bins: usize) -> Vec<f64> {
    let mut s = vec![0.0; n_bins];
    for b in x.blocks() {
        for (m, &v) in b.iter().enumerate() {
            s[m] += v;
        }
    }
    s
}

/// Joint objective `sum_i sum_m p_{i,m} x_{i,m} g_m(x)`, accumulated in
/// ascending agent-then-bin order.
pub fn eval_objective(inst: &ResourceAllocationInstance, x: &BlockVector) -> Result<f64> {
    check_dims(inst, x)?;
    let g = eval_g(x)?;
    let mut total = 0.0;
    for i in 0..inst.n_agents {
        for m in 0..inst.n_bins {
            total += inst.pref(i, m) * x.block(i)[m] * g[m];
        }
    }
    Ok(total)
}

/// Agent `i`'s own cost `f_i(x) = x_i' P_i g(x)`.
pub fn eval_local(inst: &ResourceAllocationInstance, i: usize, x: &BlockVector) -> Result<f64> {
    check_dims(inst, x)?;
    let g = eval_g(x)?;
    let mut total = 0.0;
    for m in 0..inst.n_bins {
        total += inst.pref(i, m) * x.block(i)[m] * g[m];
    }
    Ok(total)
}

/// Analytic gradient of the selected cost with respect to block `i`.
pub fn block_gradient(
    inst: &ResourceAllocationInstance,
    i: usize,
    x: &BlockVector,
    mode: CostMode,
) -> Result<Vec<f64>> {
    check_dims(inst, x)?;
    let s = column_sums(x, inst.n_bins);
    let mut grad = vec![0.0; inst.n_bins];
    match mode {
        CostMode::Joint => {
            let mut q = vec![0.0; inst.n_bins];
            for j in 0..inst.n_agents {
                for m in 0..inst.n_bins {
                    q[m] += inst.pref(j, m) * x.block(j)[m];
                }
            }
            for m in 0..inst.n_bins {
                grad[m] = inst.pref(i, m) * s[m] * s[m] + 2.0 * s[m] * q[m];
            }
        }
        CostMode::Local => {
            for m in 0..inst.n_bins {
                grad[m] =
                    inst.pref(i, m) * s[m] * s[m] + 2.0 * s[m] * inst.pref(i, m) * x.block(i)[m];
            }
        }
    }
    Ok(grad)
}

fn check_dims(inst: &ResourceAllocationInstance, x: &BlockVector) -> Result<()> {
    if x.n_blocks() != inst.n_agents {
        return Err(Error::Dimension(format!(
            "instance has {} agents but vector has {} blocks",
            inst.n_agents,
            x.n_blocks()
        )));
    }
    check_allocation(x, inst.n_bins)
}

/// The benchmark wired up as a [`Problem`], with the cost mode selecting
/// what each block's subproblem minimizes. The joint objective and its
/// gradient are always available regardless of mode.
pub struct ResourceProblem {
    inst: ResourceAllocationInstance,
    mode: CostMode,
}

impl ResourceProblem {
    pub fn new(inst: ResourceAllocationInstance, mode: CostMode) -> Self {
        ResourceProblem { inst, mode }
    }

    pub fn instance(&self) -> &ResourceAllocationInstance {
        &self.inst
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }
}

impl Problem for ResourceProblem {
    fn dims(&self) -> Vec<usize> {
        vec![self.inst.n_bins; self.inst.n_agents]
    }

    fn eval(&self, x: &BlockVector) -> f64 {
        eval_objective(&self.inst, x).expect("dims checked at construction")
    }

    fn block_grad(&self, i: usize, x: &BlockVector) -> Vec<f64> {
        block_gradient(&self.inst, i, x, CostMode::Joint).expect("dims checked at construction")
    }

    fn project_block(&self, _i: usize, v: &[f64]) -> Vec<f64> {
        project_simplex(v, 1.0).expect("non-empty block")
    }

    fn block_cost(&self, i: usize, x: &BlockVector) -> f64 {
        match self.mode {
            CostMode::Joint => self.eval(x),
            CostMode::Local => eval_local(&self.inst, i, x).expect("dims checked"),
        }
    }

    fn block_cost_grad(&self, i: usize, x: &BlockVector) -> Vec<f64> {
        block_gradient(&self.inst, i, x, self.mode).expect("dims checked")
    }
}
