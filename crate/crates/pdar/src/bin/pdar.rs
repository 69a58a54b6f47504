//! Command-line harness: generate benchmark instances, run the solvers,
//! compare traces, and replay correctness checks.
//!
//! Exit codes: 0 success/converged, 1 non-convergence or failed check,
//! 2 usage or input error, 3 numerical failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pdar::algorithms::{run, Algorithm, IterationTrace, RunConfig};
use pdar::benchmark::{gen_instance, ResourceAllocationInstance, ResourceProblem};
use pdar::core::{BlockVector, CostMode};
use pdar::error::{Error, Result};
use pdar::regularizer::RegularizerParams;
use pdar::subsolver::SubsolverConfig;
use pdar::trace_io::{compare_summary, read_trace, write_trace, TraceMeta};

#[derive(Parser)]
#[command(name = "pdar", version, about = "Parallel distributed optimization with an adaptive regularizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgoArg {
    Pdar,
    Bcd,
    Pvd,
    Noreg,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Pdar => Algorithm::Pdar,
            AlgoArg::Bcd => Algorithm::Bcd,
            AlgoArg::Pvd => Algorithm::Pvd,
            AlgoArg::Noreg => Algorithm::ParallelNoReg,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CostModeArg {
    Joint,
    Local,
}

impl From<CostModeArg> for CostMode {
    fn from(m: CostModeArg) -> Self {
        match m {
            CostModeArg::Joint => CostMode::Joint,
            CostModeArg::Local => CostMode::Local,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum X0Arg {
    Uniform,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded resource-allocation instance file.
    Gen {
        #[arg(long, value_name = "N")]
        n_agents: usize,
        #[arg(long, default_value_t = 3)]
        n_bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run an algorithm on an instance and write the trace CSV.
    Run {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long, value_name = "FILE")]
        instance: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "joint")]
        cost_mode: CostModeArg,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long = "K", default_value_t = 50)]
        k_threshold: usize,
        #[arg(long, default_value_t = 1e-8)]
        delta: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-8)]
        inner_tol: f64,
        /// Worker threads; defaults to available parallelism. Affects
        /// wall time only, never numeric output.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        time_divisor: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        x0: X0Arg,
    },
    /// Summarize two or more traces over the same instance.
    Compare {
        /// Trace CSV files.
        #[arg(required = true, num_args = 2..)]
        traces: Vec<PathBuf>,
    },
    /// Check analytic block gradients against central finite differences.
    Gradcheck {
        #[arg(long, value_name = "FILE")]
        instance: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
    /// Replay a trace's run and assert the descent-direction property.
    Descentcheck {
        #[arg(long, value_name = "FILE")]
        instance: PathBuf,
        #[arg(long, value_name = "FILE")]
        trace: PathBuf,
    },
    /// Run the paired unregularized/PDAR experiment on the antagonistic
    /// two-agent fixture and report oscillation statistics.
    Oscillate {
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Gen {
            n_agents,
            n_bins,
            seed,
            out,
        } => {
            let inst = gen_instance(n_agents, n_bins, seed)?;
            inst.write_to(&out)?;
            println!("wrote {} agents x {} bins (seed {}) to {}", n_agents, n_bins, seed, out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            algo,
            instance,
            out,
            cost_mode,
            alpha,
            beta,
            k_threshold,
            delta,
            max_iters,
            inner_tol,
            workers,
            time_divisor,
            x0,
        } => cmd_run(RunArgs {
            algo: algo.into(),
            instance,
            out,
            cost_mode: cost_mode.into(),
            alpha,
            beta,
            k_threshold,
            delta,
            max_iters,
            inner_tol,
            workers,
            time_divisor,
            x0,
        }),
        Command::Compare { traces } => cmd_compare(&traces),
        Command::Gradcheck {
            instance,
            points,
            seed,
        } => cmd_gradcheck(&instance, points, seed),
        Command::Descentcheck { instance, trace } => cmd_descentcheck(&instance, &trace),
        Command::Oscillate { max_iters } => cmd_oscillate(max_iters),
    }
}

struct RunArgs {
    algo: Algorithm,
    instance: PathBuf,
    out: PathBuf,
    cost_mode: CostMode,
    alpha: f64,
    beta: f64,
    k_threshold: usize,
    delta: f64,
    max_iters: usize,
    inner_tol: f64,
    workers: Option<usize>,
    time_divisor: f64,
    x0: X0Arg,
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let inst = ResourceAllocationInstance::read_from(&args.instance)?;
    let reg = RegularizerParams::new(args.alpha, args.beta, args.k_threshold, inst.n_agents())?;
    let sub = SubsolverConfig {
        tol: args.inner_tol,
        ..Default::default()
    };
    let cfg = RunConfig {
        reg,
        sub,
        delta: args.delta,
        max_outer_iters: args.max_iters,
        algorithm: args.algo,
        cost_mode: args.cost_mode,
        seed: inst.seed(),
        workers: args.workers,
    };
    let x0 = match args.x0 {
        X0Arg::Uniform => inst.uniform_start(),
        X0Arg::Random => inst.random_start(inst.seed()),
    };

    let mut extras = BTreeMap::new();
    extras.insert("max_iters".into(), args.max_iters.to_string());
    extras.insert(
        "x0".into(),
        match args.x0 {
            X0Arg::Uniform => "uniform".to_string(),
            X0Arg::Random => "random".to_string(),
        },
    );
    if let Some(w) = args.workers {
        extras.insert("workers".into(), w.to_string());
    }
    let meta = TraceMeta {
        algorithm: args.algo.to_string(),
        cost_mode: args.cost_mode.to_string(),
        n_agents: inst.n_agents(),
        n_bins: inst.n_bins(),
        seed: inst.seed(),
        alpha: args.alpha,
        beta: args.beta,
        k_threshold: args.k_threshold,
        delta: args.delta,
        tol: args.inner_tol,
        time_divisor: args.time_divisor,
        timestamp: unix_timestamp(),
        extras,
    };

    let problem = ResourceProblem::new(inst, args.cost_mode);
    let trace = run(&problem, &cfg, &x0)?;
    write_trace(&trace, &meta, &args.out)?;

    println!(
        "{}: {} iterations, final objective {:.12e}, converged={}",
        args.algo,
        trace.iterations,
        trace.final_objective(),
        trace.converged
    );
    Ok(if trace.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_compare(paths: &[PathBuf]) -> Result<ExitCode> {
    let traces: Vec<_> = paths
        .iter()
        .map(|p| read_trace(p))
        .collect::<Result<_>>()?;
    let summary = compare_summary(&traces)?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

/// Central finite-difference gradient of `f` with respect to block `i`.
fn fd_block_grad(
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
        let fp = f(&x.replace_block(i, &plus).expect("dims match"));
        let fm = f(&x.replace_block(i, &minus).expect("dims match"));
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

fn cmd_gradcheck(instance: &PathBuf, points: usize, seed: u64) -> Result<ExitCode> {
    let inst = ResourceAllocationInstance::read_from(instance)?;
    let h = 1e-6;
    let mut max_rel = 0.0f64;

    for t in 0..points {
        let x = inst.random_start(seed.wrapping_add(t as u64));
        for i in 0..inst.n_agents() {
            for mode in [CostMode::Joint, CostMode::Local] {
                let analytic = pdar::benchmark::block_gradient(&inst, i, &x, mode)?;
                let scalar: Box<dyn Fn(&BlockVector) -> f64> = match mode {
                    CostMode::Joint => Box::new(|y: &BlockVector| {
                        pdar::benchmark::eval_objective(&inst, y).expect("dims match")
                    }),
                    CostMode::Local => Box::new(|y: &BlockVector| {
                        pdar::benchmark::eval_local(&inst, i, y).expect("dims match")
                    }),
                };
                let fd = fd_block_grad(&scalar, &x, i, h);
                let num = analytic
                    .iter()
                    .zip(&fd)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let denom = fd.iter().map(|&v| v * v).sum::<f64>().sqrt().max(1.0);
                max_rel = max_rel.max(num / denom);
            }
        }
    }

    println!("max relative gradient error over {points} points (both modes): {max_rel:.3e}");
    Ok(if max_rel <= 1e-6 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_descentcheck(instance: &PathBuf, trace_path: &PathBuf) -> Result<ExitCode> {
    let inst = ResourceAllocationInstance::read_from(instance)?;
    let (rows, meta) = read_trace(trace_path)?;
    if (meta.n_agents, meta.n_bins, meta.seed) != (inst.n_agents(), inst.n_bins(), inst.seed()) {
        return Err(Error::Comparison(format!(
            "trace was recorded on ({}, {}, {}) but instance is ({}, {}, {})",
            meta.n_agents,
            meta.n_bins,
            meta.seed,
            inst.n_agents(),
            inst.n_bins(),
            inst.seed()
        )));
    }

    let replay = replay_from_meta(&inst, &meta, rows.len())?;

    // The replay is deterministic, so objectives must line up with the
    // file before the descent assertion means anything.
    for (row, rep) in rows.iter().zip(&replay.rows) {
        let tol = 1e-12 * row.objective.abs().max(1.0);
        if (row.objective - rep.objective).abs() > tol {
            return Err(Error::Comparison(format!(
                "replay diverged at k={}: file has {:.17e}, replay has {:.17e}",
                row.k, row.objective, rep.objective
            )));
        }
    }

    let mut violations = 0;
    let mut checked = 0;
    for rep in &replay.rows {
        if rep.max_step_norm() > 1e-10 {
            checked += 1;
            if rep.descent_dot >= 0.0 {
                violations += 1;
                eprintln!(
                    "descent violation at k={}: dot = {:.6e}",
                    rep.k, rep.descent_dot
                );
            }
        }
    }
    println!("descent check: {checked} non-stationary iterations, {violations} violations");
    Ok(if violations == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn replay_from_meta(
    inst: &ResourceAllocationInstance,
    meta: &TraceMeta,
    n_rows: usize,
) -> Result<IterationTrace> {
    let algorithm: Algorithm = meta.algorithm.parse()?;
    let cost_mode: CostMode = meta.cost_mode.parse()?;
    let reg = RegularizerParams::new(meta.alpha, meta.beta, meta.k_threshold, inst.n_agents())?;
    let cfg = RunConfig {
        reg,
        sub: SubsolverConfig {
            tol: meta.tol,
            ..Default::default()
        },
        delta: meta.delta,
        max_outer_iters: n_rows,
        algorithm,
        cost_mode,
        seed: inst.seed(),
        workers: None,
    };
    let x0 = match meta.extras.get("x0").map(String::as_str) {
        Some("random") => inst.random_start(inst.seed()),
        _ => inst.uniform_start(),
    };
    let problem = ResourceProblem::new(inst.clone(), cost_mode);
    run(&problem, &cfg, &x0)
}

fn cmd_oscillate(max_iters: usize) -> Result<ExitCode> {
    let inst = ResourceAllocationInstance::antagonistic_fixture();
    let x0 = inst.uniform_start();
    let problem = ResourceProblem::new(inst.clone(), CostMode::Joint);
    let reg = RegularizerParams::new(1.0, 1.0, 50, inst.n_agents())?;

    let noreg_cfg = RunConfig {
        reg,
        algorithm: Algorithm::ParallelNoReg,
        max_outer_iters: max_iters,
        ..Default::default()
    };
    let noreg = run(&problem, &noreg_cfg, &x0)?;
    let increases = count_increases(&noreg);

    // Same iteration budget, but a much tighter stopping tolerance: the
    // point is how small the steps get, not an early stop on a stalled
    // objective.
    let pdar_cfg = RunConfig {
        reg,
        algorithm: Algorithm::Pdar,
        delta: 1e-13,
        max_outer_iters: max_iters,
        ..Default::default()
    };
    let pdar_trace = run(&problem, &pdar_cfg, &x0)?;
    let final_step = pdar_trace
        .rows
        .last()
        .map(|r| r.max_step_norm())
        .unwrap_or(f64::NAN);

    println!("noreg: {} objective increases in {} iterations, converged={}",
        increases, noreg.iterations, noreg.converged);
    println!(
        "pdar:  converged={} after {} iterations, final max step norm {:.3e}",
        pdar_trace.converged, pdar_trace.iterations, final_step
    );

    let ok = increases >= 1 && !noreg.converged && final_step <= 1e-6;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn count_increases(trace: &IterationTrace) -> usize {
    trace
        .rows
        .windows(2)
        .filter(|w| w[1].objective > w[0].objective)
        .count()
}

fn unix_timestamp() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into())
}
