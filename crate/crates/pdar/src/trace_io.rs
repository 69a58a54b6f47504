//! Trace persistence and run comparison.
//!
//! Traces go to a plain CSV: `# key=value` metadata lines, one column
//! header, then one row per outer iteration. Decimals carry 17
//! significant digits so values survive a write/read round trip exactly.
//! UTF-8, LF line endings, `,` separator.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::algorithms::IterationTrace;
use crate::error::{Error, Result};

const COLUMNS: &str = "k,wall_time_ms,normalized_time,objective,max_step_norm,mean_lambda,descent_dot";

/// Header metadata written before the column row. Every run parameter is
/// included so a trace file fully describes how to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceMeta {
    pub algorithm: String,
    pub cost_mode: String,
    pub n_agents: usize,
    pub n_bins: usize,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub k_threshold: usize,
    pub delta: f64,
    pub tol: f64,
    /// Wall times are divided by this to produce `normalized_time`.
    /// Defaults to 1; the core-count normalization is an explicit opt-in.
    pub time_divisor: f64,
    pub timestamp: String,
    /// Additional self-describing `key=value` pairs (starting point,
    /// iteration caps, worker count, ...).
    pub extras: BTreeMap<String, String>,
}

/// One parsed CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub wall_time_ms: f64,
    pub normalized_time: f64,
    pub objective: f64,
    pub max_step_norm: f64,
    pub mean_lambda: f64,
    pub descent_dot: f64,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a trace and its metadata as CSV.
pub fn write_trace(trace: &IterationTrace, meta: &TraceMeta, path: &Path) -> Result<()> {
    if trace.rows.is_empty() {
        return Err(Error::Contract("cannot write an empty trace".into()));
    }
    let mut out = String::new();
    out.push_str(&format!("# algorithm={}\n", meta.algorithm));
    out.push_str(&format!("# cost_mode={}\n", meta.cost_mode));
    out.push_str(&format!("# n_agents={}\n", meta.n_agents));
    out.push_str(&format!("# n_bins={}\n", meta.n_bins));
    out.push_str(&format!("# seed={}\n", meta.seed));
    out.push_str(&format!("# alpha={}\n", fmt(meta.alpha)));
    out.push_str(&format!("# beta={}\n", fmt(meta.beta)));
    out.push_str(&format!("# k_threshold={}\n", meta.k_threshold));
    out.push_str(&format!("# delta={}\n", fmt(meta.delta)));
    out.push_str(&format!("# tol={}\n", fmt(meta.tol)));
    out.push_str(&format!("# time_divisor={}\n", fmt(meta.time_divisor)));
    out.push_str(&format!("# timestamp={}\n", meta.timestamp));
    for (key, value) in &meta.extras {
        out.push_str(&format!("# {key}={value}\n"));
    }
    out.push_str(COLUMNS);
    out.push('\n');
    for row in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.k,
            fmt(row.wall_time_ms),
            fmt(row.wall_time_ms / meta.time_divisor),
            fmt(row.objective),
            fmt(row.max_step_norm()),
            fmt(row.mean_lambda()),
            fmt(row.descent_dot),
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a trace file back into rows and metadata.
pub fn read_trace(path: &Path) -> Result<(Vec<TraceRow>, TraceMeta)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, detail: String| Error::Parse {
        path: path.display().to_string(),
        line,
        detail,
    };

    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut saw_header = false;
    let mut expected_k = 1;

    for (ln0, line) in text.lines().enumerate() {
        let ln = ln0 + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| parse_err(ln, "metadata line without '='".into()))?;
            meta.insert(key.trim().to_string(), value.trim().to_string());
            continue;
        }
        if !saw_header {
            if line.trim() != COLUMNS {
                return Err(parse_err(ln, format!("expected column header '{COLUMNS}'")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(ln, format!("expected 7 fields, got {}", fields.len())));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(ln, format!("bad k: {e}")))?;
        if k != expected_k {
            return Err(parse_err(ln, format!("expected k={expected_k}, got {k}")));
        }
        expected_k += 1;
        let mut nums = [0.0f64; 6];
        for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse()
                .map_err(|e| parse_err(ln, format!("bad number '{field}': {e}")))?;
        }
        rows.push(TraceRow {
            k,
            wall_time_ms: nums[0],
            normalized_time: nums[1],
            objective: nums[2],
            max_step_norm: nums[3],
            mean_lambda: nums[4],
            descent_dot: nums[5],
        });
    }

    if rows.is_empty() {
        return Err(parse_err(text.lines().count(), "no data rows".into()));
    }

    let mut meta = meta;
    fn take(meta: &mut BTreeMap<String, String>, key: &str, path: &Path) -> Result<String> {
        meta.remove(key).ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            detail: format!("missing metadata key '{key}'"),
        })
    }
    fn take_parsed<T: std::str::FromStr>(
        meta: &mut BTreeMap<String, String>,
        key: &str,
        path: &Path,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        take(meta, key, path)?.parse().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            detail: format!("bad {key}: {e}"),
        })
    }
    let parsed = TraceMeta {
        algorithm: take(&mut meta, "algorithm", path)?,
        cost_mode: take(&mut meta, "cost_mode", path)?,
        n_agents: take_parsed(&mut meta, "n_agents", path)?,
        n_bins: take_parsed(&mut meta, "n_bins", path)?,
        seed: take_parsed(&mut meta, "seed", path)?,
        alpha: take_parsed(&mut meta, "alpha", path)?,
        beta: take_parsed(&mut meta, "beta", path)?,
        k_threshold: take_parsed(&mut meta, "k_threshold", path)?,
        delta: take_parsed(&mut meta, "delta", path)?,
        tol: take_parsed(&mut meta, "tol", path)?,
        time_divisor: take_parsed(&mut meta, "time_divisor", path)?,
        timestamp: take(&mut meta, "timestamp", path)?,
        extras: meta,
    };
    Ok((rows, parsed))
}

/// Per-algorithm line of a comparison.
#[derive(Clone, Debug)]
pub struct AlgoSummary {
    pub algorithm: String,
    pub cost_mode: String,
    pub final_objective: f64,
    pub iterations: usize,
    /// Normalized time of the first row whose objective is within 1% of
    /// the best final objective across all compared traces.
    pub time_to_within_1pct: Option<f64>,
}

/// Output of [`compare_summary`].
#[derive(Clone, Debug)]
pub struct CompareSummary {
    pub entries: Vec<AlgoSummary>,
    /// `gaps[a][b] = |f_a - f_b| / max(|f_a|, |f_b|)`; symmetric, zero on
    /// the diagonal.
    pub pairwise_gaps: Vec<Vec<f64>>,
}

impl std::fmt::Display for CompareSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<14} {:<6} {:>22} {:>10} {:>18}",
            "algorithm", "mode", "final objective", "iters", "time to 1% (norm)"
        )?;
        for e in &self.entries {
            let t = e
                .time_to_within_1pct
                .map(|t| format!("{t:.3}"))
                .unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:<14} {:<6} {:>22.12e} {:>10} {:>18}",
                e.algorithm, e.cost_mode, e.final_objective, e.iterations, t
            )?;
        }
        writeln!(f, "pairwise relative final-objective gaps:")?;
        for (a, row) in self.pairwise_gaps.iter().enumerate() {
            for (b, gap) in row.iter().enumerate() {
                writeln!(
                    f,
                    "  {} vs {}: {:.3e}",
                    self.entries[a].algorithm, self.entries[b].algorithm, gap
                )?;
            }
        }
        Ok(())
    }
}

/// Summarizes two or more traces over the same instance.
pub fn compare_summary(traces: &[(Vec<TraceRow>, TraceMeta)]) -> Result<CompareSummary> {
    if traces.len() < 2 {
        return Err(Error::Comparison("need at least two traces".into()));
    }
    let first = &traces[0].1;
    for (_, m) in traces {
        if (m.n_agents, m.n_bins, m.seed) != (first.n_agents, first.n_bins, first.seed) {
            return Err(Error::Comparison(format!(
                "instance mismatch: ({}, {}, {}) vs ({}, {}, {})",
                m.n_agents, m.n_bins, m.seed, first.n_agents, first.n_bins, first.seed
            )));
        }
    }

    let finals: Vec<f64> = traces
        .iter()
        .map(|(rows, _)| rows.last().expect("read_trace rejects empty").objective)
        .collect();
    let best = finals.iter().copied().fold(f64::INFINITY, f64::min);
    let target = best + 0.01 * best.abs();

    let entries = traces
        .iter()
        .zip(&finals)
        .map(|((rows, m), &fin)| AlgoSummary {
            algorithm: m.algorithm.clone(),
            cost_mode: m.cost_mode.clone(),
            final_objective: fin,
            iterations: rows.len(),
            time_to_within_1pct: rows
                .iter()
                .find(|r| r.objective <= target)
                .map(|r| r.normalized_time),
        })
        .collect();

    let n = finals.len();
    let mut gaps = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let denom = finals[a].abs().max(finals[b].abs());
            gaps[a][b] = if denom == 0.0 {
                0.0
            } else {
                (finals[a] - finals[b]).abs() / denom
            };
        }
    }

    Ok(CompareSummary {
        entries,
        pairwise_gaps: gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_pdar, Algorithm, RunConfig};
    use crate::benchmark::{gen_instance, ResourceProblem};
    use crate::core::CostMode;
    use crate::regularizer::RegularizerParams;

    fn sample_trace(n_agents: usize, seed: u64) -> IterationTrace {
        let inst = gen_instance(n_agents, 3, seed).unwrap();
        let x0 = inst.uniform_start();
        let p = ResourceProblem::new(inst, CostMode::Joint);
        let cfg = RunConfig {
            reg: RegularizerParams {
                n_agents,
                ..Default::default()
            },
            algorithm: Algorithm::Pdar,
            ..Default::default()
        };
        run_pdar(&p, &cfg, &x0).unwrap()
    }

    fn sample_meta(seed: u64, time_divisor: f64) -> TraceMeta {
        TraceMeta {
            algorithm: "pdar".into(),
            cost_mode: "joint".into(),
            n_agents: 3,
            n_bins: 3,
            seed,
            alpha: 1.0,
            beta: 1.0,
            k_threshold: 50,
            delta: 1e-8,
            tol: 1e-8,
            time_divisor,
            timestamp: "test".into(),
            extras: BTreeMap::new(),
        }
    }

    #[test]
    fn round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let trace = sample_trace(3, 5);
        let meta = sample_meta(5, 1.0);
        write_trace(&trace, &meta, &path).unwrap();
        let (rows, back) = read_trace(&path).unwrap();
        assert_eq!(meta, back);
        assert_eq!(rows.len(), trace.rows.len());
        for (r, orig) in rows.iter().zip(&trace.rows) {
            assert_eq!(r.k, orig.k);
            assert_eq!(r.objective, orig.objective);
            assert_eq!(r.wall_time_ms, orig.wall_time_ms);
            assert_eq!(r.max_step_norm, orig.max_step_norm());
            assert_eq!(r.mean_lambda, orig.mean_lambda());
            assert_eq!(r.descent_dot, orig.descent_dot);
        }
    }

    #[test]
    fn single_row_trace_writes_one_data_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        let mut trace = sample_trace(3, 5);
        trace.rows.truncate(1);
        write_trace(&trace, &sample_meta(5, 1.0), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let data_rows = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('k'))
            .count();
        assert_eq!(data_rows, 1);
    }

    #[test]
    fn normalized_time_uses_divisor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let trace = sample_trace(3, 5);
        write_trace(&trace, &sample_meta(5, 25.0), &path).unwrap();
        let (rows, _) = read_trace(&path).unwrap();
        for (r, orig) in rows.iter().zip(&trace.rows) {
            assert_eq!(r.normalized_time, orig.wall_time_ms / 25.0);
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            format!("# algorithm=pdar\n{COLUMNS}\n1,nope,0,0,0,0,0\n"),
        )
        .unwrap();
        match read_trace(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn identical_traces_have_zero_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let trace = sample_trace(3, 5);
        write_trace(&trace, &sample_meta(5, 1.0), &path).unwrap();
        let parsed = read_trace(&path).unwrap();
        let summary = compare_summary(&[parsed.clone(), parsed]).unwrap();
        for row in &summary.pairwise_gaps {
            for &g in row {
                assert_eq!(g, 0.0);
            }
        }
    }

    #[test]
    fn mismatched_seeds_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_trace(&sample_trace(3, 5), &sample_meta(5, 1.0), &pa).unwrap();
        write_trace(&sample_trace(3, 6), &sample_meta(6, 1.0), &pb).unwrap();
        let a = read_trace(&pa).unwrap();
        let b = read_trace(&pb).unwrap();
        assert!(matches!(
            compare_summary(&[a, b]).unwrap_err(),
            Error::Comparison(_)
        ));
    }

    #[test]
    fn gaps_symmetric() {
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.csv");
        write_trace(&sample_trace(3, 5), &sample_meta(5, 1.0), &pa).unwrap();
        let a = read_trace(&pa).unwrap();
        let mut b = a.clone();
        // Perturb the final objective of the copy.
        b.0.last_mut().unwrap().objective *= 1.005;
        b.1.algorithm = "bcd".into();
        let summary = compare_summary(&[a, b]).unwrap();
        let g = &summary.pairwise_gaps;
        assert_eq!(g[0][1], g[1][0]);
        assert_eq!(g[0][0], 0.0);
        assert!(g[0][1] > 0.0);
    }
}
