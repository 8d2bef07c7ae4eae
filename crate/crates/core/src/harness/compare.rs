use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{evaluate_policy, train_policy, EpisodeLog, EvalMetrics, Pipeline};
use crate::error::{Error, Result};
use crate::rl::{Algorithm, HyperParams};
use crate::state::{PcaBasis, StateSpec};

pub const CSV_HEADER: &str = "spec,algorithm,seed,avg_reward,task_success_pct,episodes,train_steps";

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub hp: HyperParams,
    pub train_steps: usize,
    pub eval_steps: usize,
    /// Upper bound on concurrent learners; 0 means one per available core.
    pub workers: usize,
}

/// One (spec, algorithm, seed) cell of the grid.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub spec: StateSpec,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub train_steps: usize,
    pub outcome: std::result::Result<EvalMetrics, String>,
}

/// Trains and evaluates the full cross product of `specs x algorithms x
/// seeds` on a bounded pool of worker threads. Results come back in grid
/// order whatever the scheduling; a failing cell does not stop the others.
pub fn compare_representations(
    base: &Pipeline,
    specs: &[(StateSpec, Option<Arc<PcaBasis>>)],
    algorithms: &[Algorithm],
    seeds: &[u64],
    opts: &CompareOptions,
) -> Result<Vec<CellResult>> {
    let pipelines = specs.iter().map(|(s, b)| base.with_spec(*s, b.clone())).collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (pi, _) in specs.iter().enumerate() {
        for &algo in algorithms {
            for &seed in seeds {
                jobs.push((pi, algo, seed));
            }
        }
    }
    let workers = match opts.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(pi, algorithm, seed)) = jobs.get(i) else { break };
                let pipeline = &pipelines[pi];
                let outcome = train_policy(pipeline, algorithm, &opts.hp, opts.train_steps, seed)
                    .and_then(|t| evaluate_policy(pipeline, &t.params, opts.eval_steps, seed))
                    .map_err(|e| e.to_string());
                let cell = CellResult { spec: pipeline.spec(), algorithm, seed, train_steps: opts.train_steps, outcome };
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(cell);
            });
        }
    });
    Ok(slots.into_inner().expect("workers joined").into_iter().map(|c| c.expect("every job ran")).collect())
}

/// Best and mean/sd over seeds of one metric.
#[derive(Debug, Clone, Copy)]
struct Summary {
    best: f64,
    mean: f64,
    sd: f64,
}

fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some(Summary { best: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max), mean, sd: var.sqrt() })
}

/// Best-over-seeds task success for one (spec, algorithm) cell.
pub fn best_success(cells: &[CellResult], spec: StateSpec, algorithm: Algorithm) -> Option<f64> {
    let v: Vec<f64> = cells
        .iter()
        .filter(|c| c.spec == spec && c.algorithm == algorithm)
        .filter_map(|c| c.outcome.as_ref().ok().map(|m| m.task_success_pct))
        .collect();
    summarize(&v).map(|s| s.best)
}

/// Plain-text table: one row per state representation, a reward and a
/// success column per algorithm. Each entry is `best (mean ± sd)` over seeds.
pub fn format_table(cells: &[CellResult]) -> String {
    let mut specs: Vec<StateSpec> = Vec::new();
    let mut algos: Vec<Algorithm> = Vec::new();
    for c in cells {
        if !specs.contains(&c.spec) {
            specs.push(c.spec);
        }
        if !algos.contains(&c.algorithm) {
            algos.push(c.algorithm);
        }
    }
    let fmt = |s: Option<Summary>| match s {
        Some(s) => format!("{:.2} ({:.2} ± {:.2})", s.best, s.mean, s.sd),
        None => "failed".to_string(),
    };
    let mut header = vec!["State representation".to_string()];
    for a in &algos {
        header.push(format!("{a} avg reward"));
        header.push(format!("{a} task success (%)"));
    }
    let mut rows = vec![header];
    for &spec in &specs {
        let mut row = vec![spec.label()];
        for &algo in &algos {
            let ok: Vec<&EvalMetrics> = cells
                .iter()
                .filter(|c| c.spec == spec && c.algorithm == algo)
                .filter_map(|c| c.outcome.as_ref().ok())
                .collect();
            row.push(fmt(summarize(&ok.iter().map(|m| m.avg_reward).collect::<Vec<_>>())));
            row.push(fmt(summarize(&ok.iter().map(|m| m.task_success_pct).collect::<Vec<_>>())));
        }
        rows.push(row);
    }
    let widths: Vec<usize> =
        (0..rows[0].len()).map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (ri, row) in rows.iter().enumerate() {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join(" | ").trim_end());
        if ri == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("-|-"));
        }
    }
    let failures: Vec<&CellResult> = cells.iter().filter(|c| c.outcome.is_err()).collect();
    for c in failures {
        let _ = writeln!(out, "failed: {} {} seed {}: {}", c.spec, c.algorithm, c.seed, c.outcome.as_ref().unwrap_err());
    }
    out
}

pub fn write_csv<W: Write>(w: &mut W, cells: &[CellResult]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for c in cells {
        match &c.outcome {
            Ok(m) => writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.spec, c.algorithm, c.seed, m.avg_reward, m.task_success_pct, m.episodes, c.train_steps
            )?,
            Err(_) => writeln!(w, "{},{},{},,,0,{}", c.spec, c.algorithm, c.seed, c.train_steps)?,
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    spec: String,
    algorithm: Algorithm,
    #[serde(flatten)]
    log: EpisodeLog,
}

/// Writes `results.csv`, `table.txt` and `episodes.jsonl` under `dir`, then
/// reads the episode log back and checks every aggregate against it.
pub fn write_outputs(dir: &Path, cells: &[CellResult]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(std::fs::File::create(dir.join("results.csv"))?);
    write_csv(&mut csv, cells)?;
    csv.flush()?;
    std::fs::write(dir.join("table.txt"), format_table(cells))?;

    let path = dir.join("episodes.jsonl");
    let mut w = BufWriter::new(std::fs::File::create(&path)?);
    for c in cells {
        if let Ok(m) = &c.outcome {
            for log in &m.logs {
                let line = LogLine { spec: c.spec.to_string(), algorithm: c.algorithm, log: log.clone() };
                serde_json::to_writer(&mut w, &line)?;
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    drop(w);

    let mut by_cell: Vec<Vec<EpisodeLog>> = vec![Vec::new(); cells.len()];
    for line in BufReader::new(std::fs::File::open(&path)?).lines() {
        let l: LogLine = serde_json::from_str(&line?)?;
        let i = cells
            .iter()
            .position(|c| c.spec.to_string() == l.spec && c.algorithm == l.algorithm && c.seed == l.log.seed)
            .ok_or_else(|| Error::Inconsistent("episode log line matches no cell".into()))?;
        by_cell[i].push(l.log);
    }
    for (c, logs) in cells.iter().zip(by_cell) {
        if let Ok(m) = &c.outcome {
            let again = EvalMetrics::from_logs(logs, m.env_steps)?;
            if again != *m {
                return Err(Error::Inconsistent(format!("{} {} seed {}: logs do not reproduce metrics", c.spec, c.algorithm, c.seed)));
            }
        }
    }
    Ok(())
}
