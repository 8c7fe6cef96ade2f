//! The `generate`, `train`, `eval` and `compare` commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use qapcore::agent::{init_seed, train_with_observer, CurveRecord, RlSolver, CURVE_HEADER};
use qapcore::model::{Checkpoint, ModelParams};
use qapcore::problem::kl_penalty;
use qapcore::solver::{Solver, SolverRegistry};
use qapcore::ProblemInstance;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{instance_seed, solve_seed, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::output::{ensure_dir, fmt9, mean_std, write_json, Table};

pub const CODE_VERSION: &str = concat!("qapbench ", env!("CARGO_PKG_VERSION"));

/// One method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub m: usize,
    pub instance: usize,
    pub instance_seed: u64,
    pub risk: f64,
    pub kl: f64,
    pub feasible: bool,
    /// Phones per host.
    pub occupancy: Vec<usize>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: String,
    pub m: usize,
    pub count: usize,
    pub mean_risk: f64,
    pub std_risk: f64,
    pub mean_kl: f64,
    pub feasible_fraction: f64,
    pub mean_occupancy: Vec<f64>,
}

impl Aggregate {
    /// Groups `rows` by `(m, method)` in first-seen order.
    pub fn from_rows(rows: &[ResultRow]) -> Vec<Aggregate> {
        let mut keys: Vec<(usize, &str)> = Vec::new();
        for r in rows {
            if !keys.contains(&(r.m, r.method.as_str())) {
                keys.push((r.m, r.method.as_str()));
            }
        }
        keys.into_iter()
            .map(|(m, method)| {
                let group: Vec<&ResultRow> = rows.iter().filter(|r| r.m == m && r.method == method).collect();
                let risks: Vec<f64> = group.iter().map(|r| r.risk).collect();
                let (mean_risk, std_risk) = mean_std(&risks);
                let count = group.len();
                let n = group[0].occupancy.len();
                Aggregate {
                    method: method.to_string(),
                    m,
                    count,
                    mean_risk,
                    std_risk,
                    mean_kl: group.iter().map(|r| r.kl).sum::<f64>() / count as f64,
                    feasible_fraction: group.iter().filter(|r| r.feasible).count() as f64 / count as f64,
                    mean_occupancy: (0..n)
                        .map(|h| group.iter().map(|r| r.occupancy[h] as f64).sum::<f64>() / count as f64)
                        .collect(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingSummary {
    pub episodes: usize,
    pub updates: u64,
    pub init_seed: u64,
    pub train_seed: u64,
    pub final_mean_return: f64,
}

/// Reproducibility record written next to each command's CSVs.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
    pub wall_time_secs: f64,
}

impl RunRecord {
    fn new(command: &str, cfg: &ExperimentConfig, rows: Vec<ResultRow>, started: Instant) -> Self {
        Self {
            command: command.into(),
            code_version: CODE_VERSION.into(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            aggregates: Aggregate::from_rows(&rows),
            rows,
            training: None,
            wall_time_secs: started.elapsed().as_secs_f64(),
        }
    }
}

/// Rayon pool with `threads` workers, or the global default when `None`.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(BenchError::Config("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| BenchError::Config(e.to_string()))
}

/// Evaluation instance `index` at size `m`.
pub fn eval_instance(cfg: &ExperimentConfig, m: usize, index: usize) -> Result<ProblemInstance> {
    Ok(cfg.sampler(m)?.sample(instance_seed(cfg.master_seed, m, index))?)
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone)]
pub struct GeneratedFile {
    pub path: PathBuf,
    pub m: usize,
    pub index: usize,
    pub seed: u64,
}

/// Writes `count` instances per evaluation size plus `manifest.csv`.
pub fn cmd_generate(cfg: &ExperimentConfig, count: usize, out: &Path) -> Result<Vec<GeneratedFile>> {
    if count == 0 {
        return Err(BenchError::Config("--count must be at least 1".into()));
    }
    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut manifest = Table::new(["file", "m", "n", "index", "seed"]);
    for &m in &cfg.eval_sizes {
        let sampler = cfg.sampler(m)?;
        for index in 0..count {
            let seed = instance_seed(cfg.master_seed, m, index);
            let inst = sampler.sample(seed)?;
            let name = format!("m{m}_{index:04}.qapinst");
            let path = out.join(&name);
            std::fs::write(&path, inst.to_text()).map_err(|e| BenchError::io(&path, e))?;
            manifest.push(vec![name, m.to_string(), inst.n().to_string(), index.to_string(), seed.to_string()]);
            files.push(GeneratedFile { path, m, index, seed });
        }
    }
    manifest.write(&out.join("manifest.csv"), &cfg.hash(), cfg.master_seed)?;
    Ok(files)
}

// ------------------------------------------------------------------- train

pub fn curve_table(curve: &[CurveRecord]) -> Table {
    let mut t = Table::new(CURVE_HEADER.split(','));
    for r in curve {
        t.push(r.csv_row().split(',').map(String::from).collect());
    }
    t
}

pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub curve: Vec<CurveRecord>,
    pub params: ModelParams,
}

/// Trains on `train_m`-phone graphs; writes `checkpoint.json`, `curve.csv`,
/// `run_record.json` and, with `checkpoint_every > 0`, `checkpoints/ep*.json`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainArtifacts> {
    let started = Instant::now();
    ensure_dir(out)?;
    let sampler = cfg.sampler(cfg.train_m)?;
    let tcfg = cfg.effective_train();
    let init_seed = init_seed(&tcfg);
    let every = cfg.checkpoint_every;
    let ckpt_dir = out.join("checkpoints");
    if every > 0 {
        ensure_dir(&ckpt_dir)?;
    }
    let mut observer = |episode: usize, params: &ModelParams| -> qapcore::Result<()> {
        if every > 0 && episode.is_multiple_of(every) {
            Checkpoint { params: params.clone(), seed: init_seed }.save(&ckpt_dir.join(format!("ep{episode:06}.json")))?;
        }
        Ok(())
    };
    let output = train_with_observer(sampler.as_ref(), &tcfg, &mut observer)?;

    let checkpoint = out.join("checkpoint.json");
    Checkpoint { params: output.params.clone(), seed: output.init_seed }.save(&checkpoint)?;
    curve_table(&output.curve).write(&out.join("curve.csv"), &cfg.hash(), cfg.master_seed)?;
    let mut record = RunRecord::new("train", cfg, Vec::new(), started);
    record.training = Some(TrainingSummary {
        episodes: output.curve.len(),
        updates: output.updates,
        init_seed: output.init_seed,
        train_seed: tcfg.seed,
        final_mean_return: output.curve.last().map_or(f64::NAN, |c| c.mean_return),
    });
    write_json(&out.join("run_record.json"), &record)?;
    Ok(TrainArtifacts { checkpoint, curve: output.curve, params: output.params })
}

// -------------------------------------------------------------- eval/compare

pub fn load_params(cfg: &ExperimentConfig, path: &Path) -> Result<Arc<ModelParams>> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.params.n() != cfg.hosts() {
        return Err(BenchError::Config(format!(
            "checkpoint {} scores {} hosts but the config has {}",
            path.display(),
            ckpt.params.n(),
            cfg.hosts()
        )));
    }
    Ok(Arc::new(ckpt.params))
}

fn rl_solver(cfg: &ExperimentConfig, params: Arc<ModelParams>) -> RlSolver {
    RlSolver::new(params, cfg.train.beta)
        .with_start(cfg.train.eval_start)
        .with_visit_order(cfg.train.visit_order)
}

/// Runs every solver on the same `eval_batch` instances per size. Rows come
/// back grouped by size, then instance, then solver order.
pub fn run_methods(
    cfg: &ExperimentConfig,
    solvers: &[&dyn Solver],
    pool: &rayon::ThreadPool,
) -> Result<Vec<ResultRow>> {
    let tasks: Vec<(usize, usize)> = cfg
        .eval_sizes
        .iter()
        .flat_map(|&m| (0..cfg.eval_batch).map(move |j| (m, j)))
        .collect();
    let per_task: Vec<Result<Vec<ResultRow>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, j)| {
                let inst = eval_instance(cfg, m, j)?;
                let seed = instance_seed(cfg.master_seed, m, j);
                solvers
                    .iter()
                    .map(|s| {
                        let out = s.solve(&inst, solve_seed(seed))?;
                        Ok(ResultRow {
                            method: s.name().to_string(),
                            m,
                            instance: j,
                            instance_seed: seed,
                            risk: out.risk,
                            kl: kl_penalty(&inst, &out.allocation),
                            feasible: out.feasible,
                            occupancy: out.allocation.counts(inst.n()),
                            wall_time_secs: out.wall_time.as_secs_f64(),
                        })
                    })
                    .collect()
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(tasks.len() * solvers.len());
    for r in per_task {
        rows.extend(r?);
    }
    let order = |name: &str| solvers.iter().position(|s| s.name() == name).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.m, r.instance, order(&r.method)));
    Ok(rows)
}

fn host_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |h| format!("{prefix}{h}"))
}

pub struct EvalArtifacts {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Greedy rollouts of a trained model over the evaluation sweep; writes
/// `eval.csv` (one row per instance), `eval_summary.csv` (one row per size)
/// and `run_record.json`.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path, pool: &rayon::ThreadPool) -> Result<EvalArtifacts> {
    let started = Instant::now();
    let params = load_params(cfg, checkpoint)?;
    ensure_dir(out)?;
    let solver = rl_solver(cfg, params);
    let rows = run_methods(cfg, &[&solver], pool)?;
    let n = cfg.hosts();
    let (hash, seed) = (cfg.hash(), cfg.master_seed);

    let mut per = Table::new(
        ["m", "instance", "instance_seed", "risk", "kl", "feasible"]
            .map(String::from)
            .into_iter()
            .chain(host_columns("occupancy_", n)),
    );
    for r in &rows {
        let mut row = vec![
            r.m.to_string(),
            r.instance.to_string(),
            r.instance_seed.to_string(),
            fmt9(r.risk),
            fmt9(r.kl),
            r.feasible.to_string(),
        ];
        row.extend(r.occupancy.iter().map(|c| c.to_string()));
        per.push(row);
    }
    per.write(&out.join("eval.csv"), &hash, seed)?;

    let aggregates = Aggregate::from_rows(&rows);
    let mut summary = Table::new(
        ["m", "count", "mean_risk", "std_risk", "mean_kl", "feasible_fraction"]
            .map(String::from)
            .into_iter()
            .chain(host_columns("mean_occupancy_", n))
            .chain(host_columns("desired_", n)),
    );
    for a in &aggregates {
        let mut row = vec![
            a.m.to_string(),
            a.count.to_string(),
            fmt9(a.mean_risk),
            fmt9(a.std_risk),
            fmt9(a.mean_kl),
            fmt9(a.feasible_fraction),
        ];
        row.extend(a.mean_occupancy.iter().map(|v| fmt9(*v)));
        let desired = eval_instance(cfg, a.m, 0)?.desired().to_vec();
        row.extend(desired.iter().map(|q| fmt9(q * a.m as f64)));
        summary.push(row);
    }
    summary.write(&out.join("eval_summary.csv"), &hash, seed)?;
    write_json(&out.join("run_record.json"), &RunRecord::new("eval", cfg, rows.clone(), started))?;
    Ok(EvalArtifacts { rows, aggregates })
}

pub struct CompareArtifacts {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs `methods` on identical instance sets; writes `compare.csv` (paired
/// rows), `plot_data.csv` (mean and std of risk per size and method),
/// `gaps.csv` when both `rl` and `qp` ran, and `run_record.json`.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    methods: &[String],
    out: &Path,
    pool: &rayon::ThreadPool,
) -> Result<CompareArtifacts> {
    let started = Instant::now();
    if methods.is_empty() {
        return Err(BenchError::Config("no methods selected".into()));
    }
    let mut registry = SolverRegistry::with_baselines();
    if methods.iter().any(|m| m == "rl") {
        let path = checkpoint.ok_or_else(|| BenchError::Config("method rl needs --checkpoint".into()))?;
        registry.register(Box::new(rl_solver(cfg, load_params(cfg, path)?)));
    }
    let solvers = registry.select(methods)?;
    for s in &solvers {
        for &m in &cfg.eval_sizes {
            s.supports(&eval_instance(cfg, m, 0)?)
                .map_err(|e| BenchError::Config(format!("{} at m = {m}: {e}", s.name())))?;
        }
    }
    ensure_dir(out)?;
    let rows = run_methods(cfg, &solvers, pool)?;
    let (hash, seed) = (cfg.hash(), cfg.master_seed);

    let mut paired = Table::new(["m", "instance", "instance_seed", "method", "risk", "kl", "feasible"]);
    for r in &rows {
        paired.push(vec![
            r.m.to_string(),
            r.instance.to_string(),
            r.instance_seed.to_string(),
            r.method.clone(),
            fmt9(r.risk),
            fmt9(r.kl),
            r.feasible.to_string(),
        ]);
    }
    paired.write(&out.join("compare.csv"), &hash, seed)?;

    let aggregates = Aggregate::from_rows(&rows);
    let mut plot = Table::new(["m", "method", "mean_risk", "std_risk", "count"]);
    let mut sorted = aggregates.clone();
    let order = |name: &str| methods.iter().position(|m| m == name);
    sorted.sort_by_key(|a| (a.m, order(&a.method)));
    for a in &sorted {
        plot.push(vec![a.m.to_string(), a.method.clone(), fmt9(a.mean_risk), fmt9(a.std_risk), a.count.to_string()]);
    }
    plot.write(&out.join("plot_data.csv"), &hash, seed)?;

    if order("rl").is_some() && order("qp").is_some() {
        gap_table(&rows).write(&out.join("gaps.csv"), &hash, seed)?;
    }
    write_json(&out.join("run_record.json"), &RunRecord::new("compare", cfg, rows.clone(), started))?;
    Ok(CompareArtifacts { rows, aggregates })
}

/// Per-instance `rl − qp` risk and `rl / qp` ratio.
pub fn gap_table(rows: &[ResultRow]) -> Table {
    let mut t = Table::new(["m", "instance", "instance_seed", "rl_risk", "qp_risk", "gap", "ratio"]);
    for rl in rows.iter().filter(|r| r.method == "rl") {
        let Some(qp) = rows.iter().find(|r| r.method == "qp" && r.m == rl.m && r.instance == rl.instance) else {
            continue;
        };
        let ratio = if qp.risk > 0.0 { fmt9(rl.risk / qp.risk) } else { String::new() };
        t.push(vec![
            rl.m.to_string(),
            rl.instance.to_string(),
            rl.instance_seed.to_string(),
            fmt9(rl.risk),
            fmt9(qp.risk),
            fmt9(rl.risk - qp.risk),
            ratio,
        ]);
    }
    t
}
