//! Experiment harness: runs every (problem, population, algorithm, repeat)
//! cell, aggregates final fitness into mean/std summary rows, and renders
//! summary tables and convergence series as CSV.
//!
//! Output is fully determined by the configuration. Each run's seed is a
//! SHA-256 derivation of `(master seed, problem id, algorithm, repeat)`, and
//! results are collected in job order whatever the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{run_aqga, run_ga, AqgaConfig, GaConfig};
use crate::eaqga::{run_eaqga, EaqgaConfig};
use crate::error::{Error, Result};
use crate::oracle::{brute_force, DEFAULT_N_LIMIT};
use crate::problem::{synth_problem, QuboProblem, SynthSpec};
use crate::record::{Algorithm, RunRecord};

/// Environment variable consulted when `[run] parallelism` is unset.
pub const THREADS_ENV: &str = "EAQGA_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemsSection {
    /// Problem JSON files, relative to the config file.
    pub files: Vec<PathBuf>,
    pub synth: Vec<SynthEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEntry {
    #[serde(default)]
    pub id: Option<String>,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub spec: SynthSpec,
}

/// Algorithm hyperparameters. A missing table disables the algorithm unless
/// the whole section is absent, in which case all three run with defaults.
/// Population, iteration count and seed always come from `[run]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmsSection {
    pub eaqga: Option<EaqgaConfig>,
    pub ga: Option<GaConfig>,
    pub aqga: Option<AqgaConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub populations: Vec<usize>,
    pub iterations: usize,
    pub repeats: usize,
    pub seed: u64,
    pub parallelism: Option<usize>,
    /// Largest problem the exact oracle is run on.
    pub oracle_limit: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            populations: vec![10],
            iterations: 20,
            repeats: 100,
            seed: 0,
            parallelism: None,
            oracle_limit: DEFAULT_N_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Multiplier applied to fitness values in the summary table.
    pub scale: f64,
    /// Store wall-clock times in raw records; makes output non-reproducible.
    pub record_wall_time: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            scale: 1.0,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: ProblemsSection,
    pub algorithms: Option<AlgorithmsSection>,
    pub run: RunSection,
    pub output: OutputSection,
    /// Directory that relative problem paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let raw: toml::Table = text
            .parse()
            .map_err(|e| Error::data(format!("invalid experiment config: {e}")))?;
        if let Some(algos) = raw.get("algorithms").and_then(|v| v.as_table()) {
            for (name, table) in algos {
                if let Some(t) = table.as_table() {
                    if let Some(key) = ["population", "max_iterations", "seed"].iter().find(|k| t.contains_key(**k)) {
                        return Err(Error::data(format!(
                            "[algorithms.{name}] must not set `{key}`; it is controlled by [run]"
                        )));
                    }
                }
            }
        }
        let mut cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::data(format!("invalid experiment config: {e}")))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    fn validate(&self) -> Result<()> {
        if self.run.repeats < 1 {
            return Err(Error::data("[run] repeats must be at least 1"));
        }
        if self.run.populations.is_empty() {
            return Err(Error::data("[run] populations must not be empty"));
        }
        if self.run.parallelism == Some(0) {
            return Err(Error::data("[run] parallelism must be at least 1"));
        }
        if self.problems.files.is_empty() && self.problems.synth.is_empty() {
            return Err(Error::data("[problems] lists no problems"));
        }
        if !self.output.scale.is_finite() {
            return Err(Error::data("[output] scale must be finite"));
        }
        Ok(())
    }

    /// Algorithms to run, in table order GA, AQGA, EAQGA.
    pub fn algorithms(&self) -> Vec<Algorithm> {
        match &self.algorithms {
            None => Algorithm::ALL.to_vec(),
            Some(a) => Algorithm::ALL
                .into_iter()
                .filter(|alg| match alg {
                    Algorithm::Ga => a.ga.is_some(),
                    Algorithm::Aqga => a.aqga.is_some(),
                    Algorithm::Eaqga => a.eaqga.is_some(),
                })
                .collect(),
        }
    }

    fn threads(&self) -> Option<usize> {
        self.run.parallelism.or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .filter(|&t| t > 0)
        })
    }
}

/// A problem together with its id and (when small enough) its exact optimum.
#[derive(Debug, Clone)]
pub struct ResolvedProblem {
    pub id: String,
    pub problem: QuboProblem,
    pub optimum: Option<f64>,
}

fn resolve_problems(cfg: &ExperimentConfig) -> Result<Vec<(String, QuboProblem)>> {
    let mut out = Vec::new();
    for file in &cfg.problems.files {
        let path = if file.is_absolute() {
            file.clone()
        } else {
            cfg.base_dir.join(file)
        };
        let problem = QuboProblem::load(&path).map_err(|e| match e {
            Error::Io { path, source } => Error::data(format!("cannot read problem {path}: {source}")),
            other => other,
        })?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        out.push((id, problem));
    }
    for entry in &cfg.problems.synth {
        let id = entry
            .id
            .clone()
            .unwrap_or_else(|| format!("synth-n{}-s{}", entry.n, entry.seed));
        let problem = synth_problem(entry.n, entry.seed, &entry.spec).map_err(|e| Error::data(e.to_string()))?;
        out.push((id, problem));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some((dup, _)) = out.iter().find(|(id, _)| !seen.insert(id.clone())) {
        return Err(Error::data(format!("duplicate problem id {dup:?}")));
    }
    Ok(out)
}

/// Stable per-run seed from `(master, problem id, algorithm, repeat)`.
pub fn derive_seed(master: u64, problem_id: &str, algorithm: Algorithm, repeat: usize) -> u64 {
    let name = algorithm.name();
    let digest = Sha256::new()
        .chain_update(master.to_le_bytes())
        .chain_update((problem_id.len() as u64).to_le_bytes())
        .chain_update(problem_id.as_bytes())
        .chain_update((name.len() as u64).to_le_bytes())
        .chain_update(name.as_bytes())
        .chain_update((repeat as u64).to_le_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Runs one algorithm on one problem with the harness's hyperparameters.
pub fn run_algorithm(
    problem: &QuboProblem,
    algorithm: Algorithm,
    algorithms: Option<&AlgorithmsSection>,
    population: usize,
    iterations: usize,
    seed: u64,
) -> Result<RunRecord> {
    match algorithm {
        Algorithm::Eaqga => {
            let base = algorithms.and_then(|a| a.eaqga.clone()).unwrap_or_default();
            run_eaqga(
                problem,
                &EaqgaConfig {
                    population,
                    max_iterations: iterations,
                    seed,
                    ..base
                },
            )
        }
        Algorithm::Ga => {
            let base = algorithms.and_then(|a| a.ga.clone()).unwrap_or_default();
            run_ga(
                problem,
                &GaConfig {
                    population,
                    max_iterations: iterations,
                    seed,
                    ..base
                },
            )
        }
        Algorithm::Aqga => {
            let base = algorithms.and_then(|a| a.aqga.clone()).unwrap_or_default();
            run_aqga(
                problem,
                &AqgaConfig {
                    population,
                    max_iterations: iterations,
                    seed,
                    ..base
                },
            )
        }
    }
}

/// Mean and standard deviation of one (problem, algorithm, population) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem_id: String,
    pub optimum: Option<f64>,
    pub algorithm: Algorithm,
    pub population: usize,
    pub iterations: usize,
    pub repeats: usize,
    pub avg: f64,
    /// Population standard deviation (divides by the repeat count).
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub problems: Vec<ResolvedProblem>,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct Job<'a> {
    problem: &'a ResolvedProblem,
    population: usize,
    algorithm: Algorithm,
    repeat: usize,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads() {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_experiment_inner(cfg))
}

fn run_experiment_inner(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let problems: Vec<ResolvedProblem> = resolve_problems(cfg)?
        .into_iter()
        .map(|(id, problem)| {
            let optimum = (problem.n() <= cfg.run.oracle_limit)
                .then(|| brute_force(&problem, cfg.run.oracle_limit).map(|r| r.best_fitness))
                .transpose()?;
            Ok(ResolvedProblem { id, problem, optimum })
        })
        .collect::<Result<_>>()?;

    let algorithms = cfg.algorithms();
    let mut jobs = Vec::new();
    for problem in &problems {
        for &population in &cfg.run.populations {
            for &algorithm in &algorithms {
                for repeat in 0..cfg.run.repeats {
                    jobs.push(Job {
                        problem,
                        population,
                        algorithm,
                        repeat,
                    });
                }
            }
        }
    }

    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|job| {
            let seed = derive_seed(cfg.run.seed, &job.problem.id, job.algorithm, job.repeat);
            let start = Instant::now();
            let record = run_algorithm(
                &job.problem.problem,
                job.algorithm,
                cfg.algorithms.as_ref(),
                job.population,
                cfg.run.iterations,
                seed,
            )
            .map_err(|e| {
                Error::data(format!(
                    "cell ({}, {}, pop {}) repeat {} failed: {e}",
                    job.problem.id, job.algorithm, job.population, job.repeat
                ))
            })?;
            let mut record = record.with_problem_id(job.problem.id.clone());
            if cfg.output.record_wall_time {
                record.wall_time = Some(start.elapsed().as_secs_f64());
            }
            Ok(record)
        })
        .collect::<Result<_>>()?;

    let summary = summarize(&records, &problems);
    Ok(ExperimentOutput {
        problems,
        records,
        summary,
    })
}

/// Aggregates records into one row per (problem, population, algorithm),
/// keeping first-appearance order.
pub fn summarize(records: &[RunRecord], problems: &[ResolvedProblem]) -> Vec<SummaryRow> {
    type Cell<'a> = ((String, usize, Algorithm), Vec<&'a RunRecord>);
    let mut cells: Vec<Cell> = Vec::new();
    for r in records {
        let key = (r.problem_id.clone(), r.population, r.algorithm);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    cells
        .into_iter()
        .map(|((problem_id, population, algorithm), rs)| {
            let finals: Vec<f64> = rs.iter().map(|r| r.final_fitness).collect();
            let (avg, std) = mean_std(&finals);
            let optimum = problems.iter().find(|p| p.id == problem_id).and_then(|p| p.optimum);
            SummaryRow {
                problem_id,
                optimum,
                algorithm,
                population,
                iterations: rs[0].iterations,
                repeats: rs.len(),
                avg,
                std,
            }
        })
        .collect()
}

/// Formats a fitness value for presentation tables: scaled, four decimals.
pub fn format_scaled(value: f64, scale: f64) -> String {
    format!("{:.4}", value * scale)
}

/// Summary table CSV: `problem_id,optimum,algo,population,avg,std`.
pub fn emit_table(rows: &[SummaryRow], scale: f64) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::usage("no summary rows to emit"));
    }
    let mut out = String::from("problem_id,optimum,algo,population,avg,std\n");
    for r in rows {
        let optimum = r.optimum.map(|o| format_scaled(o, scale)).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.problem_id,
            optimum,
            r.algorithm,
            r.population,
            format_scaled(r.avg, scale),
            format_scaled(r.std, scale)
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// Per-iteration mean and population std of best-so-far fitness, per algorithm.
pub fn emit_convergence(records: &[RunRecord]) -> Result<String> {
    let Some(first) = records.first() else {
        return Err(Error::usage("no run records to aggregate"));
    };
    let t_max = first.best_per_iteration.len();
    if records.iter().any(|r| r.best_per_iteration.len() != t_max) {
        return Err(Error::usage("run records have different iteration counts"));
    }
    let mut groups: Vec<(Algorithm, Vec<&RunRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(a, _)| *a == r.algorithm) {
            Some((_, v)) => v.push(r),
            None => groups.push((r.algorithm, vec![r])),
        }
    }
    let mut out = String::from("iteration,algo,mean_best,std_best\n");
    for (algorithm, rs) in &groups {
        for t in 0..t_max {
            let column: Vec<f64> = rs.iter().map(|r| r.best_per_iteration[t]).collect();
            let (mean, std) = mean_std(&column);
            writeln!(out, "{},{algorithm},{mean},{std}", t + 1).expect("writing to a String");
        }
    }
    Ok(out)
}

/// Writes `runs.jsonl`, `summary.csv`, one `convergence/<problem>_pop<N>.csv`
/// per cell group, and `metadata.json` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    let write = |path: PathBuf, text: String| std::fs::write(&path, text).map_err(|e| Error::io(&path, e));
    let conv_dir = dir.join("convergence");
    std::fs::create_dir_all(&conv_dir).map_err(|e| Error::io(&conv_dir, e))?;

    let mut runs = String::new();
    for r in &output.records {
        runs.push_str(&r.to_json_line());
        runs.push('\n');
    }
    write(dir.join("runs.jsonl"), runs)?;
    write(dir.join("summary.csv"), emit_table(&output.summary, cfg.output.scale)?)?;

    let mut groups: BTreeMap<(String, usize), Vec<RunRecord>> = BTreeMap::new();
    for r in &output.records {
        groups
            .entry((r.problem_id.clone(), r.population))
            .or_default()
            .push(r.clone());
    }
    for ((pid, pop), rs) in &groups {
        write(conv_dir.join(format!("{pid}_pop{pop}.csv")), emit_convergence(rs)?)?;
    }

    let meta = serde_json::json!({
        "std": "population standard deviation (divides by repeats)",
        "convergence": "per-iteration mean of best-so-far fitness across repeats",
        "seed_derivation": "sha256(master_seed, problem_id, algorithm, repeat)[0..8] little-endian",
        "table_scale": cfg.output.scale,
        "master_seed": cfg.run.seed,
        "repeats": cfg.run.repeats,
        "iterations": cfg.run.iterations,
        "populations": cfg.run.populations,
        "algorithms": cfg.algorithms(),
        "problems": output.problems.iter().map(|p| serde_json::json!({
            "id": p.id,
            "n": p.problem.n(),
            "optimum": p.optimum,
        })).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    write(dir.join("metadata.json"), text)
}
