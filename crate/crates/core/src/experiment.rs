//! Experiment orchestration: config file, method x seed job matrix,
//! aggregation into the comparison table, and persistence.
//!
//! Jobs are independent: every stream a job consumes is derived from
//! (method label, base seed, purpose, episode index), so adding or removing
//! a method never changes another method's draws. Jobs run on a bounded
//! worker pool and results are collected in configuration order, which
//! keeps every output file byte-identical across reruns regardless of
//! scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dqn::{run_training, Hyperparams, TrainingLog};
use crate::episode::{run_episode, Controller};
use crate::error::{Error, Result};
use crate::metrics::EpisodeReport;
use crate::neural::Mlp;
use crate::reward::RewardKind;
use crate::sim::{heterogeneous_mixture, SimConfig};
use crate::streams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Homogeneous,
    Heterogeneous,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Homogeneous => "homogeneous",
            Scenario::Heterogeneous => "heterogeneous",
        }
    }

    pub fn parse(s: &str) -> Result<Scenario> {
        match s {
            "homogeneous" => Ok(Scenario::Homogeneous),
            "heterogeneous" => Ok(Scenario::Heterogeneous),
            other => Err(Error::config(format!(
                "unknown scenario '{other}': valid values are homogeneous, heterogeneous"
            ))),
        }
    }
}

pub const METHOD_NAMES: &str = "mbrf, wait, queue, diff, maxpressure, lqf, fixed:CYCLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mbrf,
    Wait,
    Queue,
    Diff,
    MaxPressure,
    Lqf,
    FixedTime(u32),
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "mbrf" => Ok(Method::Mbrf),
            "wait" => Ok(Method::Wait),
            "queue" => Ok(Method::Queue),
            "diff" => Ok(Method::Diff),
            "maxpressure" => Ok(Method::MaxPressure),
            "lqf" => Ok(Method::Lqf),
            other => {
                if let Some(cycle) = other.strip_prefix("fixed:") {
                    let cycle: u32 = cycle.parse().map_err(|_| {
                        Error::config(format!("invalid fixed-time cycle in '{other}'"))
                    })?;
                    return Ok(Method::FixedTime(cycle));
                }
                Err(Error::config(format!(
                    "unknown method '{other}': valid methods are {METHOD_NAMES}"
                )))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Mbrf => "mbrf".into(),
            Method::Wait => "wait".into(),
            Method::Queue => "queue".into(),
            Method::Diff => "diff".into(),
            Method::MaxPressure => "maxpressure".into(),
            Method::Lqf => "lqf".into(),
            Method::FixedTime(cycle) => format!("fixed:{cycle}"),
        }
    }

    pub fn is_learning(&self) -> bool {
        matches!(
            self,
            Method::Mbrf | Method::Wait | Method::Queue | Method::Diff
        )
    }

    /// Reward a learning method trains on; for classical controllers this
    /// is the reward whose return gets logged alongside their metrics.
    pub fn reward_kind(&self, scenario: Scenario) -> RewardKind {
        let mass_scaling = scenario == Scenario::Heterogeneous;
        match self {
            Method::Mbrf | Method::MaxPressure | Method::Lqf | Method::FixedTime(_) => {
                RewardKind::Mbrf { mass_scaling }
            }
            Method::Wait => RewardKind::NegWaiting,
            Method::Queue => RewardKind::NegQueue,
            Method::Diff => RewardKind::DiffWaiting,
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Method::parse(&s).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Greedy evaluation episodes per method x seed.
    pub eval_episodes: u32,
    pub out_dir: Option<PathBuf>,
    pub sim: SimConfig,
    pub hyperparams: Hyperparams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Homogeneous,
            methods: vec![
                Method::Mbrf,
                Method::Wait,
                Method::Queue,
                Method::Diff,
                Method::MaxPressure,
                Method::Lqf,
                Method::FixedTime(60),
            ],
            seeds: vec![1, 2, 3],
            eval_episodes: 10,
            out_dir: None,
            sim: SimConfig::default(),
            hyperparams: Hyperparams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Applies the scenario's forced settings: the heterogeneous scenario
    /// pins the 50/20/15/15 class mixture (mass scaling follows from the
    /// scenario inside `reward_kind`).
    pub fn apply_scenario(&mut self) {
        if self.scenario == Scenario::Heterogeneous {
            self.sim.class_mixture = heterogeneous_mixture();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::config(format!(
                    "seeds contains duplicate value {}",
                    pair[0]
                )));
            }
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be positive"));
        }
        self.sim.validate()?;
        self.hyperparams.validate()?;
        for m in &self.methods {
            if let Method::FixedTime(cycle) = m {
                if *cycle < 2 * self.sim.g_min {
                    return Err(Error::config(format!(
                        "fixed-time cycle ({cycle}) must be >= 2 * g_min ({})",
                        2 * self.sim.g_min
                    )));
                }
            }
        }
        Ok(())
    }
}

// Raw config file layout. Every key is optional; unknown keys are hard
// errors so typos never pass silently.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    scenario: Option<String>,
    methods: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    eval_episodes: Option<u32>,
    out_dir: Option<PathBuf>,
    mixture: Option<Vec<f64>>,
    sim: RawSim,
    hyperparams: RawHyperparams,
    emissions: RawEmissions,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSim {
    g_min: Option<u32>,
    g_max: Option<u32>,
    yellow: Option<u32>,
    control_interval: Option<u32>,
    sim_step: Option<u32>,
    lane_length: Option<f64>,
    detection_zone: Option<f64>,
    min_gap: Option<f64>,
    time_headway: Option<f64>,
    halt_speed_threshold: Option<f64>,
    episode_duration: Option<u32>,
    junction_traversal: Option<u32>,
    arrival_rate_low: Option<f64>,
    arrival_rate_high: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawHyperparams {
    alpha: Option<f64>,
    gamma: Option<f64>,
    target_sync_interval: Option<u64>,
    epsilon_start: Option<f64>,
    epsilon_end: Option<f64>,
    epsilon_decay_horizon: Option<u64>,
    replay_capacity: Option<usize>,
    batch_size: Option<usize>,
    learn_start: Option<usize>,
    total_train_steps: Option<u64>,
    eval_frequency: Option<u64>,
    train_eval_episodes: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEmissions {
    beta0: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    beta3: Option<f64>,
    beta4: Option<f64>,
}

macro_rules! override_fields {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    if let Some(s) = raw.scenario {
        config.scenario = Scenario::parse(&s)?;
    }
    if let Some(methods) = raw.methods {
        config.methods = methods
            .iter()
            .map(|m| Method::parse(m))
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(seeds) = raw.seeds {
        config.seeds = seeds;
    }
    if let Some(n) = raw.eval_episodes {
        config.eval_episodes = n;
    }
    config.out_dir = raw.out_dir;

    override_fields!(
        config.sim,
        raw.sim,
        g_min,
        g_max,
        yellow,
        control_interval,
        sim_step,
        lane_length,
        detection_zone,
        min_gap,
        time_headway,
        halt_speed_threshold,
        episode_duration,
        junction_traversal,
    );
    if let Some(lo) = raw.sim.arrival_rate_low {
        config.sim.arrival_rate_range.0 = lo;
    }
    if let Some(hi) = raw.sim.arrival_rate_high {
        config.sim.arrival_rate_range.1 = hi;
    }
    override_fields!(
        config.hyperparams,
        raw.hyperparams,
        alpha,
        gamma,
        target_sync_interval,
        epsilon_start,
        epsilon_end,
        epsilon_decay_horizon,
        replay_capacity,
        batch_size,
        learn_start,
        total_train_steps,
        eval_frequency,
        train_eval_episodes,
    );
    override_fields!(config.sim.emissions, raw.emissions, beta0, beta1, beta2, beta3, beta4);

    if let Some(mixture) = raw.mixture {
        if config.scenario == Scenario::Heterogeneous {
            return Err(Error::config(
                "mixture cannot be overridden in the heterogeneous scenario (it is pinned to 0.5/0.2/0.15/0.15)",
            ));
        }
        config.sim.class_mixture = mixture;
    }
    config.apply_scenario();
    config.validate()?;
    Ok(config)
}

/// Parses and validates a TOML experiment config. An empty file yields the
/// all-defaults config; unknown keys and semantic violations are errors.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    resolve(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub const METRIC_NAMES: [&str; 5] = ["waiting", "queue", "throughput", "travel", "co2"];
/// Whether larger is better, per metric column.
pub const METRIC_HIGHER_IS_BETTER: [bool; 5] = [false, false, true, false, false];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodStats {
    pub label: String,
    /// waiting, queue, throughput, travel, co2.
    pub metrics: [MeanStd; 5],
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<MethodStats>,
    /// Row index holding the best value per metric column.
    pub best: [usize; 5],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub method: String,
    pub seed: u64,
    pub episode: u32,
    pub report: EpisodeReport,
}

pub struct RunArtifacts {
    pub method: Method,
    pub seed: u64,
    pub reports: Vec<EpisodeReport>,
    pub training_log: Option<TrainingLog>,
    pub model: Option<Mlp>,
}

pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub runs: Vec<RunArtifacts>,
    pub table: ComparisonTable,
}

/// Stream root for one (method, base seed) job.
pub fn job_seed(base_seed: u64, method: &Method) -> u64 {
    streams::derive_seed(base_seed, &format!("method:{}", method.label()), 0)
}

/// Demand seed for final (table) evaluation episode `episode` of a job.
pub fn table_eval_demand_seed(job: u64, episode: u64) -> u64 {
    streams::derive_seed(job, "table-eval-demand", episode)
}

fn run_one(config: &ExperimentConfig, method: Method, seed: u64) -> Result<RunArtifacts> {
    let job = job_seed(seed, &method);
    let kind = method.reward_kind(config.scenario);
    let gamma = config.hyperparams.gamma;

    let (model, training_log) = if method.is_learning() {
        let (net, log) = run_training(&config.sim, kind, config.hyperparams.clone(), job)?;
        (Some(net), Some(log))
    } else {
        (None, None)
    };

    let mut reports = Vec::with_capacity(config.eval_episodes as usize);
    for episode in 0..config.eval_episodes {
        let demand = table_eval_demand_seed(job, episode as u64);
        let controller = match (&model, method) {
            (Some(net), _) => Controller::Greedy(net),
            (None, Method::MaxPressure) => Controller::MaxPressure,
            (None, Method::Lqf) => Controller::LongestQueueFirst,
            (None, Method::FixedTime(cycle)) => Controller::FixedTime(cycle),
            (None, _) => unreachable!("learning method without a model"),
        };
        let (report, _) = run_episode(&config.sim, kind, &controller, demand, gamma, false)?;
        reports.push(report);
    }
    Ok(RunArtifacts {
        method,
        seed,
        reports,
        training_log,
        model,
    })
}

/// Runs every method x seed job (concurrently, bounded by the rayon pool)
/// and aggregates the comparison table. Fully deterministic for a given
/// config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let jobs: Vec<(Method, u64)> = config
        .methods
        .iter()
        .flat_map(|m| config.seeds.iter().map(move |s| (*m, *s)))
        .collect();
    let runs: Vec<Result<RunArtifacts>> = jobs
        .par_iter()
        .map(|(method, seed)| run_one(config, *method, *seed))
        .collect();
    let mut collected = Vec::with_capacity(runs.len());
    for run in runs {
        collected.push(run?);
    }
    let table = build_table(config, &collected);
    Ok(ExperimentResults {
        config: config.clone(),
        runs: collected,
        table,
    })
}

fn metric_values(report: &EpisodeReport) -> [f64; 5] {
    [
        report.mean_waiting,
        report.mean_queue,
        report.throughput as f64,
        report.mean_travel_time,
        report.co2_total,
    ]
}

/// Mean and sample standard deviation (n - 1); std is 0 for a single seed.
fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

fn build_table(config: &ExperimentConfig, runs: &[RunArtifacts]) -> ComparisonTable {
    let mut rows = Vec::new();
    for method in &config.methods {
        // Per-seed value = mean over that seed's evaluation episodes.
        let mut per_seed: [Vec<f64>; 5] = Default::default();
        for seed in &config.seeds {
            let run = runs
                .iter()
                .find(|r| r.method == *method && r.seed == *seed)
                .expect("every job ran");
            let mut sums = [0.0f64; 5];
            for report in &run.reports {
                for (s, v) in sums.iter_mut().zip(metric_values(report)) {
                    *s += v;
                }
            }
            for (i, s) in sums.iter().enumerate() {
                per_seed[i].push(s / run.reports.len() as f64);
            }
        }
        let metrics = [
            mean_std(&per_seed[0]),
            mean_std(&per_seed[1]),
            mean_std(&per_seed[2]),
            mean_std(&per_seed[3]),
            mean_std(&per_seed[4]),
        ];
        rows.push(MethodStats {
            label: method.label(),
            metrics,
        });
    }
    let mut best = [0usize; 5];
    for col in 0..5 {
        for (i, row) in rows.iter().enumerate() {
            let better = if METRIC_HIGHER_IS_BETTER[col] {
                row.metrics[col].mean > rows[best[col]].metrics[col].mean
            } else {
                row.metrics[col].mean < rows[best[col]].metrics[col].mean
            };
            if better {
                best[col] = i;
            }
        }
    }
    ComparisonTable { rows, best }
}

/// Human-readable table; `*` marks the best value per column.
pub fn render_table(table: &ComparisonTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>18} {:>16} {:>18} {:>16} {:>20}",
        "method", "waiting (s)", "queue", "throughput", "travel (s)", "co2 (g)"
    );
    for (i, row) in table.rows.iter().enumerate() {
        let mut cells = Vec::new();
        for (col, m) in row.metrics.iter().enumerate() {
            let marker = if table.best[col] == i && !table.rows.is_empty() {
                "*"
            } else {
                ""
            };
            cells.push(format!("{:.1} ± {:.1}{}", m.mean, m.std, marker));
        }
        let _ = writeln!(
            out,
            "{:<12} {:>18} {:>16} {:>18} {:>16} {:>20}",
            row.label, cells[0], cells[1], cells[2], cells[3], cells[4]
        );
    }
    out
}

pub fn summary_csv(table: &ComparisonTable) -> String {
    let mut out = String::from(
        "method,waiting_mean,waiting_std,queue_mean,queue_std,throughput_mean,throughput_std,travel_mean,travel_std,co2_mean,co2_std\n",
    );
    for row in &table.rows {
        let m = &row.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.label,
            m[0].mean, m[0].std, m[1].mean, m[1].std, m[2].mean, m[2].std,
            m[3].mean, m[3].std, m[4].mean, m[4].std
        );
    }
    out
}

pub fn episodes_csv(results: &ExperimentResults) -> String {
    let mut out =
        String::from("method,seed,episode,waiting,queue,throughput,travel,co2,return\n");
    for run in &results.runs {
        for (episode, report) in run.reports.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                run.method.label(),
                run.seed,
                episode,
                report.mean_waiting,
                report.mean_queue,
                report.throughput,
                report.mean_travel_time,
                report.co2_total,
                report.episode_return
            );
        }
    }
    out
}

pub fn training_log_csv(log: &TrainingLog) -> String {
    let mut out = String::from(
        "step,epsilon,mean_td_loss,eval_return,eval_waiting,eval_queue,eval_throughput,eval_travel_time,eval_co2\n",
    );
    for r in &log.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            r.epsilon,
            r.mean_td_loss,
            r.eval_return,
            r.eval_waiting,
            r.eval_queue,
            r.eval_throughput,
            r.eval_travel_time,
            r.eval_co2
        );
    }
    out
}

/// Self-describing persisted network: format tag, version, the reward and
/// scenario it was trained under, and the full architecture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub reward: RewardKind,
    pub scenario: Scenario,
    pub gamma: f64,
    pub seed: u64,
    pub net: Mlp,
}

pub const MODEL_FORMAT: &str = "greenwave-qnet";
pub const MODEL_VERSION: u32 = 1;

impl ModelFile {
    pub fn new(reward: RewardKind, scenario: Scenario, gamma: f64, seed: u64, net: Mlp) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            reward,
            scenario,
            gamma,
            seed,
            net,
        }
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    let json = serde_json::to_string_pretty(model).expect("model serializes");
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if model.format != MODEL_FORMAT {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected model format '{}'", model.format),
        });
    }
    if model.version != MODEL_VERSION {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unsupported model version {}", model.version),
        });
    }
    Ok(model)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: ExperimentConfig,
}

/// Writes summary.csv, episodes.csv, per-run training logs and models, and
/// manifest.json into `dir`.
pub fn emit_reports(results: &ExperimentResults, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, contents: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    };
    write("summary.csv", &summary_csv(&results.table))?;
    write("episodes.csv", &episodes_csv(results))?;
    for run in &results.runs {
        let label = run.method.label().replace(':', "_");
        if let Some(log) = &run.training_log {
            write(
                &format!("training_log_{}_{}.csv", label, run.seed),
                &training_log_csv(log),
            )?;
        }
        if let Some(net) = &run.model {
            let model = ModelFile::new(
                run.method.reward_kind(results.config.scenario),
                results.config.scenario,
                results.config.hyperparams.gamma,
                run.seed,
                net.clone(),
            );
            save_model(&dir.join(format!("model_{}_{}.json", label, run.seed)), &model)?;
        }
    }
    let manifest = Manifest {
        format_version: 1,
        config: results.config.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write("manifest.json", &json)
}

/// Reads a manifest back into the exact config that produced it.
pub fn load_manifest(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(manifest.config)
}
