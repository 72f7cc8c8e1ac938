use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use greenwave::dqn::{run_training, Hyperparams};
use greenwave::episode::{run_episode, Controller};
use greenwave::experiment::{
    emit_reports, job_seed, load_config, load_model, render_table, run_experiment, save_model,
    table_eval_demand_seed, training_log_csv, Method, ModelFile, Scenario,
};
use greenwave::metrics::EpisodeReport;
use greenwave::reward::RewardKind;
use greenwave::sim::{heterogeneous_mixture, SimConfig};

#[derive(Parser)]
#[command(
    name = "greenwave",
    about = "Traffic-signal control workbench: DQN agents with selectable rewards vs classical controllers on a seeded single-intersection microsimulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Mbrf,
    Wait,
    Queue,
    Diff,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Homogeneous,
    Heterogeneous,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::Homogeneous => Scenario::Homogeneous,
            ScenarioArg::Heterogeneous => Scenario::Heterogeneous,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a DQN agent under one reward and save the model + training log.
    Train {
        #[arg(long, value_enum)]
        reward: RewardArg,
        /// Scale vehicle momentum by mass/1500 in the mbrf reward.
        #[arg(long)]
        mass_scaling: bool,
        #[arg(long, value_enum, default_value = "homogeneous")]
        scenario: ScenarioArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the training budget (environment steps).
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Run greedy evaluation episodes with a saved model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Dump per-second episode traces as CSV.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a classical controller: maxpressure, lqf, or fixed:CYCLE.
    Baseline {
        #[arg(long)]
        controller: String,
        #[arg(long, default_value_t = 10)]
        episodes: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "homogeneous")]
        scenario: ScenarioArg,
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full method x seed comparison from a config file.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides out_dir from the config file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn scenario_sim(scenario: Scenario) -> SimConfig {
    let mut sim = SimConfig::default();
    if scenario == Scenario::Heterogeneous {
        sim.class_mixture = heterogeneous_mixture();
    }
    sim
}

fn print_reports(label: &str, reports: &[EpisodeReport]) {
    println!("episode reports for {label}:");
    println!(
        "{:>8} {:>12} {:>10} {:>12} {:>12} {:>14} {:>12}",
        "episode", "waiting(s)", "queue", "throughput", "travel(s)", "co2(g)", "return"
    );
    for (i, r) in reports.iter().enumerate() {
        println!(
            "{:>8} {:>12.2} {:>10.2} {:>12} {:>12.2} {:>14.1} {:>12.3}",
            i, r.mean_waiting, r.mean_queue, r.throughput, r.mean_travel_time, r.co2_total,
            r.episode_return
        );
    }
    let n = reports.len().max(1) as f64;
    println!(
        "means: waiting {:.2} s, queue {:.2}, throughput {:.1}, travel {:.2} s, co2 {:.1} g",
        reports.iter().map(|r| r.mean_waiting).sum::<f64>() / n,
        reports.iter().map(|r| r.mean_queue).sum::<f64>() / n,
        reports.iter().map(|r| r.throughput as f64).sum::<f64>() / n,
        reports.iter().map(|r| r.mean_travel_time).sum::<f64>() / n,
        reports.iter().map(|r| r.co2_total).sum::<f64>() / n,
    );
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Train {
            reward,
            mass_scaling,
            scenario,
            seed,
            out,
            steps,
        } => {
            let scenario: Scenario = scenario.into();
            let kind = match reward {
                RewardArg::Mbrf => RewardKind::Mbrf { mass_scaling },
                RewardArg::Wait => RewardKind::NegWaiting,
                RewardArg::Queue => RewardKind::NegQueue,
                RewardArg::Diff => RewardKind::DiffWaiting,
            };
            let sim = scenario_sim(scenario);
            let mut hp = Hyperparams::default();
            if let Some(s) = steps {
                hp.total_train_steps = s;
            }
            let gamma = hp.gamma;
            println!(
                "training {} (scenario {}) for {} steps, seed {seed}",
                kind.label(),
                scenario.label(),
                hp.total_train_steps
            );
            let (net, log) = run_training(&sim, kind, hp, seed)?;
            std::fs::create_dir_all(&out)?;
            let model_path = out.join(format!("model_{}_{}.json", kind.label(), seed));
            save_model(
                &model_path,
                &ModelFile::new(kind, scenario, gamma, seed, net),
            )?;
            let log_path = out.join(format!("training_log_{}_{}.csv", kind.label(), seed));
            std::fs::write(&log_path, training_log_csv(&log))?;
            if let Some(last) = log.rows.last() {
                println!(
                    "final evaluation: return {:.3}, throughput {:.1}, co2 {:.1} g",
                    last.eval_return, last.eval_throughput, last.eval_co2
                );
            }
            println!("wrote {} and {}", model_path.display(), log_path.display());
        }
        Command::Eval {
            model,
            episodes,
            seed,
            trace,
            out,
        } => {
            let file = load_model(&model)?;
            let sim = scenario_sim(file.scenario);
            let mut reports = Vec::new();
            for episode in 0..episodes {
                let demand = table_eval_demand_seed(seed, episode as u64);
                let (report, episode_trace) = run_episode(
                    &sim,
                    file.reward,
                    &Controller::Greedy(&file.net),
                    demand,
                    file.gamma,
                    trace,
                )?;
                if let (Some(t), Some(dir)) = (episode_trace, out.as_ref()) {
                    let trace_dir = dir.join(format!("trace_ep{episode}"));
                    std::fs::create_dir_all(&trace_dir)?;
                    t.write_csv(&trace_dir)?;
                }
                reports.push(report);
            }
            print_reports(&format!("model {}", model.display()), &reports);
        }
        Command::Baseline {
            controller,
            episodes,
            seed,
            scenario,
            trace,
            out,
        } => {
            let scenario: Scenario = scenario.into();
            let method = Method::parse(&controller)?;
            if method.is_learning() {
                return Err(format!(
                    "'{controller}' is a learning method; use `train` (baselines: maxpressure, lqf, fixed:CYCLE)"
                )
                .into());
            }
            let sim = scenario_sim(scenario);
            let kind = method.reward_kind(scenario);
            let job = job_seed(seed, &method);
            let mut reports = Vec::new();
            for episode in 0..episodes {
                let ctrl = match method {
                    Method::MaxPressure => Controller::MaxPressure,
                    Method::Lqf => Controller::LongestQueueFirst,
                    Method::FixedTime(cycle) => Controller::FixedTime(cycle),
                    _ => unreachable!(),
                };
                let demand = table_eval_demand_seed(job, episode as u64);
                let (report, episode_trace) =
                    run_episode(&sim, kind, &ctrl, demand, Hyperparams::default().gamma, trace)?;
                if let (Some(t), Some(dir)) = (episode_trace, out.as_ref()) {
                    let trace_dir = dir.join(format!("trace_{}_ep{episode}", method.label().replace(':', "_")));
                    std::fs::create_dir_all(&trace_dir)?;
                    t.write_csv(&trace_dir)?;
                }
                reports.push(report);
            }
            print_reports(&method.label(), &reports);
        }
        Command::Compare { config, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = out {
                cfg.out_dir = Some(dir);
            }
            let out_dir = cfg
                .out_dir
                .clone()
                .ok_or("no output directory: pass --out or set out_dir in the config")?;
            println!(
                "comparing {} methods x {} seeds ({} scenario)",
                cfg.methods.len(),
                cfg.seeds.len(),
                cfg.scenario.label()
            );
            let results = run_experiment(&cfg)?;
            emit_reports(&results, &out_dir)?;
            print!("{}", render_table(&results.table));
            println!("wrote results to {}", out_dir.display());
        }
    }
    Ok(())
}
