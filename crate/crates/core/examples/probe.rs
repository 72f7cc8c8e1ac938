use greenwave::experiment::{run_experiment, render_table, ExperimentConfig, Method, Scenario};

fn main() {
    let scenario = match std::env::args().nth(1).as_deref() {
        Some("hetero") => Scenario::Heterogeneous,
        _ => Scenario::Homogeneous,
    };
    let mut config = ExperimentConfig {
        scenario,
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
        ..ExperimentConfig::default()
    };
    config.apply_scenario();
    let start = std::time::Instant::now();
    let results = run_experiment(&config).unwrap();
    println!("{} scenario in {:.1?}", config.scenario.label(), start.elapsed());
    print!("{}", render_table(&results.table));
    // Per-seed detail for ordering checks.
    for run in &results.runs {
        let n = run.reports.len() as f64;
        let thr = run.reports.iter().map(|r| r.throughput as f64).sum::<f64>() / n;
        let co2 = run.reports.iter().map(|r| r.co2_total).sum::<f64>() / n;
        let queue = run.reports.iter().map(|r| r.mean_queue).sum::<f64>() / n;
        let wait = run.reports.iter().map(|r| r.mean_waiting).sum::<f64>() / n;
        println!("{:<12} seed {}: thr {:>6.1} co2 {:>9.1} queue {:>6.2} wait {:>7.2}",
            run.method.label(), run.seed, thr, co2, queue, wait);
    }
}
