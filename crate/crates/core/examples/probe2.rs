use greenwave::dqn::{run_training, Hyperparams};
use greenwave::episode::{run_episode, Controller};
use greenwave::experiment::{job_seed, table_eval_demand_seed, Method};
use greenwave::reward::RewardKind;
use greenwave::sim::SimConfig;

fn eval_controller(cfg: &SimConfig, ctrl: &Controller, kind: RewardKind, job: u64) -> (f64, f64, f64, f64) {
    let (mut thr, mut q, mut w, mut co2) = (0.0, 0.0, 0.0, 0.0);
    for ep in 0..10u64 {
        let demand = table_eval_demand_seed(job, ep);
        let (r, _) = run_episode(cfg, kind, ctrl, demand, 0.99, false).unwrap();
        thr += r.throughput as f64; q += r.mean_queue; w += r.mean_waiting; co2 += r.co2_total;
    }
    (thr / 10.0, q / 10.0, w / 10.0, co2 / 10.0)
}

fn main() {
    let cfg = SimConfig::default();
    let hp = Hyperparams::default();
    println!("demand range {:?}", cfg.arrival_rate_range);
    for (method, kind) in [
        (Method::Mbrf, RewardKind::Mbrf { mass_scaling: false }),
        (Method::Wait, RewardKind::NegWaiting),
    ] {
        for seed in [1u64, 2] {
            let job = job_seed(seed, &method);
            let t0 = std::time::Instant::now();
            let (net, log) = run_training(&cfg, kind, hp.clone(), job).unwrap();
            let (thr, q, w, co2) = eval_controller(&cfg, &Controller::Greedy(&net), kind, job);
            let evals: Vec<String> = log.rows.iter().map(|r| format!("{:.0}", r.eval_throughput)).collect();
            println!("{:<5} seed {seed}: thr {thr:>6.1} queue {q:>6.2} wait {w:>7.2} co2 {co2:>8.0}  ({:.0?}) evals [{}]",
                method.label(), t0.elapsed(), evals.join(","));
        }
    }
    for (name, ctrl, method) in [
        ("mp", Controller::MaxPressure, Method::MaxPressure),
        ("lqf", Controller::LongestQueueFirst, Method::Lqf),
    ] {
        for seed in [1u64, 2] {
            let job = job_seed(seed, &method);
            let (thr, q, w, co2) = eval_controller(&cfg, &ctrl, RewardKind::Mbrf { mass_scaling: false }, job);
            println!("{name:<5} seed {seed}: thr {thr:>6.1} queue {q:>6.2} wait {w:>7.2} co2 {co2:>8.0}");
        }
    }
}
