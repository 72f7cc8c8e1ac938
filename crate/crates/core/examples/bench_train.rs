use greenwave::dqn::{run_training, Hyperparams};
use greenwave::reward::RewardKind;
use greenwave::sim::SimConfig;

fn main() {
    let cfg = SimConfig::default();
    let hp = Hyperparams {
        total_train_steps: 10_000,
        eval_frequency: 10_000,
        epsilon_decay_horizon: 8_000,
        ..Hyperparams::default()
    };
    let start = std::time::Instant::now();
    let (net, log) = run_training(&cfg, RewardKind::Mbrf { mass_scaling: false }, hp, 1).unwrap();
    println!("10k steps in {:.2?}", start.elapsed());
    println!("rows: {}, last return {:.3}, throughput {:.1}",
        log.rows.len(), log.rows.last().unwrap().eval_return, log.rows.last().unwrap().eval_throughput);
    println!("net finite: {}", net.params_finite());
}
