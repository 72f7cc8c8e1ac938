use greenwave::episode::{run_episode, Controller};
use greenwave::reward::RewardKind;
use greenwave::sim::SimConfig;

fn main() {
    let kind = RewardKind::Mbrf { mass_scaling: false };
    println!("{:>6} {:>12} {:>9} {:>8} {:>9} {:>9} {:>9}", "lambda", "controller", "thr", "queue", "wait", "co2", "blocked");
    for &lam in &[0.2f64, 0.3, 0.4, 0.5, 0.6, 0.8] {
        for (name, ctrl) in [
            ("mp", Controller::MaxPressure),
            ("lqf", Controller::LongestQueueFirst),
            ("fixed:30", Controller::FixedTime(30)),
            ("fixed:40", Controller::FixedTime(40)),
            ("fixed:60", Controller::FixedTime(60)),
        ] {
            let cfg = SimConfig { arrival_rate_range: (lam, lam), ..SimConfig::default() };
            let (mut thr, mut q, mut w, mut co2) = (0.0, 0.0, 0.0, 0.0);
            let n = 5;
            for ep in 0..n {
                let (r, _) = run_episode(&cfg, kind, &ctrl, 1000 + ep, 0.99, false).unwrap();
                thr += r.throughput as f64; q += r.mean_queue; w += r.mean_waiting; co2 += r.co2_total;
            }
            let nf = n as f64;
            println!("{:>6.2} {:>12} {:>9.1} {:>8.2} {:>9.2} {:>9.0} ", lam, name, thr/nf, q/nf, w/nf, co2/nf);
        }
    }
}
