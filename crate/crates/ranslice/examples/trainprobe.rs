use ranslice::config::ExperimentConfig;
use ranslice::harness::cli_train;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let algo = args.get(2).cloned().unwrap_or_else(|| "raws".into());
    let lambda_u: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1);

    let mut cfg = ExperimentConfig::default();
    cfg.learner.episodes = episodes;
    cfg.algorithm = algo.clone();
    cfg.services.delay_sensitive.arrival_rate_per_vehicle = lambda_u;
    cfg.seed = seed;
    if let Ok(w) = std::env::var("WARMUP") { cfg.learner.warmup_windows = w.parse().unwrap(); }
    let t0 = Instant::now();
    let dir = format!("/tmp/probe_{algo}_{lambda_u}_{seed}");
    let art = cli_train(&cfg, std::path::Path::new(&dir)).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("{algo} lambda_u={lambda_u} seed={seed}: {episodes} episodes in {dt:.1}s");
    for e in art.episodes.iter().step_by((episodes / 14).max(1)) {
        println!(
            "ep {:>3}: reward {:>9.2} cost {:>8.2} viol {:.2} feas {:.2}",
            e.episode, e.mean_reward, e.mean_cost, e.violation_rate, e.feasible_rate
        );
    }
    let k = episodes.saturating_sub(20);
    let tail: Vec<f64> = art.episodes[k..].iter().map(|e| e.mean_cost).collect();
    println!("tail-20 mean cost: {:.2}", tail.iter().sum::<f64>() / tail.len() as f64);
}
