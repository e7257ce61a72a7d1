use ranslice::inner::{solve_delay_sensitive, InnerInstance};
use ranslice::oracle::sample_instance;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::time::Instant;

fn main() {
    for name in ["hard_instance.json", "hard_instance_2.json"] {
        let text = std::fs::read_to_string(format!("crates/ranslice/tests/fixtures/{name}")).unwrap();
        let inst: InnerInstance = serde_json::from_str(&text).unwrap();
        let t0 = Instant::now();
        match solve_delay_sensitive(&inst) {
            Ok(sol) => println!(
                "{name}: feasible={} obj={:.6?} iters={} kkt={:.2e} margins_ok={} in {:?}",
                sol.feasible,
                sol.objective_delay_s,
                sol.iterations,
                sol.kkt_residual,
                inst.rate_margins(&sol.beta).iter().all(|&g| g >= 0.0),
                t0.elapsed()
            ),
            Err(e) => println!("{name}: ERR {e}"),
        }
    }
    // Stress across random instances of many shapes.
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let t0 = Instant::now();
    let mut worst_kkt = 0.0_f64;
    let mut max_iters = 0;
    for trial in 0..2000 {
        let dim = 1 + trial % 3;
        let inst = sample_instance(&mut rng, dim, trial % 4 != 0);
        match solve_delay_sensitive(&inst) {
            Ok(sol) => {
                if sol.feasible {
                    worst_kkt = worst_kkt.max(sol.kkt_residual);
                    max_iters = max_iters.max(sol.iterations);
                }
            }
            Err(e) => println!("trial {trial}: ERR {e}"),
        }
    }
    println!("2000 random instances: worst kkt {worst_kkt:.2e}, max iters {max_iters}, total {:?}", t0.elapsed());
}
