use ranslice::config::ExperimentConfig;
use ranslice::env::{EnvAction, SliceEnv, GROUP};
use ranslice::learner::*;
use ranslice::service::transmission_rates;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::sync::Arc;

/// fractions for a uniform allocation (s_u, s_e, c_u, c_e) out of 18.
fn frac(s_u: u32, s_e: u32, c_u: u32, c_e: u32) -> Vec<f64> {
    let mut v = Vec::new();
    for _ in 0..5 {
        let (a, b) = (s_u as f64 / 18.0 + 0.001, s_e as f64 / 18.0 + 0.001);
        v.extend_from_slice(&[a, b, (1.0 - a - b).max(0.0)]);
    }
    for _ in 0..5 {
        let (a, b) = (c_u as f64 / 18.0 + 0.001, c_e as f64 / 18.0 + 0.001);
        v.extend_from_slice(&[a, b, (1.0 - a - b).max(0.0)]);
    }
    v
}

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 1;
    let topology = cfg.topology.build().unwrap();
    let rates = transmission_rates(&cfg.radio, &topology);
    let trace = Arc::new(cfg.build_trace(&topology).unwrap());
    let mut env = SliceEnv::new(cfg.env_setup(topology, rates), trace, ranslice::env::SplitPolicy::Optimized).unwrap();
    let (pool, _) = cfg.day_split(env.trace_len());

    // Ground truth: static uniform policies rolled over day 0.
    println!("== true mean reward of static allocations over day 0 ==");
    for (s_u, s_e, c_u, c_e) in [(2,2,1,1),(2,2,2,1),(2,2,3,1),(2,2,4,1),(2,2,5,2),(2,2,6,2),(2,2,7,2),(2,2,8,2),(6,6,6,6),(2,4,7,3)] {
        let mut state = env.reset(pool[0]).unwrap();
        let _ = state;
        let mut sum = 0.0;
        let mut feas = 0;
        for _ in 0..24 {
            let out = env.step(&EnvAction { fractions: frac(s_u, s_e, c_u, c_e), split_override: None }).unwrap();
            sum += out.reward;
            if out.info.feasible.iter().all(|&f| f) { feas += 1; }
        }
        println!("S=({s_u},{s_e}) C=({c_u},{c_e}): mean reward {:>8.2} feas {feas}/24", sum / 24.0);
    }

    // Train critic-only on random data, then ask the critic to rank the same.
    let mut master = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut init_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut noise_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut batch_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut day_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut agent = Agent::new(env.state_dim(), env.action_dim(), env.split_flat_dim(), cfg.learner.clone(), false, &mut init_rng);
    let mut buffer = ReplayBuffer::new(100_000);
    for _ in 0..100 {
        let start = pool[day_rng.random_range(0..pool.len())];
        let mut state = env.reset(start).unwrap();
        for _ in 0..24 {
            let fractions = random_policy(5, 16, &mut noise_rng).fractions;
            let out = env.step(&EnvAction { fractions: fractions.clone(), split_override: None }).unwrap();
            buffer.push(Transition { state: state.clone(), fractions, split: out.info.split_flat(), reward: out.reward, next_state: out.next_state.clone() });
            if buffer.len() >= 64 { for _ in 0..8 { agent.update(&buffer, false, None, &mut batch_rng); } }
            state = out.next_state;
        }
    }
    println!("== critic Q at day-0 reset state (prev = all ones) ==");
    let probe_state = env.reset(pool[0]).unwrap();
    let split = vec![0.5; 32];
    for (s_u, s_e, c_u, c_e) in [(2,2,1,1),(2,2,2,1),(2,2,3,1),(2,2,4,1),(2,2,5,2),(2,2,6,2),(2,2,7,2),(2,2,8,2),(6,6,6,6),(2,4,7,3)] {
        let f = frac(s_u, s_e, c_u, c_e);
        let mut input = probe_state.clone();
        input.extend_from_slice(&f);
        input.extend_from_slice(&split);
        let q = agent.critics[0].forward(&input)[0];
        println!("S=({s_u},{s_e}) C=({c_u},{c_e}): Q {:>9.4}", q);
    }
}
