use ranslice::config::ExperimentConfig;
use ranslice::env::{EnvAction, SliceEnv, GROUP};
use ranslice::learner::*;
use ranslice::service::transmission_rates;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::sync::Arc;

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 1;
    let topology = cfg.topology.build().unwrap();
    let rates = transmission_rates(&cfg.radio, &topology);
    let trace = Arc::new(cfg.build_trace(&topology).unwrap());
    let mut env = SliceEnv::new(cfg.env_setup(topology, rates), trace, ranslice::env::SplitPolicy::Optimized).unwrap();
    let (pool, _) = cfg.day_split(env.trace_len());

    let mut master = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut init_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut noise_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut batch_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut day_rng = ChaCha20Rng::seed_from_u64(master.random());
    let mut agent = Agent::new(env.state_dim(), env.action_dim(), env.split_flat_dim(), cfg.learner.clone(), false, &mut init_rng);
    let mut buffer = ReplayBuffer::new(100_000);
    for _ in 0..50 {
        let start = pool[day_rng.random_range(0..pool.len())];
        let mut state = env.reset(start).unwrap();
        for _ in 0..24 {
            let split_override = noise_rng.random::<bool>().then(|| random_splits(16, &mut noise_rng));
            let fractions = exploration_fractions(5, None, &mut noise_rng);
            let out = env.step(&EnvAction { fractions: fractions.clone(), split_override }).unwrap();
            buffer.push(Transition { state: state.clone(), fractions, split: out.info.split_flat(), reward: out.reward, next_state: out.next_state.clone() });
            if buffer.len() >= 64 { for _ in 0..8 { agent.update(&buffer, false, None, &mut batch_rng); } }
            state = out.next_state;
        }
    }
    // Probe state: noon of day 0 (dense traffic), prev = all-ones.
    let mut state = env.reset(pool[0]).unwrap();
    for _ in 0..12 {
        let out = env.step(&EnvAction { fractions: vec![1.0/3.0; 30], split_override: None }).unwrap();
        state = out.next_state;
    }
    let mu = agent.actor.forward(&state);
    let split = vec![0.5; 32];

    // Q along the C_u coordinate of every compute group simultaneously.
    println!("== Q(s, a) sweeping compute-u fraction x for all BSs (others renormalized) ==");
    for k in 1..=12 {
        let x = k as f64 / 18.0 + 0.001;
        let mut a = mu.clone();
        for n in 5..10 {
            let rest = 1.0 - x;
            a[n * GROUP] = x;
            a[n * GROUP + 1] = rest * 0.4;
            a[n * GROUP + 2] = rest * 0.6;
        }
        let mut input = state.clone();
        input.extend_from_slice(&a);
        input.extend_from_slice(&split);
        let q = agent.critics[0].forward(&input)[0];
        println!("  C_u={k:>2}: Q = {q:>9.4}");
    }

    println!("== dQ/da1 at (s, mu(s), split=0.5), per group (u, e, slack) ==");
    let mut input = state.clone();
    input.extend_from_slice(&mu);
    input.extend_from_slice(&split);
    let trace_q = agent.critics[0].forward_trace(&input);
    let g = agent.critics[0].backward(&trace_q, &[1.0]);
    let a1g = &g.input[45..75];
    for n in 0..5 {
        let s_grp = &a1g[n * GROUP..(n + 1) * GROUP];
        let c_grp = &a1g[(5 + n) * GROUP..(5 + n + 1) * GROUP];
        println!("  BS{n}: S (u {:+.4}, e {:+.4}, sl {:+.4})  C (u {:+.4}, e {:+.4}, sl {:+.4})", s_grp[0], s_grp[1], s_grp[2], c_grp[0], c_grp[1], c_grp[2]);
    }
    println!("  (positive u-grad means raising that fraction raises Q)");
}
