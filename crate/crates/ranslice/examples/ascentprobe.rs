use ranslice::config::ExperimentConfig;
use ranslice::env::{EnvAction, SliceEnv};
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
    // Critic-only warmup on random behavior, UTD 8.
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
    // Frozen critic; actor-only ascent on buffer batches.
    let probe_state = env.reset(pool[0]).unwrap();
    for step in 0..=3000 {
        if step % 250 == 0 {
            let mu = agent.act(&probe_state, 0.0, &mut noise_rng);
            let (s, c) = ranslice::env::decode_action(&mu, 5, 18, 18).unwrap();
            let mut input = probe_state.clone();
            input.extend_from_slice(&mu);
            input.extend_from_slice(&vec![0.5; 32]);
            let q = agent.critics[0].forward(&input)[0];
            println!("step {step:>5}: Q(mu) {:>8.4}  S0 {:?} S2 {:?} C0 {:?} C1 {:?} C2 {:?}", q, s[0], s[2], c[0], c[1], c[2]);
        }
        let idx = buffer.sample_indices(64, &mut batch_rng);
        let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
        agent.actor_update(&batch, None);
    }
}
