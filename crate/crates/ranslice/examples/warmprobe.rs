use ranslice::config::ExperimentConfig;
use ranslice::env::{EnvAction, SliceEnv};
use ranslice::learner::*;
use ranslice::service::transmission_rates;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::sync::Arc;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let warmup: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2400);
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut cfg = ExperimentConfig::default();
    cfg.learner.episodes = episodes;
    cfg.learner.warmup_windows = warmup;
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
    let mut buffer = ReplayBuffer::new(cfg.learner.buffer_capacity);
    let mut seen = 0usize;

    for e in 0..episodes {
        let start = pool[day_rng.random_range(0..pool.len())];
        let mut state = env.reset(start).unwrap();
        let (mut sum_r, mut feas) = (0.0, 0);
        for _ in 0..24 {
            let fractions = if seen >= warmup {
                agent.act(&state, cfg.learner.sigma, &mut noise_rng)
            } else {
                random_policy(5, env.split_flat_dim() / 2, &mut noise_rng).fractions
            };
            seen += 1;
            let out = env.step(&EnvAction { fractions: fractions.clone(), split_override: None }).unwrap();
            buffer.push(Transition { state: state.clone(), fractions, split: out.info.split_flat(), reward: out.reward, next_state: out.next_state.clone() });
            if buffer.len() >= 64 {
                agent.update(&buffer, seen > warmup, Some(&env), &mut batch_rng);
            }
            sum_r += out.reward;
            if out.info.feasible.iter().all(|&f| f) { feas += 1; }
            state = out.next_state;
        }
        if e % 10 == 0 || e + 1 == episodes {
            let probe_state = env.reset(pool[0]).unwrap();
            let mu = agent.act(&probe_state, 0.0, &mut noise_rng);
            let (s, c) = ranslice::env::decode_action(&mu, 5, 18, 18).unwrap();
            println!("ep {e:>3}: R {:>8.1} feas {feas:>2}/24  S0 {:?} C0 {:?} C1 {:?} C2 {:?}", sum_r / 24.0, s[0], c[0], c[1], c[2]);
        }
    }
}
