//! Replays scripted-expert episodes and prints the classifier reward after
//! every action, the kind of sequence the reward-window state is built from.
//!
//! cargo run --release --example replay_episode -- <classifier.rwcl> [episodes] [seed]

use std::sync::Arc;

use rwstate::harness::{self, Pipeline};
use rwstate::reward::ClassifierParams;
use rwstate::sim::{self, EnvConfig};
use rwstate::state::StateSpec;

fn main() -> rwstate::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let Some(path) = args.get(1) else {
        eprintln!("usage: replay_episode <classifier.rwcl> [episodes] [seed]");
        std::process::exit(1);
    };
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let env = EnvConfig::default();
    let spec = StateSpec::RewardWindow { n: 15, width: env.camera_width, height: env.camera_height };
    let pipeline = Pipeline::new(env.clone(), Arc::new(ClassifierParams::load(path.as_ref())?), spec, None)?;
    for e in 0..episodes {
        let out = harness::run_episode(&pipeline, harness::eval_episode_seed(seed, e), |_, w| Ok(sim::scripted_expert(w, &env).0))?;
        let rewards: Vec<String> = out.transitions.iter().map(|t| format!("{:.4}", t.reward)).collect();
        println!(
            "episode {e}: success {}  r0={:.4}  {}",
            out.success,
            out.initial_reward,
            rewards.iter().enumerate().map(|(i, r)| format!("r{}={r}", i + 1)).collect::<Vec<_>>().join(" ")
        );
    }
    Ok(())
}
