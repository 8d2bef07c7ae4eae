//! Trains one DDPG or TD3 policy on reward-window states and evaluates it
//! against the uniform-random baseline. Outcomes vary a lot between seeds;
//! the comparison example reports the best of several.
//!
//! cargo run --release --example train_policy -- <classifier.rwcl> [ddpg|td3] [train_steps] [seed]

use std::sync::Arc;
use std::time::Instant;

use rwstate::harness::{self, Pipeline};
use rwstate::reward::ClassifierParams;
use rwstate::rl::{Algorithm, HyperParams};
use rwstate::sim::EnvConfig;
use rwstate::state::StateSpec;

fn main() -> rwstate::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let Some(path) = args.get(1) else {
        eprintln!("usage: train_policy <classifier.rwcl> [ddpg|td3] [train_steps] [seed]");
        std::process::exit(1);
    };
    let algo: Algorithm = args.get(2).map_or(Ok(Algorithm::Ddpg), |s| s.parse())?;
    let steps = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seed = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);

    let classifier = Arc::new(ClassifierParams::load(path.as_ref())?);
    let env = EnvConfig::default();
    let spec = StateSpec::RewardWindow { n: 15, width: env.camera_width, height: env.camera_height };
    let pipeline = Pipeline::new(env, classifier, spec, None)?;

    let baseline = harness::evaluate_random(&pipeline, 1500, seed)?;
    println!("random policy: success {:.1}% over {} episodes", baseline.task_success_pct, baseline.episodes);

    let t0 = Instant::now();
    let out = harness::train_policy(&pipeline, algo, &HyperParams::default(), steps, seed)?;
    let secs = t0.elapsed().as_secs_f64();
    println!("{algo}: {} env steps, {} updates, {} episodes in {secs:.1}s", out.env_steps, out.updates, out.curve.len());
    for chunk in out.curve.chunks(out.curve.len().div_ceil(10).max(1)) {
        let wins = chunk.iter().filter(|l| l.success).count();
        let reward: f64 = chunk.iter().map(|l| l.cumulative_reward).sum::<f64>() / chunk.len() as f64;
        println!(
            "  episodes {:4}..{:4}  success {:5.1}%  avg reward {:.2}",
            chunk[0].episode,
            chunk[chunk.len() - 1].episode,
            100.0 * wins as f64 / chunk.len() as f64,
            reward
        );
    }
    let m = harness::evaluate_policy(&pipeline, &out.params, 1500, seed)?;
    println!("greedy policy: success {:.1}%  avg reward {:.2}  over {} episodes", m.task_success_pct, m.avg_reward, m.episodes);
    Ok(())
}
