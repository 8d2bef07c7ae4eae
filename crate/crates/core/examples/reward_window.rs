//! Shows the reward-window state an agent sees while the scripted expert
//! grabs and lifts the cube: one row per step, oldest reward first.
//!
//! cargo run --release --example reward_window -- <classifier.rwcl> [n] [seed]

use std::sync::Arc;

use rwstate::harness::{Episode, Pipeline};
use rwstate::reward::ClassifierParams;
use rwstate::sim::{self, EnvConfig};
use rwstate::state::StateSpec;

fn main() -> rwstate::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let Some(path) = args.get(1) else {
        eprintln!("usage: reward_window <classifier.rwcl> [n] [seed]");
        std::process::exit(1);
    };
    let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let env = EnvConfig::default();
    let spec = StateSpec::RewardWindow { n, width: env.camera_width, height: env.camera_height };
    let pipeline = Pipeline::new(env.clone(), Arc::new(ClassifierParams::load(path.as_ref())?), spec, None)?;

    let mut ep = Episode::begin(&pipeline, seed)?;
    let show = |step: usize, state: &[f64]| {
        let cells: Vec<String> = state.iter().map(|r| format!("{r:.4}")).collect();
        println!("s{step:<2} [{}]", cells.join(" "));
    };
    show(0, ep.state());
    while !ep.is_done() {
        let a = sim::scripted_expert(ep.world(), &env);
        ep.step(a.0)?;
        show(ep.len(), ep.state());
    }
    println!("success {} after {} actions", ep.is_success(), ep.len());
    Ok(())
}
