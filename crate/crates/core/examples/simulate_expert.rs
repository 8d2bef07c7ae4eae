//! Rolls out the scripted expert and writes every camera frame as a PGM.
//!
//! cargo run --example simulate_expert -- [seed] [out_dir] [width] [height]

use std::path::PathBuf;

use rwstate::sim::{self, EnvConfig};

fn main() -> rwstate::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = PathBuf::from(args.get(2).map_or("expert_frames", String::as_str));
    let width = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(320);
    let height = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(240);
    std::fs::create_dir_all(&out)?;

    let config = EnvConfig::default().with_resolution(width, height);
    let mut state = sim::reset(&config, seed)?;
    std::fs::write(out.join("frame_00.pgm"), sim::render(&state, &config).to_pgm())?;
    while !sim::is_done(&state, &config) {
        let action = sim::scripted_expert(&state, &config);
        let (next, result) = sim::step(&state, &action, &config)?;
        let g = sim::gripper_position(&next.joints, &config);
        println!(
            "step {:2}  action [{:+.2} {:+.2} {:+.2} {:+.2}]  gripper ({:.3}, {:.3}, {:.3})  grasped {}  {:?}",
            next.step_index, action.0[0], action.0[1], action.0[2], action.0[3], g[0], g[1], g[2], next.grasped,
            result.done_reason
        );
        std::fs::write(out.join(format!("frame_{:02}.pgm", next.step_index)), result.observation.to_pgm())?;
        state = next;
    }
    println!("frames written to {}", out.display());
    Ok(())
}
