//! Trains DDPG and TD3 on reward-window and PCA states over several seeds and
//! prints a comparison table.
//!
//! cargo run --release --example compare_representations -- <classifier.rwcl> [train_steps] [eval_steps] [seeds] [out_dir] [first_seed]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rwstate::dataset::{self, DEFAULT_NONSUCCESS, DEFAULT_SUCCESS};
use rwstate::harness::{self, CompareOptions, Pipeline};
use rwstate::reward::ClassifierParams;
use rwstate::rl::{Algorithm, HyperParams};
use rwstate::sim::EnvConfig;
use rwstate::state::{self, StateSpec};

fn main() -> rwstate::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let Some(path) = args.get(1) else {
        eprintln!("usage: compare_representations <classifier.rwcl> [train_steps] [eval_steps] [seeds] [out_dir] [first_seed]");
        std::process::exit(1);
    };
    let train_steps = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let eval_steps = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2_000);
    let n_seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(5);
    let out_dir = PathBuf::from(args.get(5).map_or("runs/compare", String::as_str));

    let env = EnvConfig::default();
    let (w, h) = env.resolution();
    let classifier = Arc::new(ClassifierParams::load(path.as_ref())?);

    // PCA is fitted on the classifier's training sessions.
    let t0 = Instant::now();
    let sessions = dataset::generate_sessions(&env, 8, 0, DEFAULT_SUCCESS, DEFAULT_NONSUCCESS, 0)?;
    let pixels: Vec<&[f64]> = sessions.iter().flat_map(|s| s.images.iter().map(|i| i.image.pixels())).collect();
    let basis = Arc::new(state::fit_pca(&pixels, 50)?);
    println!("fitted PCA on {} images in {:.1?}", pixels.len(), t0.elapsed());

    let window = StateSpec::RewardWindow { n: 15, width: w, height: h };
    let pca = StateSpec::PcaImage { k: 50, width: w, height: h };
    let base = Pipeline::new(env, classifier, window, None)?;
    let opts = CompareOptions { hp: HyperParams::default(), train_steps, eval_steps, workers: 0 };
    let first_seed: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0);
    let seeds: Vec<u64> = (first_seed..first_seed + n_seeds).collect();
    let t1 = Instant::now();
    let cells = harness::compare_representations(
        &base,
        &[(window, None), (pca, Some(basis))],
        &[Algorithm::Ddpg, Algorithm::Td3],
        &seeds,
        &opts,
    )?;
    for c in &cells {
        match &c.outcome {
            Ok(m) => println!("{:<16} {:<4} seed {}  success {:6.2}%  avg reward {:.3}", c.spec, c.algorithm, c.seed, m.task_success_pct, m.avg_reward),
            Err(e) => println!("{:<16} {:<4} seed {}  failed: {e}", c.spec, c.algorithm, c.seed),
        }
    }
    println!("\n{}", harness::format_table(&cells));
    harness::write_outputs(&out_dir, &cells)?;
    println!("wrote {} ({:.1?})", out_dir.display(), t1.elapsed());
    Ok(())
}
