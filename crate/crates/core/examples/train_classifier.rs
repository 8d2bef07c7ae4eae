//! Generates ten capture sessions, splits them 8/1/1 and trains the success
//! classifier, printing the per-epoch history.
//!
//! cargo run --release --example train_classifier -- [epochs] [batch] [out.rwcl]

use std::time::Instant;

use rwstate::dataset::{self, DEFAULT_NONSUCCESS, DEFAULT_SUCCESS};
use rwstate::reward::{self, TrainConfig};
use rwstate::sim::EnvConfig;

fn main() -> rwstate::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let batch_size = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(32);

    let config = EnvConfig::default();
    let t0 = Instant::now();
    let sessions = dataset::generate_sessions(&config, 10, 0, DEFAULT_SUCCESS, DEFAULT_NONSUCCESS, 1)?;
    println!("generated {} sessions in {:.1?}", sessions.len(), t0.elapsed());
    let split = dataset::split(sessions)?;
    println!("split (train, val, test) images = {:?}", split.image_counts());

    let t1 = Instant::now();
    let cfg = TrainConfig { epochs, batch_size, ..TrainConfig::default() };
    let (params, report) = reward::train_classifier(&split, &cfg)?;
    for h in &report.history {
        println!(
            "epoch {:2}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            h.epoch, h.train_loss, h.train_accuracy, h.validation_loss, h.validation_accuracy
        );
    }
    println!(
        "selected epoch {}  test accuracy {:.4}  ({:.1?})",
        report.selected_epoch,
        report.test_accuracy,
        t1.elapsed()
    );
    if let Some(path) = args.get(3) {
        params.save(path.as_ref())?;
        println!("saved {path}");
    }
    Ok(())
}
