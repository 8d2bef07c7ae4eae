//! Finite-difference check of the backward pass for the three networks the
//! pipeline trains: the image classifier, the actor and the critic.
//!
//! cargo run --release --example grad_check -- [seeds]

use rwstate::nn::{grad_check, LayerSpec};
use rwstate::reward::classifier_layers;

fn main() -> rwstate::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);

    // classifier at 16x8 so a full sweep over every weight stays quick
    let classifier = classifier_layers(16, 8);
    let actor = vec![
        LayerSpec::Dense { inputs: 15, outputs: 16 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 16, outputs: 16 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 16, outputs: 4 },
        LayerSpec::Tanh,
    ];
    let critic = vec![
        LayerSpec::Dense { inputs: 19, outputs: 16 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 16, outputs: 16 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 16, outputs: 1 },
    ];
    let nets: [(&str, &[usize], &[LayerSpec]); 3] =
        [("classifier", &[1, 8, 16], &classifier), ("actor", &[15], &actor), ("critic", &[19], &critic)];

    for (name, shape, specs) in nets {
        let mut worst: f64 = 0.0;
        for seed in 0..seeds {
            worst = worst.max(grad_check(shape, specs, seed, 1e-5)?);
        }
        println!("{name:<10} max relative error {worst:.2e} over {seeds} seeds");
    }
    Ok(())
}
