//! Fits a PCA basis to classifier training images and reports how much of
//! the image each state size keeps, with one reconstruction per k as PGM.
//!
//! cargo run --release --example pca_states -- [sessions] [out_dir]

use std::path::PathBuf;

use rwstate::dataset::{self, DEFAULT_NONSUCCESS, DEFAULT_SUCCESS};
use rwstate::sim::EnvConfig;
use rwstate::state;
use rwstate::Image;

fn main() -> rwstate::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let sessions: u16 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let out = PathBuf::from(args.get(2).map_or("pca_frames", String::as_str));
    std::fs::create_dir_all(&out)?;

    let env = EnvConfig::default();
    let (w, h) = env.resolution();
    let data = dataset::generate_sessions(&env, sessions, 0, DEFAULT_SUCCESS, DEFAULT_NONSUCCESS, 0)?;
    let pixels: Vec<&[f64]> = data.iter().flat_map(|s| s.images.iter().map(|i| i.image.pixels())).collect();
    let full = state::fit_pca(&pixels, 100)?;
    let total: f64 = {
        let mean = full.mean();
        pixels.iter().map(|p| p.iter().zip(mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>()
            / (pixels.len() - 1) as f64
    };
    println!("{} images of {w}x{h}, total variance {total:.3}", pixels.len());

    let sample = &data[0].images[0].image;
    std::fs::write(out.join("original.pgm"), sample.to_pgm())?;
    for k in [5, 10, 20, 50, 100] {
        let basis = full.truncated(k)?;
        let kept: f64 = basis.explained_variance().iter().sum();
        let err = state::reconstruction_error(&basis, &pixels)? / pixels.len() as f64;
        println!("k = {k:3}  variance kept {:5.1}%  mean squared reconstruction error {err:.4}", 100.0 * kept / total);
        let rec: Vec<f64> = basis.reconstruct(&basis.project(sample.pixels())?)?.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        std::fs::write(out.join(format!("k{k:03}.pgm")), Image::new(w, h, rec)?.to_pgm())?;
    }
    println!("reconstructions written to {}", out.display());
    Ok(())
}
