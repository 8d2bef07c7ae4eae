//! Command-line front end. Every subcommand reads an optional `key = value`
//! config file, applies the flags on top, and writes its outputs under
//! `--out-dir`.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 when
//! the run itself fails.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rwstate::dataset::{self, DEFAULT_NONSUCCESS, DEFAULT_SUCCESS};
use rwstate::harness::{self, CompareOptions, ExperimentConfig, Pipeline};
use rwstate::reward::{self, TrainConfig};
use rwstate::rl::{AgentParams, Algorithm};
use rwstate::sim;
use rwstate::state::{self, StateSpec};
use rwstate::Error;

#[derive(Parser)]
#[command(name = "rwstate", version, about = "Reward-window state experiments for a simulated grab-and-lift task")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value file with environment, run and learner settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Training steps (evaluation steps for eval-policy)
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// State representation: pixels:WxH, pca:K@WxH or window:N@WxH. Repeatable for compare.
    #[arg(long, global = true)]
    spec: Vec<StateSpec>,
    /// ddpg or td3. Repeatable for compare.
    #[arg(long, global = true)]
    algo: Vec<Algorithm>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled capture sessions into dataset.rwds
    GenData {
        #[arg(long, default_value_t = 10)]
        sessions: u16,
    },
    /// Train the success classifier on a dataset file
    TrainClassifier {
        /// Dataset file [default: <out-dir>/dataset.rwds]
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        /// Train the epochs {5,10} x batch {16,32,64} grid and keep the best
        #[arg(long)]
        sweep: bool,
    },
    /// Report classifier accuracy per session of a dataset file
    EvalClassifier {
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit a PCA basis on the training sessions of a dataset file
    FitPca {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        k: usize,
    },
    /// Train one policy and save it as policy.rwpl
    TrainPolicy {
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        pca: Option<PathBuf>,
    },
    /// Evaluate a saved policy greedily
    EvalPolicy {
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        pca: Option<PathBuf>,
    },
    /// Train and evaluate every (spec, algorithm, seed) cell
    Compare {
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        pca: Option<PathBuf>,
        /// Concurrent learners; 0 uses every core
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Print the per-step rewards of episodes run by a policy, or by the scripted expert
    Replay {
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        pca: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Usage(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn experiment(c: &Common) -> rwstate::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = &c.config {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(s) = c.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(d) = &c.out_dir {
        cfg.out_dir = d.clone();
    }
    // files not named anywhere are looked up where earlier subcommands put them
    if cfg.classifier_path == ExperimentConfig::default().classifier_path {
        cfg.classifier_path = cfg.out_dir.join("classifier.rwcl");
    }
    if cfg.pca_path.is_none() {
        cfg.pca_path = Some(cfg.out_dir.join("pca.rwpc"));
    }
    if let Some(&s) = c.spec.first() {
        cfg.spec = s;
    }
    if let Some(&a) = c.algo.first() {
        cfg.algorithm = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn or_default(p: &Option<PathBuf>, cfg: &ExperimentConfig, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| cfg.out_dir.join(name))
}

fn use_files(cfg: &mut ExperimentConfig, classifier: &Option<PathBuf>, pca: &Option<PathBuf>) {
    if let Some(c) = classifier {
        cfg.classifier_path = c.clone();
    }
    if let Some(p) = pca {
        cfg.pca_path = Some(p.clone());
    }
}

fn load_sessions(path: &Path) -> rwstate::Result<Vec<dataset::CaptureSession>> {
    dataset::load_dataset(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("dataset {}: {io}", path.display())),
        e => e,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> rwstate::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn run(cli: Cli) -> rwstate::Result<()> {
    let mut cfg = experiment(&cli.common)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    match cli.command {
        Command::GenData { sessions } => {
            if sessions == 0 {
                return Err(Error::Usage("--sessions must be >= 1".into()));
            }
            let s = dataset::generate_sessions(&cfg.env, sessions, cfg.seed, DEFAULT_SUCCESS, DEFAULT_NONSUCCESS, 0)?;
            let path = cfg.out_dir.join("dataset.rwds");
            dataset::save_dataset(&path, &s)?;
            let images = s.iter().map(|s| s.images.len()).sum();
            let (w, h) = cfg.env.resolution();
            let size = std::fs::metadata(&path)?.len();
            println!("{}: {} sessions, {images} images, {size} bytes", path.display(), s.len());
            if size as usize != dataset::expected_file_size(w, h, s.len(), images) {
                return Err(Error::Inconsistent("file size differs from the header prediction".into()));
            }
        }
        Command::TrainClassifier { data, epochs, batch, sweep } => {
            let split = dataset::split(load_sessions(&or_default(&data, &cfg, "dataset.rwds"))?)?;
            let (params, reports) = if sweep {
                reward::sweep_classifiers(&split, &[5, 10], &[16, 32, 64], cfg.seed)?
            } else {
                let tc = TrainConfig { epochs, batch_size: batch, seed: cfg.seed, ..TrainConfig::default() };
                let (p, r) = reward::train_classifier(&split, &tc)?;
                (p, vec![r])
            };
            let best = &reports[0];
            for h in &best.history {
                println!(
                    "epoch {:2}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
                    h.epoch, h.train_loss, h.train_accuracy, h.validation_loss, h.validation_accuracy
                );
            }
            println!("selected epoch {}  test accuracy {:.4}", best.selected_epoch, best.test_accuracy);
            params.save(&cfg.out_dir.join("classifier.rwcl"))?;
            write_json(&cfg.out_dir.join("classifier_report.json"), &reports)?;
        }
        Command::EvalClassifier { classifier, data } => {
            use_files(&mut cfg, &classifier, &None);
            let clf = cfg.load_classifier()?;
            let sessions = load_sessions(&or_default(&data, &cfg, "dataset.rwds"))?;
            let mut total = 0.0;
            let mut n = 0usize;
            for s in &sessions {
                let acc = reward::evaluate_accuracy(clf.as_ref(), s)?;
                println!("session {:3}  accuracy {acc:.4}", s.session_id);
                total += acc * s.images.len() as f64;
                n += s.images.len();
            }
            println!("overall accuracy {:.4} over {n} images", total / n.max(1) as f64);
        }
        Command::FitPca { data, k } => {
            let split = dataset::split(load_sessions(&or_default(&data, &cfg, "dataset.rwds"))?)?;
            let pixels: Vec<&[f64]> = split.train_images().map(|l| l.image.pixels()).collect();
            let basis = state::fit_pca(&pixels, k)?;
            let path = cfg.out_dir.join("pca.rwpc");
            basis.save(&path)?;
            let explained: f64 = basis.explained_variance().iter().sum();
            println!("{}: {k} components of {} pixels, explained variance {explained:.4}", path.display(), basis.dim());
        }
        Command::TrainPolicy { classifier, pca } => {
            use_files(&mut cfg, &classifier, &pca);
            if let Some(s) = cli.common.steps {
                cfg.train_steps = s;
            }
            cfg.validate()?;
            let pipeline = cfg.pipeline()?;
            let out = harness::train_policy(&pipeline, cfg.algorithm, &cfg.hp, cfg.train_steps, cfg.seed)?;
            out.params.save(&cfg.out_dir.join("policy.rwpl"))?;
            write_jsonl(&cfg.out_dir.join("train_curve.jsonl"), &out.curve)?;
            let wins = out.curve.iter().filter(|l| l.success).count();
            println!(
                "{} on {}: {} env steps, {} updates, {} episodes ({wins} successful)",
                cfg.algorithm,
                cfg.spec,
                out.env_steps,
                out.updates,
                out.curve.len()
            );
        }
        Command::EvalPolicy { policy, classifier, pca } => {
            use_files(&mut cfg, &classifier, &pca);
            if let Some(s) = cli.common.steps {
                cfg.eval_steps = s;
            }
            let params = load_policy(&or_default(&policy, &cfg, "policy.rwpl"))?;
            cfg.spec = params.spec;
            cfg.validate()?;
            let pipeline = cfg.pipeline()?;
            let m = harness::evaluate_policy(&pipeline, &params, cfg.eval_steps, cfg.seed)?;
            write_json(&cfg.out_dir.join("eval.json"), &m)?;
            println!(
                "{} on {}: task success {:.2}%  avg reward {:.4}  over {} episodes",
                params.algorithm, params.spec, m.task_success_pct, m.avg_reward, m.episodes
            );
        }
        Command::Compare { classifier, pca, workers } => {
            use_files(&mut cfg, &classifier, &pca);
            if let Some(s) = cli.common.steps {
                cfg.train_steps = s;
            }
            let (w, h) = cfg.env.resolution();
            let specs = if cli.common.spec.is_empty() {
                vec![StateSpec::RewardWindow { n: 15, width: w, height: h }, StateSpec::PcaImage { k: 50, width: w, height: h }]
            } else {
                cli.common.spec.clone()
            };
            let algos = if cli.common.algo.is_empty() { vec![Algorithm::Ddpg, Algorithm::Td3] } else { cli.common.algo.clone() };
            let mut with_basis = Vec::new();
            for s in specs {
                cfg.spec = s;
                with_basis.push((s, cfg.load_basis()?));
            }
            cfg.spec = with_basis[0].0;
            let base = Pipeline::new(cfg.env.clone(), cfg.load_classifier()?, cfg.spec, with_basis[0].1.clone())?;
            let seeds: Vec<u64> = (cfg.seed..cfg.seed + cfg.n_seeds as u64).collect();
            let opts = CompareOptions { hp: cfg.hp.clone(), train_steps: cfg.train_steps, eval_steps: cfg.eval_steps, workers };
            let cells = harness::compare_representations(&base, &with_basis, &algos, &seeds, &opts)?;
            harness::write_outputs(&cfg.out_dir, &cells)?;
            print!("{}", harness::format_table(&cells));
            if cells.iter().all(|c| c.outcome.is_err()) {
                return Err(Error::Inconsistent("every cell failed".into()));
            }
        }
        Command::Replay { policy, classifier, pca, episodes } => {
            use_files(&mut cfg, &classifier, &pca);
            let params = match &policy {
                Some(p) => Some(load_policy(p)?),
                None => None,
            };
            if let Some(p) = &params {
                cfg.spec = p.spec;
            }
            let pipeline = cfg.pipeline()?;
            for e in 0..episodes {
                let seed = harness::eval_episode_seed(cfg.seed, e);
                let out = harness::run_episode(&pipeline, seed, |s, w| match &params {
                    Some(p) => p.act(s),
                    None => Ok(sim::scripted_expert(w, &pipeline.env).0),
                })?;
                let rewards: Vec<String> =
                    out.transitions.iter().enumerate().map(|(i, t)| format!("r{}={:.4}", i + 1, t.reward)).collect();
                println!("episode {e}: success {}  r0={:.4} {}", out.success, out.initial_reward, rewards.join(" "));
            }
        }
    }
    Ok(())
}

fn load_policy(path: &Path) -> rwstate::Result<AgentParams> {
    AgentParams::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("policy {}: {io}", path.display())),
        e => e,
    })
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> rwstate::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}
