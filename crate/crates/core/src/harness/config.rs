use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::Pipeline;
use crate::error::{Error, Result};
use crate::reward::ClassifierParams;
use crate::rl::{Algorithm, HyperParams};
use crate::sim::EnvConfig;
use crate::state::{PcaBasis, StateSpec};

/// Everything one training/evaluation run needs.
///
/// The text form is the environment's `key = value` format extended with the
/// experiment keys below; any key not listed here is handed to
/// [`EnvConfig::set`].
///
/// | key | meaning |
/// |-----|---------|
/// | `classifier` | path to an `RWCL` file |
/// | `pca` | path to an `RWPC` file (PCA states only) |
/// | `spec` | `pixels:WxH`, `pca:K@WxH` or `window:N@WxH` |
/// | `algo` | `ddpg` or `td3` |
/// | `train_steps`, `eval_steps`, `n_seeds`, `seed`, `out_dir` | run budget and output |
/// | `gamma`, `tau`, `actor_lr`, `critic_lr`, `batch_size`, `buffer_capacity`, `warmup_steps`, `exploration_noise`, `policy_delay`, `target_noise`, `noise_clip`, `hidden` | learner hyperparameters |
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub classifier_path: PathBuf,
    pub pca_path: Option<PathBuf>,
    pub spec: StateSpec,
    pub algorithm: Algorithm,
    pub hp: HyperParams,
    pub train_steps: usize,
    pub eval_steps: usize,
    pub n_seeds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            spec: StateSpec::RewardWindow { n: 15, width: env.camera_width, height: env.camera_height },
            env,
            classifier_path: PathBuf::from("classifier.rwcl"),
            pca_path: None,
            algorithm: Algorithm::Ddpg,
            hp: HyperParams::default(),
            train_steps: 10_000,
            eval_steps: 10_000,
            n_seeds: 5,
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let hp = &mut self.hp;
        match key {
            "classifier" => self.classifier_path = PathBuf::from(value),
            "pca" => self.pca_path = Some(PathBuf::from(value)),
            "spec" => self.spec = value.parse()?,
            "algo" => self.algorithm = value.parse()?,
            "train_steps" => self.train_steps = parse(key, value)?,
            "eval_steps" => self.eval_steps = parse(key, value)?,
            "n_seeds" => self.n_seeds = parse(key, value)?,
            "seed" => {
                self.seed = parse(key, value)?;
                self.env.seed = self.seed;
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "gamma" => hp.gamma = parse(key, value)?,
            "tau" => hp.tau = parse(key, value)?,
            "actor_lr" => hp.actor_lr = parse(key, value)?,
            "critic_lr" => hp.critic_lr = parse(key, value)?,
            "batch_size" => hp.batch_size = parse(key, value)?,
            "buffer_capacity" => hp.buffer_capacity = parse(key, value)?,
            "warmup_steps" => hp.warmup_steps = parse(key, value)?,
            "exploration_noise" => hp.exploration_noise = parse(key, value)?,
            "policy_delay" => hp.policy_delay = parse(key, value)?,
            "target_noise" => hp.target_noise = parse(key, value)?,
            "noise_clip" => hp.noise_clip = parse(key, value)?,
            "hidden" => hp.hidden = parse(key, value)?,
            _ => self.env.set(key, value)?,
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            self.set(key, value.trim()).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        self.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.spec.validate()?;
        self.hp.validate()?;
        if self.train_steps == 0 || self.eval_steps == 0 {
            return Err(Error::Config("train_steps and eval_steps must be >= 1".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::Config("n_seeds must be >= 1".into()));
        }
        Ok(())
    }

    pub fn load_classifier(&self) -> Result<Arc<ClassifierParams>> {
        ClassifierParams::load(&self.classifier_path)
            .map(Arc::new)
            .map_err(|e| Error::Config(format!("classifier {}: {e}", self.classifier_path.display())))
    }

    /// Loads the PCA basis when the spec needs one, keeping the leading `k`
    /// components if the file has more.
    pub fn load_basis(&self) -> Result<Option<Arc<PcaBasis>>> {
        match (self.spec, &self.pca_path) {
            (StateSpec::PcaImage { k, .. }, Some(p)) => {
                let b = PcaBasis::load(p).map_err(|e| Error::Config(format!("pca basis {}: {e}", p.display())))?;
                let b = if b.k() > k { b.truncated(k)? } else { b };
                Ok(Some(Arc::new(b)))
            }
            (StateSpec::PcaImage { .. }, None) => Err(Error::Config("PCA states need a `pca` basis file".into())),
            _ => Ok(None),
        }
    }

    /// Loads the referenced files and assembles the pipeline.
    pub fn pipeline(&self) -> Result<Pipeline> {
        self.validate()?;
        Pipeline::new(self.env.clone(), self.load_classifier()?, self.spec, self.load_basis()?)
    }
}
