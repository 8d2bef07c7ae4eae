use super::*;
use crate::image::Image;
use crate::reward::RewardScore;
use crate::sim;

/// Cheap stand-in for the classifier: mean brightness of a 32x24 frame.
struct Brightness;

impl SuccessPredictor for Brightness {
    fn resolution(&self) -> (usize, usize) {
        (32, 24)
    }
    fn predict_success(&self, image: &Image) -> Result<RewardScore> {
        let p = image.pixels();
        Ok(RewardScore(p.iter().sum::<f64>() / p.len() as f64))
    }
}

const WINDOW: StateSpec = StateSpec::RewardWindow { n: 15, width: 32, height: 24 };

fn pipeline(spec: StateSpec) -> Pipeline {
    Pipeline::new(EnvConfig::default(), Arc::new(Brightness), spec, None).unwrap()
}

fn small_hp() -> HyperParams {
    HyperParams { hidden: 8, batch_size: 8, warmup_steps: 40, ..HyperParams::default() }
}

fn expert(p: &Pipeline) -> impl FnMut(&[f64], &WorldState) -> Result<[f64; ACTION_DIM]> + '_ {
    move |_, w| Ok(sim::scripted_expert(w, &p.env).0)
}

#[test]
fn expert_episode_bookkeeping() {
    let p = pipeline(WINDOW);
    for s in 0..5 {
        let out = run_episode(&p, s, expert(&p)).unwrap();
        assert!(out.success);
        let n = out.transitions.len();
        assert!(n >= 1 && n <= p.env.max_steps);
        assert_eq!(out.transitions.iter().filter(|t| t.done).count(), 1);
        assert!(out.transitions[n - 1].done);
        for pair in out.transitions.windows(2) {
            assert_eq!(pair[0].next_state, pair[1].state);
        }
        let total: f64 = out.transitions.iter().map(|t| t.reward).sum();
        assert_eq!(total.to_bits(), out.cumulative_reward.to_bits());
        // first state: only the reset frame's score, newest last
        let first = &out.transitions[0].state;
        assert_eq!(first.len(), 15);
        assert_eq!(first[14], out.initial_reward);
        assert!(first[..14].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn window_state_shifts_by_one_each_step() {
    let p = pipeline(WINDOW);
    let out = run_episode(&p, 3, expert(&p)).unwrap();
    for t in &out.transitions {
        assert_eq!(t.next_state[..14], t.state[1..]);
        assert_eq!(t.next_state[14], t.reward);
    }
}

#[test]
fn pixel_states_have_the_spec_dimension() {
    let spec = StateSpec::Pixels { width: 8, height: 6 };
    let p = pipeline(spec);
    let out = run_episode(&p, 1, expert(&p)).unwrap();
    assert!(out.transitions.iter().all(|t| t.state.len() == 48));
    assert!(out.transitions.iter().flat_map(|t| &t.state).all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn training_uses_exactly_the_step_budget() {
    let p = pipeline(WINDOW);
    for steps in [1, 39, 40, 173] {
        let out = train_policy(&p, Algorithm::Td3, &small_hp(), steps, 7).unwrap();
        assert_eq!(out.env_steps, steps);
        let counted: usize = out.curve.iter().map(|l| l.length).sum();
        assert_eq!(counted + out.truncated_steps, steps);
        assert!(out.curve.iter().all(|l| l.success || l.length == p.env.max_steps));
        // one update per step from the warmup boundary on
        assert_eq!(out.updates, (steps + 1).saturating_sub(40) as u64);
        for (i, l) in out.curve.iter().enumerate() {
            assert_eq!(l.seed, 7);
            assert!(l.episode >= i);
        }
    }
    assert!(matches!(train_policy(&p, Algorithm::Ddpg, &small_hp(), 0, 0), Err(Error::Config(_))));
}

#[test]
fn training_is_deterministic_per_seed() {
    let p = pipeline(WINDOW);
    let a = train_policy(&p, Algorithm::Ddpg, &small_hp(), 150, 3).unwrap();
    let b = train_policy(&p, Algorithm::Ddpg, &small_hp(), 150, 3).unwrap();
    let c = train_policy(&p, Algorithm::Ddpg, &small_hp(), 150, 4).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, c.params);
}

#[test]
fn expert_evaluation_is_perfect_and_recomputable() {
    let p = pipeline(WINDOW);
    let m = evaluate_with(&p, 300, 0, expert(&p)).unwrap();
    assert_eq!(m.task_success_pct, 100.0);
    assert_eq!(m.env_steps, 300);
    assert_eq!(m.episodes, m.logs.len());
    assert!(m.logs.iter().map(|l| l.length).sum::<usize>() <= 300);
    m.verify().unwrap();
    let mut tampered = m.clone();
    tampered.avg_reward += 1e-12;
    assert!(matches!(tampered.verify(), Err(Error::Inconsistent(_))));
}

#[test]
fn cut_off_eval_episode_is_not_counted() {
    let p = pipeline(WINDOW);
    let idle = |_: &[f64], _: &WorldState| Ok([0.0; ACTION_DIM]);
    let m = evaluate_with(&p, 120, 0, idle).unwrap();
    assert_eq!(m.episodes, 2);
    assert_eq!(m.task_success_pct, 0.0);
    assert!(matches!(evaluate_with(&p, 49, 0, idle), Err(Error::Config(_))));
}

#[test]
fn evaluation_rejects_a_policy_for_another_spec() {
    let p = pipeline(WINDOW);
    let params = AgentParams::new(Algorithm::Ddpg, StateSpec::Pixels { width: 8, height: 6 }, 8, 0).unwrap();
    assert!(matches!(evaluate_policy(&p, &params, 100, 0), Err(Error::Config(_))));
}

#[test]
fn random_baseline_is_deterministic() {
    let p = pipeline(WINDOW);
    assert_eq!(evaluate_random(&p, 400, 5).unwrap(), evaluate_random(&p, 400, 5).unwrap());
}

fn tiny_grid(out: &std::path::Path) -> Vec<CellResult> {
    let p = pipeline(WINDOW);
    let specs = [(WINDOW, None), (StateSpec::Pixels { width: 8, height: 6 }, None)];
    let opts = CompareOptions { hp: small_hp(), train_steps: 60, eval_steps: 100, workers: 2 };
    let cells = compare_representations(&p, &specs, &[Algorithm::Ddpg, Algorithm::Td3], &[0, 1], &opts).unwrap();
    write_outputs(out, &cells).unwrap();
    cells
}

#[test]
fn comparison_covers_the_cross_product_and_is_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let cells = tiny_grid(d1.path());
    assert_eq!(cells.len(), 8);
    assert!(cells.iter().all(|c| c.outcome.is_ok()));
    assert_eq!((cells[0].spec, cells[0].algorithm, cells[0].seed), (WINDOW, Algorithm::Ddpg, 0));
    assert_eq!((cells[3].spec, cells[3].algorithm, cells[3].seed), (WINDOW, Algorithm::Td3, 1));

    let csv = std::fs::read_to_string(d1.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("window:15@32x24,DDPG,0,"));

    let table = std::fs::read_to_string(d1.path().join("table.txt")).unwrap();
    assert!(table.contains("Last 15 rewards") && table.contains("Pixels 8x6"));

    tiny_grid(d2.path());
    for f in ["results.csv", "table.txt", "episodes.jsonl"] {
        assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failing_cells_are_reported_not_fatal() {
    let p = pipeline(WINDOW);
    // eval budget too short to finish an episode for an untrained agent
    let opts = CompareOptions { hp: small_hp(), train_steps: 20, eval_steps: 1, workers: 1 };
    let cells = compare_representations(&p, &[(WINDOW, None)], &[Algorithm::Ddpg], &[0, 1], &opts).unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c.outcome.is_err()));
    assert!(best_success(&cells, WINDOW, Algorithm::Ddpg).is_none());
    let table = format_table(&cells);
    assert!(table.contains("seed 0"), "{table}");
    let d = tempfile::tempdir().unwrap();
    write_outputs(d.path(), &cells).unwrap();
}

#[test]
fn config_text_overrides_defaults() {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text("spec = pca:20@32x24\nalgo = td3\nseed = 9\nwarmup_steps = 10\nomega_max = 6 # slower\n").unwrap();
    assert_eq!(cfg.spec, StateSpec::PcaImage { k: 20, width: 32, height: 24 });
    assert_eq!(cfg.algorithm, Algorithm::Td3);
    assert_eq!((cfg.seed, cfg.env.seed), (9, 9));
    assert_eq!(cfg.hp.warmup_steps, 10);
    assert_eq!(cfg.env.omega_max, 6.0);
    assert!(matches!(cfg.load_basis(), Err(Error::Config(_))));

    for bad in ["nonsense = 1", "algo = sac", "train_steps = 0", "seed = 1\nseed = 2", "spec"] {
        assert!(ExperimentConfig::default().apply_text(bad).is_err(), "{bad}");
    }
}
