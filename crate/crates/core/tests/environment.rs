use rand::RngCore;
use steiner_core::environment::{
    run_episode, CyclingBasis, EpisodeConfig, FixedSequence, LossFunction, RandomUnit, Target,
    CSV_COLUMNS,
};
use steiner_core::geometry::Vector;
use steiner_core::hypothesis::Context;
use steiner_core::learners::{
    midpoint_baseline, Feedback, Learner, LearnerError, Lemma, SteinerConfig, SteinerSymmetric,
    StepReport, RESOLUTION_FLOOR,
};

/// Guesses a constant and fails on a chosen round.
struct Constant {
    y: f64,
    fail_at: Option<usize>,
    t: usize,
}

impl Learner for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn guess(&mut self, _x: &Context, _rng: &mut dyn RngCore) -> Result<f64, LearnerError> {
        self.t += 1;
        if Some(self.t) == self.fail_at {
            return Err(LearnerError::InvalidConfig("scripted failure".into()));
        }
        Ok(self.y)
    }

    fn update(
        &mut self,
        _fb: &Feedback,
        _rng: &mut dyn RngCore,
    ) -> Result<StepReport, LearnerError> {
        Ok(StepReport::default())
    }
}

fn target(d: usize) -> Target {
    let mut v = vec![0.0; d];
    v[0] = 0.3;
    if d > 1 {
        v[1] = -0.45;
    }
    Target::linear(Vector::new(v)).unwrap()
}

#[test]
fn zero_rounds() {
    let mut l = SteinerSymmetric::new(2, SteinerConfig::default()).unwrap();
    let mut a = RandomUnit::new(target(2)).unwrap();
    let tr = run_episode(
        &mut l,
        &mut a,
        &LossFunction::Symmetric,
        &EpisodeConfig::new(0, 1),
    )
    .unwrap();
    assert!(tr.records.is_empty());
    assert_eq!(tr.total_loss(), 0.0);
    assert!(tr.error.is_none());
}

#[test]
fn midpoint_along_fixed_direction() {
    let mut l = midpoint_baseline(2).unwrap();
    let mut a = FixedSequence::new(vec![Context::Vector(Vector::basis(2, 0))], target(2)).unwrap();
    let tr = run_episode(
        &mut l,
        &mut a,
        &LossFunction::Symmetric,
        &EpisodeConfig::new(60, 2),
    )
    .unwrap();
    assert!(tr.error.is_none());
    // Each loss is at most half the current width 2·2^{−k}, until the width
    // reaches the resolution floor.
    assert!(tr.total_loss() <= 2.0 + 2.0, "{}", tr.total_loss());
    for (k, r) in tr.records.iter().enumerate() {
        let bound = 2f64.powi(-(k as i32)).max(RESOLUTION_FLOOR);
        assert!(r.loss <= bound + 1e-9, "round {}: {}", r.t, r.loss);
    }
}

#[test]
fn cumulative_loss_is_the_prefix_sum() {
    let mut l = SteinerSymmetric::new(3, SteinerConfig::with_samples(2000)).unwrap();
    let mut a = RandomUnit::new(target(3)).unwrap();
    let tr = run_episode(
        &mut l,
        &mut a,
        &LossFunction::Symmetric,
        &EpisodeConfig::new(80, 3),
    )
    .unwrap();
    let mut acc = 0.0;
    let mut last = 0.0;
    for r in &tr.records {
        assert!(r.loss >= 0.0);
        acc += r.loss;
        assert_eq!(r.cum_loss, acc);
        assert!(r.cum_loss >= last);
        last = r.cum_loss;
        assert_eq!(r.sigma_sent == steiner_core::Sign::Plus, r.y >= r.u);
    }
    let consistency: Vec<_> = tr
        .checks()
        .filter(|c| c.lemma == Lemma::Consistency)
        .collect();
    assert_eq!(consistency.len(), 80);
    assert_eq!(tr.hard_violations(), 0);
}

#[test]
fn identical_seeds_give_identical_csv() {
    let csv = |seed| {
        let mut l = SteinerSymmetric::new(2, SteinerConfig::with_samples(2000)).unwrap();
        let mut a = RandomUnit::new(target(2)).unwrap();
        let cfg = EpisodeConfig::new(40, seed).with_noise(0.0);
        let tr = run_episode(&mut l, &mut a, &LossFunction::Symmetric, &cfg).unwrap();
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        (out, serde_json::to_string(&tr.summary()).unwrap())
    };
    let (a, sa) = csv(5);
    assert_eq!((a.clone(), sa.clone()), csv(5));
    assert_ne!(a, csv(6).0);
    let header = String::from_utf8(a).unwrap();
    assert_eq!(header.lines().next().unwrap(), CSV_COLUMNS.join(","));
}

#[test]
fn failure_keeps_partial_trace() {
    let mut l = Constant {
        y: 0.0,
        fail_at: Some(4),
        t: 0,
    };
    let mut a = CyclingBasis::new(target(3)).unwrap();
    let tr = run_episode(
        &mut l,
        &mut a,
        &LossFunction::Symmetric,
        &EpisodeConfig::new(10, 0),
    )
    .unwrap();
    assert_eq!(tr.records.len(), 3);
    assert!(tr.error.as_deref().unwrap().contains("round 4"));
    assert!(tr.summary().error.is_some());
}

#[test]
fn channel_rate_over_a_run() {
    let mut l = Constant {
        y: 0.0,
        fail_at: None,
        t: 0,
    };
    let mut a = RandomUnit::new(target(2)).unwrap();
    let p = 0.25;
    let n = 20_000;
    let cfg = EpisodeConfig::new(n, 8).with_noise(p);
    let tr = run_episode(&mut l, &mut a, &LossFunction::Symmetric, &cfg).unwrap();
    let flipped = tr
        .records
        .iter()
        .filter(|r| r.sigma_sent != r.sigma_recv)
        .count();
    assert_eq!(flipped as u64, tr.flips);
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((flipped as f64 / n as f64 - p).abs() <= 3.0 * sigma);
}
