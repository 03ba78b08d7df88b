use steiner_core::geometry::{ConvexBody, Vector};
use steiner_core::hypothesis::{Context, FiniteTable, Hypothesis, HypothesisClass, HypothesisNet};
use steiner_core::learners::{
    exact_median_baseline, midpoint_baseline, Baseline, BaselineRule, Feedback, Flag, Learner,
    MultiScaleGeneral, Perturbation, SingleScaleGeneral, SteinerConfig, SteinerPricing,
    SteinerSymmetric, PRICE_GUARD,
};
use steiner_core::rng::stream;
use steiner_core::Sign;

fn e(d: usize, i: usize) -> Context {
    Context::Vector(Vector::basis(d, i))
}

fn slab(d: usize, lo: f64, hi: f64) -> ConvexBody {
    let x = Vector::basis(d, 0);
    ConvexBody::unit_ball(d)
        .add_cut(&x, hi, Sign::Plus)
        .unwrap()
        .add_cut(&x, lo, Sign::Minus)
        .unwrap()
}

#[test]
fn symmetric_first_guess_is_centered() {
    let mut l = SteinerSymmetric::new(2, SteinerConfig::with_samples(20_000)).unwrap();
    let mut rng = stream(1, 0);
    let y = l.guess(&e(2, 0), &mut rng).unwrap();
    assert!(y.abs() <= 0.02, "y = {y}");
    let r = l.update(&Feedback::binary(Sign::Plus), &mut rng).unwrap();
    let s = r.scale.unwrap();
    assert_eq!(s.i, -1);
    assert!((s.z - 0.125).abs() < 1e-15);
    assert!(!l.contains(&[0.5, 0.0]));
    assert!(l.contains(&[-0.5, 0.0]));
}

#[test]
fn baselines_center_on_the_ball() {
    let mut rng = stream(2, 0);
    let mut m = midpoint_baseline(2).unwrap();
    assert!(m.guess(&e(2, 0), &mut rng).unwrap().abs() <= 0.02);
    let mut x = exact_median_baseline(2, SteinerConfig::with_samples(20_000)).unwrap();
    assert!(x.guess(&e(2, 0), &mut rng).unwrap().abs() <= 0.02);
}

#[test]
fn midpoint_on_slab_and_halving() {
    let mut rng = stream(3, 0);
    let mut m = Baseline::from_body(
        slab(2, 0.2, 0.6),
        BaselineRule::Midpoint,
        SteinerConfig::default(),
    );
    let y = m.guess(&e(2, 0), &mut rng).unwrap();
    assert!((y - 0.4).abs() < 1e-6, "y = {y}");
    m.update(&Feedback::binary(Sign::Plus), &mut rng).unwrap();
    let w = m.body().width(&[1.0, 0.0]).unwrap();
    assert!((w - 0.2).abs() < 1e-6, "w = {w}");
    let y = m.guess(&e(2, 0), &mut rng).unwrap();
    assert!((y - 0.3).abs() < 1e-6);
    m.update(&Feedback::binary(Sign::Minus), &mut rng).unwrap();
    assert!((m.body().width(&[1.0, 0.0]).unwrap() - 0.1).abs() < 1e-6);
}

#[test]
fn pricing_min_rule_on_thin_slab() {
    let t = 100;
    let body = slab(2, 0.4, 0.4 + 0.5 / t as f64);
    let mut l = SteinerPricing::from_body(body, t, SteinerConfig::default()).unwrap();
    let mut rng = stream(4, 0);
    let y = l.guess(&e(2, 0), &mut rng).unwrap();
    assert!((y - 0.4).abs() < 1e-6);
    assert!(y <= 0.4 - 0.5 * PRICE_GUARD);
    let r = l.update(&Feedback::binary(Sign::Minus), &mut rng).unwrap();
    assert!(r.flags.contains(&Flag::MinPriceRule));
}

#[test]
fn pricing_clamped_first_round() {
    let mut l = SteinerPricing::new(2, 1000, SteinerConfig::with_samples(8000)).unwrap();
    let mut rng = stream(5, 0);
    let y = l.guess(&e(2, 0), &mut rng).unwrap();
    // Below the 2^{-1/2} quantile of the inflated disk, minus z₀ = 1/256.
    assert!(y < 0.4 && y > -0.2, "y = {y}");
    let r = l.update(&Feedback::binary(Sign::Minus), &mut rng).unwrap();
    assert_eq!(r.scale.unwrap().i, 0);
}

#[test]
fn perturbation_interval_and_replay() {
    let p = Perturbation { horizon: 100 };
    assert!((p.radius() - (1.0 + 1e-8)).abs() < 1e-18);
    let mut rng = stream(6, 0);
    let mut total = 0.0;
    for _ in 0..1000 {
        let (y, d) = p.apply(0.5, &mut rng);
        assert!((0.4999..=0.5).contains(&y));
        assert!((y - (0.5 - d)).abs() < 1e-15);
        total += d;
    }
    assert!(total <= 1000.0 * 1e-4);
    let draw = |seed| {
        let mut r = stream(seed, 0);
        (0..10).map(|_| p.apply(0.5, &mut r).0).collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));
}

#[test]
fn steiner_runs_replay_identically() {
    let run = || {
        let mut cfg = SteinerConfig::with_samples(2000);
        cfg.perturbation = Some(Perturbation { horizon: 50 });
        let mut l = SteinerSymmetric::new(3, cfg).unwrap();
        let mut rng = stream(7, 3);
        let mut ctx = stream(7, 1);
        let v0 = Vector::new(vec![0.3, -0.2, 0.5]);
        let mut out = Vec::new();
        for _ in 0..15 {
            let x = Vector::random_unit(3, &mut ctx);
            let u = v0.dot(&x);
            let y = l.guess(&Context::Vector(x), &mut rng).unwrap();
            let s = if y >= u { Sign::Plus } else { Sign::Minus };
            l.update(&Feedback::audited(s, u), &mut rng).unwrap();
            out.push(y.to_bits());
        }
        assert!(l.contains(&v0));
        out
    };
    assert_eq!(run(), run());
}

fn three_values() -> HypothesisNet {
    let table = FiniteTable::from_rows(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
    HypothesisNet::build(&HypothesisClass::finite(table), 0.1).unwrap()
}

#[test]
fn single_scale_guess_is_median_plus_minus_two_over_t() {
    let mut seen = [0usize; 2];
    for seed in 0..400 {
        let mut l = SingleScaleGeneral::from_net(three_values(), 10);
        let mut rng = stream(seed, 0);
        let y = l.guess(&Context::Index(0), &mut rng).unwrap();
        if (y - 0.3).abs() < 1e-12 {
            seen[0] += 1;
        } else {
            assert!((y - 0.7).abs() < 1e-12, "y = {y}");
            seen[1] += 1;
        }
    }
    // Binomial(400, 1/2): σ = 10.
    assert!(seen[0].abs_diff(200) <= 40, "{seen:?}");
}

#[test]
fn single_scale_single_survivor_stays_close() {
    let mut l = SingleScaleGeneral::from_net(three_values(), 10);
    let mut rng = stream(11, 0);
    let u = 1.0;
    let truth = Hypothesis::Row(2);
    for _ in 0..20 {
        let y = l.guess(&Context::Index(0), &mut rng).unwrap();
        let s = if y >= u { Sign::Plus } else { Sign::Minus };
        l.update(&Feedback::audited(s, u), &mut rng).unwrap();
        assert_eq!(l.admits(&truth), Some(true));
    }
    let y = l.guess(&Context::Index(0), &mut rng).unwrap();
    assert_eq!(l.net().alive_count(), 1);
    assert!((y - u).abs() <= 0.2 + 1e-12);
}

#[test]
fn multi_scale_single_hypothesis() {
    let table = FiniteTable::from_rows(vec![vec![0.25, 0.75]]).unwrap();
    let mut l = MultiScaleGeneral::new(HypothesisClass::finite(table)).unwrap();
    let mut rng = stream(12, 0);
    for t in 0..10 {
        let x = Context::Index(t % 2);
        let u = [0.25, 0.75][t % 2];
        let y = l.guess(&x, &mut rng).unwrap();
        assert_eq!(y, u);
        let r = l
            .update(&Feedback::audited(Sign::Plus, u), &mut rng)
            .unwrap();
        assert!(r.flags.contains(&Flag::CommonValue));
    }
}

#[test]
fn multi_scale_losses_shrink_on_linear_class() {
    let mut l = MultiScaleGeneral::new(HypothesisClass::Linear { dim: 2 }).unwrap();
    let v0 = Vector::new(vec![0.31, -0.42]);
    let truth = Hypothesis::Linear(v0.clone());
    let mut rng = stream(13, 3);
    let mut ctx = stream(13, 1);
    let mut late = 0.0;
    for t in 0..300 {
        let x = Vector::random_unit(2, &mut ctx);
        let u = v0.dot(&x);
        let y = l.guess(&Context::Vector(x), &mut rng).unwrap();
        let s = if y >= u { Sign::Plus } else { Sign::Minus };
        let r = l.update(&Feedback::audited(s, u), &mut rng).unwrap();
        assert!(r.guess_is_finite(y));
        if t >= 200 {
            late += (y - u).abs();
        }
    }
    assert_eq!(l.admits(&truth), Some(true));
    assert!(late < 1.0, "late loss {late}");
}

trait FiniteGuess {
    fn guess_is_finite(&self, y: f64) -> bool;
}

impl FiniteGuess for steiner_core::learners::StepReport {
    fn guess_is_finite(&self, y: f64) -> bool {
        y.is_finite() && self.checks.iter().all(|c| c.measured.is_finite())
    }
}
