use std::sync::Arc;

use proptest::prelude::*;
use steiner_core::environment::{
    pricing_loss, run_episode, Adversary, EpisodeConfig, FixedSequence, LossFunction, Target,
};
use steiner_core::geometry::{dot, ConvexBody, Vector};
use steiner_core::hypothesis::{Context, HypothesisClass, HypothesisNet};
use steiner_core::learners::{midpoint_baseline, WeightField};
use steiner_core::treedim::{FiniteClass, TreeSolver};
use steiner_core::Sign;

fn unit(raw: &[f64]) -> Option<Vec<f64>> {
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    (n > 0.1).then(|| raw.iter().map(|v| v / n).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_satisfies_variational_inequality(
        cuts in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 3), 0.0f64..0.5), 0..4),
        q in prop::collection::vec(-2.0f64..2.0, 3),
        w in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let mut body = ConvexBody::unit_ball(3);
        for (x, y) in &cuts {
            if let Some(x) = unit(x) {
                body = body.add_cut(&x, *y, Sign::Plus).unwrap();
            }
        }
        // Every cut keeps zero, so `w` can be pulled inside.
        let w = body.project(&w).unwrap();
        let p = body.project(&q).unwrap();
        prop_assert!(body.contains(&p, 1e-7));
        let gap: Vec<f64> = q.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
        let dir: Vec<f64> = w.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
        prop_assert!(dot(&gap, &dir) <= 1e-6);
    }

    #[test]
    fn filter_is_monotone_in_margin(
        x in prop::collection::vec(-1.0f64..1.0, 2),
        y in -1.0f64..1.0,
        plus in any::<bool>(),
        m1 in 0.0f64..0.5,
        m2 in 0.0f64..0.5,
    ) {
        let Some(x) = unit(&x) else { return Ok(()) };
        let class = HypothesisClass::Linear { dim: 2 };
        let ctx = Context::Vector(Vector::new(x));
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let (lo, hi) = (m1.min(m2), m1.max(m2));
        let mut tight = HypothesisNet::build(&class, 0.2).unwrap();
        let mut loose = tight.clone();
        tight.filter(&ctx, y, sign, lo).unwrap();
        loose.filter(&ctx, y, sign, hi).unwrap();
        for i in 0..tight.len() {
            prop_assert!(!tight.is_alive(i) || loose.is_alive(i));
        }
        let before = tight.alive_count();
        tight.filter(&ctx, y, sign, lo).unwrap();
        prop_assert_eq!(tight.alive_count(), before);
    }

    #[test]
    fn weights_stay_normalized(
        values in prop::collection::vec(-1.0f64..1.0, 1..40),
        rounds in prop::collection::vec((-1.0f64..1.0, any::<bool>()), 1..30),
    ) {
        let mut w = WeightField::uniform(values.len());
        for (y, plus) in rounds {
            let sign = if plus { Sign::Plus } else { Sign::Minus };
            w.update(&values, y, sign, 1e-3, 1.0);
            prop_assert!((w.total() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn cumulative_loss_is_the_sum_of_round_losses(
        seed in any::<u64>(),
        target in prop::collection::vec(-0.7f64..0.7, 2),
        horizon in 0usize..40,
    ) {
        let mut learner = midpoint_baseline(2).unwrap();
        let contexts = vec![
            Context::Vector(Vector::basis(2, 0)),
            Context::Vector(Vector::basis(2, 1)),
        ];
        let mut adv = FixedSequence::new(contexts, Target::linear(Vector::new(target)).unwrap()).unwrap();
        let trace = run_episode(&mut learner, &mut adv, &LossFunction::Symmetric, &EpisodeConfig::new(horizon, seed)).unwrap();
        let mut sum = 0.0;
        for r in &trace.records {
            sum += r.loss;
            prop_assert_eq!(r.cum_loss, sum);
            prop_assert_eq!(r.loss, (r.y - r.u).abs());
        }
        prop_assert_eq!(trace.total_loss(), sum);
        prop_assert_eq!(adv.target().value(&Context::Vector(Vector::basis(2, 0))).is_ok(), true);
    }

    #[test]
    fn pricing_loss_jumps_above_the_value(u in 0.0f64..1.0, k in 1i32..15) {
        prop_assert_eq!(pricing_loss(u + 10f64.powi(-k), u), u);
    }

    #[test]
    fn tree_dimension_is_monotone(
        rows in prop::collection::vec(prop::collection::vec(0usize..3, 3), 1..10),
        keep in prop::collection::vec(any::<bool>(), 10),
    ) {
        let class = Arc::new(FiniteClass::new(vec![0.0, 0.3, 1.0], rows, None).unwrap());
        let all = class.everyone();
        let sub: Vec<u32> = all.iter().copied().filter(|&h| keep[h as usize]).collect();
        let mut solver = TreeSolver::new(class);
        let full = solver.tau(&all).unwrap();
        if !sub.is_empty() {
            prop_assert!(solver.tau(&sub).unwrap() <= full + 1e-12);
        }
    }
}
