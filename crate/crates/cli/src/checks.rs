//! Invariant batteries behind `--check`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use steiner_core::environment::{run_episode, EpisodeConfig, LossFunction, RandomUnit, Target};
use steiner_core::geometry::{
    dot, estimate_volume_with, median_cut, unit_ball_volume, ConvexBody, EnvelopePolicy,
    InflatedCloud, Vector, VolumeOptions,
};
use steiner_core::hypothesis::{Context, FiniteTable, Hypothesis, HypothesisClass};
use steiner_core::learners::{
    sameside_identity, weight_increase_identity, Feedback, Learner, Lemma, SingleScaleGeneral,
    SteinerConfig, SteinerSymmetric, WeightField,
};
use steiner_core::rng::{stream, ADVERSARY_STREAM, FIXTURE_STREAM, LEARNER_STREAM};
use steiner_core::treedim::{
    all_functions, cdim_estimate, indicators, separation_fixture, tree_dimension, Cbs, FiniteClass,
    TreeSolver, DEFAULT_EPS_GRID,
};
use steiner_core::{environment, Sign};

pub const SUITES: [&str; 5] = ["geometry", "lemmas", "noisy_identities", "treedim", "all"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckLine {
    fn new(suite: &str, name: impl Into<String>, measured: f64, bound: f64, pass: bool) -> Self {
        CheckLine {
            suite: suite.to_owned(),
            name: name.into(),
            measured,
            bound,
            pass,
        }
    }

    fn at_most(suite: &str, name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(suite, name, measured, bound, measured <= bound)
    }

    fn at_least(suite: &str, name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(suite, name, measured, bound, measured >= bound)
    }

    fn failed(suite: &str, name: impl Into<String>, err: impl fmt::Display) -> Self {
        Self::new(
            suite,
            format!("{}: {err}", name.into()),
            f64::NAN,
            f64::NAN,
            false,
        )
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{} measured={:.6e} bound={:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.bound
        )
    }
}

/// Runs a named suite; `None` for an unknown name.
pub fn run_suite(name: &str) -> Option<Vec<CheckLine>> {
    Some(match name {
        "geometry" => geometry(),
        "lemmas" => lemmas(),
        "noisy_identities" => noisy_identities(100, 7),
        "treedim" => treedim(),
        "all" => {
            let mut v = geometry();
            v.extend(lemmas());
            v.extend(noisy_identities(100, 7));
            v.extend(treedim());
            v
        }
        _ => return None,
    })
}

const GEO: &str = "geometry";

/// `(1+z)^d κ_d` against the estimate for the unit ball, within three
/// relative standard errors. Proposals come from the bounding cube, since
/// the inflated ball is its own ball envelope.
pub fn steiner_identity(d: usize, z: f64, samples: usize, seed: u64) -> CheckLine {
    let name = format!("steiner_identity d={d} z={z}");
    let truth = (1.0 + z).powi(d as i32) * unit_ball_volume(d);
    let opts = VolumeOptions {
        envelope: EnvelopePolicy::BoundingBox,
        ..VolumeOptions::with_samples(samples)
    };
    match estimate_volume_with(
        &ConvexBody::unit_ball(d),
        z,
        None,
        &opts,
        &mut stream(seed, 0),
    ) {
        Ok(e) => {
            let gap = (e.value - truth).abs() / truth;
            CheckLine::at_most(GEO, name, gap, 3.0 * e.rel_std_err)
        }
        Err(e) => CheckLine::failed(GEO, name, e),
    }
}

fn random_body(d: usize, cuts: usize, rng: &mut dyn RngCore) -> ConvexBody {
    let mut body = ConvexBody::unit_ball(d);
    for _ in 0..cuts {
        let x = Vector::random_unit(d, rng);
        let y = rng.random_range(0.0..0.6);
        body = body
            .add_cut(&x, y, Sign::Plus)
            .expect("cut keeps the origin");
    }
    body
}

/// Worst `⟨q − Πq, w − Πq⟩` over random bodies, queries and members.
pub fn projection_optimality(trials: usize, seed: u64) -> CheckLine {
    let mut rng = stream(seed, 1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let d = rng.random_range(2..=4);
        let cuts = rng.random_range(0..5);
        let body = random_body(d, cuts, &mut rng);
        let q: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = Vector::random_in_ball(d, 1.0, &mut rng).into_inner();
        let (Ok(p), Ok(w)) = (body.project(&q), body.project(&w)) else {
            return CheckLine::failed(GEO, "projection_optimality", "projection failed");
        };
        let gap: Vec<f64> = q.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
        let dir: Vec<f64> = w.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
        worst = worst.max(dot(&gap, &dir));
    }
    CheckLine::at_most(GEO, "projection_optimality", worst, 1e-6)
}

/// Paired check that a cut never adds inflated volume: every sample point
/// of `S' + zB` must also lie in `S + zB`.
pub fn cut_monotonicity(trials: usize, seed: u64) -> CheckLine {
    let mut rng = stream(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = rng.random_range(2..=3);
        let body = random_body(d, 2, &mut rng);
        let x = Vector::random_unit(d, &mut rng);
        let cut = match body.add_cut(&x, rng.random_range(0.0..0.3), Sign::Plus) {
            Ok(c) => c,
            Err(e) => return CheckLine::failed(GEO, "cut_monotonicity", e),
        };
        let z = 0.1;
        let opts = VolumeOptions::with_samples(4000);
        let cloud = match InflatedCloud::draw(&cut, z, &opts, &mut rng) {
            Ok(c) => c,
            Err(e) => return CheckLine::failed(GEO, "cut_monotonicity", e),
        };
        let inside = cloud.count_inflated_in(&body).unwrap_or(0);
        worst = worst.max((cloud.hit_count() - inside) as f64);
    }
    CheckLine::at_most(GEO, "cut_monotonicity escaped_points", worst, 0.0)
}

/// Re-estimates the fraction below a median cut with a fresh sample.
pub fn median_consistency(trials: usize, seed: u64) -> CheckLine {
    let mut rng = stream(seed, 3);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = rng.random_range(2..=3);
        let body = random_body(d, 2, &mut rng);
        let x = Vector::random_unit(d, &mut rng);
        let z = 0.2;
        let cut = match median_cut(&body, z, &x, 0.5, 20_000, &mut rng) {
            Ok(c) => c,
            Err(e) => return CheckLine::failed(GEO, "median_consistency", e),
        };
        let fresh =
            match InflatedCloud::draw(&body, z, &VolumeOptions::with_samples(20_000), &mut rng) {
                Ok(c) => c,
                Err(e) => return CheckLine::failed(GEO, "median_consistency", e),
            };
        worst = worst.max((fresh.fraction_below(&x, cut.y) - 0.5).abs());
    }
    CheckLine::at_most(GEO, "median_consistency", worst, 0.05)
}

pub fn geometry() -> Vec<CheckLine> {
    let mut out = Vec::new();
    for d in [2, 3] {
        for z in [0.1, 0.5, 1.0] {
            out.push(steiner_identity(
                d,
                z,
                200_000,
                11 + (10.0 * z) as u64 + d as u64,
            ));
        }
    }
    out.push(projection_optimality(200, 12));
    out.push(cut_monotonicity(20, 13));
    out.push(median_consistency(20, 14));
    out
}

const LEM: &str = "lemmas";

/// Fraction of instrumented rounds of the symmetric learner whose inflated
/// volume ratio stays within the bound.
pub fn volume_drop_rate(dims: &[usize], seeds: u64, horizon: usize) -> (CheckLine, CheckLine) {
    let mut held = 0usize;
    let mut total = 0usize;
    let mut hard = 0usize;
    for &d in dims {
        for seed in 0..seeds {
            let mut learner = match SteinerSymmetric::new(d, SteinerConfig::default()) {
                Ok(l) => l,
                Err(e) => {
                    return (
                        CheckLine::failed(LEM, "volume_drop", &e),
                        CheckLine::failed(LEM, "consistency", e),
                    )
                }
            };
            let target = Target::random(
                HypothesisClass::Linear { dim: d },
                &mut stream(seed, FIXTURE_STREAM),
            );
            let mut adv = RandomUnit::new(target).expect("linear target");
            let trace = match run_episode(
                &mut learner,
                &mut adv,
                &LossFunction::Symmetric,
                &EpisodeConfig::new(horizon, seed),
            ) {
                Ok(t) => t,
                Err(e) => {
                    return (
                        CheckLine::failed(LEM, "volume_drop", &e),
                        CheckLine::failed(LEM, "consistency", e),
                    )
                }
            };
            if let Some(e) = &trace.error {
                return (
                    CheckLine::failed(LEM, "volume_drop", e),
                    CheckLine::failed(LEM, "consistency", e),
                );
            }
            for c in trace.checks().filter(|c| c.lemma == Lemma::VolumeDrop) {
                total += 1;
                held += usize::from(c.holds);
            }
            hard += trace.hard_violations();
        }
    }
    let rate = if total == 0 {
        1.0
    } else {
        held as f64 / total as f64
    };
    (
        CheckLine::at_least(
            LEM,
            format!("volume_drop rate over {total} rounds"),
            rate,
            0.99,
        ),
        CheckLine::at_most(LEM, "hard violations (consistency)", hard as f64, 0.0),
    )
}

/// Single-scale rounds forced to have the median more than `2/T` from the
/// truth; the fraction of them that halve the survivors.
pub fn halving_frequency(trials: usize, members: usize, seed: u64) -> CheckLine {
    let horizon = 100;
    let contexts = 8;
    let mut rng = stream(seed, FIXTURE_STREAM);
    let mut lrng = stream(seed, LEARNER_STREAM);
    let mut halved = 0usize;
    let mut done = 0usize;
    while done < trials {
        let values: Vec<Vec<f64>> = (0..members)
            .map(|_| (0..contexts).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let table = FiniteTable::from_rows(values.clone()).expect("finite values");
        let class = HypothesisClass::finite(table);
        let mut learner = match SingleScaleGeneral::new(&class, horizon) {
            Ok(l) => l,
            Err(e) => return CheckLine::failed(LEM, "halving", e),
        };
        let x = rng.random_range(0..contexts);
        let y = match learner.guess(&Context::Index(x), &mut lrng) {
            Ok(y) => y,
            Err(e) => return CheckLine::failed(LEM, "halving", e),
        };
        let mut col: Vec<f64> = values.iter().map(|r| r[x]).collect();
        col.sort_by(f64::total_cmp);
        let m = col[(members + 1) / 2 - 1];
        let far: Vec<usize> = (0..members)
            .filter(|&h| (values[h][x] - m).abs() > 2.0 / horizon as f64)
            .collect();
        let f0 = far[rng.random_range(0..far.len())];
        let u = values[f0][x];
        let fb = Feedback::audited(environment::true_feedback(y, u), u);
        let report = match learner.update(&fb, &mut lrng) {
            Ok(r) => r,
            Err(e) => return CheckLine::failed(LEM, "halving", e),
        };
        if let Some(c) = report
            .checks
            .iter()
            .find(|c| c.lemma == Lemma::HalfHypothesis)
        {
            halved += usize::from(c.holds);
            done += 1;
        }
    }
    let n = trials as f64;
    let rate = halved as f64 / n;
    let sigma = (0.25 / n).sqrt();
    CheckLine::at_least(
        LEM,
        format!("halving frequency over {trials} trials"),
        rate,
        0.5 - 3.0 * sigma,
    )
}

pub fn lemmas() -> Vec<CheckLine> {
    let (drop, hard) = volume_drop_rate(&[2], 3, 150);
    vec![
        drop,
        hard,
        target_membership(3, 60, 5),
        halving_frequency(300, 64, 21),
    ]
}

const NOISY: &str = "noisy_identities";

struct Instance {
    w: WeightField,
    values: Vec<f64>,
    y: f64,
    u: f64,
    same_side: usize,
}

fn random_instance(rng: &mut dyn RngCore) -> Instance {
    loop {
        let n = rng.random_range(2..=8);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w = WeightField::from_weights(&raw.iter().map(|r| r / total).collect::<Vec<_>>())
            .expect("positive weights");
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = rng.random_range(-1.0..1.0);
        let u = rng.random_range(-1.0..1.0);
        let s = environment::true_feedback(y, u).value();
        let same: Vec<usize> = (0..n).filter(|&i| s * (y - values[i]) >= 0.0).collect();
        if same.is_empty() {
            continue;
        }
        let same_side = same[rng.random_range(0..same.len())];
        return Instance {
            w,
            values,
            y,
            u,
            same_side,
        };
    }
}

/// Both exact expectations against two-branch enumeration on random
/// instances, and the stated inequality for the second.
pub fn noisy_identities(instances: usize, seed: u64) -> Vec<CheckLine> {
    let mut rng = stream(seed, FIXTURE_STREAM);
    let (mut gap1, mut gap2, mut excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..instances {
        let a = random_instance(&mut rng);
        let p = rng.random_range(0.0..0.45);
        let pp = rng.random_range(p + 0.01..0.5);
        let c = weight_increase_identity(&a.w, &a.values, a.same_side, a.y, a.u, p, pp);
        gap1 = gap1.max(c.gap() * a.w.weight(a.same_side));
        let eta = rng.random_range(0.01..=0.25);
        let c = sameside_identity(&a.w, &a.values, a.same_side, a.y, a.u, 1.0 / 3.0, eta);
        gap2 = gap2.max(c.gap() * a.w.weight(a.same_side));
        excess = excess.max(c.enumerated - c.bound.expect("bounded identity"));
    }
    vec![
        CheckLine::at_most(NOISY, "weight_increase identity (relative)", gap1, 1e-10),
        CheckLine::at_most(NOISY, "sameside identity (relative)", gap2, 1e-10),
        CheckLine::at_most(NOISY, "sameside bound excess", excess, 1e-12),
    ]
}

const TREE: &str = "treedim";

/// Finite classes with at most three contexts used by the tree checks.
pub fn tree_fixtures() -> Vec<(String, FiniteClass)> {
    vec![
        ("all f:[2]->{0,1}".into(), all_functions(2, &[0.0, 1.0])),
        ("all f:[3]->{0,1}".into(), all_functions(3, &[0.0, 1.0])),
        (
            "all f:[2]->{0,1/4,1}".into(),
            all_functions(2, &[0.0, 0.25, 1.0]),
        ),
        ("indicators n=3".into(), indicators(3)),
        (
            "separation n=3".into(),
            separation_fixture(3, &mut stream(1, FIXTURE_STREAM)),
        ),
    ]
}

fn sequences(contexts: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..contexts).map(move |x| {
                    let mut t = s.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

/// Largest `loss − τ` of CBS over every target and context sequence up to
/// length `max_len`.
pub fn cbs_exhaustive(name: &str, class: &Arc<FiniteClass>, max_len: usize) -> CheckLine {
    let label = format!("cbs loss - tau on {name}");
    let mut solver = TreeSolver::new(class.clone());
    let tau = match solver.tau(&class.everyone()) {
        Ok(t) => t,
        Err(e) => return CheckLine::failed(TREE, label, e),
    };
    let mut worst = f64::NEG_INFINITY;
    for len in 1..=max_len {
        for seq in sequences(class.context_count(), len) {
            for f0 in 0..class.len() {
                let mut cbs = Cbs::with_solver(solver.clone());
                let mut total = 0.0;
                for &x in &seq {
                    let choice = match cbs.choose(x) {
                        Ok(c) => c,
                        Err(e) => return CheckLine::failed(TREE, label, e),
                    };
                    let u = class.at(f0, x);
                    total += class.loss(choice.y, u);
                    match cbs.observe(u) {
                        Ok(c) if c.holds => {}
                        Ok(_) => return CheckLine::failed(TREE, label, "potential did not drop"),
                        Err(e) => return CheckLine::failed(TREE, label, e),
                    }
                }
                worst = worst.max(total - tau);
            }
        }
    }
    CheckLine::at_most(TREE, label, worst, 1e-9)
}

pub fn treedim() -> Vec<CheckLine> {
    let mut out = Vec::new();
    let square = Arc::new(all_functions(2, &[0.0, 1.0]));
    match tree_dimension(&square) {
        Ok((tau, _)) => out.push(CheckLine::new(
            TREE,
            "tau(all f:[2]->{0,1})",
            tau,
            2.0,
            tau == 2.0,
        )),
        Err(e) => out.push(CheckLine::failed(TREE, "tau(all f:[2]->{0,1})", e)),
    }
    for (name, class) in tree_fixtures() {
        let class = Arc::new(class);
        match tree_dimension(&class) {
            Ok((tau, tree)) => {
                let valid = tree.validate(&class).is_ok() && (tree.cost - tau).abs() < 1e-12;
                out.push(CheckLine::new(
                    TREE,
                    format!("witness tree on {name}"),
                    tree.cost,
                    tau,
                    valid,
                ));
                let cdim = cdim_estimate(&class, &DEFAULT_EPS_GRID);
                out.push(CheckLine::at_most(
                    TREE,
                    format!("tau vs 6 cdim on {name}"),
                    tau,
                    6.0 * cdim,
                ));
            }
            Err(e) => out.push(CheckLine::failed(TREE, name.clone(), e)),
        }
        out.push(cbs_exhaustive(&name, &class, 4));
    }
    for n in 2..=4 {
        let class = Arc::new(separation_fixture(n, &mut stream(n as u64, FIXTURE_STREAM)));
        match tree_dimension(&class) {
            Ok((tau, _)) => out.push(CheckLine::at_most(
                TREE,
                format!("tau(separation n={n})"),
                tau,
                1.0 + 2.0 / n as f64,
            )),
            Err(e) => out.push(CheckLine::failed(TREE, format!("separation n={n}"), e)),
        }
    }
    out
}

/// Consistency of the target with every learner that can report it, over a
/// short noiseless random run.
pub fn target_membership(d: usize, horizon: usize, seed: u64) -> CheckLine {
    let target = Target::new(
        HypothesisClass::Linear { dim: d },
        Hypothesis::Linear(Vector::random_in_ball(
            d,
            1.0,
            &mut stream(seed, ADVERSARY_STREAM),
        )),
    )
    .expect("ball member");
    let mut adv = RandomUnit::new(target).expect("linear target");
    let mut learner = SteinerSymmetric::new(d, SteinerConfig::default()).expect("valid dimension");
    match run_episode(
        &mut learner,
        &mut adv,
        &LossFunction::Symmetric,
        &EpisodeConfig::new(horizon, seed),
    ) {
        Ok(t) => CheckLine::at_most(
            LEM,
            "target stays consistent",
            t.hard_violations() as f64,
            0.0,
        ),
        Err(e) => CheckLine::failed(LEM, "target stays consistent", e),
    }
}
