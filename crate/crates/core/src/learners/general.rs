//! Learners over a general hypothesis class, driven by margin-filtered nets.

use rand::{Rng, RngCore};

use super::scale::general_scale;
use super::{
    Feedback, Flag, Learner, LearnerError, Lemma, LemmaCheck, Result, ScaleIndex, StepReport,
};
use crate::hypothesis::{
    Context, Hypothesis, HypothesisClass, HypothesisError, HypothesisNet, LadderRule, NetFamily,
    DEFAULT_NET_CAP,
};
use crate::Sign;

/// `r = SMALL_LOSS_RATIO · z_i` is the coarse net watched on close rounds.
pub const SMALL_LOSS_RATIO: f64 = 4.0;

fn coin(rng: &mut dyn RngCore) -> Sign {
    if rng.random::<bool>() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// The member nearest `h` is within the net's covering radius of it, hence
/// within the filtering margin of every observation, so it must be alive.
fn net_admits(net: &HypothesisNet, h: &Hypothesis) -> Option<bool> {
    net.nearest(h).map(|(i, _)| net.is_alive(i))
}

#[derive(Clone, Debug)]
struct Pending {
    x: Context,
    y: f64,
    median: f64,
    scale: Option<ScaleIndex>,
    report: StepReport,
}

/// Single-scale Steiner potential: the net `N_{1/T}` filtered at margin `1/T`,
/// guessing `m ± 2/T` around the median of the survivors.
#[derive(Clone, Debug)]
pub struct SingleScaleGeneral {
    net: HypothesisNet,
    horizon: usize,
    last_median: f64,
    pending: Option<Pending>,
}

impl SingleScaleGeneral {
    pub fn new(class: &HypothesisClass, horizon: usize) -> Result<Self> {
        Self::with_cap(class, horizon, DEFAULT_NET_CAP)
    }

    pub fn with_cap(class: &HypothesisClass, horizon: usize, cap: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(LearnerError::InvalidConfig("horizon must be ≥ 1".into()));
        }
        let net = HypothesisNet::build_with_cap(class, 1.0 / horizon as f64, cap)?;
        Ok(Self::from_net(net, horizon))
    }

    /// Runs on a prebuilt net; the margin is still `1/T`.
    pub fn from_net(net: HypothesisNet, horizon: usize) -> Self {
        SingleScaleGeneral {
            net,
            horizon,
            last_median: 0.0,
            pending: None,
        }
    }

    pub fn net(&self) -> &HypothesisNet {
        &self.net
    }

    fn step(&self) -> f64 {
        1.0 / self.horizon as f64
    }
}

impl Learner for SingleScaleGeneral {
    fn name(&self) -> &'static str {
        "single_scale_general"
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        let mut report = StepReport::default();
        let m = match self.net.set_median(x, None) {
            Ok(m) => m,
            Err(HypothesisError::EmptyNet) => {
                report.flags.push(Flag::EmptyNetFallback);
                self.last_median
            }
            Err(e) => return Err(e.into()),
        };
        self.last_median = m;
        let c = coin(rng);
        report.coin = Some(c);
        let y = m + c.value() * 2.0 * self.step();
        self.pending = Some(Pending {
            x: x.clone(),
            y,
            median: m,
            scale: None,
            report,
        });
        Ok(y)
    }

    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        net_admits(&self.net, h)
    }

    fn update(&mut self, fb: &Feedback, _rng: &mut dyn RngCore) -> Result<StepReport> {
        let p = self.pending.take().ok_or(LearnerError::NoPendingGuess)?;
        let mut report = p.report;
        report.median = Some(p.median);
        let before = self.net.alive_count();
        self.net.filter(&p.x, p.y, fb.sigma, self.step())?;
        let after = self.net.alive_count();
        report.potential = Some(after as f64);
        if let Some(u) = fb.audit {
            if (p.median - u).abs() > 2.0 * self.step() {
                report.checks.push(LemmaCheck::event(
                    Lemma::HalfHypothesis,
                    0,
                    2 * after <= before,
                ));
            }
        }
        Ok(report)
    }
}

/// General multi-scale Steiner potential.
///
/// Nets at the dyadic scales `2^{−1}, 2^{−2}, …` are filtered at their own
/// margins; the scale used in a round is bucketed from the width of the
/// finest net along the context, and the guess is `m ± 2z_i` around the
/// median of the net at `z_i`.
#[derive(Clone, Debug)]
pub struct MultiScaleGeneral {
    family: NetFamily,
    ladder: LadderRule,
    last_median: f64,
    pending: Option<Pending>,
}

impl MultiScaleGeneral {
    /// Ladder `z_i = 2^{−(i+3)}`, so the coarse nets `r_i = 2^{−(i+1)}` are
    /// rungs of the same family.
    pub fn new(class: HypothesisClass) -> Result<Self> {
        Self::with_options(class, LadderRule::dyadic(0.25), DEFAULT_NET_CAP)
    }

    pub fn with_options(class: HypothesisClass, ladder: LadderRule, cap: usize) -> Result<Self> {
        ladder.validate()?;
        let coarsest = SMALL_LOSS_RATIO * ladder.scale(0);
        Ok(MultiScaleGeneral {
            family: NetFamily::new(class, coarsest, cap)?,
            ladder,
            last_median: 0.0,
            pending: None,
        })
    }

    pub fn family(&self) -> &NetFamily {
        &self.family
    }

    pub fn ladder(&self) -> &LadderRule {
        &self.ladder
    }

    /// Builds every dyadic rung from the coarsest net down to `scale`.
    fn ensure_chain(&mut self, scale: f64) -> Result<()> {
        let mut s = self.family.coarsest().scale();
        while s > scale * (1.0 + 1e-12) {
            self.family.ensure(s)?;
            s *= 0.5;
        }
        self.family.ensure(scale)?;
        Ok(())
    }

    fn choose_scale(&mut self, x: &Context) -> Result<Option<(ScaleIndex, f64)>> {
        let max_index = self.ladder.len() as i32 - 1;
        loop {
            let finest = match self.family.finest_nonempty() {
                Some(n) => n,
                None => return Ok(None),
            };
            let finest_scale = self.family.finest().scale();
            let w = finest.set_width(x)?;
            if w == 0.0 {
                let v = finest.alive_values(x)?[0];
                return Ok(Some((
                    ScaleIndex {
                        i: max_index,
                        bucket_lo: 0.0,
                        bucket_hi: 0.0,
                        z: 0.0,
                    },
                    v,
                )));
            }
            let ladder = self.ladder;
            let s = general_scale(w, max_index, |i| ladder.scale(i as usize));
            if s.z >= finest_scale * (1.0 - 1e-12) {
                self.ensure_chain(s.z)?;
                return Ok(Some((s, w)));
            }
            self.ensure_chain(s.z)?;
        }
    }
}

impl Learner for MultiScaleGeneral {
    fn name(&self) -> &'static str {
        "multi_scale_general"
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        self.family.class().check_context(x)?;
        let mut report = StepReport::default();
        let chosen = self.choose_scale(x)?;
        let (y, m, scale) = match chosen {
            None => {
                report.flags.push(Flag::EmptyNetFallback);
                (self.last_median, self.last_median, None)
            }
            Some((s, v)) if s.z == 0.0 => {
                report.flags.push(Flag::CommonValue);
                (v, v, Some(s))
            }
            Some((s, w)) => {
                if s.bucket_lo == 0.0 && w <= 10.0 * 2f64.powi(-(s.i + 1)) {
                    report.flags.push(Flag::ScaleClamped);
                }
                let net = self.family.get(s.z).expect("scale ensured");
                let m = match net.set_median(x, None) {
                    Ok(m) => m,
                    Err(HypothesisError::EmptyNet) => {
                        report.flags.push(Flag::EmptyNetFallback);
                        self.last_median
                    }
                    Err(e) => return Err(e.into()),
                };
                let c = coin(rng);
                report.coin = Some(c);
                (m + c.value() * 2.0 * s.z, m, Some(s))
            }
        };
        self.last_median = m;
        report.scale = scale;
        self.pending = Some(Pending {
            x: x.clone(),
            y,
            median: m,
            scale,
            report,
        });
        Ok(y)
    }

    /// Checked on the finest net only.
    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        net_admits(self.family.finest(), h)
    }

    fn update(&mut self, fb: &Feedback, _rng: &mut dyn RngCore) -> Result<StepReport> {
        let p = self.pending.take().ok_or(LearnerError::NoPendingGuess)?;
        let mut report = p.report;
        report.median = Some(p.median);
        let counts = self.family.observe(&p.x, p.y, fb.sigma)?;
        let find = |scale: f64| {
            counts
                .iter()
                .find(|(s, _, _)| (s - scale).abs() <= 1e-12 * scale)
                .map(|&(_, b, a)| (b, a))
        };
        let clamped = report.flags.contains(&Flag::ScaleClamped);
        if let Some(s) = p.scale.filter(|s| s.z > 0.0) {
            if let Some((_, after)) = find(s.z) {
                report.potential = Some(after as f64);
            }
            // Past the end of the ladder the width no longer matches the
            // scale, so neither elimination property applies.
            if let Some(u) = fb.audit.filter(|_| !clamped) {
                if (p.median - u).abs() > 2.0 * s.z {
                    if let Some((b, a)) = find(s.z) {
                        report
                            .checks
                            .push(LemmaCheck::event(Lemma::BigLoss, s.i, 2 * a <= b));
                    }
                } else if let Some((b, a)) = find(SMALL_LOSS_RATIO * s.z) {
                    report
                        .checks
                        .push(LemmaCheck::event(Lemma::SmallLoss, s.i, a < b));
                }
            }
        }
        Ok(report)
    }
}
