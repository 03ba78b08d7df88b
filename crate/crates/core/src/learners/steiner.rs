//! Learners that keep the consistent set `S_t` explicitly.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::scale::{pricing_fraction, pricing_scale, symmetric_scale, ScaleIndex};
use super::{
    vector_context, Feedback, Flag, Learner, LearnerError, Lemma, LemmaCheck, Result, StepReport,
};
use crate::geometry::{
    BoundingBox, BoxFaces, ConvexBody, EnvelopePolicy, GeometryError, InflatedCloud, Vector,
    VolumeOptions,
};
use crate::hypothesis::{Context, Hypothesis};
use crate::Sign;

/// Widths at or below `RESOLUTION_FLOOR · R` are not searched: the learner
/// guesses the midpoint and keeps the body unchanged.
pub const RESOLUTION_FLOOR: f64 = 1e-6;

/// Amount subtracted from the computed minimum in the pricing min rule, so
/// that support round-off never turns a sure sale into a no-purchase.
pub const PRICE_GUARD: f64 = 1e-9;

/// Post/pre inflated volume allowed on a symmetric round (3/4 plus sampling
/// slack).
pub const LEMMA1_BOUND: f64 = 0.80;

/// Bodies are pruned of redundant cuts once they carry more than this many
/// cuts per dimension.
const PRUNE_PER_DIM: usize = 3;

/// Bounding-box faces re-solved per draw, at least; faces past the budget
/// keep their looser earlier bound.
const BOX_REFRESH: usize = 4;

/// The bounding-box filter runs again once this many cuts per dimension have
/// accumulated since it last ran.
const BOX_FILTER_PER_DIM: usize = 1;

/// Safety perturbation: the body starts at radius `1 + T^{−4}` and each
/// guess is lowered by `δ ~ U[0, T^{−2}]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub horizon: usize,
}

impl Perturbation {
    pub fn radius(&self) -> f64 {
        1.0 + (self.horizon as f64).powi(-4)
    }

    pub fn max_delta(&self) -> f64 {
        (self.horizon as f64).powi(-2)
    }

    pub fn apply(&self, y: f64, rng: &mut dyn RngCore) -> (f64, f64) {
        let delta = rng.random::<f64>() * self.max_delta();
        (y - delta, delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteinerConfig {
    pub volume: VolumeOptions,
    /// Measure post-cut volumes for the per-round drop checks.
    pub instrument: bool,
    pub perturbation: Option<Perturbation>,
    /// Radius of the initial ball before the perturbation margin; `√d`
    /// covers `‖v‖_∞ ≤ 1` for the L∞/L¹ setup.
    pub radius: f64,
}

impl Default for SteinerConfig {
    fn default() -> Self {
        SteinerConfig {
            volume: VolumeOptions {
                samples: 8192,
                min_hits: 2048,
                max_boost: 4,
                ..VolumeOptions::default()
            },
            instrument: true,
            perturbation: None,
            radius: 1.0,
        }
    }
}

impl SteinerConfig {
    pub fn with_samples(samples: usize) -> Self {
        let mut c = SteinerConfig::default();
        c.volume.samples = samples;
        c.volume.min_hits = samples / 4;
        c
    }

    fn initial_body(&self, d: usize) -> Result<ConvexBody> {
        let r = self.perturbation.map_or(1.0, |p| p.radius());
        Ok(ConvexBody::ball(d, self.radius * r)?)
    }
}

/// Round state between `guess` and `update`.
#[derive(Clone, Debug)]
struct Pending {
    x: Vector,
    y: f64,
    cut: bool,
    scale: Option<ScaleIndex>,
    cloud: Option<InflatedCloud>,
    report: StepReport,
}

/// The body, its cut bookkeeping and the shared guess/update plumbing.
#[derive(Clone, Debug)]
struct Core {
    body: ConvexBody,
    cfg: SteinerConfig,
    pending: Option<Pending>,
    /// Cut count right after the last bounding-box filter.
    filtered_at: usize,
    /// Bounding-box faces from the last draw; the body has only shrunk since.
    faces: Option<BoxFaces>,
}

/// What one nominal round asks of the geometry.
enum Plan {
    /// Bisect the inflated cloud at `fraction`, then shift by `offset`.
    Quantile {
        scale: Option<ScaleIndex>,
        z: f64,
        fraction: f64,
        offset: f64,
    },
    Fixed(f64, Option<Flag>),
}

impl Core {
    fn new(d: usize, cfg: SteinerConfig) -> Result<Self> {
        Ok(Self::from_body(cfg.initial_body(d)?, cfg))
    }

    fn from_body(body: ConvexBody, cfg: SteinerConfig) -> Self {
        Core {
            body,
            cfg,
            pending: None,
            filtered_at: 0,
            faces: None,
        }
    }

    fn context(&self, x: &Context) -> Result<Vector> {
        let v = vector_context(x)?;
        if v.dim() != self.body.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.body.dim(),
                got: v.dim(),
            }
            .into());
        }
        Ok(v.clone())
    }

    fn guess(
        &mut self,
        x: &Context,
        rng: &mut dyn RngCore,
        plan: impl FnOnce(f64, f64) -> Plan,
    ) -> Result<f64> {
        let x = self.context(x)?;
        let (lo, hi) = self.body.extent(&x)?;
        let width = (hi - lo).max(0.0);
        let mid = 0.5 * (lo + hi);
        let mut report = StepReport::default();
        let mut cloud = None;
        let mut scale = None;
        let mut cut = true;
        let y = if width <= RESOLUTION_FLOOR * self.body.ball_radius() {
            report.flags.push(Flag::ResolutionFloor);
            cut = false;
            mid
        } else {
            match plan(lo, hi) {
                Plan::Fixed(y, flag) => {
                    report.flags.extend(flag);
                    y
                }
                Plan::Quantile {
                    scale: s,
                    z,
                    fraction,
                    offset,
                } => {
                    scale = s;
                    let drawn = self
                        .envelope_box()
                        .and_then(|b| {
                            InflatedCloud::draw_in_box(
                                &self.body,
                                z,
                                &self.cfg.volume,
                                b.as_ref(),
                                rng,
                            )
                        })
                        .and_then(|c| c.median_cut(&self.body, &x, fraction).map(|m| (c, m)));
                    match drawn {
                        Ok((c, m)) => {
                            if m.stalled {
                                report.flags.push(Flag::MedianStalled);
                            }
                            report.potential = Some(c.estimate().value);
                            report.median = Some(m.y);
                            cloud = Some(c);
                            m.y + offset
                        }
                        Err(GeometryError::DegenerateEstimate { .. })
                        | Err(GeometryError::NonConvergence { .. }) => {
                            report.flags.push(Flag::GeometryFallback);
                            mid
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        };
        let y = match self.cfg.perturbation {
            Some(p) => {
                let (y, delta) = p.apply(y, rng);
                report.perturbation = Some(delta);
                y
            }
            None => y,
        };
        report.scale = scale;
        self.pending = Some(Pending {
            x,
            y,
            cut,
            scale,
            cloud,
            report,
        });
        Ok(y)
    }

    /// Applies the cut and returns the report with the measured post/pre
    /// inflated volume ratio, if any.
    fn update(&mut self, fb: &Feedback) -> Result<(StepReport, Option<f64>, Option<ScaleIndex>)> {
        let p = self.pending.take().ok_or(LearnerError::NoPendingGuess)?;
        let mut report = p.report;
        let mut ratio = None;
        if p.cut {
            let next = self.body.add_cut(&p.x, p.y, fb.sigma)?;
            let next = self.pruned(next)?;
            if self.cfg.instrument {
                if let Some(cloud) = &p.cloud {
                    if cloud.hit_count() > 0 {
                        let kept = cloud.count_inflated_in(&next)?;
                        ratio = Some(kept as f64 / cloud.hit_count() as f64);
                    }
                }
            }
            self.body = next;
        }
        report.scale = p.scale;
        Ok((report, ratio, p.scale))
    }

    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        match h {
            Hypothesis::Linear(v) => Some(self.body.contains(v, 1e-7)),
            _ => None,
        }
    }

    fn envelope_box(&mut self) -> std::result::Result<Option<BoundingBox>, GeometryError> {
        if self.cfg.volume.envelope == EnvelopePolicy::OriginBall {
            return Ok(None);
        }
        let refresh = BOX_REFRESH.max(self.body.dim() / 2);
        let (bbox, faces) = self.body.bounding_box_warm(self.faces.take(), refresh)?;
        self.faces = Some(faces);
        Ok(Some(bbox))
    }

    fn pruned(&mut self, body: ConvexBody) -> Result<ConvexBody> {
        let mut b = body.merged();
        if b.cuts().len() < self.filtered_at + BOX_FILTER_PER_DIM * b.dim() {
            return Ok(b);
        }
        b = b.simplified()?.0;
        if b.cuts().len() > PRUNE_PER_DIM * b.dim() {
            b = drop_redundant(&b)?;
        }
        self.filtered_at = b.cuts().len();
        Ok(b)
    }
}

/// Removes every cut whose constraint is implied by the others.
fn drop_redundant(body: &ConvexBody) -> Result<ConvexBody> {
    let mut current = body.clone();
    let mut j = 0;
    while j < current.cuts().len() {
        let h = current.cuts()[j].clone();
        let mut without = ConvexBody::ball(current.dim(), current.ball_radius())?;
        for (k, c) in current.cuts().iter().enumerate() {
            if k != j {
                without = without.with_halfspace(c.clone())?;
            }
        }
        if without.support(h.normal())?.value <= h.offset() + 1e-12 {
            current = without;
        } else {
            j += 1;
        }
    }
    Ok(current)
}

/// Multiscale Steiner potential for the symmetric loss.
///
/// The inflation radius follows the width of `S_t` along the context; the
/// guess halves the inflated volume.
#[derive(Clone, Debug)]
pub struct SteinerSymmetric {
    core: Core,
}

impl SteinerSymmetric {
    pub fn new(d: usize, cfg: SteinerConfig) -> Result<Self> {
        Ok(SteinerSymmetric {
            core: Core::new(d, cfg)?,
        })
    }

    /// Starts from `body` instead of the configured ball.
    pub fn from_body(body: ConvexBody, cfg: SteinerConfig) -> Self {
        SteinerSymmetric {
            core: Core::from_body(body, cfg),
        }
    }

    pub fn body(&self) -> &ConvexBody {
        &self.core.body
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.core.body.contains(v, 1e-7)
    }
}

impl Learner for SteinerSymmetric {
    fn name(&self) -> &'static str {
        if self.core.cfg.perturbation.is_some() {
            "steiner_symmetric_perturbed"
        } else {
            "steiner_symmetric"
        }
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        let d = self.core.body.dim();
        self.core.guess(x, rng, |lo, hi| {
            let s = symmetric_scale(hi - lo, d);
            Plan::Quantile {
                scale: Some(s),
                z: s.z,
                fraction: 0.5,
                offset: 0.0,
            }
        })
    }

    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        self.core.admits(h)
    }

    fn update(&mut self, fb: &Feedback, _rng: &mut dyn RngCore) -> Result<StepReport> {
        let (mut report, ratio, scale) = self.core.update(fb)?;
        if let (Some(r), Some(s)) = (ratio, scale) {
            report
                .checks
                .push(LemmaCheck::at_most(Lemma::VolumeDrop, s.i, r, LEMMA1_BOUND));
        }
        Ok(report)
    }
}

/// Multiscale Steiner potential for the pricing loss.
///
/// Prices sit below a low quantile of the inflated set, so a no-purchase
/// removes almost all of the potential while a purchase still removes a
/// constant share.
#[derive(Clone, Debug)]
pub struct SteinerPricing {
    core: Core,
    horizon: usize,
}

impl SteinerPricing {
    pub fn new(d: usize, horizon: usize, cfg: SteinerConfig) -> Result<Self> {
        if horizon == 0 {
            return Err(LearnerError::InvalidConfig("pricing needs T ≥ 1".into()));
        }
        Ok(SteinerPricing {
            core: Core::new(d, cfg)?,
            horizon,
        })
    }

    pub fn from_body(body: ConvexBody, horizon: usize, cfg: SteinerConfig) -> Result<Self> {
        if horizon == 0 {
            return Err(LearnerError::InvalidConfig("pricing needs T ≥ 1".into()));
        }
        Ok(SteinerPricing {
            core: Core::from_body(body, cfg),
            horizon,
        })
    }

    pub fn body(&self) -> &ConvexBody {
        &self.core.body
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.core.body.contains(v, 1e-7)
    }

    /// Bound on the no-purchase ratio at scale `i`, with 10% sampling slack.
    pub fn no_purchase_bound(i: i32) -> f64 {
        1.1 * pricing_fraction(i)
    }

    /// Bound on the mean purchase ratio at scale `i`.
    pub fn purchase_bound(i: i32) -> f64 {
        1.0 - 0.5 / (10.0 * 2f64.powf(2f64.powi(i - 1)))
    }
}

impl Learner for SteinerPricing {
    fn name(&self) -> &'static str {
        if self.core.cfg.perturbation.is_some() {
            "steiner_pricing_perturbed"
        } else {
            "steiner_pricing"
        }
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        let d = self.core.body.dim();
        let t_inv = 1.0 / self.horizon as f64;
        self.core.guess(x, rng, |lo, hi| {
            if hi - lo <= t_inv {
                return Plan::Fixed(lo - PRICE_GUARD, Some(Flag::MinPriceRule));
            }
            let s = pricing_scale(hi - lo, d);
            Plan::Quantile {
                scale: Some(s),
                z: s.z,
                fraction: pricing_fraction(s.i),
                offset: -s.z,
            }
        })
    }

    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        self.core.admits(h)
    }

    fn update(&mut self, fb: &Feedback, _rng: &mut dyn RngCore) -> Result<StepReport> {
        let (mut report, ratio, scale) = self.core.update(fb)?;
        if let (Some(r), Some(s)) = (ratio, scale) {
            let check = match fb.sigma {
                Sign::Plus => {
                    LemmaCheck::at_most(Lemma::NoPurchaseDrop, s.i, r, Self::no_purchase_bound(s.i))
                }
                Sign::Minus => {
                    LemmaCheck::at_most(Lemma::PurchaseDrop, s.i, r, Self::purchase_bound(s.i))
                }
            };
            report.checks.push(check);
        }
        Ok(report)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineRule {
    /// Halve the volume of `S_t` itself.
    ExactMedian,
    /// Halve the width of `S_t` along the context.
    Midpoint,
}

/// Cutting-plane baselines without inflation.
#[derive(Clone, Debug)]
pub struct Baseline {
    core: Core,
    rule: BaselineRule,
}

impl Baseline {
    pub fn new(d: usize, rule: BaselineRule, cfg: SteinerConfig) -> Result<Self> {
        Ok(Baseline {
            core: Core::new(d, cfg)?,
            rule,
        })
    }

    pub fn from_body(body: ConvexBody, rule: BaselineRule, cfg: SteinerConfig) -> Self {
        Baseline {
            core: Core::from_body(body, cfg),
            rule,
        }
    }

    pub fn body(&self) -> &ConvexBody {
        &self.core.body
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.core.body.contains(v, 1e-7)
    }
}

pub fn midpoint_baseline(d: usize) -> Result<Baseline> {
    Baseline::new(d, BaselineRule::Midpoint, SteinerConfig::default())
}

pub fn exact_median_baseline(d: usize, cfg: SteinerConfig) -> Result<Baseline> {
    Baseline::new(d, BaselineRule::ExactMedian, cfg)
}

impl Learner for Baseline {
    fn name(&self) -> &'static str {
        match self.rule {
            BaselineRule::ExactMedian => "exact_median",
            BaselineRule::Midpoint => "midpoint",
        }
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        let rule = self.rule;
        self.core.guess(x, rng, |lo, hi| match rule {
            BaselineRule::Midpoint => Plan::Fixed(0.5 * (lo + hi), None),
            BaselineRule::ExactMedian => Plan::Quantile {
                scale: None,
                z: 0.0,
                fraction: 0.5,
                offset: 0.0,
            },
        })
    }

    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        self.core.admits(h)
    }

    fn update(&mut self, fb: &Feedback, _rng: &mut dyn RngCore) -> Result<StepReport> {
        Ok(self.core.update(fb)?.0)
    }
}
