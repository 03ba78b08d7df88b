use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::body::{BoundingBox, ConvexBody};
use super::vector::{dot, unit_ball_volume, Vector};
use super::{GeometryError, Result};
use crate::rng;
use crate::Sign;

pub const DEFAULT_MC_SAMPLES: usize = 50_000;

/// Relative error on the requested fraction beyond which a median search is
/// reported as stalled.
pub const MEDIAN_REL_TOL: f64 = 0.05;

const BATCH: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub samples: usize,
    pub hits: usize,
    pub rel_std_err: f64,
}

impl VolumeEstimate {
    fn from_counts(hits: usize, samples: usize, reference: f64) -> Self {
        let p = hits as f64 / samples as f64;
        let rel_std_err = if hits == 0 {
            f64::INFINITY
        } else {
            ((1.0 - p) / (p * samples as f64)).sqrt()
        };
        VolumeEstimate {
            value: p * reference,
            samples,
            hits,
            rel_std_err,
        }
    }

    pub fn std_err(&self) -> f64 {
        self.value * self.rel_std_err
    }
}

/// `{v : side · (⟨x, v⟩ − y) ≤ 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfspaceRegion {
    pub x: Vector,
    pub y: f64,
    pub side: Sign,
}

impl HalfspaceRegion {
    pub fn new(x: Vector, y: f64, side: Sign) -> Self {
        HalfspaceRegion { x, y, side }
    }

    #[inline]
    pub fn contains(&self, v: &[f64]) -> bool {
        self.side.value() * (dot(&self.x, v) - self.y) <= 0.0
    }
}

/// Region the uniform proposals are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub enum Envelope {
    Ball { radius: f64 },
    Box(BoundingBox),
}

impl Envelope {
    pub fn volume(&self, dim: usize) -> f64 {
        match self {
            Envelope::Ball { radius } => unit_ball_volume(dim) * radius.powi(dim as i32),
            Envelope::Box(b) => b.volume(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R, out: &mut [f64]) {
        match self {
            Envelope::Ball { radius } => {
                let v = Vector::random_in_ball(dim, *radius, rng);
                out.copy_from_slice(&v);
            }
            Envelope::Box(b) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = b.lo[k] + (b.hi[k] - b.lo[k]) * rng.random::<f64>();
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopePolicy {
    /// The origin-centred ball of radius `ball_radius + z`.
    OriginBall,
    /// Whichever of the origin ball and the bounding box of `S + zB` has the
    /// smaller volume.
    Tightest,
    /// The bounding box of `S + zB`, clipped to the origin ball's box.
    BoundingBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeOptions {
    pub samples: usize,
    pub envelope: EnvelopePolicy,
    /// Keep drawing batches until this many hits are seen...
    pub min_hits: usize,
    /// ...or `samples · max_boost` proposals have been drawn.
    pub max_boost: usize,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        VolumeOptions {
            samples: DEFAULT_MC_SAMPLES,
            envelope: EnvelopePolicy::Tightest,
            min_hits: 0,
            max_boost: 1,
        }
    }
}

impl VolumeOptions {
    pub fn with_samples(samples: usize) -> Self {
        VolumeOptions {
            samples,
            ..Default::default()
        }
    }
}

/// Uniform sample of `S + zB` obtained by rejection from an envelope.
///
/// One cloud serves every volume question asked during a round: the total
/// inflated volume, volumes of halfspace slices, quantiles along a direction
/// and, paired, the volume left after a cut.
#[derive(Clone, Debug)]
pub struct InflatedCloud {
    dim: usize,
    z: f64,
    envelope_volume: f64,
    samples: usize,
    hits: Vec<f64>,
}

impl InflatedCloud {
    pub fn draw(
        body: &ConvexBody,
        z: f64,
        opts: &VolumeOptions,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        Self::draw_in_box(body, z, opts, None, rng)
    }

    /// [`InflatedCloud::draw`] with the body's bounding box supplied.
    pub fn draw_in_box(
        body: &ConvexBody,
        z: f64,
        opts: &VolumeOptions,
        bbox: Option<&BoundingBox>,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if !(z >= 0.0) {
            return Err(GeometryError::InvalidArgument(format!(
                "inflation radius must be ≥ 0, got {z}"
            )));
        }
        if opts.samples == 0 {
            return Err(GeometryError::InvalidArgument(
                "sample count must be ≥ 1".into(),
            ));
        }
        let dim = body.dim();
        let envelope = choose_envelope(body, z, opts.envelope, bbox)?;
        let envelope_volume = envelope.volume(dim);
        let mut hits = Vec::new();
        let mut n_hits = 0;
        let mut samples = 0;
        let cap = opts.samples.saturating_mul(opts.max_boost.max(1));
        let batch_seed = rng.next_u64();
        let mut q = vec![0.0; dim];
        let mut batch = 0u64;
        loop {
            let mut brng = rng::stream(batch_seed, batch);
            let target = if samples < opts.samples {
                opts.samples
            } else {
                cap
            };
            let n = BATCH.min(target - samples);
            for _ in 0..n {
                envelope.sample(dim, &mut brng, &mut q);
                if body.inflated_contains(z, &q)? {
                    hits.extend_from_slice(&q);
                    n_hits += 1;
                }
            }
            samples += n;
            batch += 1;
            if samples >= opts.samples && (n_hits >= opts.min_hits || samples >= cap) {
                break;
            }
        }
        Ok(InflatedCloud {
            dim,
            z,
            envelope_volume,
            samples,
            hits,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn hit_count(&self) -> usize {
        self.hits.len() / self.dim.max(1)
    }

    pub fn hits(&self) -> impl Iterator<Item = &[f64]> {
        self.hits.chunks_exact(self.dim)
    }

    pub fn estimate(&self) -> VolumeEstimate {
        VolumeEstimate::from_counts(self.hit_count(), self.samples, self.envelope_volume)
    }

    /// Volume of `(S + zB) ∩ region`.
    pub fn estimate_in(&self, region: &HalfspaceRegion) -> VolumeEstimate {
        let n = self.hits().filter(|q| region.contains(q)).count();
        VolumeEstimate::from_counts(n, self.samples, self.envelope_volume)
    }

    /// Hits that also lie in `other + zB`; with `other ⊆ S` this is the paired
    /// estimate of the volume kept by a cut.
    pub fn count_inflated_in(&self, other: &ConvexBody) -> Result<usize> {
        let mut n = 0;
        for q in self.hits() {
            if other.inflated_contains(self.z, q)? {
                n += 1;
            }
        }
        Ok(n)
    }

    /// Fraction of hits with `⟨v, x⟩ ≤ y`.
    pub fn fraction_below(&self, x: &[f64], y: f64) -> f64 {
        let h = self.hit_count();
        if h == 0 {
            return 0.0;
        }
        self.hits().filter(|q| dot(q, x) <= y).count() as f64 / h as f64
    }

    /// Sorted projections `⟨v, x⟩` of the hits.
    pub fn projections(&self, x: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = self.hits().map(|q| dot(q, x)).collect();
        p.sort_by(f64::total_cmp);
        p
    }

    /// Bisection for the `fraction` quantile of the cloud along `x`.
    pub fn median_cut(&self, body: &ConvexBody, x: &[f64], fraction: f64) -> Result<MedianCut> {
        check_fraction(fraction)?;
        if self.hit_count() == 0 {
            return Err(GeometryError::DegenerateEstimate {
                samples: self.samples,
            });
        }
        let (lo, hi) = body.extent(x)?;
        let proj = self.projections(x);
        Ok(quantile_by_bisection(
            &proj,
            fraction,
            lo - self.z,
            hi + self.z,
        ))
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GeometryError::InvalidArgument(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    Ok(())
}

fn choose_envelope(
    body: &ConvexBody,
    z: f64,
    policy: EnvelopePolicy,
    bbox: Option<&BoundingBox>,
) -> Result<Envelope> {
    let dim = body.dim();
    let radius = body.ball_radius() + z;
    let ball = Envelope::Ball { radius };
    if policy == EnvelopePolicy::OriginBall {
        return Ok(ball);
    }
    // Support values are accurate to ~1e-7; pad so the box always encloses.
    let bbox = match bbox {
        Some(b) => b.inflated(z + 1e-7),
        None => body.bounding_box()?.inflated(z + 1e-7),
    };
    let clipped = BoundingBox {
        lo: bbox.lo.iter().map(|c| c.max(-radius)).collect(),
        hi: bbox.hi.iter().map(|c| c.min(radius)).collect(),
    };
    if policy == EnvelopePolicy::BoundingBox || clipped.volume() < ball.volume(dim) {
        Ok(Envelope::Box(clipped))
    } else {
        Ok(ball)
    }
}

/// Monte-Carlo estimate of `Vol((S + zB) ∩ cut)`.
pub fn estimate_volume(
    body: &ConvexBody,
    z: f64,
    cut: Option<&HalfspaceRegion>,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<VolumeEstimate> {
    if samples < 1000 {
        return Err(GeometryError::InvalidArgument(format!(
            "at least 1000 samples required, got {samples}"
        )));
    }
    estimate_volume_with(body, z, cut, &VolumeOptions::with_samples(samples), rng)
}

pub fn estimate_volume_with(
    body: &ConvexBody,
    z: f64,
    cut: Option<&HalfspaceRegion>,
    opts: &VolumeOptions,
    rng: &mut dyn RngCore,
) -> Result<VolumeEstimate> {
    let cloud = InflatedCloud::draw(body, z, opts, rng)?;
    let est = match cut {
        Some(region) => cloud.estimate_in(region),
        None => cloud.estimate(),
    };
    if est.hits == 0 {
        return Err(GeometryError::DegenerateEstimate {
            samples: est.samples,
        });
    }
    Ok(est)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianCut {
    pub y: f64,
    /// Fraction of the sample with `⟨v, x⟩ ≤ y`.
    pub achieved: f64,
    pub iterations: usize,
    /// The interval collapsed before the fraction came within
    /// [`MEDIAN_REL_TOL`] of the target.
    pub stalled: bool,
}

/// Bisection over `[lo, hi]` for the point where the empirical distribution of
/// `sorted` reaches `fraction`.
///
/// The search runs until the empirical fraction is as close to the target as
/// the sample allows (half a step of the distribution function) or the
/// interval is narrower than 1e-12.
pub fn quantile_by_bisection(sorted: &[f64], fraction: f64, lo: f64, hi: f64) -> MedianCut {
    let n = sorted.len().max(1) as f64;
    let cdf = |y: f64| sorted.partition_point(|&p| p <= y) as f64 / n;
    let resolution = 0.5 / n;
    let (mut lo, mut hi) = (lo.min(hi), hi.max(lo));
    let mut y = 0.5 * (lo + hi);
    let mut achieved = cdf(y);
    let mut iterations = 0;
    while (achieved - fraction).abs() > resolution && hi - lo > 1e-12 {
        if achieved < fraction {
            lo = y;
        } else {
            hi = y;
        }
        y = 0.5 * (lo + hi);
        achieved = cdf(y);
        iterations += 1;
    }
    MedianCut {
        y,
        achieved,
        iterations,
        stalled: (achieved - fraction).abs() > MEDIAN_REL_TOL * fraction,
    }
}

/// `y` with `Vol({v ∈ S + zB : ⟨v, x⟩ ≤ y}) ≈ fraction · Vol(S + zB)`.
pub fn median_cut(
    body: &ConvexBody,
    z: f64,
    x: &[f64],
    fraction: f64,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<MedianCut> {
    check_fraction(fraction)?;
    let cloud = InflatedCloud::draw(body, z, &VolumeOptions::with_samples(samples), rng)?;
    cloud.median_cut(body, x, fraction)
}
