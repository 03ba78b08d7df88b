use serde::{Deserialize, Serialize};

use super::qp::{project_polyhedron, split_on_active, PolyError, Polyhedron};
use super::vector::{dist, dot, norm, Vector};
use super::{GeometryError, Result, MEMBERSHIP_TOL};
use crate::Sign;

/// `{v : ⟨normal, v⟩ ≤ offset}` with a unit normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    normal: Vector,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NonUnitNormal(n));
        }
        if !offset.is_finite() || !normal.is_finite() {
            return Err(GeometryError::InvalidArgument(
                "non-finite halfspace".into(),
            ));
        }
        Ok(Halfspace { normal, offset })
    }

    /// Normalizes `direction` and rescales the offset to describe the same set.
    pub fn from_direction(direction: &[f64], offset: f64) -> Result<Self> {
        let n = norm(direction);
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::InvalidArgument(
                "zero halfspace direction".into(),
            ));
        }
        let normal = Vector::new(direction.iter().map(|c| c / n).collect());
        Halfspace::new(normal, offset / n)
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed violation `⟨normal, v⟩ − offset`; positive outside.
    #[inline]
    pub fn violation(&self, v: &[f64]) -> f64 {
        dot(&self.normal, v) - self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionConfig {
    pub max_sweeps: usize,
    /// Stop once a full sweep moves the iterate less than this.
    pub tol: f64,
    /// Largest constraint violation accepted in the result.
    pub feasibility_tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            max_sweeps: 10_000,
            tol: 1e-9,
            feasibility_tol: 1e-8,
        }
    }
}

/// Maximizer of a linear functional over the body.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportPoint {
    pub value: f64,
    pub point: Vector,
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn inflated(&self, by: f64) -> BoundingBox {
        BoundingBox {
            lo: self.lo.iter().map(|c| c - by).collect(),
            hi: self.hi.iter().map(|c| c + by).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l).max(0.0))
            .product()
    }

    /// `max_{v ∈ box} ⟨direction, v⟩`.
    pub fn support(&self, direction: &[f64]) -> f64 {
        direction
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(n, (l, h))| (n * l).max(n * h))
            .sum()
    }
}

/// Illinois update of the root bracket on `‖p(t)‖ − R`.
fn continue_bracket(
    f: f64,
    t: f64,
    lo: &mut f64,
    flo: &mut f64,
    hi: &mut f64,
    fhi: &mut f64,
    side: &mut i8,
) {
    if f > 0.0 {
        *hi = t;
        *fhi = f;
        if *side == 1 {
            *flo *= 0.5;
        }
        *side = 1;
    } else {
        *lo = t;
        *flo = f;
        if *side == -1 {
            *fhi *= 0.5;
        }
        *side = -1;
    }
}

/// One face of a bounding box with the point that certifies it.
#[derive(Clone, Debug)]
struct Face {
    bound: f64,
    witness: Option<Vec<f64>>,
}

/// Faces of a [`ConvexBody::bounding_box_warm`] result, kept for the next
/// call on a smaller body.
#[derive(Clone, Debug)]
pub struct BoxFaces {
    faces: Vec<Face>,
    /// Where the next refresh starts.
    cursor: usize,
}

/// `ball(0, ball_radius) ∩ cuts`, the set of parameters consistent with the
/// feedback seen so far.
///
/// Bodies are values: [`ConvexBody::add_cut`] returns a new body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    dim: usize,
    ball_radius: f64,
    cuts: Vec<Halfspace>,
}

const SUPPORT_MAX_ITERS: usize = 8;
const SUPPORT_STEP: f64 = 1e6;
const BOUND_STEP: f64 = 1e7;
const BOUND_GAP: f64 = 1e-9;
const QP_TOL: f64 = 1e-13;

impl ConvexBody {
    pub fn ball(dim: usize, ball_radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(GeometryError::InvalidArgument(
                "dimension must be ≥ 1".into(),
            ));
        }
        if !(ball_radius > 0.0 && ball_radius.is_finite()) {
            return Err(GeometryError::InvalidArgument(format!(
                "ball radius must be positive, got {ball_radius}"
            )));
        }
        Ok(ConvexBody {
            dim,
            ball_radius,
            cuts: Vec::new(),
        })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::ball(dim, 1.0).expect("unit ball is valid for dim ≥ 1")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    pub fn cuts(&self) -> &[Halfspace] {
        &self.cuts
    }

    /// Body with the halfspace `{v : ⟨normal, v⟩ ≤ offset}` appended.
    pub fn with_halfspace(&self, h: Halfspace) -> Result<ConvexBody> {
        self.check_dim(h.normal().len())?;
        let mut next = self.clone();
        next.cuts.push(h);
        Ok(next)
    }

    /// Appends the feedback constraint `sign · (y − ⟨v, x⟩) ≥ 0`.
    ///
    /// `Sign::Plus` keeps `⟨v, x⟩ ≤ y`, `Sign::Minus` keeps `⟨v, x⟩ ≥ y`.
    pub fn add_cut(&self, x: &[f64], y: f64, sign: Sign) -> Result<ConvexBody> {
        self.check_dim(x.len())?;
        let n = norm(x);
        if (n - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NonUnitNormal(n));
        }
        let s = sign.value();
        let normal = Vector::new(x.iter().map(|c| s * c).collect());
        self.with_halfspace(Halfspace::new(normal, s * y)?)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Largest constraint violation of `v` (ball included); `≤ 0` inside.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let mut worst = norm(v) - self.ball_radius;
        for h in &self.cuts {
            let e = h.violation(v);
            if e > worst {
                worst = e;
            }
        }
        worst
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.max_violation(v) <= tol
    }

    /// Euclidean projection of `q` onto the body.
    pub fn project(&self, q: &[f64]) -> Result<Vector> {
        self.project_with(q, &ProjectionConfig::default())
    }

    pub fn project_with(&self, q: &[f64], cfg: &ProjectionConfig) -> Result<Vector> {
        self.check_dim(q.len())?;
        if let Some(p) = self.project_shortcut(q) {
            return Ok(p);
        }
        self.project_active_set(q, cfg)
    }

    /// Exact projection when `q` is inside or when projecting onto a single
    /// violated constraint already lands in the body.
    fn project_shortcut(&self, q: &[f64]) -> Option<Vector> {
        let nq = norm(q);
        let mut violated: Vec<(f64, usize)> = self
            .cuts
            .iter()
            .enumerate()
            .filter_map(|(j, h)| {
                let e = h.violation(q);
                (e > 0.0).then_some((e, j))
            })
            .collect();
        let ball_violation = nq - self.ball_radius;
        if violated.is_empty() && ball_violation <= 0.0 {
            return Some(Vector::from(q));
        }
        // Projection onto a superset that lands inside the body is the
        // projection onto the body.
        const ACCEPT: f64 = 1e-12;
        if ball_violation > 0.0 {
            let s = self.ball_radius / nq;
            let cand: Vec<f64> = q.iter().map(|c| c * s).collect();
            if self.max_violation(&cand) <= ACCEPT {
                return Some(Vector::new(cand));
            }
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0));
        for &(e, j) in violated.iter().take(3) {
            let n = self.cuts[j].normal();
            let cand: Vec<f64> = q.iter().zip(n.iter()).map(|(c, nc)| c - e * nc).collect();
            if self.max_violation(&cand) <= ACCEPT {
                return Some(Vector::new(cand));
            }
        }
        None
    }

    /// Projection with ball multiplier μ: the minimizer of
    /// `‖v − q‖² + μ‖v‖²` over the polyhedron is the polyhedral projection of
    /// `q/(1+μ)`, and its norm is nonincreasing in μ. A bracketed root search
    /// on `s = 1/(1+μ)` makes the ball constraint tight.
    fn polyhedron(&self) -> Polyhedron<'_> {
        Polyhedron::new(
            self.cuts.iter().map(|h| &h.normal()[..]).collect(),
            self.cuts.iter().map(|h| h.offset()).collect(),
        )
    }

    fn project_active_set(&self, q: &[f64], cfg: &ProjectionConfig) -> Result<Vector> {
        self.project_active_set_in(&self.polyhedron(), q, cfg)
    }

    fn project_active_set_in(
        &self,
        cuts: &Polyhedron,
        q: &[f64],
        cfg: &ProjectionConfig,
    ) -> Result<Vector> {
        let r = self.ball_radius;
        let poly = |s: f64| -> Result<(Vec<f64>, Option<Vec<usize>>)> {
            let target: Vec<f64> = q.iter().map(|c| c * s).collect();
            match project_polyhedron(cuts, &target, QP_TOL, cfg.max_sweeps) {
                Ok(p) => Ok((p.point, Some(p.active))),
                Err(PolyError::Infeasible) => Err(GeometryError::NonConvergence {
                    sweeps: 0,
                    residual: f64::INFINITY,
                }),
                // Cycling between nearly dependent cuts once the iterate is
                // feasible to round-off.
                Err(PolyError::IterationCap { residual, point })
                    if residual <= cfg.feasibility_tol =>
                {
                    Ok((point, None))
                }
                Err(PolyError::IterationCap { residual, .. }) => {
                    Err(GeometryError::NonConvergence {
                        sweeps: cfg.max_sweeps,
                        residual,
                    })
                }
            }
        };
        // While the active set holds, the solution moves along the part of
        // `q` orthogonal to the active normals, so the radius condition is a
        // quadratic in `s`.
        let newton = |s: f64, x: &[f64], active: &Option<Vec<usize>>| -> Option<f64> {
            let (w, _) = split_on_active(cuts, active.as_deref()?, q);
            let (ww, xw, xx) = (dot(&w, &w), dot(x, &w), dot(x, x));
            let disc = xw * xw - ww * (xx - r * r);
            (ww > 1e-300 && disc >= 0.0).then(|| s + (disc.sqrt() - xw) / ww)
        };
        let (full, full_active) = poly(1.0)?;
        let f_hi = norm(&full) - r;
        if f_hi <= 1e-14 * r {
            return Ok(clip_to_ball(full, r));
        }
        let (inner, _) = poly(0.0)?;
        let f_lo = norm(&inner) - r;
        if f_lo > cfg.feasibility_tol {
            return Err(GeometryError::NonConvergence {
                sweeps: 0,
                residual: f_lo,
            });
        }
        if f_lo >= -1e-14 * r {
            return Ok(clip_to_ball(inner, r));
        }
        // Projection is 1-Lipschitz, so `‖x(s)‖ ≤ ‖x(0)‖ + s‖q‖` and the root
        // lies above `s0`.
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut flo, mut fhi) = (f_lo, f_hi);
        let s0 = -f_lo / norm(q);
        if s0 > 0.0 && s0 < 1.0 {
            let (v, _) = poly(s0)?;
            let f = norm(&v) - r;
            if f >= -1e-13 * r {
                return Ok(clip_to_ball(v, r));
            }
            lo = s0;
            flo = f;
        }
        // Geometric bisection while the bracket spans decades, then Newton
        // steps on the active-set path guarded by Illinois regula falsi.
        let mut next = newton(1.0, &full, &full_active);
        let mut best = full;
        let mut side = 0i8;
        for _ in 0..200 {
            let mut s = match next {
                _ if lo > 0.0 && hi > 8.0 * lo => (lo * hi).sqrt(),
                Some(s) if s > lo && s < hi => s,
                _ => (lo * fhi - hi * flo) / (fhi - flo),
            };
            if !(s > lo && s < hi) {
                s = 0.5 * (lo + hi);
            }
            let (v, active) = poly(s)?;
            let f = norm(&v) - r;
            next = newton(s, &v, &active);
            best = v;
            if f.abs() <= 1e-13 * r || hi - lo <= 1e-16 {
                break;
            }
            if f > 0.0 {
                hi = s;
                fhi = f;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            } else {
                lo = s;
                flo = f;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            }
        }
        Ok(clip_to_ball(best, r))
    }

    /// Dykstra's alternating projections between the ball and each halfspace.
    ///
    /// Kept as an independent reference for [`ConvexBody::project`]; it
    /// converges slowly where the ball meets a nearly tangent cut.
    pub fn project_dykstra(&self, q: &[f64], cfg: &ProjectionConfig) -> Result<Vector> {
        self.check_dim(q.len())?;
        let d = self.dim;
        let r = self.ball_radius;
        let mut x = q.to_vec();
        let mut ball_inc = vec![0.0; d];
        let mut lam = vec![0.0; self.cuts.len()];
        let mut y = vec![0.0; d];
        let mut prev = vec![0.0; d];
        for _sweep in 0..cfg.max_sweeps {
            prev.copy_from_slice(&x);
            for k in 0..d {
                y[k] = x[k] + ball_inc[k];
            }
            let ny = norm(&y);
            let s = if ny > r { r / ny } else { 1.0 };
            for k in 0..d {
                x[k] = y[k] * s;
                ball_inc[k] = y[k] - x[k];
            }
            // Halfspace increments are multiples of the unit normal, so only
            // the scalar multiplier is stored.
            for (h, l) in self.cuts.iter().zip(lam.iter_mut()) {
                let a = dot(h.normal(), &x) + *l;
                let viol = a - h.offset();
                let next_l = viol.max(0.0);
                let shift = *l - next_l;
                if shift != 0.0 {
                    for (xk, nk) in x.iter_mut().zip(h.normal().iter()) {
                        *xk += shift * nk;
                    }
                }
                *l = next_l;
            }
            if dist(&prev, &x) <= cfg.tol && self.max_violation(&x) <= cfg.feasibility_tol {
                return Ok(Vector::new(x));
            }
        }
        Err(GeometryError::NonConvergence {
            sweeps: cfg.max_sweeps,
            residual: self.max_violation(&x),
        })
    }

    /// Euclidean distance from `q` to the body.
    pub fn distance(&self, q: &[f64]) -> Result<f64> {
        let p = self.project(q)?;
        Ok(dist(q, &p))
    }

    /// Membership of `q` in the Minkowski sum `S + zB`.
    pub fn inflated_contains(&self, z: f64, q: &[f64]) -> Result<bool> {
        if z < 0.0 {
            return Err(GeometryError::InvalidArgument(format!(
                "inflation radius must be ≥ 0, got {z}"
            )));
        }
        self.check_dim(q.len())?;
        // Each constraint's violation is the distance to a superset of S, so
        // the largest one bounds dist(q, S) from below.
        let lower = self.max_violation(q);
        if lower <= 0.0 {
            return Ok(true);
        }
        if lower > z + MEMBERSHIP_TOL {
            return Ok(false);
        }
        Ok(self.distance(q)? <= z + MEMBERSHIP_TOL)
    }

    /// `max_{v ∈ S} ⟨v, x⟩` by projected-gradient ascent.
    ///
    /// With a linear objective the iteration `v ← P(v + ηx)` is a proximal
    /// point method on the support problem. Taking η far larger than the body
    /// makes the first projection land within `R²/η` of the optimum and the
    /// following ones settle it.
    pub fn support(&self, x: &[f64]) -> Result<SupportPoint> {
        self.check_dim(x.len())?;
        let nx = norm(x);
        if nx == 0.0 {
            let p = self.project(&vec![0.0; self.dim])?;
            return Ok(SupportPoint {
                value: 0.0,
                point: p,
            });
        }
        // The ball's own maximizer, when feasible, is optimal.
        let top: Vec<f64> = x.iter().map(|c| c * self.ball_radius / nx).collect();
        if self.max_violation(&top) <= 0.0 {
            return Ok(SupportPoint {
                value: dot(&top, x),
                point: Vector::new(top),
            });
        }
        let eta = SUPPORT_STEP * self.ball_radius / nx;
        let mut v = Vector::zeros(self.dim);
        let mut target = vec![0.0; self.dim];
        for _ in 0..SUPPORT_MAX_ITERS {
            for k in 0..self.dim {
                target[k] = v[k] + eta * x[k];
            }
            let next = self.project(&target)?;
            let step = dist(&next, &v);
            v = next;
            if step <= 1e-12 * self.ball_radius {
                break;
            }
        }
        Ok(SupportPoint {
            value: dot(&v, x),
            point: v,
        })
    }

    /// An upper bound on `max_{v ∈ S} ⟨v, x⟩`, within `R‖x‖/(2·10⁷)` of it
    /// and usually within `10⁻⁹·R‖x‖`.
    ///
    /// For `t > 0` let `p` be the projection of `tx` onto the polyhedron
    /// alone. Dualizing the ball constraint with multiplier `1/t` shows that
    /// `⟨x, p⟩ + (R² − ‖p‖²)/(2t)` bounds the support from above, and when
    /// `‖p‖ ≤ R` the point `p` is feasible, so `⟨x, p⟩` bounds it from below.
    /// A root search on `‖p(t)‖ = R` closes the gap.
    pub fn support_bound(&self, x: &[f64]) -> Result<f64> {
        Ok(self.support_bound_in(&self.polyhedron(), x)?.bound)
    }

    fn support_bound_in(&self, cuts: &Polyhedron, x: &[f64]) -> Result<Face> {
        self.check_dim(x.len())?;
        let nx = norm(x);
        let r = self.ball_radius;
        if nx == 0.0 {
            return Ok(Face {
                bound: 0.0,
                witness: None,
            });
        }
        let top: Vec<f64> = x.iter().map(|c| c * r / nx).collect();
        if self.max_violation(&top) <= 0.0 {
            return Ok(Face {
                bound: r * nx,
                witness: Some(top),
            });
        }
        let cfg = ProjectionConfig::default();
        let poly = |t: f64| -> Result<(Vec<f64>, Option<Vec<usize>>)> {
            let target: Vec<f64> = x.iter().map(|c| c * t).collect();
            match project_polyhedron(cuts, &target, QP_TOL, cfg.max_sweeps) {
                Ok(p) => Ok((p.point, Some(p.active))),
                Err(PolyError::IterationCap { residual, point })
                    if residual <= cfg.feasibility_tol =>
                {
                    Ok((point, None))
                }
                Err(_) => Err(GeometryError::NonConvergence {
                    sweeps: cfg.max_sweeps,
                    residual: f64::INFINITY,
                }),
            }
        };
        let gap = BOUND_GAP * r * nx;
        let mut upper = r * nx;
        let mut witness = None;
        let mut lower = f64::NEG_INFINITY;
        let (p0, _) = poly(0.0)?;
        let f0 = norm(&p0) - r;
        if f0 > cfg.feasibility_tol {
            return Err(GeometryError::NonConvergence {
                sweeps: 0,
                residual: f0,
            });
        }
        // `‖p(t)‖ ≤ ‖p(0)‖ + t‖x‖`, so the root lies above `lo`. The upper
        // end stays open until some `t` puts `p(t)` outside the ball; past
        // `t_max` the polyhedral projection loses accuracy.
        let t_max = BOUND_STEP * r / nx;
        let (mut lo, mut flo) = ((-f0 / nx).max(0.0), f0);
        let (mut hi, mut fhi) = (f64::INFINITY, f64::INFINITY);
        let mut next = Some((2.0 * lo).max(r / nx));
        let mut side = 0i8;
        for _ in 0..100 {
            let t = match next {
                Some(t) if t > lo && t < hi => t,
                _ if hi.is_infinite() => 16.0 * lo,
                _ if lo > 0.0 && hi > 8.0 * lo => (lo * hi).sqrt(),
                _ => {
                    let t = (lo * fhi - hi * flo) / (fhi - flo);
                    if t > lo && t < hi {
                        t
                    } else {
                        0.5 * (lo + hi)
                    }
                }
            };
            let t = t.min(t_max);
            let (p, active) = poly(t)?;
            let pp = dot(&p, &p);
            let xp = dot(x, &p);
            let b = xp + (r * r - pp) / (2.0 * t);
            if b < upper {
                upper = b;
                witness = Some(p.clone());
            }
            let f = pp.sqrt() - r;
            if f <= 0.0 {
                lower = lower.max(xp);
            }
            if upper - lower <= gap || (f <= 0.0 && t >= t_max) {
                break;
            }
            // Along a fixed active set `p(t)` moves by the part `w` of `x`
            // orthogonal to the active normals. With `w = 0` and `x` a
            // nonnegative combination of them, `p` is a vertex maximizing
            // `⟨x, ·⟩` over the polyhedron; inside the ball it is the answer.
            let Some(a) = active else {
                next = None;
                continue_bracket(f, t, &mut lo, &mut flo, &mut hi, &mut fhi, &mut side);
                continue;
            };
            let (w, coef) = split_on_active(cuts, &a, x);
            let (ww, pw) = (dot(&w, &w), dot(&p, &w));
            if f <= 0.0 && ww <= 1e-24 * nx * nx && coef.iter().all(|&c| c >= -1e-12) {
                return Ok(Face {
                    bound: xp,
                    witness: Some(p),
                });
            }
            let disc = pw * pw - ww * (pp - r * r);
            next = (ww > 1e-300 && disc >= 0.0).then(|| t + (disc.sqrt() - pw) / ww);
            continue_bracket(f, t, &mut lo, &mut flo, &mut hi, &mut fhi, &mut side);
        }
        Ok(Face {
            bound: upper,
            witness,
        })
    }

    /// `(min, max)` of `⟨v, x⟩` over the body, each end rounded outward by
    /// at most `R‖x‖/(2·10⁷)`.
    pub fn extent(&self, x: &[f64]) -> Result<(f64, f64)> {
        let cuts = self.polyhedron();
        let hi = self.support_bound_in(&cuts, x)?.bound;
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        let lo = -self.support_bound_in(&cuts, &neg)?.bound;
        Ok((lo.min(hi), hi))
    }

    /// `max ⟨v,x⟩ − min ⟨v,x⟩` over the body for a unit direction `x`.
    pub fn width(&self, x: &[f64]) -> Result<f64> {
        let n = norm(x);
        if (n - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NonUnitNormal(n));
        }
        let (lo, hi) = self.extent(x)?;
        Ok((hi - lo).clamp(0.0, 2.0 * self.ball_radius))
    }

    /// A box containing the body, each face within `R/(2·10⁷)` of touching it.
    pub fn bounding_box(&self) -> Result<BoundingBox> {
        Ok(self.bounding_box_warm(None, 0)?.0)
    }

    /// [`ConvexBody::bounding_box`] reusing the faces of an earlier call on
    /// a superset of this body, re-solving at most `refresh` of them.
    ///
    /// A face is certified by a point `p` that is the projection of some
    /// `tx` onto the earlier polyhedron. If `p` satisfies every current cut
    /// it is also the projection onto the current one, so the face is still
    /// tight. Faces past the refresh budget keep their old bound, which
    /// still encloses the smaller body; they are re-solved first next time.
    pub fn bounding_box_warm(
        &self,
        prior: Option<BoxFaces>,
        refresh: usize,
    ) -> Result<(BoundingBox, BoxFaces)> {
        let n = 2 * self.dim;
        let prior = prior.filter(|f| f.faces.len() == n);
        let cursor = prior.as_ref().map_or(0, |f| f.cursor);
        let mut faces: Vec<Option<Face>> = match prior {
            Some(f) => f.faces.into_iter().map(Some).collect(),
            None => vec![None; n],
        };
        let mut cuts = None;
        let mut e = vec![0.0; self.dim];
        let mut spent = 0;
        let mut next_cursor = cursor;
        for i in 0..n {
            let k = (cursor + i) % n;
            let stale = match &faces[k] {
                None => true,
                Some(f) => !f
                    .witness
                    .as_ref()
                    .is_some_and(|p| self.cuts.iter().all(|h| h.violation(p) <= QP_TOL)),
            };
            if !stale {
                continue;
            }
            if faces[k].is_some() {
                if spent == refresh {
                    continue;
                }
                spent += 1;
                next_cursor = (k + 1) % n;
            }
            e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
            let cuts = cuts.get_or_insert_with(|| self.polyhedron());
            faces[k] = Some(self.support_bound_in(cuts, &e)?);
            e[k / 2] = 0.0;
        }
        let faces: Vec<Face> = faces
            .into_iter()
            .map(|f| f.expect("every face is set"))
            .collect();
        let hi = faces.iter().step_by(2).map(|f| f.bound).collect();
        let lo = faces.iter().skip(1).step_by(2).map(|f| -f.bound).collect();
        Ok((
            BoundingBox { lo, hi },
            BoxFaces {
                faces,
                cursor: next_cursor,
            },
        ))
    }

    /// Same set with redundant cuts dropped.
    ///
    /// A cut is dropped when a parallel cut is at least as tight, when it
    /// cannot bind inside the ball, or when it contains the body's bounding
    /// box (enlarged by the support tolerance). Returns the box as well.
    pub fn simplified(&self) -> Result<(ConvexBody, BoundingBox)> {
        let reduced = self.merged();
        let bbox = reduced.bounding_box()?;
        let loose = bbox.inflated(1e-7);
        let cuts = reduced
            .cuts
            .iter()
            .filter(|h| loose.support(h.normal()) > h.offset())
            .cloned()
            .collect();
        Ok((
            ConvexBody {
                dim: self.dim,
                ball_radius: self.ball_radius,
                cuts,
            },
            bbox,
        ))
    }

    /// Same set with parallel cuts merged into the tightest one and cuts
    /// that cannot bind inside the ball dropped.
    pub fn merged(&self) -> ConvexBody {
        let mut kept: Vec<Halfspace> = Vec::with_capacity(self.cuts.len());
        for h in &self.cuts {
            if h.offset() >= self.ball_radius {
                continue;
            }
            match kept.iter_mut().find(|k| {
                k.normal()
                    .iter()
                    .zip(h.normal().iter())
                    .all(|(a, b)| (a - b).abs() <= 1e-12)
            }) {
                Some(k) => {
                    if h.offset() < k.offset() {
                        k.offset = h.offset();
                    }
                }
                None => kept.push(h.clone()),
            }
        }
        ConvexBody {
            dim: self.dim,
            ball_radius: self.ball_radius,
            cuts: kept,
        }
    }
}

fn clip_to_ball(mut v: Vec<f64>, r: f64) -> Vector {
    let n = norm(&v);
    if n > r {
        let s = r / n;
        v.iter_mut().for_each(|c| *c *= s);
    }
    Vector::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_disk() -> ConvexBody {
        ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], 0.0, Sign::Plus)
            .unwrap()
    }

    #[test]
    fn radial_projection() {
        let p = ConvexBody::unit_ball(2).project(&[2.0, 0.0]).unwrap();
        assert!(dist(&p, &[1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn projection_onto_face() {
        let p = half_disk().project(&[0.5, 0.0]).unwrap();
        assert!(dist(&p, &[0.0, 0.0]) < 1e-12);
    }

    /// Brute-force minimization of |q − v| over a fine grid of feasible v.
    fn grid_projection(body: &ConvexBody, q: &[f64], steps: usize) -> Vec<f64> {
        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        for a in 0..=steps {
            for b in 0..=steps {
                let v = [
                    -1.0 + 2.0 * a as f64 / steps as f64,
                    -1.0 + 2.0 * b as f64 / steps as f64,
                ];
                if body.contains(&v, 0.0) {
                    let d = dist(&v, q);
                    if d < best.0 {
                        best = (d, v.to_vec());
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn projection_onto_quadrant_corner() {
        let body = half_disk().add_cut(&[0.0, 1.0], 0.0, Sign::Plus).unwrap();
        let oracle = grid_projection(&body, &[1.0, 1.0], 800);
        assert!(dist(&oracle, &[0.0, 0.0]) < 1e-12);
        let p = body.project(&[1.0, 1.0]).unwrap();
        assert!(dist(&p, &oracle) < 1e-7, "{p:?}");
    }

    #[test]
    fn dykstra_handles_obtuse_corner() {
        let body = ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], 0.2, Sign::Plus)
            .unwrap()
            .with_halfspace(Halfspace::from_direction(&[1.0, 0.3], 0.25).unwrap())
            .unwrap();
        let q = [0.9, 0.2];
        let oracle = grid_projection(&body, &q, 2000);
        let p = body.project(&q).unwrap();
        assert!(body.contains(&p, 1e-8));
        assert!(dist(&p, &oracle) < 2e-3);
        // Idempotence.
        let pp = body.project(&p).unwrap();
        assert!(dist(&p, &pp) < 1e-7);
        let reference = body
            .project_dykstra(&q, &ProjectionConfig::default())
            .unwrap();
        assert!(dist(&p, &reference) < 1e-7);
    }

    #[test]
    fn projection_is_optimal_on_random_bodies() {
        use rand::Rng;
        let mut rng = crate::rng::stream(9, 0);
        let cfg = ProjectionConfig {
            max_sweeps: 200_000,
            tol: 1e-13,
            feasibility_tol: 1e-10,
        };
        for _ in 0..200 {
            let d = rng.random_range(2..5);
            let mut body = ConvexBody::unit_ball(d);
            for _ in 0..rng.random_range(1..8) {
                let x = Vector::random_unit(d, &mut rng);
                // A neighbourhood of the origin stays feasible.
                body = body
                    .add_cut(&x, rng.random_range(0.05..0.9), Sign::Plus)
                    .unwrap();
                let y = rng.random_range(-0.9..-0.05);
                body = body.add_cut(&x, y, Sign::Minus).unwrap();
            }
            let q = Vector::random_in_ball(d, 3.0, &mut rng);
            let p = body.project(&q).unwrap();
            assert!(body.contains(&p, 1e-8));
            if let Ok(reference) = body.project_dykstra(&q, &cfg) {
                assert!(dist(&p, &q) <= dist(&reference, &q) + 1e-9);
            }
            // Variational inequality against feasible points.
            for _ in 0..50 {
                let w = Vector::random_in_ball(d, 1.0, &mut rng);
                if body.contains(&w, 0.0) {
                    let lhs: f64 = (0..d).map(|k| (q[k] - p[k]) * (w[k] - p[k])).sum();
                    assert!(lhs <= 1e-9, "{lhs}");
                }
            }
        }
    }

    #[test]
    fn inflated_membership() {
        let ball = ConvexBody::unit_ball(2);
        assert!(ball.inflated_contains(0.5, &[1.4, 0.0]).unwrap());
        assert!(!ball.inflated_contains(0.0, &[1.1, 0.0]).unwrap());
        assert!(half_disk().inflated_contains(0.1, &[0.05, 0.0]).unwrap());
        assert!(!half_disk().inflated_contains(0.04, &[0.05, 0.0]).unwrap());
        assert!(ball.inflated_contains(-1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn widths() {
        let ball = ConvexBody::unit_ball(3);
        let x = Vector::random_unit(3, &mut crate::rng::stream(1, 0));
        assert!((ball.width(&x).unwrap() - 2.0).abs() < 1e-7);
        assert!((half_disk().width(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-7);
        let slab = ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], 0.3, Sign::Plus)
            .unwrap()
            .add_cut(&[1.0, 0.0], -0.3, Sign::Minus)
            .unwrap();
        assert!((slab.width(&[1.0, 0.0]).unwrap() - 0.6).abs() < 1e-7);
        // Curved side: support of the slab in e₂ is √(1 − 0) = 1.
        assert!((slab.width(&[0.0, 1.0]).unwrap() - 2.0).abs() < 1e-7);
    }

    #[test]
    fn support_on_sphere_cap() {
        // Maximize ⟨v, (1,1)/√2⟩ over disk ∩ {v₁ ≤ 0.5}: optimum on the arc
        // at angle 45° is feasible (0.707 > 0.5 fails), so the optimum is the
        // corner (0.5, √0.75).
        let body = ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], 0.5, Sign::Plus)
            .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let got = body.support(&[s, s]).unwrap().value;
        let want = (0.5 + 0.75f64.sqrt()) * s;
        assert!((got - want).abs() < 1e-7, "{got} vs {want}");
        let bound = body.support_bound(&[s, s]).unwrap();
        assert!(bound >= want && bound - want < 1e-7, "{bound} vs {want}");
    }

    #[test]
    fn support_bound_brackets_the_support() {
        let mut rng = crate::rng::stream(8, 0);
        for _ in 0..50 {
            let mut body = ConvexBody::unit_ball(5);
            for _ in 0..6 {
                let x = Vector::random_unit(5, &mut rng);
                body = body.add_cut(&x, 0.3, Sign::Plus).unwrap();
            }
            let x = Vector::random_unit(5, &mut rng);
            let exact = body.support(&x).unwrap().value;
            let bound = body.support_bound(&x).unwrap();
            assert!(
                bound >= exact - 1e-12 && bound - exact < 1e-7,
                "{bound} vs {exact}"
            );
        }
    }

    #[test]
    fn add_cut_sign_convention() {
        let plus = ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], 0.0, Sign::Plus)
            .unwrap();
        assert!(plus.contains(&[-0.5, 0.0], 0.0));
        assert!(!plus.contains(&[0.5, 0.0], 0.0));
        let minus = ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], 0.0, Sign::Minus)
            .unwrap();
        assert!(minus.contains(&[0.5, 0.0], 0.0));
        assert!(!minus.contains(&[-0.5, 0.0], 0.0));
        assert!(ConvexBody::unit_ball(2)
            .add_cut(&[2.0, 0.0], 0.0, Sign::Plus)
            .is_err());
    }

    #[test]
    fn simplification_keeps_the_set() {
        let body = ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], 0.3, Sign::Plus)
            .unwrap()
            .add_cut(&[1.0, 0.0], 0.5, Sign::Plus)
            .unwrap()
            .add_cut(&[0.0, 1.0], 0.9, Sign::Plus)
            .unwrap()
            .add_cut(&[1.0, 0.0], -0.3, Sign::Minus)
            .unwrap()
            .add_cut(&[0.0, 1.0], 0.1, Sign::Plus)
            .unwrap()
            .add_cut(&[0.0, 1.0], -0.1, Sign::Minus)
            .unwrap();
        let (simple, bbox) = body.simplified().unwrap();
        // Box is [-0.3,0.3] × [-0.1,0.1]; only the four slab faces bind.
        assert_eq!(simple.cuts().len(), 4);
        assert!((bbox.hi[0] - 0.3).abs() < 1e-7 && (bbox.lo[1] + 0.1).abs() < 1e-7);
        let mut rng = crate::rng::stream(3, 0);
        for _ in 0..2000 {
            let q = Vector::random_in_ball(2, 1.0, &mut rng);
            assert_eq!(body.contains(&q, 0.0), simple.contains(&q, 0.0));
        }
    }

    #[test]
    fn empty_body_fails_to_converge() {
        let body = ConvexBody::unit_ball(2)
            .add_cut(&[1.0, 0.0], -0.5, Sign::Plus)
            .unwrap()
            .add_cut(&[1.0, 0.0], 0.5, Sign::Minus)
            .unwrap();
        let cfg = ProjectionConfig {
            max_sweeps: 200,
            ..Default::default()
        };
        assert!(matches!(
            body.project(&[0.0, 0.0]),
            Err(GeometryError::NonConvergence { .. })
        ));
        assert!(matches!(
            body.project_dykstra(&[0.0, 0.0], &cfg),
            Err(GeometryError::NonConvergence { .. })
        ));
    }
}
