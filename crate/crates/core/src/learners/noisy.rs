//! Learners for feedback flipped with probability `p < 1/2`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{
    vector_context, Feedback, Learner, LearnerError, Lemma, LemmaCheck, Result, ScaleIndex,
    StepReport, WeightField,
};
use crate::geometry::dot;
use crate::hypothesis::{Context, HypothesisClass, HypothesisNet, DEFAULT_NET_CAP};
use crate::Sign;

/// Cell budget of the grid carrier of [`NoisyLinear`].
pub const DEFAULT_NOISY_CELL_CAP: usize = 2_000_000;

const NORMALIZATION_TOL: f64 = 1e-9;

/// `c = (p′ − p)·[(1 − p′)/p′ − p′/(1 − p′)]`.
pub fn noisy_constant(p: f64, p_prime: f64) -> f64 {
    (p_prime - p) * ((1.0 - p_prime) / p_prime - p_prime / (1.0 - p_prime))
}

fn check_noise(p: f64, p_prime: f64) -> Result<()> {
    if !(0.0 <= p && p < p_prime && p_prime < 0.5) {
        return Err(LearnerError::InvalidConfig(format!(
            "need 0 ≤ p < p′ < 1/2, got p = {p}, p′ = {p_prime}"
        )));
    }
    Ok(())
}

fn normalization_check(fields: &[&WeightField], scale: i32) -> LemmaCheck {
    let worst = fields
        .iter()
        .map(|f| (f.total() - 1.0).abs())
        .fold(0.0, f64::max);
    LemmaCheck::at_most(Lemma::Normalization, scale, worst, NORMALIZATION_TOL)
}

/// An exact expectation computed two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// Mixture of the two feedback branches, each obtained by running the
    /// learner's update.
    pub enumerated: f64,
    pub formula: f64,
    /// The stated upper bound, where there is one.
    pub bound: Option<f64>,
}

impl IdentityCheck {
    pub fn gap(&self) -> f64 {
        (self.enumerated - self.formula).abs()
    }
}

/// Feedback sent when the hidden value is `u`: `Plus` iff `y ≥ u`.
fn true_sign(y: f64, u: f64) -> Sign {
    if y >= u {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

fn single_scale_update(w: &mut WeightField, values: &[f64], y: f64, sigma: Sign, p_prime: f64) {
    w.update(values, y, sigma, p_prime, 1.0 - p_prime);
}

/// `E[1/w_{t+1}(f₁)]` for the single-scale noisy update against
/// `(1 − c·W⁻)/w_t(f₁)`, where `f₀(x) = u` and `f₁` sits on the same side of
/// `y` and `W⁻` is the mass on the other side.
pub fn weight_increase_identity(
    w: &WeightField,
    values: &[f64],
    f1: usize,
    y: f64,
    u: f64,
    p: f64,
    p_prime: f64,
) -> IdentityCheck {
    let honest = true_sign(y, u);
    let branch = |sigma: Sign| {
        let mut next = w.clone();
        single_scale_update(&mut next, values, y, sigma, p_prime);
        1.0 / next.weight(f1)
    };
    let enumerated = (1.0 - p) * branch(honest) + p * branch(honest.flipped());
    let s = honest.value();
    let w_minus: f64 = values
        .iter()
        .enumerate()
        .filter(|(_, v)| s * (y - **v) < 0.0)
        .map(|(i, _)| w.weight(i))
        .sum();
    IdentityCheck {
        enumerated,
        formula: (1.0 - noisy_constant(p, p_prime) * w_minus) / w.weight(f1),
        bound: None,
    }
}

fn penalize(w: &mut WeightField, values: &[f64], y: f64, sigma: Sign, eta: f64) {
    w.update(values, y, sigma, 1.0 - eta, 1.0);
}

/// `E[1/w_{t+1}(q₁)]` for the noisy-linear update against the two-branch
/// closed form `(1 − ηX[(1−p) − p/(1−η)])/w_t(q₁)`, together with the bound
/// `(1 − ηX/10)/w_t(q₁)` (valid for `p = 1/3`, `η ≤ 1/4`). `X` is the mass on
/// the side of `y` opposite to `q₀`.
pub fn sameside_identity(
    w: &WeightField,
    values: &[f64],
    q1: usize,
    y: f64,
    u: f64,
    p: f64,
    eta: f64,
) -> IdentityCheck {
    let honest = true_sign(y, u);
    let branch = |sigma: Sign| {
        let mut next = w.clone();
        penalize(&mut next, values, y, sigma, eta);
        1.0 / next.weight(q1)
    };
    let enumerated = (1.0 - p) * branch(honest) + p * branch(honest.flipped());
    let s = honest.value();
    let x: f64 = values
        .iter()
        .enumerate()
        .filter(|(_, v)| s * (y - **v) < 0.0)
        .map(|(i, _)| w.weight(i))
        .sum();
    let inv = 1.0 / w.weight(q1);
    IdentityCheck {
        enumerated,
        formula: (1.0 - eta * x * ((1.0 - p) - p / (1.0 - eta))) * inv,
        bound: Some((1.0 - eta * x / 10.0) * inv),
    }
}

#[derive(Clone, Debug)]
struct Pending {
    values: Vec<f64>,
    y: f64,
    scale: Option<ScaleIndex>,
    report: StepReport,
}

/// Single-scale Steiner potential with noise: multiplicative weights over a
/// net, guessing uniformly within `1/T` of the weighted median.
#[derive(Clone, Debug)]
pub struct NoisySingleScale {
    net: HypothesisNet,
    weights: WeightField,
    horizon: usize,
    p_prime: f64,
    pending: Option<Pending>,
}

impl NoisySingleScale {
    /// Net `N_{T^{−2}}` of the class.
    pub fn new(class: &HypothesisClass, horizon: usize, p: f64, p_prime: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(LearnerError::InvalidConfig("horizon must be ≥ 1".into()));
        }
        let eps = (horizon as f64).powi(-2);
        let net = HypothesisNet::build_with_cap(class, eps, DEFAULT_NET_CAP)?;
        Self::from_net(net, horizon, p, p_prime)
    }

    pub fn from_net(net: HypothesisNet, horizon: usize, p: f64, p_prime: f64) -> Result<Self> {
        check_noise(p, p_prime)?;
        if net.is_empty() {
            return Err(LearnerError::InvalidConfig("empty net".into()));
        }
        if horizon == 0 {
            return Err(LearnerError::InvalidConfig("horizon must be ≥ 1".into()));
        }
        Ok(NoisySingleScale {
            weights: WeightField::uniform(net.len()),
            net,
            horizon,
            p_prime,
            pending: None,
        })
    }

    pub fn net(&self) -> &HypothesisNet {
        &self.net
    }

    pub fn weights(&self) -> &WeightField {
        &self.weights
    }
}

impl Learner for NoisySingleScale {
    fn name(&self) -> &'static str {
        "noisy_single_scale"
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        let values = self.net.values(x)?;
        let m = self.weights.weighted_median(&values);
        let half = 1.0 / self.horizon as f64;
        let y = m + half * (2.0 * rng.random::<f64>() - 1.0);
        let report = StepReport {
            median: Some(m),
            ..StepReport::default()
        };
        self.pending = Some(Pending {
            values,
            y,
            scale: None,
            report,
        });
        Ok(y)
    }

    fn update(&mut self, fb: &Feedback, _rng: &mut dyn RngCore) -> Result<StepReport> {
        let p = self.pending.take().ok_or(LearnerError::NoPendingGuess)?;
        let mut report = p.report;
        single_scale_update(&mut self.weights, &p.values, p.y, fb.sigma, self.p_prime);
        report.checks.push(normalization_check(&[&self.weights], 0));
        report.potential = Some(self.weights.max_weight());
        Ok(report)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMode {
    /// `η = 1/(2d^{10})`, `β_i = 2^{−100di}` and the literal counter caps.
    Paper,
    /// `η = 0.1`, `β_i = γ_i/16`, counter caps at most `10⁴`.
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyLinearConfig {
    pub dim: usize,
    /// Side of the grid cells.
    pub cell: f64,
    /// Number of weight functions `w_1, …, w_L`.
    pub scales: usize,
    pub mode: ConstantsMode,
    pub cell_cap: usize,
}

impl NoisyLinearConfig {
    /// Cells of side 0.02 up to `d = 2` and 0.05 at `d = 3`; as many scales
    /// as keep a strip of width `10γ_i` at least two cells wide.
    pub fn new(dim: usize, mode: ConstantsMode) -> Self {
        let cell = if dim <= 2 { 0.02 } else { 0.05 };
        let scales = ((10.0f64 / (2.0 * cell)).log2().floor() as usize).max(1);
        NoisyLinearConfig {
            dim,
            cell,
            scales,
            mode,
            cell_cap: DEFAULT_NOISY_CELL_CAP,
        }
    }

    pub fn eta(&self) -> f64 {
        match self.mode {
            ConstantsMode::Paper => 1.0 / (2.0 * (self.dim as f64).powi(10)),
            ConstantsMode::Empirical => 0.1,
        }
    }

    pub fn gamma(&self, i: usize) -> f64 {
        2f64.powi(-(i as i32))
    }

    pub fn beta(&self, i: usize) -> f64 {
        match self.mode {
            ConstantsMode::Paper => 2f64.powf(-100.0 * self.dim as f64 * i as f64),
            ConstantsMode::Empirical => self.gamma(i) / 16.0,
        }
    }

    /// Rounds at scale `i` after which scale `i + 1` becomes eligible.
    pub fn counter_cap(&self, i: usize) -> f64 {
        let d = self.dim as f64;
        let i_f = i as f64;
        let literal = 100.0 * (d.powi(4) * i_f / self.gamma(i).powf(10.0 * d) + d.powi(25) * i_f);
        match self.mode {
            ConstantsMode::Paper => literal,
            ConstantsMode::Empirical => literal.min(1e4),
        }
    }
}

/// Noisy linear contextual search over a grid of cells in the unit ball,
/// one weight function per scale.
#[derive(Clone, Debug)]
pub struct NoisyLinear {
    cfg: NoisyLinearConfig,
    /// Cell centers, row-major.
    centers: Vec<f64>,
    /// `fields[i − 1]` is `w_i`.
    fields: Vec<WeightField>,
    /// `counters[i − 1]` is `C_i`.
    counters: Vec<u64>,
    pending: Option<(usize, Pending)>,
}

impl NoisyLinear {
    pub fn new(cfg: NoisyLinearConfig) -> Result<Self> {
        if cfg.dim == 0 || cfg.dim > 3 {
            return Err(LearnerError::InvalidConfig(format!(
                "grid carrier supports 1 ≤ d ≤ 3, got {}",
                cfg.dim
            )));
        }
        if !(cfg.cell > 0.0 && cfg.cell <= 1.0) || cfg.scales == 0 {
            return Err(LearnerError::InvalidConfig(format!(
                "bad cell side {} or scale count {}",
                cfg.cell, cfg.scales
            )));
        }
        let per_axis = (2.0 / cfg.cell).ceil() as usize;
        let predicted = per_axis.pow(cfg.dim as u32);
        if predicted > cfg.cell_cap.saturating_mul(2) {
            return Err(LearnerError::GridTooFine {
                cells: predicted,
                cap: cfg.cell_cap,
            });
        }
        let mut centers = Vec::new();
        let mut idx = vec![0usize; cfg.dim];
        let mut c = vec![0.0; cfg.dim];
        'outer: loop {
            for k in 0..cfg.dim {
                c[k] = -1.0 + cfg.cell * (idx[k] as f64 + 0.5);
            }
            if dot(&c, &c) <= 1.0 {
                centers.extend_from_slice(&c);
            }
            for k in 0..cfg.dim {
                idx[k] += 1;
                if idx[k] < per_axis {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        let n = centers.len() / cfg.dim;
        if n > cfg.cell_cap {
            return Err(LearnerError::GridTooFine {
                cells: n,
                cap: cfg.cell_cap,
            });
        }
        Ok(NoisyLinear {
            fields: vec![WeightField::uniform(n); cfg.scales],
            counters: vec![0; cfg.scales],
            centers,
            cfg,
            pending: None,
        })
    }

    pub fn config(&self) -> &NoisyLinearConfig {
        &self.cfg
    }

    pub fn cells(&self) -> usize {
        self.centers.len() / self.cfg.dim
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.cfg.dim..(k + 1) * self.cfg.dim]
    }

    /// `w_i` for `1 ≤ i ≤ L`.
    pub fn field(&self, i: usize) -> &WeightField {
        &self.fields[i - 1]
    }

    pub fn counter(&self, i: usize) -> u64 {
        self.counters[i - 1]
    }

    fn projections(&self, x: &[f64]) -> Vec<f64> {
        self.centers
            .chunks_exact(self.cfg.dim)
            .map(|c| dot(c, x))
            .collect()
    }

    /// Strip condition for scale `i` along the sorted projections.
    pub fn strip_holds(&self, i: usize, values: &[f64], order: &[usize]) -> bool {
        let g = self.cfg.gamma(i);
        let need = 1.0 - g.powf(4.0 * self.cfg.dim as f64);
        self.field(i).max_strip_mass(values, order, 10.0 * g) >= need
    }

    /// `i_t`: the largest eligible scale; scale 1 always is.
    pub fn select_scale(&self, values: &[f64]) -> usize {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        for i in (2..=self.cfg.scales).rev() {
            if self.strip_holds(i, values, &order)
                || self.counter(i - 1) as f64 > self.cfg.counter_cap(i - 1)
            {
                return i;
            }
        }
        1
    }
}

impl Learner for NoisyLinear {
    fn name(&self) -> &'static str {
        "noisy_linear"
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        let x = vector_context(x)?;
        if x.dim() != self.cfg.dim {
            return Err(LearnerError::InvalidConfig(format!(
                "context of dimension {} for a {}-dimensional grid",
                x.dim(),
                self.cfg.dim
            )));
        }
        let values = self.projections(x);
        let i = self.select_scale(&values);
        let y = self.field(i).weighted_median(&values);
        let beta = self.cfg.beta(i);
        let delta = 2.0 * beta * (2.0 * rng.random::<f64>() - 1.0);
        let g = self.cfg.gamma(i);
        let scale = ScaleIndex {
            i: i as i32,
            bucket_lo: 5.0 * g,
            bucket_hi: 10.0 * g,
            z: beta,
        };
        let report = StepReport {
            scale: Some(scale),
            median: Some(y),
            perturbation: Some(delta),
            ..StepReport::default()
        };
        self.pending = Some((
            i,
            Pending {
                values,
                y: y + delta,
                scale: Some(scale),
                report,
            },
        ));
        Ok(y + delta)
    }

    fn update(&mut self, fb: &Feedback, _rng: &mut dyn RngCore) -> Result<StepReport> {
        let (i, p) = self.pending.take().ok_or(LearnerError::NoPendingGuess)?;
        let mut report = p.report;
        let eta = self.cfg.eta();
        let top = (i + 1).min(self.cfg.scales);
        for k in i..=top {
            penalize(&mut self.fields[k - 1], &p.values, p.y, fb.sigma, eta);
        }
        self.counters[i - 1] += 1;
        let touched: Vec<&WeightField> = (i..=top).map(|k| &self.fields[k - 1]).collect();
        report.checks.push(normalization_check(&touched, i as i32));
        report.scale = p.scale;
        report.potential = Some(self.fields[i - 1].max_weight());
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vector;
    use crate::rng::stream;

    #[test]
    fn constant_at_quarter_third() {
        assert!((noisy_constant(0.25, 1.0 / 3.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn single_scale_identity_on_small_field() {
        let w = WeightField::from_weights(&[0.1, 0.4, 0.3, 0.2]).unwrap();
        let values = [0.1, 0.2, 0.6, 0.9];
        // y = 0.5, truth at 0.8 above, f₁ = index 2 on the same side.
        let c = weight_increase_identity(&w, &values, 2, 0.5, 0.8, 0.25, 1.0 / 3.0);
        assert!(c.gap() < 1e-12, "{c:?}");
        // W⁻ = 0.5, c = 1/8: (1 − 1/16)/0.3.
        assert!((c.formula - (1.0 - 0.0625) / 0.3).abs() < 1e-12);
    }

    #[test]
    fn sameside_identity_and_bound() {
        let w = WeightField::from_weights(&[0.25, 0.25, 0.25, 0.25]).unwrap();
        let values = [-0.5, -0.1, 0.3, 0.7];
        let c = sameside_identity(&w, &values, 3, 0.0, 0.4, 1.0 / 3.0, 0.25);
        assert!(c.gap() < 1e-12, "{c:?}");
        assert!(c.enumerated <= c.bound.unwrap() + 1e-12);
    }

    #[test]
    fn paper_constants_at_d2() {
        let cfg = NoisyLinearConfig::new(2, ConstantsMode::Paper);
        assert!((cfg.eta() - 1.0 / 2048.0).abs() < 1e-18);
        assert_eq!(cfg.gamma(1), 0.5);
        assert_eq!(cfg.beta(1), 2f64.powi(-200));
        let e = NoisyLinearConfig::new(2, ConstantsMode::Empirical);
        assert_eq!(e.counter_cap(1), 1e4);
    }

    #[test]
    fn grid_and_scale_one() {
        let mut l = NoisyLinear::new(NoisyLinearConfig::new(2, ConstantsMode::Empirical)).unwrap();
        // Cells of side 0.02 inside the unit disk: about π/0.0004.
        let n = l.cells() as f64;
        assert!((n - std::f64::consts::PI / 4e-4).abs() < 0.01 * n);
        // Uniform weights: strips of width 5 and 2.5 cover the disk, the
        // width 1.25 strip misses mass, so scale 2 is chosen.
        let x = Vector::basis(2, 0);
        let values = l.projections(&x);
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        assert!(l.strip_holds(1, &values, &order));
        assert!(!l.strip_holds(3, &values, &order));
        assert_eq!(l.select_scale(&values), 2);
        let mut rng = stream(3, 0);
        let y = l.guess(&Context::Vector(x), &mut rng).unwrap();
        assert!(y.abs() <= 2.0 * l.config().beta(2) + 0.02);
        let r = l.update(&Feedback::binary(Sign::Plus), &mut rng).unwrap();
        assert!(r.checks.iter().all(|c| c.holds));
        assert_eq!(l.counter(2), 1);
        assert_eq!(l.counter(1), 0);
    }
}
