use serde::{Deserialize, Serialize};

use super::class::{Context, HypothesisClass};
use super::net::HypothesisNet;
use super::{HypothesisError, Result};
use crate::Sign;

/// Scales below this are never built; deeper requests clamp to the last one.
pub const MIN_SCALE: f64 = 1e-12;

/// `z_i = prefactor · base^{−exponent·(i+1)}` for `i = 0, 1, …`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRule {
    pub prefactor: f64,
    pub base: f64,
    pub exponent: f64,
}

impl LadderRule {
    /// `z_i = 3^{−d(i+1)}`.
    pub fn cubic(d: usize) -> Self {
        LadderRule {
            prefactor: 1.0,
            base: 3.0,
            exponent: d as f64,
        }
    }

    /// `z_i = prefactor · 2^{−(i+1)}`.
    pub fn dyadic(prefactor: f64) -> Self {
        LadderRule {
            prefactor,
            base: 2.0,
            exponent: 1.0,
        }
    }

    pub fn scale(&self, i: usize) -> f64 {
        self.prefactor * self.base.powf(-self.exponent * (i as f64 + 1.0))
    }

    /// Number of rungs with `z_i ≥` [`MIN_SCALE`].
    pub fn len(&self) -> usize {
        let mut n = 0;
        while n < 4096 && self.scale(n) >= MIN_SCALE {
            n += 1;
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scales(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.scale(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prefactor > 0.0 && self.base > 1.0 && self.exponent > 0.0) {
            return Err(HypothesisError::InvalidArgument(format!(
                "ladder needs prefactor > 0, base > 1, exponent > 0: {self:?}"
            )));
        }
        if self.is_empty() {
            return Err(HypothesisError::InvalidArgument(
                "ladder has no scale above the truncation floor".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Context,
    pub y: f64,
    pub sigma: Sign,
}

#[derive(Clone, Debug)]
struct Layer {
    net: HypothesisNet,
}

/// Margin-filtered nets `H_t^z` at several scales of one class.
///
/// Each stored net keeps only members that are alive with margin `2z`
/// (the alive mask itself uses margin `z`). A net at scale `z` requested after
/// some feedback has been seen is built around the stored members of the
/// finest net with scale `Z ≥ 2z`: any grid point alive at margin `2z` lies
/// within `Z` of a coarse grid point alive at margin `2z + Z ≤ 2Z`, so the
/// localized net, replayed against the history, equals the full net's
/// survivors.
#[derive(Clone, Debug)]
pub struct NetFamily {
    class: HypothesisClass,
    cap: usize,
    layers: Vec<Layer>,
    history: Vec<Observation>,
}

impl NetFamily {
    pub fn new(class: HypothesisClass, coarsest: f64, cap: usize) -> Result<Self> {
        let net = HypothesisNet::build_with_cap(&class, coarsest, cap)?;
        Ok(NetFamily {
            class,
            cap,
            layers: vec![Layer { net }],
            history: Vec::new(),
        })
    }

    pub fn class(&self) -> &HypothesisClass {
        &self.class
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn scales(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.net.scale()).collect()
    }

    fn position(&self, scale: f64) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| (l.net.scale() - scale).abs() <= 1e-12 * scale)
    }

    pub fn get(&self, scale: f64) -> Option<&HypothesisNet> {
        self.position(scale).map(|i| &self.layers[i].net)
    }

    /// The stored net with the smallest scale.
    pub fn finest(&self) -> &HypothesisNet {
        &self
            .layers
            .last()
            .expect("family holds at least one net")
            .net
    }

    pub fn coarsest(&self) -> &HypothesisNet {
        &self.layers[0].net
    }

    /// Finest stored net that still has an alive member.
    pub fn finest_nonempty(&self) -> Option<&HypothesisNet> {
        self.layers
            .iter()
            .rev()
            .map(|l| &l.net)
            .find(|n| n.alive_count() > 0)
    }

    /// Coarsest stored net that still has an alive member.
    pub fn coarsest_nonempty(&self) -> Option<&HypothesisNet> {
        self.layers
            .iter()
            .map(|l| &l.net)
            .find(|n| n.alive_count() > 0)
    }

    /// Net at `scale`, built if missing.
    pub fn ensure(&mut self, scale: f64) -> Result<&HypothesisNet> {
        if let Some(i) = self.position(scale) {
            return Ok(&self.layers[i].net);
        }
        if !(scale >= MIN_SCALE) {
            return Err(HypothesisError::InvalidArgument(format!(
                "scale {scale:e} below the truncation floor"
            )));
        }
        let source = self
            .layers
            .iter()
            .rev()
            .find(|l| l.net.scale() >= 2.0 * scale * (1.0 - 1e-12));
        let mut net = match source {
            Some(src) => {
                let centers: Vec<Vec<f64>> = (0..src.net.len())
                    .map(|i| src.net.dense_coords(i))
                    .collect();
                HypothesisNet::build_local(
                    &self.class,
                    scale,
                    centers.iter().map(|c| c.as_slice()),
                    src.net.scale(),
                    self.cap,
                )?
            }
            None => HypothesisNet::build_with_cap(&self.class, scale, self.cap)?,
        };
        let keep = replay(&mut net, &self.history)?;
        net.retain(&keep);
        let at = self
            .layers
            .iter()
            .position(|l| l.net.scale() < scale)
            .unwrap_or(self.layers.len());
        self.layers.insert(at, Layer { net });
        Ok(&self.layers[at].net)
    }

    /// Filters every net at its own margin and records the observation.
    /// Returns `(scale, alive before, alive after)` per net.
    pub fn observe(
        &mut self,
        x: &Context,
        y: f64,
        sigma: Sign,
    ) -> Result<Vec<(f64, usize, usize)>> {
        let s = sigma.value();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let z = layer.net.scale();
            let before = layer.net.alive_count();
            let mut keep = vec![true; layer.net.len()];
            let mut dropped = false;
            for (i, k) in keep.iter_mut().enumerate() {
                let slack = s * (y - layer.net.value(i, x)?);
                if slack < -z {
                    layer.net.kill(i);
                }
                if slack < -2.0 * z {
                    *k = false;
                    dropped = true;
                }
            }
            if dropped {
                layer.net.retain(&keep);
            }
            out.push((z, before, layer.net.alive_count()));
        }
        self.history.push(Observation {
            x: x.clone(),
            y,
            sigma,
        });
        Ok(out)
    }
}

/// Applies the history to a fresh net: alive at margin `z`, kept at `2z`.
fn replay(net: &mut HypothesisNet, history: &[Observation]) -> Result<Vec<bool>> {
    let z = net.scale();
    let mut keep = vec![true; net.len()];
    for (i, k) in keep.iter_mut().enumerate() {
        let mut alive = true;
        for obs in history.iter().rev() {
            let slack = obs.sigma.value() * (obs.y - net.value(i, &obs.x)?);
            if slack < -2.0 * z {
                *k = false;
                alive = false;
                break;
            }
            if slack < -z {
                alive = false;
            }
        }
        if !alive {
            net.kill(i);
        }
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vector;
    use crate::rng::stream;

    #[test]
    fn ladder_formulas() {
        assert!((LadderRule::cubic(2).scale(1) - 1.0 / 81.0).abs() < 1e-15);
        assert!((LadderRule::cubic(2).scale(0) - 1.0 / 9.0).abs() < 1e-15);
        let r = LadderRule::dyadic(0.25);
        assert!((r.scale(0) - 0.125).abs() < 1e-15);
        let s = r.scales();
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        assert!(*s.last().unwrap() >= MIN_SCALE);
        assert!(r.scale(s.len()) < MIN_SCALE);
        assert_eq!(LadderRule::cubic(12).len(), 2);
    }

    /// Survivors of a localized fine net coincide with those of the full net
    /// filtered from scratch.
    #[test]
    fn localized_nets_match_full_nets() {
        for class in [
            HypothesisClass::Linear { dim: 2 },
            HypothesisClass::SparseLinear {
                dim: 4,
                sparsity: 2,
            },
        ] {
            let dim = class.dim().unwrap();
            let mut rng = stream(4, 0);
            let truth = Vector::new({
                let mut v = vec![0.0; dim];
                v[0] = 0.45;
                v[1] = -0.3;
                v
            });
            let mut fam = NetFamily::new(class.clone(), 0.25, 1 << 22).unwrap();
            let mut full = HypothesisNet::build(&class, 0.05).unwrap();
            for _ in 0..12 {
                let x = Vector::random_unit(dim, &mut rng);
                let u = crate::geometry::dot(&truth, &x);
                let y = u + 0.3 * (rand::Rng::random::<f64>(&mut rng) - 0.5);
                let sigma = if y >= u { Sign::Plus } else { Sign::Minus };
                let ctx = Context::Vector(x);
                fam.observe(&ctx, y, sigma).unwrap();
                full.filter(&ctx, y, sigma, 0.05).unwrap();
            }
            fam.ensure(0.1).unwrap();
            let local = fam.ensure(0.05).unwrap();
            let key =
                |v: Vec<f64>| -> Vec<i64> { v.iter().map(|c| (c * 1e9).round() as i64).collect() };
            let mut a: Vec<Vec<i64>> = local
                .alive_indices()
                .map(|i| key(local.dense_coords(i)))
                .collect();
            let mut b: Vec<Vec<i64>> = full
                .alive_indices()
                .map(|i| key(full.dense_coords(i)))
                .collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{}", class.name());
            assert!(!a.is_empty());
        }
    }

    #[test]
    fn observe_reports_counts() {
        let mut fam = NetFamily::new(HypothesisClass::Linear { dim: 1 }, 0.5, 100).unwrap();
        let before = fam.finest().alive_count();
        let x = Context::Vector(Vector::basis(1, 0));
        let r = fam.observe(&x, 0.1, Sign::Plus).unwrap();
        assert_eq!(r[0].1, before);
        // Survivors satisfy f(x) ≤ 0.1 + 0.5.
        assert_eq!(r[0].2, 4);
    }
}
