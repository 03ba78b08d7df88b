use std::io::Read;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::{EnvironmentError, Result};
use crate::geometry::Vector;
use crate::hypothesis::{Context, Hypothesis, HypothesisClass};

/// The hidden function `f₀` and the class it belongs to.
#[derive(Clone, Debug)]
pub struct Target {
    pub class: HypothesisClass,
    pub hypothesis: Hypothesis,
}

impl Target {
    pub fn new(class: HypothesisClass, hypothesis: Hypothesis) -> Result<Self> {
        if !class.contains(&hypothesis) {
            return Err(EnvironmentError::Adversary(format!(
                "{hypothesis:?} is not a member of the {} class",
                class.name()
            )));
        }
        Ok(Target { class, hypothesis })
    }

    /// Linear target `v`.
    pub fn linear(v: Vector) -> Result<Self> {
        Self::new(
            HypothesisClass::Linear { dim: v.dim() },
            Hypothesis::Linear(v),
        )
    }

    /// A member drawn at random: uniform in the ball for linear classes
    /// (on a random support for sparse ones), uniform in the cube for unit
    /// demand, a uniform row for tables.
    pub fn random(class: HypothesisClass, rng: &mut dyn RngCore) -> Self {
        let hypothesis = match &class {
            HypothesisClass::Linear { dim } => {
                Hypothesis::Linear(Vector::random_in_ball(*dim, 1.0, rng))
            }
            HypothesisClass::SparseLinear { dim, sparsity } => {
                let mut axes: Vec<usize> = (0..*dim).collect();
                axes.shuffle(rng);
                let inner = Vector::random_in_ball(*sparsity, 1.0, rng);
                let mut v = vec![0.0; *dim];
                for (k, &a) in axes.iter().take(*sparsity).enumerate() {
                    v[a] = inner[k];
                }
                Hypothesis::Linear(Vector::new(v))
            }
            HypothesisClass::UnitDemand { dim } => Hypothesis::UnitDemand(Vector::new(
                (0..*dim).map(|_| rng.random::<f64>()).collect(),
            )),
            HypothesisClass::FiniteTable(t) => Hypothesis::Row(rng.random_range(0..t.len())),
        };
        Target { class, hypothesis }
    }

    pub fn value(&self, x: &Context) -> Result<f64> {
        Ok(self.class.evaluate(&self.hypothesis, x)?)
    }
}

/// Chooses the context of every round. Rounds are numbered from 1.
pub trait Adversary: Send {
    fn name(&self) -> &'static str;

    fn target(&self) -> &Target;

    fn next_context(&mut self, t: usize, rng: &mut dyn RngCore) -> Result<Context>;
}

impl<A: Adversary + ?Sized> Adversary for Box<A> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn target(&self) -> &Target {
        (**self).target()
    }

    fn next_context(&mut self, t: usize, rng: &mut dyn RngCore) -> Result<Context> {
        (**self).next_context(t, rng)
    }
}

fn vector_dim(target: &Target) -> Result<usize> {
    target.class.dim().ok_or_else(|| {
        EnvironmentError::Adversary("this adversary emits vectors; the class is a table".into())
    })
}

/// Independent uniform directions on the sphere.
#[derive(Clone, Debug)]
pub struct RandomUnit {
    dim: usize,
    target: Target,
}

impl RandomUnit {
    pub fn new(target: Target) -> Result<Self> {
        Ok(RandomUnit {
            dim: vector_dim(&target)?,
            target,
        })
    }
}

impl Adversary for RandomUnit {
    fn name(&self) -> &'static str {
        "random_unit"
    }

    fn target(&self) -> &Target {
        &self.target
    }

    fn next_context(&mut self, _t: usize, rng: &mut dyn RngCore) -> Result<Context> {
        Ok(Context::Vector(Vector::random_unit(self.dim, rng)))
    }
}

/// `e₁, e₂, …, e_d, e₁, …`.
#[derive(Clone, Debug)]
pub struct CyclingBasis {
    dim: usize,
    target: Target,
}

impl CyclingBasis {
    pub fn new(target: Target) -> Result<Self> {
        Ok(CyclingBasis {
            dim: vector_dim(&target)?,
            target,
        })
    }
}

impl Adversary for CyclingBasis {
    fn name(&self) -> &'static str {
        "cycling_basis"
    }

    fn target(&self) -> &Target {
        &self.target
    }

    fn next_context(&mut self, t: usize, _rng: &mut dyn RngCore) -> Result<Context> {
        Ok(Context::Vector(Vector::basis(
            self.dim,
            (t.max(1) - 1) % self.dim,
        )))
    }
}

/// Context indices `0, 1, …, n − 1, 0, …` of a finite table.
#[derive(Clone, Debug)]
pub struct CyclingIndex {
    contexts: usize,
    target: Target,
}

impl CyclingIndex {
    pub fn new(target: Target) -> Result<Self> {
        let contexts = match &target.class {
            HypothesisClass::FiniteTable(t) => t.context_count(),
            _ => {
                return Err(EnvironmentError::Adversary(
                    "cycling_index needs a finite table".into(),
                ))
            }
        };
        Ok(CyclingIndex { contexts, target })
    }
}

impl Adversary for CyclingIndex {
    fn name(&self) -> &'static str {
        "cycling_index"
    }

    fn target(&self) -> &Target {
        &self.target
    }

    fn next_context(&mut self, t: usize, _rng: &mut dyn RngCore) -> Result<Context> {
        Ok(Context::Index((t.max(1) - 1) % self.contexts))
    }
}

/// Replays a list of contexts, wrapping around when the run is longer.
#[derive(Clone, Debug)]
pub struct FixedSequence {
    contexts: Vec<Context>,
    target: Target,
}

impl FixedSequence {
    pub fn new(contexts: Vec<Context>, target: Target) -> Result<Self> {
        if contexts.is_empty() {
            return Err(EnvironmentError::Adversary("empty context sequence".into()));
        }
        for x in &contexts {
            target.class.check_context(x)?;
        }
        Ok(FixedSequence { contexts, target })
    }

    /// Headerless CSV: one context per row, either `d` coordinates
    /// (normalized to unit length) or a single column index for tables.
    pub fn from_csv(reader: impl Read, target: Target) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let table = matches!(target.class, HypothesisClass::FiniteTable(_));
        let mut contexts = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| EnvironmentError::Io(e.to_string()))?;
            let bad = |what: &str| EnvironmentError::Adversary(format!("row {}: {what}", line + 1));
            if table {
                if rec.len() != 1 {
                    return Err(bad("expected a single context index"));
                }
                let j: usize = rec[0].parse().map_err(|_| bad("not an index"))?;
                contexts.push(Context::Index(j));
            } else {
                let v: Vec<f64> = rec
                    .iter()
                    .map(|f| f.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("not a number"))?;
                let v = Vector::new(v)
                    .normalized()
                    .ok_or_else(|| bad("zero or non-finite row"))?;
                contexts.push(Context::Vector(v));
            }
        }
        Self::new(contexts, target)
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }
}

impl Adversary for FixedSequence {
    fn name(&self) -> &'static str {
        "fixed_sequence"
    }

    fn target(&self) -> &Target {
        &self.target
    }

    fn next_context(&mut self, t: usize, _rng: &mut dyn RngCore) -> Result<Context> {
        Ok(self.contexts[(t.max(1) - 1) % self.contexts.len()].clone())
    }
}

/// Pricing lower-bound instance: the hidden vector is a uniformly chosen
/// basis vector, and each block of `d` rounds shows the cyclic shifts of
/// `x₁ = (1/√2, 1/√(2(d−1)), …, 1/√(2(d−1)))` in a fresh random order.
#[derive(Clone, Debug)]
pub struct SparsePricing {
    dim: usize,
    x1: Vec<f64>,
    order: Vec<usize>,
    target: Target,
}

impl SparsePricing {
    /// Draws the hidden basis vector from `rng`.
    pub fn new(dim: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if dim < 2 {
            return Err(EnvironmentError::Adversary(
                "sparse_pricing needs d ≥ 2".into(),
            ));
        }
        let j = rng.random_range(0..dim);
        let target = Target::new(
            HypothesisClass::SparseLinear { dim, sparsity: 1 },
            Hypothesis::Linear(Vector::basis(dim, j)),
        )?;
        let rest = 1.0 / (2.0 * (dim as f64 - 1.0)).sqrt();
        let mut x1 = vec![rest; dim];
        x1[0] = std::f64::consts::FRAC_1_SQRT_2;
        Ok(SparsePricing {
            dim,
            x1,
            order: (0..dim).collect(),
            target,
        })
    }

    pub fn base_context(&self) -> &[f64] {
        &self.x1
    }

    /// `x₁` rotated so its large coordinate sits at `shift`.
    pub fn shifted(&self, shift: usize) -> Vector {
        let d = self.dim;
        Vector::new((0..d).map(|i| self.x1[(i + d - shift % d) % d]).collect())
    }
}

impl Adversary for SparsePricing {
    fn name(&self) -> &'static str {
        "sparse_pricing"
    }

    fn target(&self) -> &Target {
        &self.target
    }

    fn next_context(&mut self, t: usize, rng: &mut dyn RngCore) -> Result<Context> {
        let k = (t.max(1) - 1) % self.dim;
        if k == 0 {
            self.order.shuffle(rng);
        }
        Ok(Context::Vector(self.shifted(self.order[k])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn origin(d: usize) -> Target {
        Target::linear(Vector::zeros(d)).unwrap()
    }

    #[test]
    fn cycling_basis_wraps() {
        let mut a = CyclingBasis::new(origin(3)).unwrap();
        let mut rng = stream(0, 1);
        let x = a.next_context(5, &mut rng).unwrap();
        assert_eq!(x, Context::Vector(Vector::basis(3, 1)));
        assert_eq!(
            a.next_context(1, &mut rng).unwrap(),
            Context::Vector(Vector::basis(3, 0))
        );
    }

    #[test]
    fn sparse_pricing_norm_and_blocks() {
        let mut rng = stream(1, 1);
        let mut a = SparsePricing::new(4, &mut rng).unwrap();
        let x1 = a.base_context();
        assert!((x1.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((x1[1] * x1[1] - 1.0 / 6.0).abs() < 1e-15);
        for block in 0..5 {
            let mut big = Vec::new();
            for k in 1..=4 {
                let x = a.next_context(4 * block + k, &mut rng).unwrap();
                let v = x.as_vector().unwrap();
                assert!((v.norm() - 1.0).abs() < 1e-12);
                big.push(v.iter().position(|c| *c > 0.7).unwrap());
            }
            big.sort_unstable();
            assert_eq!(big, vec![0, 1, 2, 3]);
        }
        match &a.target().hypothesis {
            Hypothesis::Linear(v) => assert_eq!(v.iter().filter(|c| **c == 1.0).count(), 1),
            h => panic!("{h:?}"),
        }
    }

    #[test]
    fn random_unit_mean_is_zero() {
        let mut a = RandomUnit::new(origin(3)).unwrap();
        let mut rng = stream(2, 1);
        let n = 100_000;
        let mut mean = [0.0; 3];
        for t in 1..=n {
            let x = a.next_context(t, &mut rng).unwrap();
            for (m, c) in mean.iter_mut().zip(x.as_vector().unwrap().iter()) {
                *m += c / n as f64;
            }
        }
        // Each coordinate has variance 1/d.
        let sigma = (1.0 / 3.0 / n as f64).sqrt();
        assert!(mean.iter().all(|m| m.abs() <= 3.0 * sigma), "{mean:?}");
    }

    #[test]
    fn fixed_sequence_from_csv() {
        let text = "# two rows\n3, 4\n0,-2\n";
        let mut a = FixedSequence::from_csv(text.as_bytes(), origin(2)).unwrap();
        let mut rng = stream(0, 1);
        let x = a.next_context(1, &mut rng).unwrap();
        assert_eq!(x, Context::Vector(Vector::new(vec![0.6, 0.8])));
        assert_eq!(
            a.next_context(4, &mut rng).unwrap(),
            Context::Vector(Vector::new(vec![0.0, -1.0]))
        );
        assert!(FixedSequence::from_csv("1,2,3\n".as_bytes(), origin(2)).is_err());
        assert!(FixedSequence::from_csv("0,0\n".as_bytes(), origin(2)).is_err());
    }

    #[test]
    fn random_targets_are_members() {
        let mut rng = stream(3, 4);
        for class in [
            HypothesisClass::Linear { dim: 3 },
            HypothesisClass::SparseLinear {
                dim: 12,
                sparsity: 2,
            },
            HypothesisClass::UnitDemand { dim: 2 },
        ] {
            for _ in 0..50 {
                let t = Target::random(class.clone(), &mut rng);
                assert!(class.contains(&t.hypothesis), "{:?}", t.hypothesis);
            }
        }
    }
}
