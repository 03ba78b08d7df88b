use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steiner_core::learners::ConstantsMode;

use crate::ConfigError;

pub const LEARNERS: [&str; 9] = [
    "steiner_symmetric",
    "steiner_pricing",
    "midpoint",
    "exact_median",
    "single_scale_general",
    "multi_scale_general",
    "noisy_single_scale",
    "noisy_linear",
    "cbs",
];

pub const ADVERSARIES: [&str; 6] = [
    "random_unit",
    "cycling_basis",
    "cycling_index",
    "fixed_sequence",
    "sparse_pricing",
    "tree_lower_bound",
];

pub const CLASSES: [&str; 5] = [
    "linear",
    "sparse_linear",
    "unit_demand",
    "table",
    "separation",
];

pub const LOSSES: [&str; 3] = ["symmetric", "pricing", "power"];

/// One experiment: a learner, an adversary and a loss, run once per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub learner: String,
    pub constants: ConstantsMode,
    /// Use the perturbed variant of the Steiner learners.
    pub perturbed: bool,
    pub adversary: String,
    /// CSV of context rows for `fixed_sequence`.
    pub contexts: Option<PathBuf>,
    /// Hidden vector; drawn from the class when absent.
    pub target: Option<Vec<f64>>,
    /// Hidden row of a finite class.
    pub target_row: Option<usize>,
    pub class: String,
    pub sparsity: usize,
    /// Finite class JSON for `class = "table"`.
    pub class_path: Option<PathBuf>,
    /// Size of the separation fixture.
    pub n: usize,
    pub loss: String,
    pub alpha: f64,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub p: f64,
    pub pprime: f64,
    pub seeds: Vec<u64>,
    pub mc_samples: usize,
    pub out: PathBuf,
    pub emit_plot_script: bool,
    pub snapshot_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            learner: "steiner_symmetric".into(),
            constants: ConstantsMode::Empirical,
            perturbed: false,
            adversary: "random_unit".into(),
            contexts: None,
            target: None,
            target_row: None,
            class: "linear".into(),
            sparsity: 1,
            class_path: None,
            n: 8,
            loss: "symmetric".into(),
            alpha: 0.5,
            d: 2,
            horizon: 100,
            p: 0.0,
            pprime: 1.0 / 3.0,
            seeds: vec![0],
            mc_samples: 8192,
            out: PathBuf::from("out"),
            emit_plot_script: false,
            snapshot_every: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))
    }

    pub fn is_noisy_learner(&self) -> bool {
        matches!(self.learner.as_str(), "noisy_single_scale" | "noisy_linear")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let one_of = |what: &str, v: &str, allowed: &[&str]| {
            if allowed.contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::new(format!(
                    "unknown {what} {v:?}; expected one of {}",
                    allowed.join(", ")
                )))
            }
        };
        one_of("learner", &self.learner, &LEARNERS)?;
        one_of("adversary", &self.adversary, &ADVERSARIES)?;
        one_of("class", &self.class, &CLASSES)?;
        one_of("loss", &self.loss, &LOSSES)?;
        if self.d == 0 {
            return Err(ConfigError::new("d must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.p) {
            return Err(ConfigError::new(format!(
                "p must lie in [0, 1/2), got {}",
                self.p
            )));
        }
        if self.is_noisy_learner() && !(self.p < self.pprime && self.pprime < 0.5) {
            return Err(ConfigError::new(format!(
                "noisy learners need p < p' < 1/2, got p = {}, p' = {}",
                self.p, self.pprime
            )));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("no seeds"));
        }
        if self.mc_samples < 64 {
            return Err(ConfigError::new("mc_samples must be at least 64"));
        }
        if self.loss == "power" && !(self.alpha > 0.0) {
            return Err(ConfigError::new("power loss needs alpha > 0"));
        }
        if self.class == "table" && self.class_path.is_none() {
            return Err(ConfigError::new("class \"table\" needs class_path"));
        }
        if self.class == "separation" && self.n < 2 {
            return Err(ConfigError::new("separation fixture needs n >= 2"));
        }
        if self.adversary == "fixed_sequence" && self.contexts.is_none() {
            return Err(ConfigError::new("fixed_sequence needs a contexts CSV"));
        }
        if self.class == "sparse_linear" && !(1..=self.d).contains(&self.sparsity) {
            return Err(ConfigError::new("sparsity must lie in 1..=d"));
        }
        Ok(())
    }
}

/// Parses `a..b`, `a..=b`, `a,b,c` or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, ConfigError> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|e| ConfigError::new(format!("bad seed {t:?}: {e}")))
    };
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(ConfigError::new(format!("seed range {s:?} is empty")));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("7, 9").unwrap(), vec![7, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn json_overrides_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"learner": "midpoint", "T": 30, "d": 1}"#).unwrap();
        assert_eq!(c.horizon, 30);
        assert_eq!(c.loss, "symmetric");
        c.validate().unwrap();
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"horizon": 3}"#).is_err());
    }

    #[test]
    fn noisy_learners_need_ordered_noise() {
        let mut c = ExperimentConfig {
            learner: "noisy_single_scale".into(),
            p: 0.25,
            pprime: 0.2,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        c.pprime = 1.0 / 3.0;
        c.validate().unwrap();
    }
}
