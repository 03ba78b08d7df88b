use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use steiner_core::environment::{
    run_episode, Adversary, CyclingBasis, CyclingIndex, EpisodeConfig, FixedSequence, LossFunction,
    RandomUnit, RegretTrace, SparsePricing, Target, TraceSummary,
};
use steiner_core::geometry::Vector;
use steiner_core::hypothesis::{Hypothesis, HypothesisClass};
use steiner_core::learners::{
    Baseline, BaselineRule, Learner, MultiScaleGeneral, NoisyLinear, NoisyLinearConfig,
    NoisySingleScale, Perturbation, SingleScaleGeneral, SteinerConfig, SteinerPricing,
    SteinerSymmetric,
};
use steiner_core::rng::{stream, ADVERSARY_STREAM, FIXTURE_STREAM, TARGET_STREAM};
use steiner_core::treedim::{separation_fixture, tree_dimension, Cbs, FiniteClass, TreeLowerBound};

use crate::{ConfigError, ExperimentConfig};

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "STEINER_SEARCH_THREADS";

pub struct Episode {
    pub learner: Box<dyn Learner>,
    pub adversary: Box<dyn Adversary>,
    pub loss: LossFunction,
}

fn bad(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::new(e.to_string())
}

fn finite_class(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Option<Arc<FiniteClass>>, ConfigError> {
    match cfg.class.as_str() {
        "table" => {
            let path = cfg.class_path.as_ref().expect("validated");
            Ok(Some(Arc::new(FiniteClass::load(path).map_err(bad)?)))
        }
        "separation" => Ok(Some(Arc::new(separation_fixture(
            cfg.n,
            &mut stream(seed, FIXTURE_STREAM),
        )))),
        _ => Ok(None),
    }
}

fn target(
    cfg: &ExperimentConfig,
    class: HypothesisClass,
    seed: u64,
) -> Result<Target, ConfigError> {
    if let Some(v) = &cfg.target {
        let h = match class {
            HypothesisClass::UnitDemand { .. } => Hypothesis::UnitDemand(Vector::new(v.clone())),
            _ => Hypothesis::Linear(Vector::new(v.clone())),
        };
        return Target::new(class, h).map_err(bad);
    }
    if let Some(r) = cfg.target_row {
        return Target::new(class, Hypothesis::Row(r)).map_err(bad);
    }
    Ok(Target::random(class, &mut stream(seed, TARGET_STREAM)))
}

fn loss(cfg: &ExperimentConfig) -> LossFunction {
    match cfg.loss.as_str() {
        "pricing" => LossFunction::Pricing,
        "power" => LossFunction::Power { alpha: cfg.alpha },
        _ => LossFunction::Symmetric,
    }
}

/// Learner, adversary and loss for one seed.
pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Episode, ConfigError> {
    let finite = finite_class(cfg, seed)?;
    let class = match (&finite, cfg.class.as_str()) {
        (Some(f), _) => f.hypothesis_class(),
        (None, "sparse_linear") => HypothesisClass::SparseLinear {
            dim: cfg.d,
            sparsity: cfg.sparsity,
        },
        (None, "unit_demand") => HypothesisClass::UnitDemand { dim: cfg.d },
        (None, _) => HypothesisClass::Linear { dim: cfg.d },
    };
    let adversary: Box<dyn Adversary> = match cfg.adversary.as_str() {
        "random_unit" => Box::new(RandomUnit::new(target(cfg, class, seed)?).map_err(bad)?),
        "cycling_basis" => Box::new(CyclingBasis::new(target(cfg, class, seed)?).map_err(bad)?),
        "cycling_index" => Box::new(CyclingIndex::new(target(cfg, class, seed)?).map_err(bad)?),
        "fixed_sequence" => {
            let path = cfg.contexts.as_ref().expect("validated");
            let file = fs::File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
            Box::new(FixedSequence::from_csv(file, target(cfg, class, seed)?).map_err(bad)?)
        }
        "sparse_pricing" => {
            Box::new(SparsePricing::new(cfg.d, &mut stream(seed, TARGET_STREAM)).map_err(bad)?)
        }
        _ => {
            let f = finite
                .as_ref()
                .ok_or_else(|| bad("tree_lower_bound needs a finite class"))?;
            let (_, tree) = tree_dimension(f).map_err(bad)?;
            Box::new(
                TreeLowerBound::new(&tree, f, &mut stream(seed, ADVERSARY_STREAM)).map_err(bad)?,
            )
        }
    };
    let class = adversary.target().class.clone();
    let d = class.dim().unwrap_or(cfg.d);
    let horizon = cfg.horizon.max(1);
    let mut steiner = SteinerConfig::with_samples(cfg.mc_samples);
    if cfg.perturbed {
        steiner.perturbation = Some(Perturbation { horizon });
    }
    let vector_only = |name: &str| {
        if matches!(
            class,
            HypothesisClass::Linear { .. } | HypothesisClass::SparseLinear { .. }
        ) {
            Ok(())
        } else {
            Err(bad(format!("{name} needs a linear class")))
        }
    };
    let learner: Box<dyn Learner> = match cfg.learner.as_str() {
        "steiner_symmetric" => {
            vector_only("steiner_symmetric")?;
            Box::new(SteinerSymmetric::new(d, steiner).map_err(bad)?)
        }
        "steiner_pricing" => {
            vector_only("steiner_pricing")?;
            Box::new(SteinerPricing::new(d, horizon, steiner).map_err(bad)?)
        }
        "midpoint" => {
            vector_only("midpoint")?;
            Box::new(Baseline::new(d, BaselineRule::Midpoint, steiner).map_err(bad)?)
        }
        "exact_median" => {
            vector_only("exact_median")?;
            Box::new(Baseline::new(d, BaselineRule::ExactMedian, steiner).map_err(bad)?)
        }
        "single_scale_general" => Box::new(SingleScaleGeneral::new(&class, horizon).map_err(bad)?),
        "multi_scale_general" => Box::new(MultiScaleGeneral::new(class).map_err(bad)?),
        "noisy_single_scale" => {
            Box::new(NoisySingleScale::new(&class, horizon, cfg.p, cfg.pprime).map_err(bad)?)
        }
        "noisy_linear" => {
            vector_only("noisy_linear")?;
            Box::new(NoisyLinear::new(NoisyLinearConfig::new(d, cfg.constants)).map_err(bad)?)
        }
        _ => {
            let f = finite.ok_or_else(|| bad("cbs needs a finite class"))?;
            Box::new(Cbs::new(f))
        }
    };
    Ok(Episode {
        learner,
        adversary,
        loss: loss(cfg),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub hard: bool,
    pub total: usize,
    pub violations: usize,
}

/// Everything written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: ExperimentConfig,
    pub total_loss: Stat,
    pub scale_rounds: BTreeMap<i32, usize>,
    pub checks: BTreeMap<String, Tally>,
    pub hard_violations: usize,
    pub errors: Vec<String>,
    pub runs: Vec<TraceSummary>,
}

impl Aggregate {
    pub fn new(config: &ExperimentConfig, traces: &[RegretTrace]) -> Self {
        let runs: Vec<TraceSummary> = traces.iter().map(RegretTrace::summary).collect();
        let mut scale_rounds = BTreeMap::new();
        let mut checks: BTreeMap<String, Tally> = BTreeMap::new();
        for r in &runs {
            for (s, n) in &r.scale_rounds {
                *scale_rounds.entry(*s).or_insert(0) += n;
            }
            for c in &r.checks {
                let t = checks.entry(c.lemma.name().to_owned()).or_default();
                t.hard = c.hard;
                t.total += c.total;
                t.violations += c.violations;
            }
        }
        let losses: Vec<f64> = runs.iter().map(|r| r.total_loss).collect();
        Aggregate {
            config: config.clone(),
            total_loss: Stat::of(&losses),
            scale_rounds,
            checks,
            hard_violations: runs.iter().map(|r| r.hard_violations).sum(),
            errors: runs
                .iter()
                .filter_map(|r| r.error.as_ref().map(|e| format!("seed {}: {e}", r.seed)))
                .collect(),
            runs,
        }
    }

    /// 0 when every hard check held and every episode finished, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.hard_violations > 0 || !self.errors.is_empty())
    }
}

/// Worker count: `STEINER_SEARCH_THREADS` when set, else rayon's default.
pub fn thread_count() -> Result<usize, ConfigError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(bad(format!(
                "{THREADS_VAR} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

/// Runs every seed; traces come back in seed order.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<RegretTrace>, ConfigError> {
    cfg.validate()?;
    build(cfg, cfg.seeds[0])?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(bad)?;
    let ep = EpisodeConfig {
        horizon: cfg.horizon,
        seed: 0,
        p: cfg.p,
        snapshot_every: cfg.snapshot_every,
        consistency_every: 1,
    };
    pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let mut e = build(cfg, seed)?;
                let ec = EpisodeConfig { seed, ..ep };
                run_episode(&mut e.learner, &mut e.adversary, &e.loss, &ec).map_err(bad)
            })
            .collect()
    })
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub seconds: f64,
    pub threads: usize,
}

/// Runs the grid and writes traces, `summary.json`, `runtime.json` and, if
/// asked, a plotting script. Returns the aggregate and the exit code.
pub fn run(cfg: &ExperimentConfig) -> Result<(Aggregate, i32), ConfigError> {
    let start = Instant::now();
    let traces = run_grid(cfg)?;
    let agg = Aggregate::new(cfg, &traces);
    write_outputs(cfg, &traces, &agg, start.elapsed().as_secs_f64())?;
    let code = agg.exit_code();
    Ok((agg, code))
}

fn io(path: &Path, e: impl std::fmt::Display) -> ConfigError {
    bad(format!("{}: {e}", path.display()))
}

pub fn write_outputs(
    cfg: &ExperimentConfig,
    traces: &[RegretTrace],
    agg: &Aggregate,
    seconds: f64,
) -> Result<(), ConfigError> {
    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for t in traces {
        let path = trace_path(dir, t.config.seed);
        let file = fs::File::create(&path).map_err(|e| io(&path, e))?;
        t.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| io(&path, e))?;
    }
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io(&path, e))
    };
    write(
        "summary.json",
        serde_json::to_string_pretty(agg).map_err(bad)? + "\n",
    )?;
    let runtime = Runtime {
        seconds,
        threads: thread_count()?,
    };
    write(
        "runtime.json",
        serde_json::to_string_pretty(&runtime).map_err(bad)? + "\n",
    )?;
    if cfg.emit_plot_script {
        write("plot_cumulative_loss.py", plot_script(&cfg.seeds))?;
    }
    Ok(())
}

fn plot_script(seeds: &[u64]) -> String {
    let files: Vec<String> = seeds
        .iter()
        .map(|s| format!("\"trace_seed{s}.csv\""))
        .collect();
    format!(
        r#"# Cumulative loss against rounds, one curve per seed.
import csv
import os
import sys

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
for name in [{}]:
    with open(os.path.join(here, name)) as f:
        rows = list(csv.DictReader(f))
    plt.plot([int(r["t"]) for r in rows], [float(r["cum_loss"]) for r in rows], label=name)
plt.xlabel("round")
plt.ylabel("cumulative loss")
plt.legend()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "cumulative_loss.png"))
"#,
        files.join(", ")
    )
}
