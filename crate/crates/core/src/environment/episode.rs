use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{true_feedback, Adversary, EnvironmentError, FeedbackChannel, LossFunction, Result};
use crate::hypothesis::Context;
use crate::learners::{Feedback, Flag, Learner, Lemma, LemmaCheck};
use crate::rng::{stream, ADVERSARY_STREAM, CHANNEL_STREAM, LEARNER_STREAM};
use crate::Sign;

/// Column order of [`RegretTrace::write_csv`].
pub const CSV_COLUMNS: [&str; 9] = [
    "t",
    "y",
    "u",
    "sigma_sent",
    "sigma_recv",
    "loss",
    "cum_loss",
    "scale",
    "potential",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub seed: u64,
    /// Flip probability of the feedback channel.
    pub p: f64,
    /// Keep the learner's potential every this many rounds (0: never).
    pub snapshot_every: usize,
    /// Ask the learner whether it still admits the target every this many
    /// rounds of a noiseless run (0: never).
    pub consistency_every: usize,
}

impl EpisodeConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        EpisodeConfig {
            horizon,
            seed,
            p: 0.0,
            snapshot_every: 1,
            consistency_every: 1,
        }
    }

    pub fn with_noise(mut self, p: f64) -> Self {
        self.p = p;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub x: Context,
    pub y: f64,
    pub u: f64,
    pub sigma_sent: Sign,
    pub sigma_recv: Sign,
    pub loss: f64,
    pub cum_loss: f64,
    pub scale: Option<i32>,
    pub potential: Option<f64>,
    /// Median the learner derived its guess from.
    pub median: Option<f64>,
    pub perturbation: Option<f64>,
    pub checks: Vec<LemmaCheck>,
    pub flags: Vec<Flag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub learner: String,
    pub adversary: String,
    pub loss: String,
    pub config: EpisodeConfig,
    pub records: Vec<RoundRecord>,
    pub flips: u64,
    /// Set when a learner or adversary call failed; `records` holds the
    /// rounds completed before it.
    pub error: Option<String>,
}

impl RegretTrace {
    pub fn total_loss(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_loss)
    }

    /// Cumulative loss after round `t` (0 for `t = 0`).
    pub fn loss_at(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        self.records
            .get(t.min(self.records.len()) - 1)
            .map_or(0.0, |r| r.cum_loss)
    }

    pub fn checks(&self) -> impl Iterator<Item = &LemmaCheck> {
        self.records.iter().flat_map(|r| r.checks.iter())
    }

    pub fn hard_violations(&self) -> usize {
        self.checks()
            .filter(|c| c.lemma.is_hard() && !c.holds)
            .count()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| EnvironmentError::Io(e.to_string());
        out.write_record(CSV_COLUMNS).map_err(io)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.records {
            out.write_record([
                r.t.to_string(),
                r.y.to_string(),
                r.u.to_string(),
                r.sigma_sent.as_i8().to_string(),
                r.sigma_recv.as_i8().to_string(),
                r.loss.to_string(),
                r.cum_loss.to_string(),
                opt(r.scale.map(|s| s.to_string())),
                opt(r.potential.map(|p| p.to_string())),
            ])
            .map_err(io)?;
        }
        out.flush()
            .map_err(|e| EnvironmentError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn summary(&self) -> TraceSummary {
        let mut scale_rounds = BTreeMap::new();
        let mut flags = BTreeMap::new();
        let mut checks: BTreeMap<(Lemma, i32), CheckTally> = BTreeMap::new();
        for r in &self.records {
            if let Some(s) = r.scale {
                *scale_rounds.entry(s).or_insert(0) += 1;
            }
            for f in &r.flags {
                let key = serde_json::to_value(f)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default();
                *flags.entry(key).or_insert(0) += 1;
            }
            for c in &r.checks {
                let e = checks.entry((c.lemma, c.scale)).or_insert(CheckTally {
                    lemma: c.lemma,
                    scale: c.scale,
                    hard: c.lemma.is_hard(),
                    total: 0,
                    violations: 0,
                    mean_measured: 0.0,
                });
                e.total += 1;
                e.violations += usize::from(!c.holds);
                e.mean_measured += c.measured;
            }
        }
        let mut checks: Vec<CheckTally> = checks.into_values().collect();
        for c in &mut checks {
            c.mean_measured /= c.total as f64;
        }
        TraceSummary {
            learner: self.learner.clone(),
            adversary: self.adversary.clone(),
            loss: self.loss.clone(),
            seed: self.config.seed,
            horizon: self.config.horizon,
            rounds: self.records.len(),
            total_loss: self.total_loss(),
            flip_rate: if self.records.is_empty() {
                0.0
            } else {
                self.flips as f64 / self.records.len() as f64
            },
            scale_rounds,
            flags,
            hard_violations: self.hard_violations(),
            checks,
            error: self.error.clone(),
        }
    }
}

/// Outcome of one kind of per-round check at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub lemma: Lemma,
    pub scale: i32,
    pub hard: bool,
    pub total: usize,
    pub violations: usize,
    pub mean_measured: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub learner: String,
    pub adversary: String,
    pub loss: String,
    pub seed: u64,
    pub horizon: usize,
    pub rounds: usize,
    pub total_loss: f64,
    pub flip_rate: f64,
    pub scale_rounds: BTreeMap<i32, usize>,
    pub flags: BTreeMap<String, usize>,
    pub hard_violations: usize,
    pub checks: Vec<CheckTally>,
    pub error: Option<String>,
}

/// Plays `cfg.horizon` rounds of context, guess, loss, feedback and update.
///
/// The adversary, the channel and the learner draw from separate streams of
/// `cfg.seed`. A failing call ends the episode early with `error` set.
pub fn run_episode(
    learner: &mut dyn Learner,
    adversary: &mut dyn Adversary,
    loss: &LossFunction,
    cfg: &EpisodeConfig,
) -> Result<RegretTrace> {
    let mut adv_rng = stream(cfg.seed, ADVERSARY_STREAM);
    let mut learner_rng = stream(cfg.seed, LEARNER_STREAM);
    let mut channel = FeedbackChannel::new(cfg.p, stream(cfg.seed, CHANNEL_STREAM))?;
    let mut trace = RegretTrace {
        learner: learner.name().to_owned(),
        adversary: adversary.name().to_owned(),
        loss: loss.name().to_owned(),
        config: *cfg,
        records: Vec::with_capacity(cfg.horizon),
        flips: 0,
        error: None,
    };
    let full = learner.full_feedback();
    let mut cum = 0.0;
    for t in 1..=cfg.horizon {
        let round = (|| -> std::result::Result<RoundRecord, String> {
            let x = adversary
                .next_context(t, &mut adv_rng)
                .map_err(|e| format!("adversary: {e}"))?;
            let u = adversary
                .target()
                .value(&x)
                .map_err(|e| format!("target: {e}"))?;
            let y = learner
                .guess(&x, &mut learner_rng)
                .map_err(|e| format!("guess: {e}"))?;
            if !y.is_finite() {
                return Err(format!("guess: non-finite value {y}"));
            }
            let l = loss.eval(y, u);
            let sent = true_feedback(y, u);
            let recv = channel.apply(sent);
            let fb = Feedback {
                sigma: recv,
                exact: full.then_some(u),
                audit: Some(u),
            };
            let mut report = learner
                .update(&fb, &mut learner_rng)
                .map_err(|e| format!("update: {e}"))?;
            let scale = report.scale.map(|s| s.i);
            if cfg.p == 0.0 && cfg.consistency_every > 0 && t % cfg.consistency_every == 0 {
                if let Some(ok) = learner.admits(&adversary.target().hypothesis) {
                    report.checks.push(LemmaCheck::event(
                        Lemma::Consistency,
                        scale.unwrap_or(0),
                        ok,
                    ));
                }
            }
            let snap = cfg.snapshot_every > 0 && t % cfg.snapshot_every == 0;
            cum += l;
            Ok(RoundRecord {
                t,
                x,
                y,
                u,
                sigma_sent: sent,
                sigma_recv: recv,
                loss: l,
                cum_loss: cum,
                scale,
                potential: if snap { report.potential } else { None },
                median: report.median,
                perturbation: report.perturbation,
                checks: report.checks,
                flags: report.flags,
            })
        })();
        match round {
            Ok(r) => trace.records.push(r),
            Err(e) => {
                trace.error = Some(format!("round {t}: {e}"));
                break;
            }
        }
    }
    trace.flips = channel.flips();
    Ok(trace)
}
