use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use steiner_core::learners::ConstantsMode;
use steiner_search::checks::{run_suite, SUITES};
use steiner_search::{parse_seeds, run, ConfigError, ExperimentConfig, EXIT_CONFIG};

/// Seeded contextual search experiments.
///
/// Without `--check`, runs the configured learner against the adversary once
/// per seed and writes `trace_seed<N>.csv`, `summary.json` and
/// `runtime.json` to the output directory. Exit status: 0 when every hard
/// invariant held, 1 otherwise, 2 for a bad configuration.
#[derive(Debug, Parser)]
#[command(name = "steiner-search", version)]
struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    learner: Option<String>,
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    /// Hypothesis class: linear, sparse_linear, unit_demand, table, separation.
    #[arg(long)]
    class: Option<String>,
    /// Nonzero coordinates of a sparse linear target.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Size of the separation fixture.
    #[arg(long)]
    n: Option<usize>,
    /// Use the perturbed Steiner learners.
    #[arg(long)]
    perturbed: bool,
    /// Finite class JSON for `--class table`.
    #[arg(long)]
    class_path: Option<PathBuf>,
    /// Context CSV for the fixed_sequence adversary.
    #[arg(long)]
    contexts: Option<PathBuf>,
    /// Constants of the noisy linear learner: empirical or paper.
    #[arg(long)]
    constants: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Flip probability of the feedback channel.
    #[arg(long)]
    p: Option<f64>,
    /// Noise level the noisy learners assume.
    #[arg(long)]
    pprime: Option<f64>,
    /// `a..b` (exclusive), `a..=b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    emit_plot_script: bool,
    /// Run an invariant suite instead of an experiment.
    #[arg(long, value_name = "SUITE")]
    check: Option<String>,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut c = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($field:ident => $target:ident),*) => {
            $(if let Some(v) = &cli.$field { c.$target = v.clone(); })*
        };
    }
    set!(learner => learner, adversary => adversary, loss => loss, class => class,
         d => d, horizon => horizon, p => p, pprime => pprime, mc_samples => mc_samples,
         out => out, sparsity => sparsity, n => n);
    if let Some(p) = &cli.class_path {
        c.class_path = Some(p.clone());
    }
    if let Some(p) = &cli.contexts {
        c.contexts = Some(p.clone());
    }
    if let Some(m) = &cli.constants {
        c.constants = match m.as_str() {
            "empirical" => ConstantsMode::Empirical,
            "paper" => ConstantsMode::Paper,
            other => {
                return Err(ConfigError::new(format!(
                    "unknown constants mode {other:?}"
                )))
            }
        };
    }
    if let Some(s) = &cli.seeds {
        c.seeds = parse_seeds(s)?;
    }
    c.emit_plot_script |= cli.emit_plot_script;
    c.perturbed |= cli.perturbed;
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(suite) = &cli.check {
        let Some(lines) = run_suite(suite) else {
            eprintln!(
                "unknown suite {suite:?}; expected one of {}",
                SUITES.join(", ")
            );
            return ExitCode::from(EXIT_CONFIG as u8);
        };
        for l in &lines {
            println!("{l}");
        }
        let failed = lines.iter().filter(|l| !l.pass).count();
        println!("{} checks, {failed} failed", lines.len());
        return ExitCode::from(u8::from(failed > 0));
    }
    let cfg = match config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(&cfg) {
        Ok((agg, code)) => {
            println!(
                "{} vs {}: total loss {:.6} ± {:.6} over {} seeds, {} hard violations",
                cfg.learner,
                cfg.adversary,
                agg.total_loss.mean,
                agg.total_loss.std,
                cfg.seeds.len(),
                agg.hard_violations
            );
            for e in &agg.errors {
                eprintln!("{e}");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
