//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a verification or shattering check
//! fails, 2 on usage, configuration or runtime errors. Every run that gets
//! past argument parsing writes `manifest.toml` into its output directory.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use toml::Table;

use crate::config::{
    from_table, resolve, to_table, CapacityConfig, ConstructConfig, DatasetConfig, Flags, ParityConfig, ScalingConfig,
    ShatterConfig, TrainConfig, VerifyConfig,
};
use crate::manifest::{now_unix, version_string, RunManifest};
use crate::run;

#[derive(Parser, Debug)]
#[command(name = "attncap", version, about = "Attention capacity laboratory", arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML file with configuration keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set trials=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Output directory (default `runs/<subcommand>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a sparse Boolean function into attention (+ MLP) weights and verify it.
    Construct {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t", alias = "T")]
        t: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
        /// and, parity, majority or random.
        #[arg(long)]
        function: Option<String>,
        #[arg(long, value_delimiter = ',')]
        index_set: Option<Vec<usize>>,
        /// monotone_head, injective_heads, symmetric or general.
        #[arg(long)]
        pipeline: Option<String>,
        /// deterministic_pos, trainable_pos or bag_of_vectors.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reload a construction directory, re-measure its norms and re-check every input.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dir: Option<String>,
    },
    /// Evaluate the covering-number and generalization bounds for a norm budget.
    Capacity {
        #[command(flatten)]
        common: Common,
        /// unit or explicit.
        #[arg(long)]
        constants: Option<String>,
        #[arg(long = "t", alias = "T")]
        t: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Check the unbounded-norm shattering instance.
    Shatter {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t", alias = "T", value_delimiter = ',')]
        t: Option<Vec<usize>>,
    },
    /// Train one model on one sparse task.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: Option<String>,
        #[arg(long = "t", alias = "T")]
        t: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Dump `[CLS]` attention weights for this many holdout examples.
        #[arg(long, num_args = 0..=1, default_missing_value = "16")]
        dump_attention: Option<usize>,
    },
    /// Run the sample-complexity grid.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Grid configuration file (same as --config).
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Start from the large grid instead of the desk grid.
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        t_values: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Streaming sparse-parity training curves.
    Parity {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t", alias = "T")]
        t: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a labelled dataset for a sparse task.
    Dataset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: Option<String>,
        #[arg(long = "t", alias = "T")]
        t: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        index_set: Option<Vec<usize>>,
        #[arg(long)]
        reject_ambiguous: bool,
    },
    /// Rerun a previous run from its manifest.
    Replay {
        /// Manifest file or the directory holding it.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// A subcommand with its resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Construct(ConstructConfig),
    Verify(VerifyConfig),
    Capacity(CapacityConfig),
    Shatter(ShatterConfig),
    Train(TrainConfig),
    Scaling(ScalingConfig),
    Parity(ParityConfig),
    Dataset(DatasetConfig),
}

impl Resolved {
    pub fn name(&self) -> &'static str {
        match self {
            Resolved::Construct(_) => "construct",
            Resolved::Verify(_) => "verify",
            Resolved::Capacity(_) => "capacity",
            Resolved::Shatter(_) => "shatter",
            Resolved::Train(_) => "train",
            Resolved::Scaling(_) => "scaling",
            Resolved::Parity(_) => "parity",
            Resolved::Dataset(_) => "dataset",
        }
    }

    pub fn table(&self) -> Result<Table> {
        match self {
            Resolved::Construct(c) => to_table(c),
            Resolved::Verify(c) => to_table(c),
            Resolved::Capacity(c) => to_table(c),
            Resolved::Shatter(c) => to_table(c),
            Resolved::Train(c) => to_table(c),
            Resolved::Scaling(c) => to_table(c),
            Resolved::Parity(c) => to_table(c),
            Resolved::Dataset(c) => to_table(c),
        }
    }

    pub fn from_manifest(name: &str, config: Table) -> Result<Self> {
        Ok(match name {
            "construct" => Resolved::Construct(from_table(config)?),
            "verify" => Resolved::Verify(from_table(config)?),
            "capacity" => Resolved::Capacity(from_table(config)?),
            "shatter" => Resolved::Shatter(from_table(config)?),
            "train" => Resolved::Train(from_table(config)?),
            "scaling" => Resolved::Scaling(from_table(config)?),
            "parity" => Resolved::Parity(from_table(config)?),
            "dataset" => Resolved::Dataset(from_table(config)?),
            other => anyhow::bail!("manifest names unknown subcommand {other:?}"),
        })
    }

    /// Root seed recorded in the manifest.
    pub fn root_seed(&self) -> u64 {
        match self {
            Resolved::Construct(c) => c.seed,
            Resolved::Verify(c) => c.seed,
            Resolved::Train(c) => c.seed,
            Resolved::Scaling(c) => c.seed,
            Resolved::Parity(c) => c.seed,
            Resolved::Dataset(c) => c.seed,
            Resolved::Capacity(_) | Resolved::Shatter(_) => 0,
        }
    }

    /// Runs the subcommand, writing outputs under `out`.
    pub fn execute(&self, out: &Path, workers: usize) -> Result<i32> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        match self {
            Resolved::Construct(c) => run::construct(c, out, workers),
            Resolved::Verify(c) => run::verify(c, out, workers),
            Resolved::Capacity(c) => run::capacity(c, out),
            Resolved::Shatter(c) => run::shatter(c, out),
            Resolved::Train(c) => run::train(c, out),
            Resolved::Scaling(c) => run::scaling(c, out, workers),
            Resolved::Parity(c) => run::parity(c, out, workers),
            Resolved::Dataset(c) => run::dataset(c, out),
        }
    }
}

fn list(v: &Option<Vec<usize>>) -> Option<&[usize]> {
    v.as_deref()
}

/// Turns parsed arguments into a resolved configuration plus output settings.
pub fn resolve_command(cmd: &Command) -> Result<(Resolved, Option<PathBuf>, Option<usize>)> {
    let mut f = Flags::default();
    let (resolved, common) = match cmd {
        Command::Construct { common, t, s, function, index_set, pipeline, variant, gamma, delta, seed } => {
            f.put_u("t", *t).put_u("s", *s).put("function", function.clone()).put_list("index_set", list(index_set));
            f.put("pipeline", pipeline.clone()).put("variant", variant.clone()).put("gamma", *gamma).put("delta", *delta);
            f.put_seed("seed", *seed);
            let c = resolve(&ConstructConfig::default(), common.config.as_deref(), f.0, &common.sets)?;
            (Resolved::Construct(c), common)
        }
        Command::Verify { common, dir } => {
            f.put("dir", dir.clone());
            (Resolved::Verify(resolve(&VerifyConfig::default(), common.config.as_deref(), f.0, &common.sets)?), common)
        }
        Command::Capacity { common, constants, t, m, eps } => {
            f.put("constants", constants.clone()).put_u("t", *t).put_u("m", *m).put("eps", *eps);
            (Resolved::Capacity(resolve(&CapacityConfig::default(), common.config.as_deref(), f.0, &common.sets)?), common)
        }
        Command::Shatter { common, t } => {
            f.put_list("t_values", list(t));
            (Resolved::Shatter(resolve(&ShatterConfig::default(), common.config.as_deref(), f.0, &common.sets)?), common)
        }
        Command::Train { common, task, t, s, m, seed, max_iters, dump_attention } => {
            f.put("task", task.clone()).put_u("t", *t).put_u("s", *s).put_u("m", *m).put_seed("seed", *seed);
            f.put_u("max_iters", *max_iters).put_u("dump_attention", *dump_attention);
            (Resolved::Train(resolve(&TrainConfig::default(), common.config.as_deref(), f.0, &common.sets)?), common)
        }
        Command::Scaling { common, grid, paper_scale, trials, t_values, m_values, seed } => {
            f.put_u("trials", *trials).put_list("t_values", list(t_values)).put_list("m_values", list(m_values));
            f.put_seed("seed", *seed);
            let base = if *paper_scale { ScalingConfig::paper_scale() } else { ScalingConfig::default() };
            let file = grid.as_deref().or(common.config.as_deref());
            (Resolved::Scaling(resolve(&base, file, f.0, &common.sets)?), common)
        }
        Command::Parity { common, t, s, batch, budget, seeds, seed } => {
            f.put_u("t", *t).put_u("s", *s).put_u("batch", *batch).put_u("budget", *budget).put_u("seeds", *seeds);
            f.put_seed("seed", *seed);
            (Resolved::Parity(resolve(&ParityConfig::default(), common.config.as_deref(), f.0, &common.sets)?), common)
        }
        Command::Dataset { common, task, t, s, n, seed, index_set, reject_ambiguous } => {
            f.put("task", task.clone()).put_u("t", *t).put_u("s", *s).put_u("n", *n).put_seed("seed", *seed);
            f.put_list("index_set", list(index_set));
            if *reject_ambiguous {
                f.put("reject_ambiguous", Some(true));
            }
            (Resolved::Dataset(resolve(&DatasetConfig::default(), common.config.as_deref(), f.0, &common.sets)?), common)
        }
        Command::Replay { .. } => unreachable!("replay is handled by dispatch"),
    };
    Ok((resolved, common.out.clone(), common.workers))
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Executes `resolved` into `out` and records a manifest there.
pub fn run_and_record(resolved: &Resolved, out: &Path, workers: usize) -> Result<i32> {
    let started = now_unix();
    let config = resolved.table()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let result = resolved.execute(out, workers);
    let exit_code = match &result {
        Ok(code) => *code,
        Err(_) => 2,
    };
    let manifest = RunManifest {
        subcommand: resolved.name().into(),
        config,
        root_seed: resolved.root_seed(),
        version: version_string(),
        workers,
        started_unix: started,
        finished_unix: now_unix(),
        exit_code,
    };
    manifest.write(out)?;
    result
}

/// Parses `argv` (including the program name) and runs it; returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let planned = match &cli.command {
        Command::Replay { manifest, out, workers } => RunManifest::read(manifest).and_then(|m| {
            let resolved = Resolved::from_manifest(&m.subcommand, m.config)?;
            let dir = if manifest.is_dir() { manifest.clone() } else { manifest.parent().unwrap_or(Path::new(".")).to_path_buf() };
            Ok((resolved, Some(out.clone().unwrap_or_else(|| dir.join("replay"))), *workers))
        }),
        cmd => resolve_command(cmd),
    };
    let (resolved, out, workers) = match planned {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let out = out.unwrap_or_else(|| PathBuf::from("runs").join(resolved.name()));
    let workers = workers.unwrap_or_else(default_workers);
    match run_and_record(&resolved, &out, workers) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
