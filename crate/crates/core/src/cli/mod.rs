//! Command-line front end. Every command writes under `--out`; failures
//! print one `error[category]: message` line and exit with the category's code.

mod commands;
mod config;

pub use commands::{
    ablate, ablation_csv, cross, evaluate, intra, prepare, train, tsne, AblationRow, EvalRequest, TrainSummary,
    TsneRequest, ABLATION_HEADER,
};
pub use config::{parse_override, RunConfig, SplitMode};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dataset::synth::SyntheticSpec;
use crate::dataset::DatabaseKind;
use crate::error::{Error, Result};
use crate::evaluate::TsneConfig;

#[derive(Debug, Parser)]
#[command(name = "pseudoref", version, about = "No-reference IQA with hallucinated pseudo-reference features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` override of any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub database: Option<String>,
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub reference_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub max_epochs: Option<u64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut ov = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>>>()?;
        let s = |v: String| toml::Value::String(v);
        let i = |v: u64| {
            i64::try_from(v)
                .map(toml::Value::Integer)
                .map_err(|_| Error::Usage(format!("{v} does not fit a configuration integer")))
        };
        if let Some(v) = &self.database {
            ov.push(("database".into(), s(v.clone())));
        }
        if let Some(v) = &self.data_root {
            ov.push(("data_root".into(), s(v.display().to_string())));
        }
        if let Some(v) = &self.reference_dir {
            ov.push(("reference_dir".into(), s(v.display().to_string())));
        }
        if let Some(v) = self.seed {
            ov.push(("seed".into(), i(v)?));
        }
        if let Some(v) = self.split_seed {
            ov.push(("split_seed".into(), i(v)?));
        }
        if let Some(v) = self.max_epochs {
            ov.push(("max_epochs".into(), i(v)?));
        }
        RunConfig::load(self.config.as_deref(), &ov)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a database and write its manifest and count summary.
    Prepare {
        #[arg(long)]
        database: String,
        #[arg(long)]
        root: Option<PathBuf>,
        /// Generate the synthetic toy database into OUT/data first.
        #[arg(long)]
        generate_synthetic: bool,
        #[arg(long, default_value_t = 1)]
        references: usize,
        #[arg(long, default_value_t = 8)]
        levels: u8,
        #[arg(long, default_value_t = 192)]
        size: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model, or run the intra-database split protocol with --intra.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        intra: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a database with a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        database: String,
        #[arg(long)]
        root: PathBuf,
        /// Split file; only its test references are scored.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Full-reference path through the shared head.
        #[arg(long)]
        fr: bool,
        #[arg(long)]
        reference_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on one database and score others in full.
    CrossEval {
        #[command(flatten)]
        config: ConfigArgs,
        /// `KIND=ROOT` of a test database; repeatable.
        #[arg(long = "test", value_name = "KIND=ROOT", required = true)]
        tests: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score the six ablation configurations.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a joint 3-D t-SNE of the four feature roles.
    Tsne {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        database: String,
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        reference_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 900)]
        pairs: usize,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f32,
        #[arg(long, default_value_t = 1000)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_test_db(s: &str) -> Result<(DatabaseKind, PathBuf)> {
    let (k, r) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("--test `{s}` is not KIND=ROOT")))?;
    Ok((k.parse()?, PathBuf::from(r)))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            database,
            root,
            generate_synthetic,
            references,
            levels,
            size,
            seed,
            out,
        } => {
            let kind: DatabaseKind = database.parse()?;
            let spec = generate_synthetic.then_some(SyntheticSpec {
                references,
                width: size,
                height: size,
                levels,
                seed,
            });
            let summary = prepare(kind, root.as_deref(), spec.as_ref(), &out)?;
            println!("{kind}: {summary}");
        }
        Command::Train {
            config,
            resume,
            intra: protocol,
            out,
        } => {
            let cfg = config.resolve()?;
            if protocol {
                let (s, p) = intra(&cfg, &out)?;
                println!("median SRCC {s:.4} PLCC {p:.4} over {} splits", cfg.n_splits);
            } else {
                let t = train(&cfg, &out, resume.as_deref())?;
                let f = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
                println!(
                    "best epoch {} ({:?} SRCC {}) -> {}",
                    t.fit.best_epoch,
                    t.fit.selection,
                    f(t.fit.best_srcc),
                    t.fit.best_checkpoint.display()
                );
                if let Some((best, _)) = &t.test {
                    println!("test SRCC {:.4} PLCC {:.4}", best.srcc, best.plcc);
                }
            }
        }
        Command::Eval {
            checkpoint,
            database,
            root,
            split,
            fr,
            reference_dir,
            out,
        } => {
            let req = EvalRequest {
                checkpoint: &checkpoint,
                database: database.parse()?,
                root: &root,
                split: split.as_deref(),
                full_reference: fr,
                reference_dir: reference_dir.as_deref(),
            };
            let r = evaluate(&req, &out)?;
            println!("{} {}: SRCC {:.4} PLCC {:.4} over {} images", r.database, r.split, r.srcc, r.plcc, r.n_images);
        }
        Command::CrossEval { config, tests, out } => {
            let cfg = config.resolve()?;
            let tests = tests.iter().map(|s| parse_test_db(s)).collect::<Result<Vec<_>>>()?;
            for r in cross(&cfg, &tests, &out)? {
                println!("{}: SRCC {:.4} PLCC {:.4}", r.database, r.srcc, r.plcc);
            }
        }
        Command::Ablate { config, out } => {
            let cfg = config.resolve()?;
            print!("{}", ablation_csv(&ablate(&cfg, &out)?));
        }
        Command::Tsne {
            checkpoint,
            database,
            root,
            reference_dir,
            pairs,
            perplexity,
            epochs,
            seed,
            out,
        } => {
            let req = TsneRequest {
                checkpoint: &checkpoint,
                database: database.parse()?,
                root: &root,
                reference_dir: reference_dir.as_deref(),
                config: TsneConfig {
                    n_pairs: pairs,
                    perplexity,
                    epochs,
                    seed,
                },
            };
            let e = tsne(&req, &out)?;
            println!("embedded {} pairs x 4 roles ({})", e.n_pairs(), e.method);
        }
    }
    Ok(())
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
