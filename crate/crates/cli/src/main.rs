mod commands;
mod config;
mod error;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mqtt_ids_core::pipeline::SelectionMode;
use mqtt_ids_core::synth::SynthSpec;
use mqtt_ids_core::MethodKind;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "mqtt-ids",
    version,
    about = "Train and evaluate MQTT DoS / brute-force detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic three-class CSV.
    Synth(SynthArgs),
    /// Encode, split, scale and oversample a dataset.
    Prepare(RunArgs),
    /// Rank features and choose the final set.
    Select {
        #[command(flatten)]
        run: RunArgs,
        /// Prepared directory (defaults to the output directory).
        #[arg(long)]
        prepared: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Feature names for `--mode manual`, comma separated.
        #[arg(long, value_delimiter = ',')]
        features: Vec<String>,
        /// Final set size for `--mode consensus`.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Train one model on a prepared directory.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        prepared: Option<PathBuf>,
        /// Selection report to project the features with.
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
    },
    /// Score a trained model on a prepared test set.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        prepared: PathBuf,
        /// Directory for report.json and report.md (defaults to the model's directory).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Train, evaluate and cross-validate all seven methods.
    Compare(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Rows per class for each of bruteforce, dos and legitimate.
    #[arg(long, default_value_t = 1000)]
    rows_per_class: usize,
    /// Explicit `name=count` pairs; replaces the three default classes.
    #[arg(long = "class", value_parser = parse_class)]
    classes: Vec<(String, usize)>,
    #[arg(long, default_value_t = 10)]
    n_features: usize,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn parse_class(s: &str) -> std::result::Result<(String, usize), String> {
    let (name, n) = s.split_once('=').ok_or("expected name=count")?;
    Ok((name.to_string(), n.parse().map_err(|e| format!("{e}"))?))
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Master seed; every other seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    target_column: Option<String>,
    #[arg(long)]
    split_ratio: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Disable SMOTE oversampling.
    #[arg(long)]
    no_smote: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Golden,
    Consensus,
    Manual,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    RandomForest,
    DecisionTree,
    Knn,
    Gbt,
    Stacking,
    Voting,
    Bagging,
}

impl From<KindArg> for MethodKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::RandomForest => MethodKind::RandomForest,
            KindArg::DecisionTree => MethodKind::DecisionTree,
            KindArg::Knn => MethodKind::Knn,
            KindArg::Gbt => MethodKind::Gbt,
            KindArg::Stacking => MethodKind::Stacking,
            KindArg::Voting => MethodKind::Voting,
            KindArg::Bagging => MethodKind::Bagging,
        }
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = &self.target_column {
            cfg.target_column = t.clone();
        }
        if let Some(r) = self.split_ratio {
            cfg.split_ratio = r;
        }
        if let Some(f) = self.folds {
            cfg.folds = f;
        }
        if self.no_smote {
            cfg.smote = None;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let mut spec = SynthSpec::balanced(a.rows_per_class, a.separation, a.seed);
            if !a.classes.is_empty() {
                spec.rows_per_class = a.classes.into_iter().collect::<BTreeMap<_, _>>();
            }
            spec.n_features = a.n_features;
            let names = spec.feature_names();
            spec.categorical.retain(|c| names.contains(c));
            commands::synth(&spec, &a.out)?;
            println!("wrote {}", a.out.display());
        }
        Command::Prepare(a) => {
            let cfg = a.resolve()?;
            cfg.validate()?;
            let dir = commands::cmd_prepare(&cfg)?;
            println!("prepared {}", dir.display());
        }
        Command::Select {
            run,
            prepared,
            mode,
            features,
            n,
        } => {
            let mut cfg = run.resolve()?;
            match mode {
                Some(ModeArg::Golden) => cfg.selection = SelectionMode::Golden,
                Some(ModeArg::Consensus) => {
                    cfg.selection = SelectionMode::Consensus {
                        n,
                        top_per_method: 10,
                    }
                }
                Some(ModeArg::Manual) => {
                    if features.is_empty() {
                        return Err(CliError::Config("--mode manual needs --features".into()));
                    }
                    cfg.selection = SelectionMode::Manual { features }
                }
                None => {}
            }
            cfg.validate()?;
            let dir = prepared.unwrap_or_else(|| cfg.output_dir.clone());
            let out = dir.join(commands::SELECTION_JSON);
            let report = commands::cmd_select(&cfg, &dir, &out)?;
            println!("selected {}", report.selected.names.join(", "));
        }
        Command::Train {
            run,
            prepared,
            selection,
            kind,
        } => {
            let mut cfg = run.resolve()?;
            if let Some(k) = kind {
                let k = MethodKind::from(k);
                if k != cfg.model.kind {
                    cfg.model.hyperparameters.clear();
                }
                cfg.model.kind = k;
            }
            cfg.validate()?;
            let dir = prepared.unwrap_or_else(|| cfg.output_dir.clone());
            let selection = selection.or_else(|| {
                let p = dir.join(commands::SELECTION_JSON);
                p.exists().then_some(p)
            });
            let out = cfg.output_dir.join(commands::MODEL_JSON);
            commands::cmd_train(&cfg, &dir, selection.as_deref(), &out)?;
            println!("wrote {}", out.display());
        }
        Command::Evaluate {
            model,
            prepared,
            output_dir,
        } => {
            let out = output_dir.unwrap_or_else(|| {
                model
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            let acc = commands::cmd_evaluate(&model, &prepared, &out)?;
            println!("accuracy {acc:.4}");
        }
        Command::Compare(a) => {
            let cfg = a.resolve()?;
            cfg.validate()?;
            let report = commands::cmd_compare(&cfg)?;
            for row in &report.rows {
                match (row.score(), &row.error) {
                    (Some(s), _) => println!("{:<9} {s:.4}", row.label),
                    (None, e) => {
                        println!("{:<9} failed: {}", row.label, e.as_deref().unwrap_or(""))
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
