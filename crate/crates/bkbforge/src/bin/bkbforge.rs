//! Command-line interface over the learning, scoring, and inference library.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bkbforge::bkbsl::{self, Backend, LearnOptions};
use bkbforge::bnlearn::{self, BayesNet};
use bkbforge::core::Dataset;
use bkbforge::error::{Error, Result};
use bkbforge::fusion::FusedBkb;
use bkbforge::harness::{
    compare, crossval, cycles, discretize, dot,
    ingest::{self, write_keel, DataTable},
    ExperimentConfig,
};
use bkbforge::prob::ProbEngine;
use bkbforge::reason::{self, Evidence};
use bkbforge::scores::BnMdlVariant;

#[derive(Parser)]
#[command(
    name = "bkbforge",
    about = "Instantiation-level knowledge-base structure learning, MDL scoring, and inference",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input table (.dat reads as a KEEL file, anything else as CSV).
    #[arg(long)]
    data: PathBuf,
    /// Target variable; defaults to the file's declared output or the last
    /// column. Drives discretization and classification.
    #[arg(long)]
    target: Option<String>,
    /// CSV columns to force numeric (KEEL files carry their own typing).
    #[arg(long, value_delimiter = ',')]
    numeric_columns: Vec<String>,
}

#[derive(Args, Clone)]
struct LearnArgs {
    /// Maximum parent-set size; defaults to the benchmark table for known
    /// dataset names, else min(n-1, 3).
    #[arg(long)]
    parent_limit: Option<usize>,
    /// Bits reserved per stored probability in model-encoding terms.
    #[arg(long, default_value_t = 32.0)]
    delta: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a table: variables, states, rows, numeric columns.
    IngestInfo {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Discretize numeric columns against the target and write a KEEL file.
    Discretize {
        #[command(flatten)]
        data: DataArgs,
        /// Output .dat path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON file for the chosen cut points.
        #[arg(long)]
        cuts: Option<PathBuf>,
    },
    /// Learn a fused model from unique-world fragments.
    LearnBkb {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        learn: LearnArgs,
        /// Per-world solver.
        #[arg(long, default_value = "exact", value_parser = parse_backend)]
        backend: Backend,
        /// Output model JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional score/accounting report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Learn the exact MDL Bayesian network.
    LearnBn {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        learn: LearnArgs,
        /// Model-encoding convention.
        #[arg(long, default_value = "lam-bacchus")]
        variant: String,
        /// Output network JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional score report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train both models on the full data and compare MDL and call counts.
    CompareMdl {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long, default_value = "lam-bacchus")]
        variant: String,
        /// Output report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation of both models.
    Crossval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long, default_value = "lam-bacchus")]
        variant: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "exact", value_parser = parse_backend)]
        backend: Backend,
        /// Output report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Query a saved model: classification with --target, else a bounded
    /// marginal over the evidence.
    Infer {
        /// Model JSON produced by learn-bkb.
        #[arg(long)]
        model: PathBuf,
        /// Evidence as a JSON object of variable -> state label.
        #[arg(long)]
        evidence: String,
        /// Target variable to classify.
        #[arg(long)]
        target: Option<String>,
        /// Cap on unassigned variables for marginals.
        #[arg(long, default_value_t = reason::DEFAULT_MAX_FREE_VARS)]
        max_free_vars: usize,
    },
    /// Variable-level cycle analysis of a saved model.
    Cycles {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved model or network as DOT.
    ExportDot {
        /// Fused model JSON.
        #[arg(long, conflicts_with = "bn")]
        model: Option<PathBuf>,
        /// Network JSON.
        #[arg(long)]
        bn: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    s.parse::<Backend>().map_err(|e| e.to_string())
}

fn parse_variant(s: &str) -> Result<BnMdlVariant> {
    match s {
        "lam-bacchus" => Ok(BnMdlVariant::LamBacchus),
        "suzuki" => Ok(BnMdlVariant::Suzuki),
        other => Err(Error::Input(format!("unknown MDL variant {other}"))),
    }
}

/// Ingests and, when numeric columns are present, discretizes against the
/// target; returns the dataset, its name, and the resolved target name.
fn load_dataset(args: &DataArgs) -> Result<(Dataset, String, String)> {
    let table = ingest::ingest_with_numeric(&args.data, None, &args.numeric_columns)?;
    let target = resolve_target(&table, args.target.as_deref())?;
    let name = table.name.clone();
    let table = if table.numeric_columns().is_empty() {
        table
    } else {
        discretize::discretize_entropy_mdl(&table, &target)?.0
    };
    Ok((table.to_dataset()?, name, target))
}

fn resolve_target(table: &DataTable, requested: Option<&str>) -> Result<String> {
    match requested {
        Some(name) => {
            if table.column_index(name).is_none() {
                return Err(Error::Input(format!("unknown target column {name}")));
            }
            Ok(name.to_string())
        }
        None => table
            .default_target()
            .ok_or_else(|| Error::Input("table has no columns".into())),
    }
}

fn parent_limit_for(dataset: &Dataset, name: &str, requested: Option<usize>) -> usize {
    requested
        .or_else(|| bkbforge::harness::default_parent_limit(name))
        .unwrap_or_else(|| (dataset.num_vars().saturating_sub(1)).min(3))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn load_model(path: &Path) -> Result<FusedBkb> {
    let text = std::fs::read_to_string(path)?;
    FusedBkb::from_json(serde_json::from_str(&text)?)
}

fn run() -> Result<()> {
    if let Ok(threads) = std::env::var("BKBFORGE_THREADS") {
        let threads: usize = threads
            .parse()
            .map_err(|_| Error::Input(format!("BKBFORGE_THREADS={threads} is not a number")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match Cli::parse().command {
        Command::IngestInfo { data } => {
            let table = ingest::ingest_with_numeric(&data.data, None, &data.numeric_columns)?;
            let summary = serde_json::json!({
                "name": table.name,
                "rows": table.num_rows(),
                "columns": table.columns.iter().map(|(n, c)| {
                    match c {
                        ingest::ColumnData::Categorical { labels, .. } => serde_json::json!({
                            "name": n, "kind": "categorical", "states": labels,
                        }),
                        ingest::ColumnData::Numeric(_) => serde_json::json!({
                            "name": n, "kind": "numeric",
                        }),
                    }
                }).collect::<Vec<_>>(),
                "declared_output": table.declared_output,
                "default_parent_limit": bkbforge::harness::default_parent_limit(&table.name),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Discretize { data, out, cuts } => {
            let table = ingest::ingest_with_numeric(&data.data, None, &data.numeric_columns)?;
            let target = resolve_target(&table, data.target.as_deref())?;
            let (discretized, reports) = discretize::discretize_entropy_mdl(&table, &target)?;
            std::fs::write(&out, write_keel(&discretized))?;
            if let Some(cuts_path) = cuts {
                write_json(&cuts_path, &reports)?;
            }
            for r in &reports {
                println!(
                    "{}: {} cuts{}{}",
                    r.column,
                    r.cuts.len(),
                    if r.forced { " (forced)" } else { "" },
                    if r.constant { " (constant)" } else { "" }
                );
            }
        }
        Command::LearnBkb {
            data,
            learn,
            backend,
            out,
            report,
        } => {
            let (dataset, name, _) = load_dataset(&data)?;
            let mut opts = LearnOptions::new(parent_limit_for(&dataset, &name, learn.parent_limit));
            opts.backend = backend;
            opts.delta = learn.delta;
            let learned = bkbsl::learn(&dataset, &opts)?;
            write_json(&out, &learned.model.to_json())?;
            if let Some(report_path) = report {
                write_json(&report_path, &learned.to_json(&opts))?;
            }
            eprintln!(
                "learned {} rules over {} worlds; data bits {:.1}",
                learned.model.bkb().snodes().len(),
                learned.per_world_scores.len(),
                learned.mdl.data_bits
            );
        }
        Command::LearnBn {
            data,
            learn,
            variant,
            out,
            report,
        } => {
            let (dataset, name, _) = load_dataset(&data)?;
            let variant = parse_variant(&variant)?;
            let engine = ProbEngine::new(&dataset);
            let k = parent_limit_for(&dataset, &name, learn.parent_limit);
            let (bn, mdl) = bnlearn::learn_bn(
                &engine,
                k,
                learn.delta,
                variant,
                bkbforge::daglearn::DEFAULT_EXACT_LIMIT,
            )?;
            write_json(&out, &bn.to_json())?;
            if let Some(report_path) = report {
                write_json(&report_path, &mdl.report())?;
            }
            eprintln!(
                "learned network with {} edges; data bits {:.1}",
                bn.parent_lists().iter().map(|p| p.len()).sum::<usize>(),
                mdl.data_bits
            );
        }
        Command::CompareMdl {
            data,
            learn,
            variant,
            out,
        } => {
            let (dataset, name, target) = load_dataset(&data)?;
            let config = ExperimentConfig {
                parent_limit: parent_limit_for(&dataset, &name, learn.parent_limit),
                dataset_name: name,
                folds: 10,
                backend: Backend::Exact,
                delta: learn.delta,
                variant: parse_variant(&variant)?,
                seed: 0,
                target,
            };
            let report = compare::compare_mdl(&dataset, &config)?;
            print!("{}", report.render());
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
        }
        Command::Crossval {
            data,
            learn,
            variant,
            folds,
            seed,
            backend,
            out,
        } => {
            let (dataset, name, target) = load_dataset(&data)?;
            let config = ExperimentConfig {
                parent_limit: parent_limit_for(&dataset, &name, learn.parent_limit),
                dataset_name: name,
                folds,
                backend,
                delta: learn.delta,
                variant: parse_variant(&variant)?,
                seed,
                target,
            };
            let report = crossval::crossval(&dataset, &config)?;
            print!("{}", report.render());
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
        }
        Command::Infer {
            model,
            evidence,
            target,
            max_free_vars,
        } => {
            let fused = load_model(&model)?;
            let raw: BTreeMap<String, String> = serde_json::from_str(&evidence)?;
            let mut pairs = Vec::new();
            for (var_name, state_label) in &raw {
                let v = fused
                    .data_variables()
                    .iter()
                    .position(|x| &x.name == var_name)
                    .ok_or_else(|| Error::Input(format!("unknown variable {var_name}")))?;
                let s = fused.data_variables()[v]
                    .states
                    .iter()
                    .position(|x| x == state_label)
                    .ok_or_else(|| {
                        Error::Input(format!("unknown state {state_label} for {var_name}"))
                    })?;
                pairs.push((v, s));
            }
            let evidence = Evidence::new(pairs)?;
            match target {
                Some(target_name) => {
                    let t = fused
                        .data_variables()
                        .iter()
                        .position(|x| x.name == target_name)
                        .ok_or_else(|| Error::Input(format!("unknown target {target_name}")))?;
                    let prediction = reason::classify(&fused, &evidence, t)?;
                    let states = &fused.data_variables()[t].states;
                    let output = serde_json::json!({
                        "target": target_name,
                        "scores": states.iter().zip(&prediction.scores)
                            .map(|(s, &q)| (s.clone(), q))
                            .collect::<BTreeMap<String, f64>>(),
                        "argmax": prediction.state.map(|s| states[s].clone()),
                        "abstain": prediction.abstained(),
                    });
                    println!("{}", serde_json::to_string_pretty(&output)?);
                }
                None => {
                    let p = reason::marginal(&fused, &evidence, max_free_vars)?;
                    println!("{}", serde_json::json!({ "probability": p }));
                }
            }
        }
        Command::Cycles { model, out } => {
            let fused = load_model(&model)?;
            let report = cycles::analyze_rv_cycles(&fused);
            let names: Vec<String> = fused
                .data_variables()
                .iter()
                .map(|v| v.name.clone())
                .collect();
            print!("{}", report.render(&names));
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
        }
        Command::ExportDot { model, bn, out } => {
            let text = match (model, bn) {
                (Some(path), None) => dot::export_dot_fused(&load_model(&path)?),
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)?;
                    let bn = BayesNet::from_json(serde_json::from_str(&text)?)?;
                    dot::export_dot_bn(&bn)
                }
                _ => {
                    return Err(Error::Input(
                        "pass exactly one of --model or --bn".into(),
                    ))
                }
            };
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
