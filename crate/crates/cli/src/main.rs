//! `tpa` — desk-scale active voltage control laboratory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tpa_cli::harness::{self, Controller};
use tpa_cli::runconfig::{Cycle, RunConfig};
use tpa_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "tpa",
    about = "Temporal prototype-aware multi-agent voltage control on synthetic radial feeders",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run-configuration file (key = value sections).
    #[arg(long)]
    config: PathBuf,
    /// Data directory holding feeder.json and profiles.csv.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic feeder and year of profiles.
    GenData {
        /// Run-configuration file (profiles section drives the generator).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Initialize a prototype bank checkpoint from profile data.
    InitProtos {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: u64,
        /// data | random
        #[arg(long, default_value = "data")]
        mode: String,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; artifacts land under <out>/<config-hash>-s<seed>/.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override [marl] epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint over day / month / year cycles.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// day | month | year | all (defaults to the config's [eval] cycle).
        #[arg(long)]
        cycle: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate the uncontrolled feeder instead of a checkpoint.
        #[arg(long, default_value_t = false)]
        no_control: bool,
    },
    /// Train on this config's feeder with a frozen imported bank, next to a
    /// from-scratch control run.
    Transfer {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Checkpoint holding the prototypes to import.
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export plot-ready CSVs from run artifacts.
    ExportPlots {
        /// Training log (JSON-lines) to convert into a learning-curve CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Config + data + checkpoint for a per-bus day trace.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Day of year (0-based) for the trace export.
        #[arg(long)]
        day: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage text; the spec wants exit code 1
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { config, seed, out } => {
            let cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::from_text("[marl]\nalgorithm = maddpg\nactor = tpa\n")?,
            };
            let (feeder, profiles) = harness::gen_data(&cfg, seed, &out)?;
            println!("wrote {}", feeder.display());
            println!("wrote {}", profiles.display());
        }
        Command::InitProtos { cfg, seed, mode, out } => {
            let config = RunConfig::load(&cfg.config)?;
            let (_topo, profiles) = harness::standard_setup(&config, &cfg.data)?;
            let mode = match mode.as_str() {
                "data" => tpa_agent::InitMode::Data,
                "random" => tpa_agent::InitMode::Random,
                other => {
                    return Err(CliError::Config(format!(
                        "--mode expects data|random, got `{other}`"
                    )))
                }
            };
            let dim = config.encoder.feature_dim();
            let values = tpa_agent::init_prototypes(&profiles, mode, dim, seed)?;
            let mut store = tpa_nn::ParamStore::new();
            let bank = tpa_agent::PrototypeBank::from_values(&mut store, dim, values)?;
            let _ = bank;
            let mut extra = std::collections::BTreeMap::new();
            extra.insert(
                "prototypes.season_of".to_string(),
                serde_json::json!((0..tpa_agent::N_PROTOTYPES)
                    .map(tpa_agent::PrototypeBank::season_of_slot)
                    .collect::<Vec<_>>()),
            );
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            tpa_nn::save_checkpoint(&out, &store, extra)?;
            println!("wrote {}", out.display());
        }
        Command::Train { cfg, seed, out, epochs } => {
            let mut config = RunConfig::load(&cfg.config)?;
            if let Some(e) = epochs {
                config.train.epochs = e;
            }
            let (topo, profiles) = harness::standard_setup(&config, &cfg.data)?;
            let run = harness::run_training(&config, &topo, profiles, seed, &out)?;
            println!(
                "trained {} epochs (best val CR {:?}); artifacts in {}",
                run.outcome.epochs_run,
                run.outcome.best_val_cr,
                run.run_dir.display()
            );
        }
        Command::Eval { cfg, checkpoint, cycle, out, no_control } => {
            let config = RunConfig::load(&cfg.config)?;
            let (topo, profiles) = harness::standard_setup(&config, &cfg.data)?;
            let cycle = match cycle {
                None => config.cycle,
                Some(s) => Cycle::parse(&s).ok_or_else(|| {
                    CliError::Config(format!("--cycle expects day|month|year|all, got `{s}`"))
                })?,
            };
            let report = if no_control {
                harness::eval_cycles(
                    &topo,
                    profiles,
                    &config,
                    &Controller::NoControl,
                    cycle,
                )?
            } else {
                let env = harness::make_env(
                    &topo,
                    profiles.clone(),
                    &config.env,
                    config.env.episode_length,
                )?;
                let agents = harness::load_agents(&env, &config, &checkpoint)?;
                harness::check_algorithm(&config, &agents)?;
                harness::eval_cycles(
                    &topo,
                    profiles,
                    &config,
                    &Controller::Agents(&agents),
                    cycle,
                )?
            };
            harness::write_report(&report, &out)?;
            for (name, table) in [("day", &report.day), ("month", &report.month), ("year", &report.year)] {
                if let Some(rows) = table {
                    let avg = rows.last().unwrap();
                    println!("{name}: CR {:.4} QL {:.4}", avg.cr_mean, avg.ql_mean);
                }
            }
            println!("metrics written to {}", out.display());
        }
        Command::Transfer { cfg, bank, seed, out } => {
            let config = RunConfig::load(&cfg.config)?;
            let (topo, profiles) = harness::standard_setup(&config, &cfg.data)?;
            let report = harness::transfer_eval(&config, &topo, profiles, &bank, seed, &out)?;
            let t = report.transfer_table.last().unwrap();
            let s = report.scratch_table.last().unwrap();
            println!("transfer:     CR {:.4} QL {:.4}", t.cr_mean, t.ql_mean);
            println!("from-scratch: CR {:.4} QL {:.4}", s.cr_mean, s.ql_mean);
            println!(
                "bank unchanged: {} ({} / {})",
                report.bank_unchanged,
                report.transfer_dir.display(),
                report.scratch_dir.display()
            );
            if !report.bank_unchanged {
                return Err(CliError::Validation(
                    "frozen prototype bank changed during transfer training".into(),
                ));
            }
        }
        Command::ExportPlots { log, config, data, checkpoint, day, out } => {
            let mut exported = false;
            if let Some(log) = log {
                harness::export_learning_curves(&log, &out.join("learning_curves.csv"))?;
                exported = true;
            }
            if let (Some(config), Some(data)) = (config, data) {
                let cfg = RunConfig::load(&config)?;
                let (topo, profiles) = harness::standard_setup(&cfg, &data)?;
                let day = day.unwrap_or(0);
                let path = out.join(format!("day_trace_{day:03}.csv"));
                match checkpoint {
                    Some(ckpt) => {
                        let env = harness::make_env(
                            &topo,
                            profiles.clone(),
                            &cfg.env,
                            cfg.env.episode_length,
                        )?;
                        let agents = harness::load_agents(&env, &cfg, &ckpt)?;
                        harness::export_day_trace(
                            &topo,
                            profiles,
                            &cfg,
                            &Controller::Agents(&agents),
                            day,
                            &path,
                        )?;
                    }
                    None => harness::export_day_trace(
                        &topo,
                        profiles,
                        &cfg,
                        &Controller::NoControl,
                        day,
                        &path,
                    )?,
                }
                exported = true;
            }
            if !exported {
                return Err(CliError::Config(
                    "export-plots needs --log and/or --config with --data".into(),
                ));
            }
            println!("plots written to {}", out.display());
        }
    }
    Ok(())
}
