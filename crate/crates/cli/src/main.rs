//! `curriculum`: generate data, score difficulty, train schedules and run experiment grids.
//!
//! Every subcommand reads an optional TOML experiment config (`--config`); flags and
//! `--set key.path=value` pairs override its keys. Exit codes: 0 success, 1 invalid
//! input or configuration, 2 numeric failure during training.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use curriculum_core::dataset::{save_dataset, TiePolicy};
use curriculum_core::difficulty::{
    bin_by_agreement, bin_by_direct_annotation, score_self_taught, score_transfer, threshold_tau, ConfidenceScore,
};
use curriculum_core::experiment::{
    emit_report, emit_sweep_report, load_source, pretrain_source, run_ratio_sweep_with, run_with, train_arm, ArmConfig,
    ArmSpec, DatasetSource, ExperimentConfig, ExperimentReport, Proxy, ReportFormat, RunOptions, SweepReport,
};
use curriculum_core::synth::{calibrate, coarse_easy_fraction, generate};
use curriculum_core::{DatasetFormat, Granularity, Level};

#[derive(Parser)]
#[command(name = "curriculum", version, about = "Curriculum learning from annotator agreement")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed (the generator seed for `generate`, the master seed otherwise).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Output format(s): json, csv, markdown for reports; jsonl, csv for datasets.
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
    /// Override any config key, e.g. `--set learner.epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Clone)]
struct GridFlags {
    /// Number of seeds (`num_seeds`).
    #[arg(long)]
    num_seeds: Option<usize>,
    /// Redraw the train/test split for every seed (`split.resplit_per_seed`).
    #[arg(long)]
    resplit_per_seed: Option<bool>,
    /// Epochs per stage (`learner.epochs`).
    #[arg(long)]
    epochs: Option<usize>,
    /// Dataset file; replaces the config's dataset source.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreMethod {
    Agreement,
    AgreementCoarse,
    Direct,
    SelfTaught,
    Transfer,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Vanilla,
    Curriculum,
    Anti,
    Direct,
    RandomControl,
    TwoStage,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProxyArg {
    Agreement,
    SelfTaught,
    Transfer,
}

impl From<ProxyArg> for Proxy {
    fn from(p: ProxyArg) -> Self {
        match p {
            ProxyArg::Agreement => Proxy::Agreement,
            ProxyArg::SelfTaught => Proxy::SelfTaught,
            ProxyArg::Transfer => Proxy::Transfer,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic annotated dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        /// `dataset.generator.num_examples`.
        #[arg(long)]
        num_examples: Option<usize>,
        /// Calibrate `p_max` to this coarse easy fraction before generating.
        #[arg(long)]
        calibrate: Option<f64>,
    },
    /// Assign difficulty levels to a dataset.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "agreement")]
        method: ScoreMethod,
        /// Easy fraction for confidence proxies; defaults to the agreement proxy's.
        #[arg(long)]
        target_easy_fraction: Option<f64>,
        /// Pretraining dataset for the transfer proxy.
        #[arg(long)]
        pretrain: Option<PathBuf>,
    },
    /// Train one schedule on one split and write its log, model and schedule.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridFlags,
        #[arg(long, value_enum, default_value = "curriculum")]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 0.33)]
        hard_ratio: f64,
        #[arg(long, value_enum, default_value = "agreement")]
        proxy: ProxyArg,
        /// Seed label of the replicate to train.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Run the full (seed × arm) grid and write the report.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Sweep the stage-2 hard ratio of two-stage schedules for every proxy.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridFlags,
        /// Hard ratios in (0, 1] (`sweep.ratios`).
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
    },
    /// Re-emit a stored report.json or sweep.json in other formats.
    Report {
        #[command(flatten)]
        common: Common,
        /// Stored JSON report.
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let numeric = e
        .chain()
        .filter_map(|c| c.downcast_ref::<curriculum_core::Error>())
        .any(|c| c.is_numeric());
    if numeric {
        2
    } else {
        1
    }
}

fn load_config(common: &Common, extra: Vec<String>) -> anyhow::Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    let mut overrides = common.set.clone();
    overrides.extend(extra);
    Ok(base.with_overrides(&overrides)?)
}

fn grid_overrides(common: &Common, grid: &GridFlags) -> Vec<String> {
    let mut o = Vec::new();
    if let Some(s) = common.seed {
        o.push(format!("master_seed={s}"));
    }
    if let Some(n) = grid.num_seeds {
        o.push(format!("num_seeds={n}"));
        o.push("seeds=[]".into());
    }
    if let Some(r) = grid.resplit_per_seed {
        o.push(format!("split.resplit_per_seed={r}"));
    }
    if let Some(e) = grid.epochs {
        o.push(format!("learner.epochs={e}"));
    }
    o
}

fn apply_data(config: &mut ExperimentConfig, data: Option<&Path>) {
    if let Some(path) = data {
        config.dataset = DatasetSource::File {
            path: path.to_path_buf(),
            format: None,
        };
    }
}

fn report_formats(common: &Common) -> anyhow::Result<Vec<ReportFormat>> {
    if common.format.is_empty() {
        return Ok(ReportFormat::ALL.to_vec());
    }
    common.format.iter().map(|f| Ok(f.parse::<ReportFormat>()?)).collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate {
            common,
            num_examples,
            calibrate: target,
        } => {
            let mut extra = Vec::new();
            if let Some(s) = common.seed {
                extra.push(format!("dataset.generator.seed={s}"));
            }
            if let Some(n) = num_examples {
                extra.push(format!("dataset.generator.num_examples={n}"));
            }
            let config = load_config(&common, extra)?;
            let DatasetSource::Synthetic { mut generator } = config.dataset else {
                bail!("`generate` needs a synthetic dataset source");
            };
            fs::create_dir_all(&common.out_dir)?;
            if let Some(target) = target {
                let calibration = calibrate(target, &generator)?;
                log::info!(
                    "calibrated p_max = {:.4} (easy fraction {:.4})",
                    calibration.config.p_max,
                    calibration.achieved_easy_fraction
                );
                write_json(&common.out_dir.join("calibration.json"), &calibration)?;
                generator = calibration.config;
            }
            let format = match common.format.first() {
                Some(f) => f.parse::<DatasetFormat>()?,
                None => DatasetFormat::Jsonl,
            };
            let ext = match format {
                DatasetFormat::Jsonl => "jsonl",
                DatasetFormat::Csv => "csv",
            };
            let dataset = generate(&generator)?;
            let path = common.out_dir.join(format!("dataset.{ext}"));
            save_dataset(&dataset, &path, format)?;
            println!(
                "wrote {} examples to {} (coarse easy fraction {:.3})",
                dataset.len(),
                path.display(),
                coarse_easy_fraction(&dataset)?
            );
            Ok(())
        }
        Command::Score {
            common,
            data,
            method,
            target_easy_fraction,
            pretrain,
        } => {
            let mut config = load_config(&common, Vec::new())?;
            apply_data(&mut config, data.as_deref());
            if let Some(p) = pretrain {
                config.sweep.pretrain = Some(DatasetSource::File { path: p, format: None });
            }
            let dataset = load_source(&config.dataset)?;
            dataset.gold_labels(TiePolicy::Error)?;
            let seed = common.seed.unwrap_or(config.master_seed);
            let target = || -> anyhow::Result<f64> {
                match target_easy_fraction {
                    Some(t) => Ok(t),
                    None => Ok(coarse_easy_fraction(&dataset)?),
                }
            };
            let mut scores: Option<ConfidenceScore> = None;
            let assignment = match method {
                ScoreMethod::Agreement => bin_by_agreement(&dataset, Granularity::Fine)?,
                ScoreMethod::AgreementCoarse => bin_by_agreement(&dataset, Granularity::Coarse)?,
                ScoreMethod::Direct => bin_by_direct_annotation(&dataset)?,
                ScoreMethod::SelfTaught | ScoreMethod::Transfer => {
                    let s = if matches!(method, ScoreMethod::SelfTaught) {
                        score_self_taught(&dataset, &config.learner, seed)?
                    } else {
                        let pre = load_source(&pretrain_source(&config)?)?;
                        score_transfer(&dataset, &pre, &config.learner, seed)?
                    };
                    let selection = threshold_tau(&s, target()?)?;
                    log::info!("τ = {:.6}", selection.tau);
                    scores = Some(s);
                    selection.assignment
                }
            };
            fs::create_dir_all(&common.out_dir)?;
            let path = common.out_dir.join("difficulty.jsonl");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            assignment.write_jsonl(std::io::BufWriter::new(file))?;
            if let Some(s) = scores {
                write_json(&common.out_dir.join("scores.json"), &s)?;
            }
            let sizes: BTreeMap<Level, usize> = assignment.bin_sizes();
            println!("wrote {} ({sizes:?})", path.display());
            Ok(())
        }
        Command::Train {
            common,
            grid,
            schedule,
            hard_ratio,
            proxy,
            replicate,
        } => {
            let mut config = load_config(&common, grid_overrides(&common, &grid))?;
            apply_data(&mut config, grid.data.as_deref());
            let spec = match schedule {
                ScheduleArg::Vanilla => ArmSpec::SingleStage {
                    bins: Level::FINE.to_vec(),
                },
                ScheduleArg::Curriculum => ArmSpec::Curriculum,
                ScheduleArg::Anti => ArmSpec::Anti,
                ScheduleArg::Direct => ArmSpec::Direct,
                ScheduleArg::RandomControl => ArmSpec::RandomControl,
                ScheduleArg::TwoStage => ArmSpec::TwoStage {
                    proxy: proxy.into(),
                    hard_ratio,
                },
            };
            let arm = ArmConfig {
                name: schedule.to_possible_value().expect("named").get_name().to_string(),
                epochs_per_stage: None,
                spec,
            };
            let result = train_arm(&config, &arm, replicate)?;
            let dir = &common.out_dir;
            fs::create_dir_all(dir)?;
            let log_path = dir.join("training_log.csv");
            let file = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
            result.log.write_csv(std::io::BufWriter::new(file))?;
            write_json(&dir.join("model.json"), &result.model)?;
            fs::write(dir.join("schedule.json"), result.schedule.to_json())?;
            write_json(&dir.join("summary.json"), &(&result.cell, &result.split))?;
            for (i, stage) in result.cell.stages.iter().enumerate() {
                println!(
                    "stage {}: {} examples, top-{} AUC {:.1}",
                    i + 1,
                    stage.train_size,
                    config.evaluation.top_k,
                    100.0 * stage.top_k_auc
                );
            }
            Ok(())
        }
        Command::Experiment { common, grid } => {
            let mut config = load_config(&common, grid_overrides(&common, &grid))?;
            apply_data(&mut config, grid.data.as_deref());
            let formats = report_formats(&common)?;
            let options = RunOptions {
                partial_dir: Some(common.out_dir.clone()),
                timestamp: true,
            };
            let report = run_with(&config, &options)?;
            fs::create_dir_all(&common.out_dir)?;
            fs::write(common.out_dir.join("config.toml"), config.to_toml_string())?;
            for format in formats {
                for path in emit_report(&report, format, &common.out_dir)? {
                    println!("wrote {}", path.display());
                }
            }
            print!("{}", report.markdown());
            Ok(())
        }
        Command::Sweep { common, grid, ratios } => {
            let mut extra = grid_overrides(&common, &grid);
            if !ratios.is_empty() {
                let list: Vec<String> = ratios.iter().map(|r| format!("{r:?}")).collect();
                extra.push(format!("sweep.ratios=[{}]", list.join(",")));
            }
            let mut config = load_config(&common, extra)?;
            apply_data(&mut config, grid.data.as_deref());
            let formats = report_formats(&common)?;
            let options = RunOptions {
                partial_dir: Some(common.out_dir.clone()),
                timestamp: true,
            };
            let report = run_ratio_sweep_with(&config, &config.sweep.ratios, &options)?;
            fs::create_dir_all(&common.out_dir)?;
            fs::write(common.out_dir.join("config.toml"), config.to_toml_string())?;
            for format in formats {
                for path in emit_sweep_report(&report, format, &common.out_dir)? {
                    println!("wrote {}", path.display());
                }
            }
            print!("{}", report.markdown());
            Ok(())
        }
        Command::Report { common, input } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let formats = report_formats(&common)?;
            if let Ok(report) = ExperimentReport::from_json(&text) {
                report.verify_significance()?;
                for format in formats {
                    for path in emit_report(&report, format, &common.out_dir)? {
                        println!("wrote {}", path.display());
                    }
                }
            } else {
                let report = SweepReport::from_json(&text)
                    .with_context(|| format!("{} is neither an experiment nor a sweep report", input.display()))?;
                for format in formats {
                    for path in emit_sweep_report(&report, format, &common.out_dir)? {
                        println!("wrote {}", path.display());
                    }
                }
            }
            Ok(())
        }
    }
}
