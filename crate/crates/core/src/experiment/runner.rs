//! Executes the (seed × arm) grid and the two-stage ratio sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    agreement_histogram, load_dataset, split_by_group, Dataset, DatasetFormat, GoldLabel, Label, TiePolicy,
};
use crate::difficulty::{
    bin_by_agreement, bin_by_direct_annotation, score_self_taught, score_transfer, threshold_tau, DifficultyAssignment,
    Granularity, Level,
};
use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, Model, TestSetEvaluator, Trainer, TrainingData, TrainingLog};
use crate::metrics::{annotator_kappa_reference, kappa_sweep, summarize_seeds, t_test_two_sample, top_k_mean_auc};
use crate::schedule::{
    build_random_control, build_single_stage, build_staged, build_two_stage, CurriculumSchedule, Direction,
};
use crate::seed::derive_seed;
use crate::synth::{coarse_easy_fraction, generate, GenConfig};

use super::config::{ArmConfig, ArmSpec, DatasetSource, ExperimentConfig, Proxy};
use super::report::{
    stage_label, AnnotatorReferenceSummary, ArmReport, BaselineRef, DataSummary, ExperimentReport, KappaModelReport,
    KappaSection, Provenance, Significance, SplitSummary, StageReport, SweepProxyRow, SweepReport,
};

/// Where partial results go when a cell fails, and whether to stamp wall-clock time.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub partial_dir: Option<PathBuf>,
    pub timestamp: bool,
}

/// File written into `partial_dir` when a run aborts.
pub const PARTIAL_RESULTS_FILE: &str = "partial_results.json";

pub fn load_source(source: &DatasetSource) -> Result<Dataset> {
    match source {
        DatasetSource::Synthetic { generator } => generate(generator),
        DatasetSource::File { path, format } => {
            let format = match format {
                Some(f) => *f,
                None => DatasetFormat::from_path(path)
                    .ok_or_else(|| Error::Config(format!("cannot infer the format of {}", path.display())))?,
            };
            load_dataset(path, format)
        }
    }
}

/// Pretraining source for the transfer proxy.
pub fn pretrain_source(config: &ExperimentConfig) -> Result<DatasetSource> {
    if let Some(source) = &config.sweep.pretrain {
        return Ok(source.clone());
    }
    match &config.dataset {
        DatasetSource::Synthetic { generator } => Ok(DatasetSource::Synthetic {
            generator: related_generator(generator, config.sweep.pretrain_mean_shift),
        }),
        DatasetSource::File { .. } => Err(Error::Config(
            "the transfer proxy needs sweep.pretrain when the dataset comes from a file".into(),
        )),
    }
}

/// A generator sharing the class-mean direction of `base` but drawing fresh
/// examples with shifted class means.
pub fn related_generator(base: &GenConfig, mean_shift: f64) -> GenConfig {
    GenConfig {
        seed: derive_seed(base.seed, &["pretrain"]),
        direction_seed: Some(base.direction_seed.unwrap_or(base.seed)),
        class_mean_shift: base.class_mean_shift + mean_shift,
        ..base.clone()
    }
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex(&Sha256::digest(json.as_bytes()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Everything a replicate's cells share; built once and read concurrently.
struct Replicate {
    label: u64,
    root: u64,
    train: Dataset,
    train_gold: Vec<GoldLabel>,
    test: Dataset,
    test_labels: Vec<Label>,
    test_strata: Vec<Level>,
    fine: Option<DifficultyAssignment>,
    coarse: DifficultyAssignment,
    direct: Option<DifficultyAssignment>,
    proxies: BTreeMap<Proxy, DifficultyAssignment>,
}

impl Replicate {
    fn build(
        config: &ExperimentConfig,
        dataset: &Dataset,
        label: u64,
        proxies: &[Proxy],
        pretrain: Option<&Dataset>,
    ) -> Result<Self> {
        let root = config.replicate_seed(label);
        let split_seed = if config.split.resplit_per_seed {
            derive_seed(root, &["split"])
        } else {
            derive_seed(config.master_seed, &["split"])
        };
        let (train, test) = split_by_group(dataset, config.split.test_fraction, split_seed)?;
        let train_gold = train.gold_labels(TiePolicy::Error)?;
        let test_gold = test.gold_labels(TiePolicy::Error)?;
        let fine = if train.num_annotators() == 7 {
            Some(bin_by_agreement(&train, Granularity::Fine)?)
        } else {
            None
        };
        let coarse = bin_by_agreement(&train, Granularity::Coarse)?;
        let test_strata_assignment = if test.num_annotators() == 7 {
            bin_by_agreement(&test, Granularity::Fine)?
        } else {
            bin_by_agreement(&test, Granularity::Coarse)?
        };
        let test_strata = test.ids().map(|id| test_strata_assignment.levels()[id]).collect();
        let direct = if train.examples().iter().all(|e| e.direct_difficulty.is_some()) {
            Some(bin_by_direct_annotation(&train)?)
        } else {
            None
        };
        let mut replicate = Self {
            label,
            root,
            test_labels: test_gold.iter().map(|g| g.label).collect(),
            train,
            train_gold,
            test,
            test_strata,
            fine,
            coarse,
            direct,
            proxies: BTreeMap::new(),
        };
        for &proxy in proxies {
            let assignment = replicate.proxy_assignment(config, proxy, pretrain)?;
            replicate.proxies.insert(proxy, assignment);
        }
        Ok(replicate)
    }

    fn init_config(&self, learner: &LearnerConfig) -> LearnerConfig {
        LearnerConfig {
            seed: derive_seed(self.root, &["init"]),
            ..learner.clone()
        }
    }

    fn proxy_assignment(
        &self,
        config: &ExperimentConfig,
        proxy: Proxy,
        pretrain: Option<&Dataset>,
    ) -> Result<DifficultyAssignment> {
        if proxy == Proxy::Agreement {
            return Ok(self.coarse.clone());
        }
        // Confidence proxies are thresholded to the agreement proxy's easy fraction.
        let easy = self.coarse.bin_sizes().get(&Level::Easy).copied().unwrap_or(0);
        let target = (easy as f64 / self.coarse.len() as f64).clamp(1e-6, 1.0 - 1e-6);
        let seed = derive_seed(self.root, &["proxy", proxy.name()]);
        let scores = match proxy {
            Proxy::SelfTaught => score_self_taught(&self.train, &config.learner, seed)?,
            Proxy::Transfer => {
                let pretrain =
                    pretrain.ok_or_else(|| Error::Config("transfer proxy without pretraining data".into()))?;
                score_transfer(&self.train, pretrain, &config.learner, seed)?
            }
            Proxy::Agreement => unreachable!(),
        };
        Ok(threshold_tau(&scores, target)?.assignment)
    }

    fn split_summary(&self) -> SplitSummary {
        let class1 = |labels: &mut dyn Iterator<Item = Label>, n: usize| {
            labels.filter(|&l| l == 1).count() as f64 / n.max(1) as f64
        };
        let n = self.train.len() + self.test.len();
        SplitSummary {
            seed: self.label,
            train_size: self.train.len(),
            test_size: self.test.len(),
            test_fraction: self.test.len() as f64 / n as f64,
            train_class1_fraction: class1(&mut self.train_gold.iter().map(|g| g.label), self.train.len()),
            test_class1_fraction: class1(&mut self.test_labels.iter().copied(), self.test.len()),
        }
    }
}

/// Raw outcome of one (seed, arm) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub arm: String,
    pub seed: u64,
    pub stages: Vec<CellStage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStage {
    pub train_size: usize,
    pub top_k_auc: f64,
    pub top_k_stratum_auc: BTreeMap<Level, f64>,
    /// `[threshold][annotator]` κ of the end-of-stage model, when requested.
    pub kappa: Option<Vec<Vec<f64>>>,
}

fn build_schedule(config: &ExperimentConfig, replicate: &Replicate, arm: &ArmConfig) -> Result<CurriculumSchedule> {
    let epochs = config.arm_stage_epochs(arm);
    let spec = &arm.spec;
    let arm = arm.name.as_str();
    let fine = || {
        replicate
            .fine
            .as_ref()
            .ok_or_else(|| Error::Granularity("staged arms need seven annotators".into()))
    };
    let schedule_seed = derive_seed(replicate.root, &[arm, "schedule"]);
    match spec {
        ArmSpec::Curriculum => build_staged(fine()?, Direction::EasyFirst, epochs),
        ArmSpec::Anti => build_staged(fine()?, Direction::HardFirst, epochs),
        ArmSpec::Direct => {
            let direct = replicate.direct.as_ref().ok_or_else(|| Error::MissingAnnotation {
                ids: missing_direct(&replicate.train),
            })?;
            build_staged(direct, Direction::EasyFirst, epochs)
        }
        ArmSpec::RandomControl => {
            let curriculum = build_staged(fine()?, Direction::EasyFirst, epochs)?;
            let mut sizes = curriculum.stage_sizes();
            sizes.dedup();
            let ids: Vec<String> = replicate.train.ids().map(String::from).collect();
            build_random_control(&ids, &sizes, epochs, schedule_seed)
        }
        ArmSpec::SingleStage { bins } => {
            let coarse_only = bins.iter().all(|l| Level::COARSE.contains(l));
            match (&replicate.fine, coarse_only) {
                (Some(fine), _) => build_single_stage(fine, bins, epochs),
                (None, true) => build_single_stage(&replicate.coarse, bins, epochs),
                (None, false) => Err(Error::Granularity("fine bins need seven annotators".into())),
            }
        }
        ArmSpec::TwoStage { proxy, hard_ratio } => {
            let assignment = replicate
                .proxies
                .get(proxy)
                .ok_or_else(|| Error::Config(format!("proxy {} was not scored", proxy.name())))?;
            build_two_stage(assignment, *hard_ratio, epochs, schedule_seed)
        }
    }
}

fn missing_direct(train: &Dataset) -> Vec<String> {
    train
        .examples()
        .iter()
        .filter(|e| e.direct_difficulty.is_none())
        .map(|e| e.id.clone())
        .collect()
}

/// Trains one schedule from the replicate's shared initialization and collects
/// per-stage top-k AUCs. `kappa_stages` are 1-based stages whose end-of-stage model
/// enters the κ sweep.
fn run_schedule(
    config: &ExperimentConfig,
    replicate: &Replicate,
    arm: &str,
    schedule: &CurriculumSchedule,
    kappa_stages: &[usize],
) -> Result<CellResult> {
    run_schedule_full(config, replicate, arm, schedule, kappa_stages).map(|(cell, ..)| cell)
}

fn run_schedule_full(
    config: &ExperimentConfig,
    replicate: &Replicate,
    arm: &str,
    schedule: &CurriculumSchedule,
    kappa_stages: &[usize],
) -> Result<(CellResult, Model, TrainingLog)> {
    let learner = replicate.init_config(&config.learner);
    let data = TrainingData::new(&replicate.train, &replicate.train_gold)?;
    let index = replicate.train.index_of();
    let mut trainer = Trainer::with_stream_seed(
        &learner,
        replicate.train.feature_dim(),
        derive_seed(replicate.root, &[arm, "train"]),
    )?;
    let mut evaluator = TestSetEvaluator::new(
        &replicate.test,
        replicate.test_labels.clone(),
        replicate.test_strata.clone(),
    )?;
    let annotations: Vec<Vec<Label>> = replicate
        .test
        .examples()
        .iter()
        .map(|e| e.annotator_labels.clone())
        .collect();
    let k = config.evaluation.top_k;
    let mut stages = Vec::with_capacity(schedule.stages.len());
    for stage in &schedule.stages {
        let rows: Vec<usize> = stage
            .example_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Schema(format!("schedule references unknown id `{id}`")))
            })
            .collect::<Result<_>>()?;
        trainer.fit_stage(&data, &rows, stage.epochs, &mut evaluator)?;
        let log = trainer.log();
        let top_k_auc = top_k_mean_auc(&log.stage_aucs(stage.index), k)?;
        let mut top_k_stratum_auc = BTreeMap::new();
        for level in Level::FINE {
            let series = log.stage_stratum_aucs(stage.index, level);
            if series.len() >= k {
                top_k_stratum_auc.insert(level, top_k_mean_auc(&series, k)?);
            }
        }
        let kappa = if kappa_stages.contains(&stage.index) {
            let sweep = kappa_sweep(
                evaluator.last_scores(),
                &annotations,
                &config.evaluation.kappa_thresholds,
            )?;
            Some(sweep.kappa_vs_each_annotator)
        } else {
            None
        };
        stages.push(CellStage {
            train_size: rows.len(),
            top_k_auc,
            top_k_stratum_auc,
            kappa,
        });
    }
    let cell = CellResult {
        arm: arm.to_string(),
        seed: replicate.label,
        stages,
    };
    let (model, log) = trainer.into_parts();
    Ok((cell, model, log))
}

fn kappa_stages_for(config: &ExperimentConfig, arm: &str, num_stages: usize) -> Vec<usize> {
    config
        .evaluation
        .kappa_models
        .iter()
        .filter(|m| m.arm == arm)
        .map(|m| m.stage.unwrap_or(num_stages))
        .filter(|&s| s >= 1 && s <= num_stages)
        .collect()
}

fn needed_proxies(config: &ExperimentConfig) -> Vec<Proxy> {
    let mut proxies: Vec<Proxy> = config
        .arms
        .iter()
        .filter_map(|a| match a.spec {
            ArmSpec::TwoStage { proxy, .. } => Some(proxy),
            _ => None,
        })
        .collect();
    proxies.sort();
    proxies.dedup();
    proxies
}

fn with_context(arm: &str, seed: u64) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Cell {
        arm: arm.to_string(),
        seed,
        source: Box::new(e),
    }
}

fn build_replicates(
    config: &ExperimentConfig,
    dataset: &Dataset,
    proxies: &[Proxy],
    pretrain: Option<&Dataset>,
) -> Result<Vec<Replicate>> {
    config
        .seed_labels()
        .into_par_iter()
        .map(|label| {
            Replicate::build(config, dataset, label, proxies, pretrain).map_err(with_context("<split>", label))
        })
        .collect()
}

fn persist_partial<T: Serialize>(options: &RunOptions, partial: &T) {
    let Some(dir) = &options.partial_dir else { return };
    let path = dir.join(PARTIAL_RESULTS_FILE);
    let written = std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, serde_json::to_string_pretty(partial).expect("results serialize")));
    match written {
        Ok(()) => log::warn!("run aborted; completed cells saved to {}", path.display()),
        Err(e) => log::error!("could not save partial results to {}: {e}", path.display()),
    }
}

/// Runs every (seed, arm) cell concurrently; returns results in (seed, arm) order or
/// the first failure in that order after persisting the cells that completed.
fn run_cells<C, F>(cells: Vec<C>, options: &RunOptions, run: F) -> Result<Vec<CellResult>>
where
    C: Send + Sync,
    F: Fn(&C) -> Result<CellResult> + Sync + Send,
{
    let outcomes: Vec<Result<CellResult>> = cells.par_iter().map(&run).collect();
    if outcomes.iter().all(|o| o.is_ok()) {
        return Ok(outcomes.into_iter().map(|o| o.expect("checked")).collect());
    }
    let done: Vec<&CellResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    persist_partial(options, &done);
    Err(outcomes.into_iter().find_map(|o| o.err()).expect("a failure exists"))
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_with(config, &RunOptions::default())
}

pub fn run_with(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentReport> {
    config.validate()?;
    if config.arms.is_empty() {
        return Err(Error::Config("at least one arm is required".into()));
    }
    let started = options.timestamp.then(unix_now);
    let dataset = load_source(&config.dataset)?;
    let proxies = needed_proxies(config);
    let pretrain = if proxies.contains(&Proxy::Transfer) {
        Some(load_source(&pretrain_source(config)?)?)
    } else {
        None
    };
    let replicates = build_replicates(config, &dataset, &proxies, pretrain.as_ref())?;

    let cells: Vec<(&Replicate, &ArmConfig)> = replicates
        .iter()
        .flat_map(|r| config.arms.iter().map(move |a| (r, a)))
        .collect();
    let results = run_cells(cells, options, |(replicate, arm)| {
        let context = with_context(&arm.name, replicate.label);
        let schedule = build_schedule(config, replicate, arm).map_err(&context)?;
        let kappa_stages = kappa_stages_for(config, &arm.name, schedule.stages.len());
        run_schedule(config, replicate, &arm.name, &schedule, &kappa_stages).map_err(&context)
    })?;

    let mut report = aggregate(config, &dataset, &replicates, &results)?;
    report.provenance.started_at_unix = started;
    report.provenance.finished_at_unix = options.timestamp.then(unix_now);
    Ok(report)
}

fn provenance(config: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: config_hash(config),
        master_seed: config.master_seed,
        seeds: config.seed_labels(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at_unix: None,
        finished_at_unix: None,
    }
}

fn data_summary(dataset: &Dataset, replicates: &[Replicate]) -> Result<DataSummary> {
    Ok(DataSummary {
        num_examples: dataset.len(),
        num_annotators: dataset.num_annotators(),
        feature_dim: dataset.feature_dim(),
        agreement_histogram: agreement_histogram(dataset)?,
        coarse_easy_fraction: coarse_easy_fraction(dataset)?,
        splits: replicates.iter().map(Replicate::split_summary).collect(),
    })
}

fn aggregate(
    config: &ExperimentConfig,
    dataset: &Dataset,
    replicates: &[Replicate],
    results: &[CellResult],
) -> Result<ExperimentReport> {
    let seeds = config.seed_labels();
    // Cells are keyed, not positional, so aggregation ignores completion order.
    let by_key: BTreeMap<(&str, u64), &CellResult> = results.iter().map(|c| ((c.arm.as_str(), c.seed), c)).collect();
    let mut arms = Vec::with_capacity(config.arms.len());
    for arm in &config.arms {
        let cells: Vec<&CellResult> = seeds
            .iter()
            .map(|s| {
                by_key
                    .get(&(arm.name.as_str(), *s))
                    .copied()
                    .ok_or_else(|| Error::Config(format!("missing cell for arm `{}`, seed {s}", arm.name)))
            })
            .collect::<Result<_>>()?;
        let num_stages = cells[0].stages.len();
        if cells.iter().any(|c| c.stages.len() != num_stages) {
            return Err(Error::Size(format!(
                "arm `{}` has differing stage counts across seeds",
                arm.name
            )));
        }
        let mut stages = Vec::with_capacity(num_stages);
        for s in 0..num_stages {
            let overall: Vec<f64> = cells.iter().map(|c| c.stages[s].top_k_auc).collect();
            let mut per_stratum = BTreeMap::new();
            for level in Level::FINE {
                let values: Vec<f64> = cells
                    .iter()
                    .filter_map(|c| c.stages[s].top_k_stratum_auc.get(&level).copied())
                    .collect();
                if !values.is_empty() {
                    per_stratum.insert(level, summarize_seeds(&values)?);
                }
            }
            stages.push(StageReport {
                stage: s + 1,
                label: stage_label(&arm.spec, s + 1),
                train_sizes: cells.iter().map(|c| c.stages[s].train_size).collect(),
                overall: summarize_seeds(&overall)?,
                per_stratum,
                significance: None,
            });
        }
        arms.push(ArmReport {
            name: arm.name.clone(),
            spec: arm.spec.clone(),
            stages,
        });
    }

    let baseline = arms
        .iter()
        .find(|a| a.name == config.evaluation.baseline_arm)
        .map(|a| BaselineRef {
            arm: a.name.clone(),
            stage: a.stages.len(),
        });
    match &baseline {
        Some(b) => {
            let reference = arms.iter().find(|a| a.name == b.arm).expect("baseline exists").stages[b.stage - 1]
                .overall
                .clone();
            for arm in &mut arms {
                for stage in &mut arm.stages {
                    if arm.name == b.arm && stage.stage == b.stage {
                        continue;
                    }
                    stage.significance = significance(&stage.overall, &reference)?;
                }
            }
        }
        None => log::warn!(
            "baseline arm `{}` is not configured; no significance tests",
            config.evaluation.baseline_arm
        ),
    }

    let kappa = kappa_section(config, &arms, replicates, &by_key, &seeds)?;
    Ok(ExperimentReport {
        name: config.name.clone(),
        provenance: provenance(config),
        data: data_summary(dataset, replicates)?,
        baseline,
        arms,
        kappa,
    })
}

fn significance(
    arm: &crate::metrics::SeedSummary,
    baseline: &crate::metrics::SeedSummary,
) -> Result<Option<Significance>> {
    if arm.count < 2 || baseline.count < 2 {
        return Ok(None);
    }
    let t = t_test_two_sample(&arm.values, &baseline.values)?;
    Ok(Some(Significance::new(arm.mean - baseline.mean, t)))
}

fn kappa_section(
    config: &ExperimentConfig,
    arms: &[ArmReport],
    replicates: &[Replicate],
    by_key: &BTreeMap<(&str, u64), &CellResult>,
    seeds: &[u64],
) -> Result<KappaSection> {
    let thresholds = config.evaluation.kappa_thresholds.clone();
    let mut models = Vec::new();
    for model in &config.evaluation.kappa_models {
        let Some(arm) = arms.iter().find(|a| a.name == model.arm) else {
            log::warn!("κ model names unknown arm `{}`; skipped", model.arm);
            continue;
        };
        let stage = model.stage.unwrap_or(arm.stages.len());
        if stage == 0 || stage > arm.stages.len() {
            log::warn!("κ model `{}` stage {stage} does not exist; skipped", model.arm);
            continue;
        }
        let tables: Vec<&Vec<Vec<f64>>> = seeds
            .iter()
            .filter_map(|s| by_key[&(model.arm.as_str(), *s)].stages[stage - 1].kappa.as_ref())
            .collect();
        if tables.len() != seeds.len() || thresholds.is_empty() {
            continue;
        }
        let k = tables[0][0].len();
        let mut mean_kappa = Vec::with_capacity(thresholds.len());
        let mut per_annotator = Vec::with_capacity(thresholds.len());
        for t in 0..thresholds.len() {
            let per_seed: Vec<f64> = tables.iter().map(|tab| tab[t].iter().sum::<f64>() / k as f64).collect();
            mean_kappa.push(summarize_seeds(&per_seed)?);
            per_annotator.push(
                (0..k)
                    .map(|a| tables.iter().map(|tab| tab[t][a]).sum::<f64>() / tables.len() as f64)
                    .collect(),
            );
        }
        models.push(KappaModelReport {
            arm: model.arm.clone(),
            stage,
            mean_kappa,
            per_annotator,
        });
    }
    let references = replicates
        .iter()
        .map(|r| {
            let annotations: Vec<Vec<Label>> = r.test.examples().iter().map(|e| e.annotator_labels.clone()).collect();
            annotator_kappa_reference(&annotations)
        })
        .collect::<Result<Vec<_>>>();
    let annotators = match references {
        Ok(refs) if !refs.is_empty() => {
            let k = refs[0].per_annotator_mean.len();
            Some(AnnotatorReferenceSummary {
                per_annotator_mean: (0..k)
                    .map(|a| refs.iter().map(|r| r.per_annotator_mean[a]).sum::<f64>() / refs.len() as f64)
                    .collect(),
                mean_over_pairs: summarize_seeds(&refs.iter().map(|r| r.mean_over_pairs).collect::<Vec<_>>())?,
            })
        }
        Ok(_) => None,
        Err(e) => {
            log::warn!("annotator κ reference unavailable: {e}");
            None
        }
    };
    Ok(KappaSection {
        thresholds,
        models,
        annotators,
    })
}

/// Two-stage runs for every proxy × ratio, plus the single-stage baseline on all
/// training data, each summarized over seeds by its final-stage top-k AUC.
pub fn run_ratio_sweep(config: &ExperimentConfig, ratios: &[f64]) -> Result<SweepReport> {
    run_ratio_sweep_with(config, ratios, &RunOptions::default())
}

pub fn run_ratio_sweep_with(config: &ExperimentConfig, ratios: &[f64], options: &RunOptions) -> Result<SweepReport> {
    config.validate()?;
    if ratios.is_empty() {
        return Err(Error::Config("the sweep needs at least one ratio".into()));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::Range(format!("ratio {r} outside (0, 1]")));
    }
    if config.sweep.proxies.is_empty() {
        return Err(Error::Config("the sweep needs at least one proxy".into()));
    }
    let started = options.timestamp.then(unix_now);
    let dataset = load_source(&config.dataset)?;
    let mut proxies = config.sweep.proxies.clone();
    proxies.sort();
    proxies.dedup();
    let pretrain = if proxies.contains(&Proxy::Transfer) {
        Some(load_source(&pretrain_source(config)?)?)
    } else {
        None
    };
    let replicates = build_replicates(config, &dataset, &proxies, pretrain.as_ref())?;

    #[derive(Clone, Copy)]
    enum SweepCell {
        Baseline,
        Mix(Proxy, f64),
    }
    let cell_name = |c: SweepCell| match c {
        SweepCell::Baseline => "baseline".to_string(),
        SweepCell::Mix(p, r) => format!("{}@{r}", p.name()),
    };
    let mut kinds = vec![SweepCell::Baseline];
    for &p in &proxies {
        kinds.extend(ratios.iter().map(|&r| SweepCell::Mix(p, r)));
    }
    let cells: Vec<(&Replicate, SweepCell)> = replicates
        .iter()
        .flat_map(|r| kinds.iter().map(move |&k| (r, k)))
        .collect();
    let results = run_cells(cells, options, |&(replicate, kind)| {
        let name = cell_name(kind);
        let context = with_context(&name, replicate.label);
        let schedule = match kind {
            SweepCell::Baseline => build_single_stage(&replicate.coarse, &Level::COARSE, config.stage_epochs()),
            SweepCell::Mix(proxy, ratio) => {
                let [first, second] = config.sweep_stage_epochs();
                build_two_stage(
                    &replicate.proxies[&proxy],
                    ratio,
                    second,
                    derive_seed(replicate.root, &[&name, "schedule"]),
                )
                .map(|mut s| {
                    s.stages[0].epochs = first;
                    s
                })
            }
        }
        .map_err(&context)?;
        run_schedule(config, replicate, &name, &schedule, &[]).map_err(&context)
    })?;

    let final_auc = |name: &str| -> Result<crate::metrics::SeedSummary> {
        let values: Vec<f64> = results
            .iter()
            .filter(|c| c.arm == name)
            .map(|c| c.stages.last().expect("at least one stage").top_k_auc)
            .collect();
        summarize_seeds(&values)
    };
    let baseline = final_auc(&cell_name(SweepCell::Baseline))?;
    let rows = proxies
        .iter()
        .map(|&p| {
            Ok(SweepProxyRow {
                proxy: p,
                per_ratio: ratios
                    .iter()
                    .map(|&r| final_auc(&cell_name(SweepCell::Mix(p, r))))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut provenance = provenance(config);
    provenance.started_at_unix = started;
    provenance.finished_at_unix = options.timestamp.then(unix_now);
    Ok(SweepReport {
        name: config.name.clone(),
        provenance,
        ratios: ratios.to_vec(),
        baseline,
        proxies: rows,
        splits: replicates.iter().map(Replicate::split_summary).collect(),
    })
}

/// One arm trained on one replicate, with everything needed to inspect the run.
#[derive(Clone, Debug)]
pub struct SingleRun {
    pub schedule: CurriculumSchedule,
    pub model: Model,
    pub log: TrainingLog,
    pub cell: CellResult,
    pub split: SplitSummary,
}

/// Trains `arm` on the replicate with seed label `seed`, exactly as [`run`] would.
pub fn train_arm(config: &ExperimentConfig, arm: &ArmConfig, seed: u64) -> Result<SingleRun> {
    config.validate()?;
    let dataset = load_source(&config.dataset)?;
    let proxies = match arm.spec {
        ArmSpec::TwoStage { proxy, .. } => vec![proxy],
        _ => Vec::new(),
    };
    let pretrain = if proxies.contains(&Proxy::Transfer) {
        Some(load_source(&pretrain_source(config)?)?)
    } else {
        None
    };
    let context = with_context(&arm.name, seed);
    let replicate = Replicate::build(config, &dataset, seed, &proxies, pretrain.as_ref()).map_err(&context)?;
    let schedule = build_schedule(config, &replicate, arm).map_err(&context)?;
    let kappa_stages = kappa_stages_for(config, &arm.name, schedule.stages.len());
    let (cell, model, log) =
        run_schedule_full(config, &replicate, &arm.name, &schedule, &kappa_stages).map_err(&context)?;
    Ok(SingleRun {
        schedule,
        model,
        log,
        cell,
        split: replicate.split_summary(),
    })
}

/// Writes `dataset` to `path`, inferring the format from the extension.
pub fn save_generated(dataset: &Dataset, path: &Path) -> Result<()> {
    let format = DatasetFormat::from_path(path)
        .ok_or_else(|| Error::Config(format!("cannot infer the format of {}", path.display())))?;
    crate::dataset::save_dataset(dataset, path, format)
}
