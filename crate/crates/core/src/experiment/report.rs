//! Report types and their CSV, JSON and Markdown renderings.
//!
//! AUCs are printed as percentages with one decimal, κ with three decimals and
//! p-values in scientific notation. JSON keeps full precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::difficulty::Level;
use crate::error::{Error, Result};
use crate::metrics::{t_test_two_sample, SeedSummary, TTest};

use super::config::{ArmSpec, Proxy};
use super::runner::hex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub crate_version: String,
    /// Wall-clock stamps; the only fields allowed to differ between identical runs.
    pub started_at_unix: Option<u64>,
    pub finished_at_unix: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    /// Realized test share; group boundaries make it differ from the request.
    pub test_fraction: f64,
    pub train_class1_fraction: f64,
    pub test_class1_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub num_examples: usize,
    pub num_annotators: usize,
    pub feature_dim: usize,
    pub agreement_histogram: BTreeMap<usize, usize>,
    pub coarse_easy_fraction: f64,
    pub splits: Vec<SplitSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// Arm mean minus baseline mean.
    pub delta: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub underflow: bool,
    /// `***` for p ≤ 0.001, `*` for p ≤ 0.05, empty otherwise or when the arm is
    /// not better than the baseline.
    pub stars: String,
}

impl Significance {
    pub fn new(delta: f64, t: TTest) -> Self {
        Self {
            stars: stars(delta, t.p).to_string(),
            delta,
            t: t.t,
            df: t.df,
            p: t.p,
            underflow: t.underflow,
        }
    }
}

pub fn stars(delta: f64, p: f64) -> &'static str {
    if delta <= 0.0 {
        ""
    } else if p <= 0.001 {
        "***"
    } else if p <= 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// 1-based.
    pub stage: usize,
    pub label: String,
    /// Training multiset size per seed.
    pub train_sizes: Vec<usize>,
    /// Top-k AUC over seeds, as a fraction.
    pub overall: SeedSummary,
    pub per_stratum: BTreeMap<Level, SeedSummary>,
    pub significance: Option<Significance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub spec: ArmSpec,
    pub stages: Vec<StageReport>,
}

impl ArmReport {
    pub fn block(&self) -> &'static str {
        block_name(&self.spec)
    }

    pub fn final_stage(&self) -> &StageReport {
        self.stages.last().expect("arms have at least one stage")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineRef {
    pub arm: String,
    pub stage: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaModelReport {
    pub arm: String,
    pub stage: usize,
    /// Per threshold: mean κ over annotators, summarized over seeds.
    pub mean_kappa: Vec<SeedSummary>,
    /// `[threshold][annotator]` κ averaged over seeds.
    pub per_annotator: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorReferenceSummary {
    /// Each annotator's mean κ against the others, averaged over seeds.
    pub per_annotator_mean: Vec<f64>,
    pub mean_over_pairs: SeedSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaSection {
    pub thresholds: Vec<f64>,
    pub models: Vec<KappaModelReport>,
    pub annotators: Option<AnnotatorReferenceSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub provenance: Provenance,
    pub data: DataSummary,
    pub baseline: Option<BaselineRef>,
    pub arms: Vec<ArmReport>,
    pub kappa: KappaSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepProxyRow {
    pub proxy: Proxy,
    /// One summary per ratio, in the report's ratio order.
    pub per_ratio: Vec<SeedSummary>,
}

impl SweepProxyRow {
    /// Highest mean over ratios.
    pub fn best(&self) -> f64 {
        self.per_ratio.iter().map(|s| s.mean).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub provenance: Provenance,
    pub ratios: Vec<f64>,
    pub baseline: SeedSummary,
    pub proxies: Vec<SweepProxyRow>,
    pub splits: Vec<SplitSummary>,
}

impl SweepReport {
    pub fn row(&self, proxy: Proxy) -> Option<&SweepProxyRow> {
        self.proxies.iter().find(|r| r.proxy == proxy)
    }

    /// Mean AUC of `proxy` at `ratio`, if both were run.
    pub fn mean_at(&self, proxy: Proxy, ratio: f64) -> Option<f64> {
        let i = self.ratios.iter().position(|&r| r == ratio)?;
        Some(self.row(proxy)?.per_ratio[i].mean)
    }
}

fn block_name(spec: &ArmSpec) -> &'static str {
    match spec {
        ArmSpec::SingleStage { .. } => "Single-Stage Training",
        ArmSpec::Curriculum => "Curriculum Learning (annotator agreement)",
        ArmSpec::Anti => "Anti-Curriculum Learning",
        ArmSpec::Direct => "Curriculum Learning (direct difficulty annotation)",
        ArmSpec::RandomControl => "Random Stages (control)",
        ArmSpec::TwoStage { .. } => "Two-Stage Training",
    }
}

fn level_text(level: Level) -> &'static str {
    match level {
        Level::VeryEasy => "very easy",
        Level::Easy => "easy",
        Level::Hard => "hard",
        Level::VeryHard => "very hard",
    }
}

fn join_levels(levels: &[Level]) -> String {
    levels.iter().map(|&l| level_text(l)).collect::<Vec<_>>().join(" + ")
}

/// Human-readable description of what stage `stage` (1-based) trains on.
pub fn stage_label(spec: &ArmSpec, stage: usize) -> String {
    use Level::*;
    let easy_first = [VeryEasy, Easy, Hard, VeryHard];
    let hard_first = [VeryHard, Hard, Easy, VeryEasy];
    match spec {
        ArmSpec::SingleStage { bins } => join_levels(bins),
        ArmSpec::Curriculum | ArmSpec::Direct => join_levels(&easy_first[..stage.min(4)]),
        ArmSpec::Anti => join_levels(&hard_first[..stage.min(4)]),
        ArmSpec::RandomControl => format!("random stage {stage}"),
        ArmSpec::TwoStage { proxy, hard_ratio } => match stage {
            1 => format!("easy ({})", proxy.name()),
            _ if *hard_ratio >= 1.0 => format!("hard ({})", proxy.name()),
            _ => format!("easy + {:.0}% hard ({})", 100.0 * hard_ratio, proxy.name()),
        },
    }
}

pub fn fmt_auc(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

pub fn fmt_kappa(v: f64) -> String {
    format!("{v:.3}")
}

pub fn fmt_p(p: f64) -> String {
    format!("{p:.3e}")
}

fn mean_size(sizes: &[usize]) -> f64 {
    sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

pub const REPORT_CSV_HEADER: [&str; 21] = [
    "block",
    "arm",
    "stage",
    "label",
    "mean_train_size",
    "seeds",
    "overall_auc",
    "overall_std",
    "very_easy_auc",
    "very_easy_std",
    "easy_auc",
    "easy_std",
    "hard_auc",
    "hard_std",
    "very_hard_auc",
    "very_hard_std",
    "delta",
    "t",
    "df",
    "p",
    "stars",
];

pub const KAPPA_CSV_HEADER_PREFIX: [&str; 5] = ["model", "stage", "threshold", "mean_kappa", "std_kappa"];

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// JSON with the wall-clock stamps removed.
    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.provenance.started_at_unix = None;
        copy.provenance.finished_at_unix = None;
        copy.to_json()
    }

    /// SHA-256 of [`Self::deterministic_json`].
    pub fn determinism_hash(&self) -> String {
        hex(&Sha256::digest(self.deterministic_json().as_bytes()))
    }

    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }

    /// Recomputes every t-test from the stored per-seed values and checks the
    /// stored statistics and stars against it.
    pub fn verify_significance(&self) -> Result<()> {
        let Some(b) = &self.baseline else { return Ok(()) };
        let base = &self
            .arm(&b.arm)
            .ok_or_else(|| Error::Config(format!("baseline arm `{}` missing from report", b.arm)))?
            .stages[b.stage - 1]
            .overall;
        for arm in &self.arms {
            for stage in &arm.stages {
                let Some(sig) = &stage.significance else { continue };
                let t = t_test_two_sample(&stage.overall.values, &base.values)?;
                let expected = Significance::new(stage.overall.mean - base.mean, t);
                if expected != *sig {
                    return Err(Error::Config(format!(
                        "stored significance of `{}` stage {} does not match its raw values",
                        arm.name, stage.stage
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn table_csv(&self) -> String {
        let mut rows = vec![REPORT_CSV_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for arm in &self.arms {
            for stage in &arm.stages {
                let mut row = vec![
                    arm.block().to_string(),
                    arm.name.clone(),
                    stage.stage.to_string(),
                    stage.label.clone(),
                    format!("{:.1}", mean_size(&stage.train_sizes)),
                    stage.overall.count.to_string(),
                    fmt_auc(stage.overall.mean),
                    fmt_auc(stage.overall.std),
                ];
                for level in Level::FINE {
                    match stage.per_stratum.get(&level) {
                        Some(s) => row.extend([fmt_auc(s.mean), fmt_auc(s.std)]),
                        None => row.extend([String::new(), String::new()]),
                    }
                }
                match &stage.significance {
                    Some(s) => row.extend([
                        fmt_auc(s.delta),
                        format!("{:.3}", s.t),
                        format!("{:.1}", s.df),
                        fmt_p(s.p),
                        s.stars.clone(),
                    ]),
                    None => row.extend(std::iter::repeat_n(String::new(), 5)),
                }
                rows.push(row);
            }
        }
        csv_string(rows)
    }

    pub fn kappa_csv(&self) -> String {
        let k = self.data.num_annotators;
        let mut header: Vec<String> = KAPPA_CSV_HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
        header.extend((0..k).map(|a| format!("annotator_{a}")));
        let mut rows = vec![header];
        for model in &self.kappa.models {
            for (t, &tau) in self.kappa.thresholds.iter().enumerate() {
                let mut row = vec![
                    model.arm.clone(),
                    model.stage.to_string(),
                    format!("{tau}"),
                    fmt_kappa(model.mean_kappa[t].mean),
                    fmt_kappa(model.mean_kappa[t].std),
                ];
                row.extend(model.per_annotator[t].iter().map(|&v| fmt_kappa(v)));
                rows.push(row);
            }
        }
        if let Some(a) = &self.kappa.annotators {
            let mut row = vec![
                "annotator_reference".to_string(),
                String::new(),
                String::new(),
                fmt_kappa(a.mean_over_pairs.mean),
                fmt_kappa(a.mean_over_pairs.std),
            ];
            row.extend(a.per_annotator_mean.iter().map(|&v| fmt_kappa(v)));
            rows.push(row);
        }
        csv_string(rows)
    }

    pub fn markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# {}\n", self.name);
        let _ = writeln!(
            md,
            "Top-5 test AUC (%) as mean ± std over {} seeds. Stars mark improvements over the baseline \
             (`*` p ≤ 0.05, `***` p ≤ 0.001, Welch t-test).\n",
            self.provenance.seeds.len()
        );
        if let Some(b) = &self.baseline {
            let _ = writeln!(md, "Baseline: `{}` stage {}.\n", b.arm, b.stage);
        }
        md.push_str("| Training | Stage | Overall | Very easy | Easy | Hard | Very hard | p |\n");
        md.push_str("|---|---|---|---|---|---|---|---|\n");
        let mut current_block = "";
        for arm in &self.arms {
            if arm.block() != current_block {
                current_block = arm.block();
                let _ = writeln!(md, "| **{current_block}** | | | | | | | |");
            }
            for stage in &arm.stages {
                let cell = |s: Option<&SeedSummary>| {
                    s.map_or("–".to_string(), |s| {
                        format!("{} ± {}", fmt_auc(s.mean), fmt_auc(s.std))
                    })
                };
                let (stars, p) = match &stage.significance {
                    Some(s) => (format!(" {}", s.stars), fmt_p(s.p)),
                    None => (String::new(), String::new()),
                };
                let _ = write!(
                    md,
                    "| {} (`{}`) | {} | {}{} |",
                    stage.label,
                    arm.name,
                    stage.stage,
                    cell(Some(&stage.overall)),
                    stars.trim_end()
                );
                for level in Level::FINE {
                    let _ = write!(md, " {} |", cell(stage.per_stratum.get(&level)));
                }
                let _ = writeln!(md, " {p} |");
            }
        }
        if !self.kappa.models.is_empty() {
            md.push_str("\n## Agreement with annotators (Cohen's κ)\n\n| Threshold |");
            for m in &self.kappa.models {
                let _ = write!(md, " `{}` stage {} |", m.arm, m.stage);
            }
            md.push('\n');
            md.push_str(&"|---".repeat(self.kappa.models.len() + 1));
            md.push_str("|\n");
            for (t, tau) in self.kappa.thresholds.iter().enumerate() {
                let _ = write!(md, "| {tau} |");
                for m in &self.kappa.models {
                    let _ = write!(md, " {} |", fmt_kappa(m.mean_kappa[t].mean));
                }
                md.push('\n');
            }
        }
        if let Some(a) = &self.kappa.annotators {
            md.push_str("\nAnnotator reference lines (mean κ against the other annotators):\n\n");
            for (i, v) in a.per_annotator_mean.iter().enumerate() {
                let _ = writeln!(md, "- annotator {i}: {}", fmt_kappa(*v));
            }
            let _ = writeln!(md, "- mean over pairs: {}", fmt_kappa(a.mean_over_pairs.mean));
        }
        md
    }
}

/// Writes the report in `format` under `dir`, returning the files written.
///
/// JSON goes to `report.json`, CSV to `report.csv` plus `kappa.csv`, Markdown to `report.md`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    match format {
        ReportFormat::Json => Ok(vec![write_file(&dir.join("report.json"), &report.to_json())?]),
        ReportFormat::Csv => Ok(vec![
            write_file(&dir.join("report.csv"), &report.table_csv())?,
            write_file(&dir.join("kappa.csv"), &report.kappa_csv())?,
        ]),
        ReportFormat::Markdown => Ok(vec![write_file(&dir.join("report.md"), &report.markdown())?]),
    }
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.provenance.started_at_unix = None;
        copy.provenance.finished_at_unix = None;
        copy.to_json()
    }

    pub fn table_csv(&self) -> String {
        let mut rows = vec![["proxy", "hard_ratio_percent", "seeds", "auc", "std"]
            .map(String::from)
            .to_vec()];
        for row in &self.proxies {
            for (r, s) in self.ratios.iter().zip(&row.per_ratio) {
                rows.push(vec![
                    row.proxy.name().to_string(),
                    format!("{:.0}", 100.0 * r),
                    s.count.to_string(),
                    fmt_auc(s.mean),
                    fmt_auc(s.std),
                ]);
            }
        }
        rows.push(vec![
            "single_stage_baseline".into(),
            String::new(),
            self.baseline.count.to_string(),
            fmt_auc(self.baseline.mean),
            fmt_auc(self.baseline.std),
        ]);
        csv_string(rows)
    }

    pub fn markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# {}: hard ratio in stage 2\n", self.name);
        md.push_str("| Proxy |");
        for r in &self.ratios {
            let _ = write!(md, " {:.0}% |", 100.0 * r);
        }
        md.push('\n');
        md.push_str(&"|---".repeat(self.ratios.len() + 1));
        md.push_str("|\n");
        for row in &self.proxies {
            let _ = write!(md, "| {} |", row.proxy.display_name());
            for s in &row.per_ratio {
                let _ = write!(md, " {} ± {} |", fmt_auc(s.mean), fmt_auc(s.std));
            }
            md.push('\n');
        }
        let _ = writeln!(
            md,
            "\nSingle-stage baseline: {} ± {}",
            fmt_auc(self.baseline.mean),
            fmt_auc(self.baseline.std)
        );
        md
    }
}

/// Writes a sweep report as `sweep.json`, `sweep.csv` or `sweep.md` under `dir`.
pub fn emit_sweep_report(report: &SweepReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let (name, body) = match format {
        ReportFormat::Json => ("sweep.json", report.to_json()),
        ReportFormat::Csv => ("sweep.csv", report.table_csv()),
        ReportFormat::Markdown => ("sweep.md", report.markdown()),
    };
    Ok(vec![write_file(&dir.join(name), &body)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars_need_improvement() {
        assert_eq!(stars(0.01, 0.0005), "***");
        assert_eq!(stars(0.01, 0.001), "***");
        assert_eq!(stars(0.01, 0.02), "*");
        assert_eq!(stars(0.01, 0.2), "");
        assert_eq!(stars(-0.01, 1e-9), "");
    }

    #[test]
    fn stage_labels_follow_order() {
        assert_eq!(stage_label(&ArmSpec::Curriculum, 2), "very easy + easy");
        assert_eq!(stage_label(&ArmSpec::Anti, 1), "very hard");
        let two = ArmSpec::TwoStage {
            proxy: Proxy::Agreement,
            hard_ratio: 0.33,
        };
        assert_eq!(stage_label(&two, 2), "easy + 33% hard (agreement)");
    }

    #[test]
    fn formats_parse() {
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert!("xml".parse::<ReportFormat>().is_err());
        assert_eq!(fmt_p(0.000123), "1.230e-4");
        assert_eq!(fmt_auc(0.8374), "83.7");
        assert_eq!(fmt_kappa(0.12345), "0.123");
    }
}
