//! Training schedules: cumulative four-stage curricula, random controls,
//! single-stage subsets and two-stage easy/hard mixtures.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::difficulty::{DifficultyAssignment, Granularity, Level, ScoreSource};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    /// 1-based.
    pub index: usize,
    pub epochs: usize,
    /// Multiset of example ids; repeats mean oversampling.
    pub example_ids: Vec<String>,
}

impl Stage {
    pub fn id_set(&self) -> BTreeSet<&str> {
        self.example_ids.iter().map(String::as_str).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Curriculum,
    Anti,
    RandomControl,
    Direct,
    SingleStage,
    TwoStage,
}

impl ScheduleKind {
    /// Kinds whose stages must be nested.
    pub fn is_cumulative(self) -> bool {
        matches!(
            self,
            ScheduleKind::Curriculum | ScheduleKind::Anti | ScheduleKind::RandomControl | ScheduleKind::Direct
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    EasyFirst,
    HardFirst,
}

/// What a schedule was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Staged {
        source: ScoreSource,
        direction: Direction,
        level_order: Vec<Level>,
    },
    RandomSizes {
        stage_sizes: Vec<usize>,
        seed: u64,
    },
    SingleStage {
        source: ScoreSource,
        included: Vec<Level>,
    },
    TwoStage {
        source: ScoreSource,
        hard_ratio: f64,
        easy_count: usize,
        hard_slots: usize,
        oversampled: bool,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub kind: ScheduleKind,
    pub stages: Vec<Stage>,
    pub provenance: Provenance,
}

impl CurriculumSchedule {
    pub fn stage_sizes(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.example_ids.len()).collect()
    }

    pub fn total_epochs(&self) -> usize {
        self.stages.iter().map(|s| s.epochs).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

fn check_epochs(epochs: usize) -> Result<()> {
    if epochs == 0 {
        return Err(Error::Range("stages need at least one epoch".into()));
    }
    Ok(())
}

/// Cumulative four-stage schedule over a fine assignment.
///
/// `EasyFirst` adds very easy, easy, hard, very hard in turn; `HardFirst` reverses
/// the order. Every stage contains all ids of the stages before it.
pub fn build_staged(
    assignment: &DifficultyAssignment,
    direction: Direction,
    epochs_per_stage: usize,
) -> Result<CurriculumSchedule> {
    if assignment.granularity != Granularity::Fine {
        return Err(Error::Granularity("staged schedules need a fine assignment".into()));
    }
    check_epochs(epochs_per_stage)?;
    let mut order = Level::FINE.to_vec();
    if direction == Direction::HardFirst {
        order.reverse();
    }
    let mut ids: Vec<String> = Vec::with_capacity(assignment.len());
    let mut stages = Vec::with_capacity(order.len());
    for (i, &level) in order.iter().enumerate() {
        let bin = assignment.ids_at(level);
        if i == 0 && bin.is_empty() {
            return Err(Error::EmptyStage(format!("first-stage bin `{level}` is empty")));
        }
        ids.extend(bin.into_iter().map(String::from));
        stages.push(Stage {
            index: i + 1,
            epochs: epochs_per_stage,
            example_ids: ids.clone(),
        });
    }
    let kind = match (direction, assignment.source) {
        (Direction::HardFirst, _) => ScheduleKind::Anti,
        (Direction::EasyFirst, ScoreSource::Direct) => ScheduleKind::Direct,
        (Direction::EasyFirst, _) => ScheduleKind::Curriculum,
    };
    Ok(CurriculumSchedule {
        kind,
        stages,
        provenance: Provenance::Staged {
            source: assignment.source,
            direction,
            level_order: order,
        },
    })
}

/// Cumulative schedule with uniformly random stage membership of the given sizes.
pub fn build_random_control(
    train_ids: &[String],
    stage_sizes: &[usize],
    epochs_per_stage: usize,
    seed: u64,
) -> Result<CurriculumSchedule> {
    check_epochs(epochs_per_stage)?;
    if stage_sizes.is_empty() || stage_sizes[0] == 0 {
        return Err(Error::Size("stage sizes must start with a positive size".into()));
    }
    if stage_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Size(format!(
            "sizes {stage_sizes:?} are not strictly increasing"
        )));
    }
    let mut ids: Vec<String> = train_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != train_ids.len() {
        return Err(Error::Size("training ids contain duplicates".into()));
    }
    if stage_sizes.last() != Some(&ids.len()) {
        return Err(Error::Size(format!(
            "last stage size {:?} must equal the {} training ids",
            stage_sizes.last(),
            ids.len()
        )));
    }
    // Prefixes of one uniform permutation: each stage adds a uniform subset of the remainder.
    ids.shuffle(&mut seed::rng(seed));
    let stages = stage_sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| Stage {
            index: i + 1,
            epochs: epochs_per_stage,
            example_ids: ids[..size].to_vec(),
        })
        .collect();
    Ok(CurriculumSchedule {
        kind: ScheduleKind::RandomControl,
        stages,
        provenance: Provenance::RandomSizes {
            stage_sizes: stage_sizes.to_vec(),
            seed,
        },
    })
}

/// One stage holding exactly the union of the named bins.
pub fn build_single_stage(
    assignment: &DifficultyAssignment,
    included: &[Level],
    epochs: usize,
) -> Result<CurriculumSchedule> {
    check_epochs(epochs)?;
    let included: BTreeSet<Level> = included.iter().copied().collect();
    let ids: Vec<String> = assignment
        .levels()
        .iter()
        .filter(|(_, l)| included.contains(l))
        .map(|(id, _)| id.clone())
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyStage(format!("bins {included:?} hold no examples")));
    }
    Ok(CurriculumSchedule {
        kind: ScheduleKind::SingleStage,
        stages: vec![Stage {
            index: 1,
            epochs,
            example_ids: ids,
        }],
        provenance: Provenance::SingleStage {
            source: assignment.source,
            included: included.into_iter().collect(),
        },
    })
}

/// Number of hard slots that make `hard_ratio` of a stage holding all `easy` ids.
pub fn hard_slots(hard_ratio: f64, easy: usize) -> usize {
    (hard_ratio / (1.0 - hard_ratio) * easy as f64).round() as usize
}

/// Easy-only stage followed by an easy/hard mixture.
///
/// For `hard_ratio < 1` stage 2 keeps every easy id and adds
/// `round(r / (1 − r) · |easy|)` hard slots, drawn without replacement while the hard
/// bin suffices. Beyond that each hard id appears `⌊h / |hard|⌋` times and the
/// remainder is drawn without replacement. For `hard_ratio = 1` stage 2 is the hard
/// bin alone.
pub fn build_two_stage(
    assignment: &DifficultyAssignment,
    hard_ratio: f64,
    epochs_per_stage: usize,
    seed: u64,
) -> Result<CurriculumSchedule> {
    if !(hard_ratio > 0.0 && hard_ratio <= 1.0) {
        return Err(Error::Range(format!("hard ratio must lie in (0, 1], got {hard_ratio}")));
    }
    if assignment.granularity != Granularity::Coarse {
        return Err(Error::Granularity(
            "two-stage schedules need a coarse assignment".into(),
        ));
    }
    check_epochs(epochs_per_stage)?;
    let easy: Vec<String> = assignment.ids_at(Level::Easy).into_iter().map(String::from).collect();
    let hard: Vec<&str> = assignment.ids_at(Level::Hard);
    if easy.is_empty() {
        return Err(Error::EmptyStage("easy bin is empty".into()));
    }
    if hard.is_empty() {
        return Err(Error::EmptyStage("hard bin is empty".into()));
    }
    let mut rng = seed::rng(seed);
    let (stage2, slots, oversampled) = if hard_ratio >= 1.0 {
        (
            hard.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            hard.len(),
            false,
        )
    } else {
        let h = hard_slots(hard_ratio, easy.len());
        let mut mix = easy.clone();
        let copies = h / hard.len();
        for _ in 0..copies {
            mix.extend(hard.iter().map(|s| s.to_string()));
        }
        let rest = h % hard.len();
        mix.extend(hard.choose_multiple(&mut rng, rest).map(|s| s.to_string()));
        (mix, h, copies > 0)
    };
    Ok(CurriculumSchedule {
        kind: ScheduleKind::TwoStage,
        stages: vec![
            Stage {
                index: 1,
                epochs: epochs_per_stage,
                example_ids: easy.clone(),
            },
            Stage {
                index: 2,
                epochs: epochs_per_stage,
                example_ids: stage2,
            },
        ],
        provenance: Provenance::TwoStage {
            source: assignment.source,
            hard_ratio,
            easy_count: easy.len(),
            hard_slots: slots,
            oversampled,
            seed,
        },
    })
}
