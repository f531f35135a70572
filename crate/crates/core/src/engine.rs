//! Rule-based level evaluation and progression.
//!
//! Each configured category of a level is checked on its own: the student's
//! success value in the category (the number of successfully completed
//! activities that select it) must reach the mediator's minimum. A level is
//! complete when every configured category is achieved, which unlocks the
//! next level. Progress is a pure function of the accepted result events,
//! so it can always be rebuilt by replaying the log.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AccountId, ActivityId, TrailId};
use crate::taxonomy::Category;
use crate::trails::{Level, Trail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LevelStatus {
    Completed,
    InProgress,
    Locked,
}

/// A success/failure report from an activity. Never modified once logged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultEvent {
    pub student: AccountId,
    pub trail: TrailId,
    pub activity: ActivityId,
    pub success: bool,
    pub received_at: DateTime<Utc>,
    #[serde(default)]
    pub late: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailProgress {
    pub student: AccountId,
    pub trail: TrailId,
    pub level_status: Vec<LevelStatus>,
    /// Per level, activities with at least one successful result.
    pub succeeded_activities: Vec<BTreeSet<ActivityId>>,
    pub trail_complete: bool,
}

impl TrailProgress {
    /// 1-based index of the level in progress.
    pub fn current_level(&self) -> Option<usize> {
        self.level_status
            .iter()
            .position(|s| *s == LevelStatus::InProgress)
            .map(|i| i + 1)
    }

    pub fn status(&self, level: usize) -> Option<LevelStatus> {
        level
            .checked_sub(1)
            .and_then(|i| self.level_status.get(i))
            .copied()
    }

    pub fn succeeded(&self, activity: ActivityId) -> bool {
        self.succeeded_activities.iter().any(|s| s.contains(&activity))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryVerdict {
    pub success_value: u32,
    pub minimum: u32,
    pub achieved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Overall {
    LevelComplete,
    LevelIncomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelVerdict {
    pub level: usize,
    pub categories: BTreeMap<Category, CategoryVerdict>,
    pub overall: Overall,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("student is not assigned to the trail")]
    NotAssigned,
    #[error("progress already initialized")]
    AlreadyInitialized,
    #[error("no progress for this student and trail")]
    NoProgress,
    #[error("activity {0} is not part of the trail")]
    UnknownActivity(ActivityId),
    #[error("level {0} is locked")]
    LevelLocked(usize),
    #[error("level {0} is already completed")]
    LevelAlreadyCompleted(usize),
    #[error("trail already completed")]
    TrailComplete,
    #[error("{category} is not configured at level {level}")]
    CategoryNotConfigured { level: usize, category: Category },
    #[error("level {0} does not exist")]
    UnknownLevel(usize),
    #[error("event stream mixes students or trails")]
    MixedStreams,
}

impl EngineError {
    /// Rejections that still belong in the history: the student replayed an
    /// activity whose level is already done. They never change progress.
    pub fn is_historical(&self) -> bool {
        matches!(
            self,
            EngineError::LevelAlreadyCompleted(_) | EngineError::TrailComplete
        )
    }
}

fn level_at(levels: &[Level], level: usize) -> Result<&Level, EngineError> {
    level
        .checked_sub(1)
        .and_then(|i| levels.get(i))
        .ok_or(EngineError::UnknownLevel(level))
}

/// Success value of the student in `category` at `level`.
pub fn category_success(
    progress: &TrailProgress,
    levels: &[Level],
    level: usize,
    category: Category,
) -> Result<u32, EngineError> {
    let def = level_at(levels, level)?;
    if !def.config.thresholds.contains_key(&category) {
        return Err(EngineError::CategoryNotConfigured { level, category });
    }
    let succeeded = &progress.succeeded_activities[level - 1];
    Ok(def
        .config
        .selections
        .iter()
        .filter(|(a, cats)| cats.contains(&category) && succeeded.contains(a))
        .count() as u32)
}

/// Applies the per-category rule to every configured category, then the
/// all-achieved rule to the level.
pub fn evaluate_level(
    progress: &TrailProgress,
    levels: &[Level],
    level: usize,
) -> Result<LevelVerdict, EngineError> {
    let def = level_at(levels, level)?;
    let mut categories = BTreeMap::new();
    for (&category, &minimum) in &def.config.thresholds {
        let success_value = category_success(progress, levels, level, category)?;
        categories.insert(
            category,
            CategoryVerdict {
                success_value,
                minimum,
                achieved: success_value >= minimum,
            },
        );
    }
    let overall = if categories.values().all(|v| v.achieved) {
        Overall::LevelComplete
    } else {
        Overall::LevelIncomplete
    };
    Ok(LevelVerdict {
        level,
        categories,
        overall,
    })
}

/// Fresh progress: level 1 in progress, the rest locked. Levels that are
/// already satisfied (all minimums zero) complete immediately.
pub fn init_progress(student: AccountId, trail: &Trail) -> TrailProgress {
    let n = trail.levels.len();
    let mut level_status = vec![LevelStatus::Locked; n];
    if let Some(first) = level_status.first_mut() {
        *first = LevelStatus::InProgress;
    }
    let mut progress = TrailProgress {
        student,
        trail: trail.id,
        level_status,
        succeeded_activities: vec![BTreeSet::new(); n],
        trail_complete: n == 0,
    };
    advance(&mut progress, &trail.levels);
    progress
}

/// Completes the current level while its verdict holds and unlocks the next.
fn advance(progress: &mut TrailProgress, levels: &[Level]) {
    while let Some(current) = progress.current_level() {
        let verdict = evaluate_level(progress, levels, current).expect("current level exists");
        if verdict.overall != Overall::LevelComplete {
            return;
        }
        progress.level_status[current - 1] = LevelStatus::Completed;
        match progress.level_status.get_mut(current) {
            Some(next) => *next = LevelStatus::InProgress,
            None => progress.trail_complete = true,
        }
    }
}

/// State transition for one result. On error the progress is unchanged.
pub fn apply_result(
    progress: &mut TrailProgress,
    levels: &[Level],
    activity: ActivityId,
    success: bool,
) -> Result<(), EngineError> {
    let level = levels
        .iter()
        .find(|l| l.activity_ids.contains(&activity))
        .map(|l| l.index)
        .ok_or(EngineError::UnknownActivity(activity))?;
    let status = progress.status(level).ok_or(EngineError::UnknownLevel(level))?;
    if status == LevelStatus::Locked {
        return Err(EngineError::LevelLocked(level));
    }
    if success {
        progress.succeeded_activities[level - 1].insert(activity);
    }
    // A replayed success still marks the activity as done, but a completed
    // level never moves again.
    if progress.trail_complete {
        return Err(EngineError::TrailComplete);
    }
    if status == LevelStatus::Completed {
        return Err(EngineError::LevelAlreadyCompleted(level));
    }
    if success {
        advance(progress, levels);
    }
    Ok(())
}

/// Rebuilds progress from an event stream for one (student, trail) pair.
/// Events that live processing would reject are skipped.
pub fn replay<'a>(
    student: AccountId,
    trail: &Trail,
    events: impl IntoIterator<Item = &'a ResultEvent>,
) -> Result<TrailProgress, EngineError> {
    let mut progress = init_progress(student, trail);
    for event in events {
        if event.student != student || event.trail != trail.id {
            return Err(EngineError::MixedStreams);
        }
        let _ = apply_result(&mut progress, &trail.levels, event.activity, event.success);
    }
    Ok(progress)
}

/// Live progress records and the append-only result history.
#[derive(Debug, Default)]
pub struct ProgressBook {
    progress: BTreeMap<(AccountId, TrailId), TrailProgress>,
    events: Vec<ResultEvent>,
}

impl ProgressBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn init_progress(
        &mut self,
        student: AccountId,
        trail: &Trail,
    ) -> Result<&TrailProgress, EngineError> {
        use std::collections::btree_map::Entry;
        match self.progress.entry((student, trail.id)) {
            Entry::Occupied(_) => Err(EngineError::AlreadyInitialized),
            Entry::Vacant(v) => Ok(v.insert(init_progress(student, trail))),
        }
    }

    pub fn get(&self, student: AccountId, trail: TrailId) -> Option<&TrailProgress> {
        self.progress.get(&(student, trail))
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrailProgress> {
        self.progress.values()
    }

    pub fn events(&self) -> &[ResultEvent] {
        &self.events
    }

    /// Applies `event` to the matching progress record. Accepted events and
    /// historical rejections are appended to the log.
    pub fn record_result(
        &mut self,
        event: ResultEvent,
        trail: &Trail,
    ) -> Result<&TrailProgress, EngineError> {
        if event.trail != trail.id {
            return Err(EngineError::MixedStreams);
        }
        let progress = self
            .progress
            .get_mut(&(event.student, event.trail))
            .ok_or(EngineError::NoProgress)?;
        match apply_result(progress, &trail.levels, event.activity, event.success) {
            Ok(()) => {
                self.events.push(event);
                Ok(progress)
            }
            Err(e) => {
                if e.is_historical() {
                    self.events.push(event);
                }
                Err(e)
            }
        }
    }

    /// Replaces the log and rebuilds every record in `pairs` from it.
    pub fn restore<'a>(
        pairs: impl IntoIterator<Item = (AccountId, &'a Trail)>,
        events: Vec<ResultEvent>,
    ) -> Result<Self, EngineError> {
        let mut streams: BTreeMap<(AccountId, TrailId), Vec<&ResultEvent>> = BTreeMap::new();
        for e in &events {
            streams.entry((e.student, e.trail)).or_default().push(e);
        }
        let mut progress = BTreeMap::new();
        for (student, trail) in pairs {
            let stream = streams.remove(&(student, trail.id)).unwrap_or_default();
            progress.insert((student, trail.id), replay(student, trail, stream)?);
        }
        Ok(ProgressBook { progress, events })
    }
}
