//! Trail authoring and assignment.
//!
//! A trail is built in two steps: a named draft first, then the level
//! structure with its evaluation configuration, which publishes it. The
//! level structure never changes after publication.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounts::{Caller, Class, Directory, Role};
use crate::catalog::{ActivityKind, Catalog};
use crate::engine::LevelStatus;
use crate::ids::{AccountId, ActivityId, ClassId, TrailId};
use crate::taxonomy::{Category, Domain, Selector};

/// Which categories are evaluated in each activity of a level, and how many
/// successful selecting activities each category needs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub selections: BTreeMap<ActivityId, BTreeSet<Category>>,
    pub thresholds: BTreeMap<Category, u32>,
}

impl EvaluationConfig {
    /// Number of activities at the level that select `category`. This is the
    /// largest threshold that can ever be met.
    pub fn coverage(&self, category: Category) -> u32 {
        self.selections
            .values()
            .filter(|cats| cats.contains(&category))
            .count() as u32
    }

    pub fn selected_categories(&self) -> BTreeSet<Category> {
        self.selections.values().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    /// 1-based.
    pub index: usize,
    pub activity_ids: BTreeSet<ActivityId>,
    pub config: EvaluationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrailState {
    Draft,
    Published,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub class_id: ClassId,
    pub deadline: Option<NaiveDate>,
    /// Mediator-entered grades. Never computed.
    #[serde(default)]
    pub grades: BTreeMap<AccountId, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trail {
    pub id: TrailId,
    pub name: String,
    pub description: String,
    pub author_id: AccountId,
    pub levels: Vec<Level>,
    pub state: TrailState,
    pub assignments: Vec<Assignment>,
}

impl Trail {
    pub fn level_of(&self, activity: ActivityId) -> Option<usize> {
        self.levels
            .iter()
            .find(|l| l.activity_ids.contains(&activity))
            .map(|l| l.index)
    }

    pub fn references(&self, activity: ActivityId) -> bool {
        self.level_of(activity).is_some()
    }

    pub fn assignment(&self, class: ClassId) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.class_id == class)
    }
}

/// Level as written by a mediator. Selections and thresholds accept domain
/// names as shorthand for all of the domain's categories.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub activities: Vec<ActivityId>,
    #[serde(default)]
    pub selections: BTreeMap<ActivityId, Vec<Selector>>,
    #[serde(default)]
    pub thresholds: BTreeMap<Selector, u32>,
}

/// Declarative single-trail document used for fixtures and bulk authoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailDocument {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub levels: Vec<LevelSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrailError {
    #[error("caller is not a mediator")]
    NotMediator,
    #[error("trail name must not be empty")]
    EmptyName,
    #[error("unknown trail {0}")]
    UnknownTrail(TrailId),
    #[error("caller did not author the trail")]
    NotAuthor,
    #[error("trail is not a draft")]
    TrailNotDraft,
    #[error("trail is not published")]
    TrailNotPublished,
    #[error("a trail needs at least one level")]
    NoLevels,
    #[error("level {level} has no activities")]
    EmptyLevel { level: usize },
    #[error("activity {activity} appears more than once in the trail")]
    DuplicateActivity { activity: ActivityId },
    #[error("activity {activity} in level {level} is not approved")]
    UnapprovedActivity { level: usize, activity: ActivityId },
    #[error("level {level} selects categories for {activity}, which is not in the level")]
    SelectionForeignActivity { level: usize, activity: ActivityId },
    #[error("level {level} has an empty selection for {activity}")]
    EmptySelection { level: usize, activity: ActivityId },
    #[error("{category} is not an objective of {activity} (level {level})")]
    SelectionOutsideObjectives {
        level: usize,
        activity: ActivityId,
        category: Category,
    },
    #[error("level {level}: threshold keys must match selected categories ({category})")]
    ThresholdMismatch { level: usize, category: Category },
    #[error("level {level}: threshold {threshold} for {category} exceeds coverage {coverage}")]
    ThresholdOutOfRange {
        level: usize,
        category: Category,
        threshold: u32,
        coverage: u32,
    },
    #[error("caller does not own the class")]
    NotOwner,
    #[error("trail is already assigned to this class")]
    AlreadyAssigned,
    #[error("student is not in any class assigned to the trail")]
    StudentNotAssigned,
    #[error("student is not assigned to the trail")]
    NotAssigned,
}

/// Validates one level spec against the catalog and builds the level.
pub fn build_level(index: usize, spec: &LevelSpec, catalog: &Catalog) -> Result<Level, TrailError> {
    let level = index;
    if spec.activities.is_empty() {
        return Err(TrailError::EmptyLevel { level });
    }
    let mut activity_ids = BTreeSet::new();
    for &activity in &spec.activities {
        if !activity_ids.insert(activity) {
            return Err(TrailError::DuplicateActivity { activity });
        }
        if catalog.approved(activity).is_none() {
            return Err(TrailError::UnapprovedActivity { level, activity });
        }
    }

    let mut selections = BTreeMap::new();
    for (&activity, selectors) in &spec.selections {
        let record = match catalog.approved(activity) {
            Some(r) if activity_ids.contains(&activity) => r,
            _ => return Err(TrailError::SelectionForeignActivity { level, activity }),
        };
        let cats: BTreeSet<Category> = selectors.iter().flat_map(|s| s.expand()).collect();
        if cats.is_empty() {
            return Err(TrailError::EmptySelection { level, activity });
        }
        if let Some(&category) = cats.iter().find(|c| !record.metadata.objectives.contains(c)) {
            return Err(TrailError::SelectionOutsideObjectives {
                level,
                activity,
                category,
            });
        }
        selections.insert(activity, cats);
    }

    let mut config = EvaluationConfig {
        selections,
        thresholds: BTreeMap::new(),
    };
    let selected = config.selected_categories();
    // Domain keys first so that explicit category keys override them.
    let mut keys: Vec<(&Selector, &u32)> = spec.thresholds.iter().collect();
    keys.sort_by_key(|(s, _)| matches!(s, Selector::Category(_)));
    for (selector, &value) in keys {
        match *selector {
            Selector::Domain(d) => {
                for &c in d.categories() {
                    if selected.contains(&c) {
                        config.thresholds.insert(c, value);
                    }
                }
            }
            Selector::Category(c) => {
                if !selected.contains(&c) {
                    let coverage = 0;
                    if value > coverage {
                        return Err(TrailError::ThresholdOutOfRange {
                            level,
                            category: c,
                            threshold: value,
                            coverage,
                        });
                    }
                    return Err(TrailError::ThresholdMismatch { level, category: c });
                }
                config.thresholds.insert(c, value);
            }
        }
    }
    if let Some(&category) = selected.iter().find(|c| !config.thresholds.contains_key(c)) {
        return Err(TrailError::ThresholdMismatch { level, category });
    }
    for (&category, &threshold) in &config.thresholds {
        let coverage = config.coverage(category);
        if threshold > coverage {
            return Err(TrailError::ThresholdOutOfRange {
                level,
                category,
                threshold,
                coverage,
            });
        }
    }
    Ok(Level {
        index,
        activity_ids,
        config,
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Trails {
    trails: BTreeMap<TrailId, Trail>,
    next_id: u64,
}

impl Trails {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: TrailId) -> Result<&Trail, TrailError> {
        self.trails.get(&id).ok_or(TrailError::UnknownTrail(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trail> {
        self.trails.values()
    }

    fn authored_mut(&mut self, caller: Caller, id: TrailId) -> Result<&mut Trail, TrailError> {
        let trail = self.trails.get_mut(&id).ok_or(TrailError::UnknownTrail(id))?;
        if trail.author_id != caller.id {
            return Err(TrailError::NotAuthor);
        }
        Ok(trail)
    }

    pub fn create_trail_draft(
        &mut self,
        caller: Caller,
        name: &str,
        description: &str,
    ) -> Result<&Trail, TrailError> {
        if caller.role != Role::Mediator {
            return Err(TrailError::NotMediator);
        }
        let name = name.trim();
        if name.is_empty() {
            return Err(TrailError::EmptyName);
        }
        self.next_id += 1;
        let id = TrailId(self.next_id);
        let trail = Trail {
            id,
            name: name.to_owned(),
            description: description.to_owned(),
            author_id: caller.id,
            levels: Vec::new(),
            state: TrailState::Draft,
            assignments: Vec::new(),
        };
        Ok(self.trails.entry(id).or_insert(trail))
    }

    /// Second authoring step: sets the levels and publishes the trail.
    pub fn define_levels(
        &mut self,
        caller: Caller,
        id: TrailId,
        specs: &[LevelSpec],
        catalog: &Catalog,
    ) -> Result<&Trail, TrailError> {
        let trail = self.authored_mut(caller, id)?;
        if trail.state != TrailState::Draft {
            return Err(TrailError::TrailNotDraft);
        }
        if specs.is_empty() {
            return Err(TrailError::NoLevels);
        }
        let mut seen = BTreeSet::new();
        let mut levels = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let level = build_level(i + 1, spec, catalog)?;
            for &activity in &level.activity_ids {
                if !seen.insert(activity) {
                    return Err(TrailError::DuplicateActivity { activity });
                }
            }
            levels.push(level);
        }
        trail.levels = levels;
        trail.state = TrailState::Published;
        Ok(trail)
    }

    pub fn assign_trail(
        &mut self,
        caller: Caller,
        id: TrailId,
        class: &Class,
        deadline: Option<NaiveDate>,
    ) -> Result<&Assignment, TrailError> {
        let trail = self.authored_mut(caller, id)?;
        if class.mediator_id != caller.id {
            return Err(TrailError::NotOwner);
        }
        if trail.state != TrailState::Published {
            return Err(TrailError::TrailNotPublished);
        }
        if trail.assignment(class.id).is_some() {
            return Err(TrailError::AlreadyAssigned);
        }
        trail.assignments.push(Assignment {
            class_id: class.id,
            deadline,
            grades: BTreeMap::new(),
        });
        Ok(trail.assignments.last().expect("just pushed"))
    }

    /// Records the grade on every assignment through which the student
    /// reaches the trail.
    pub fn set_grade(
        &mut self,
        caller: Caller,
        id: TrailId,
        student: AccountId,
        grade: &str,
        directory: &Directory,
    ) -> Result<&Trail, TrailError> {
        let trail = self.authored_mut(caller, id)?;
        let mut hit = false;
        for assignment in &mut trail.assignments {
            let member = directory
                .class(assignment.class_id)
                .is_some_and(|c| c.student_ids.contains(&student));
            if member {
                assignment.grades.insert(student, grade.trim().to_owned());
                hit = true;
            }
        }
        if !hit {
            return Err(TrailError::StudentNotAssigned);
        }
        Ok(trail)
    }

    /// Drops every assignment made to `class`.
    pub fn unassign_class(&mut self, class: ClassId) {
        for trail in self.trails.values_mut() {
            trail.assignments.retain(|a| a.class_id != class);
        }
    }

    pub fn references(&self, activity: ActivityId) -> bool {
        self.trails.values().any(|t| t.references(activity))
    }
}

/// Assignments (with their classes) through which `student` reaches `trail`,
/// in class-id order.
pub fn covering<'a>(
    trail: &'a Trail,
    student: AccountId,
    directory: &'a Directory,
) -> Vec<(&'a Assignment, &'a Class)> {
    trail
        .assignments
        .iter()
        .filter_map(|a| directory.class(a.class_id).map(|c| (a, c)))
        .filter(|(_, c)| c.student_ids.contains(&student))
        .collect()
}

/// The effective deadline over several covering assignments: open if any is
/// open, otherwise the latest date.
pub fn effective_deadline<'a>(assignments: impl IntoIterator<Item = &'a Assignment>) -> Option<NaiveDate> {
    let mut latest: Option<NaiveDate> = None;
    for a in assignments {
        let d = a.deadline?;
        latest = Some(latest.map_or(d, |l| l.max(d)));
    }
    latest
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityCard {
    pub id: ActivityId,
    pub name: String,
    pub description: String,
    pub area: String,
    pub kind: ActivityKind,
    pub image_ref: String,
    pub objectives: Vec<Category>,
    /// Domains touched by the objectives, for compact labels.
    pub objective_domains: Vec<Domain>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelView {
    pub index: usize,
    pub status: LevelStatus,
    pub activities: Vec<ActivityCard>,
}

/// Student-facing trail page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailView {
    pub trail_id: TrailId,
    pub name: String,
    pub description: String,
    pub mediator_name: String,
    pub class_names: Vec<String>,
    /// ISO date, or `"open"`.
    pub deadline: String,
    /// Mediator grade, or `"-"`.
    pub grade: String,
    pub level_count: usize,
    /// 1-based index of the level in progress; `None` once complete.
    pub current_level: Option<usize>,
    pub trail_complete: bool,
    pub levels: Vec<LevelView>,
}

pub const OPEN_DEADLINE: &str = "open";
pub const NO_GRADE: &str = "-";

pub fn deadline_label(deadline: Option<NaiveDate>) -> String {
    deadline.map_or_else(|| OPEN_DEADLINE.to_owned(), |d| d.to_string())
}
