//! The portal: every module operation wired to shared state and storage.
//!
//! Cross-module rules live here (only approved activities in trails,
//! progress initialization on assignment, class removal gated on progress).
//! Every successful mutation is persisted before returning.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounts::{
    Account, AccountsError, Caller, Class, ClassChanges, Role, Session, UserProfile,
};
use crate::catalog::{
    ActivityDraft, ActivityFilter, ActivityRecord, Catalog, CatalogError, Decision,
};
use crate::engine::{self, EngineError, ProgressBook, ResultEvent, TrailProgress};
use crate::ids::{AccountId, ActivityId, ClassId, TrailId};
use crate::interop::{self, InteropError, Mf2Document, Mf2Item, ResumeEntry};
use crate::store::{StateDoc, Storage, StoreError};
use crate::trails::{
    self, ActivityCard, Assignment, LevelSpec, LevelView, Trail, TrailDocument, TrailError,
    TrailState, TrailView,
};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

#[derive(Debug, Error)]
pub enum PortalError {
    #[error(transparent)]
    Accounts(#[from] AccountsError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Trail(#[from] TrailError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Interop(#[from] InteropError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type PortalResult<T> = Result<T, PortalError>;

/// Returned to developers on submission: the record plus how the activity
/// must report results back.
#[derive(Debug, Clone, Serialize)]
pub struct SubmissionReceipt {
    pub activity: ActivityRecord,
    pub result_protocol: ResultProtocol,
}

/// Description of the result-report bridge handed to developers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultProtocol {
    pub method: &'static str,
    pub path: &'static str,
    pub authorization: &'static str,
    pub content_type: &'static str,
    pub payload: BTreeMap<&'static str, &'static str>,
    pub guidelines: &'static str,
}

pub fn result_protocol() -> ResultProtocol {
    ResultProtocol {
        method: "POST",
        path: "/results",
        authorization: "Bearer <session token of the student running the activity>",
        content_type: "application/json",
        payload: [
            ("trail", "integer id of the trail the activity was launched from"),
            ("activity", "integer id of this activity"),
            ("success", "boolean: true when the player succeeded"),
        ]
        .into(),
        guidelines: "When the run ends, the hosting page posts exactly one result. \
                     Any number of runs may be reported; a success is never revoked.",
    }
}

/// Row in a trail list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailSummary {
    pub id: TrailId,
    pub name: String,
    pub description: String,
    pub state: TrailState,
    pub level_count: usize,
    pub class_names: Vec<String>,
    /// Students only: level in progress, `None` when complete.
    pub current_level: Option<usize>,
    pub trail_complete: Option<bool>,
    pub deadline: String,
    pub grade: Option<String>,
}

pub struct Portal {
    state: StateDoc,
    book: ProgressBook,
    storage: Box<dyn Storage>,
    clock: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    pub events: usize,
    pub records: usize,
    /// Snapshots that were missing and have been rewritten from the log.
    pub restored: usize,
}

impl Portal {
    /// Loads state from `storage` and rebuilds progress by replaying the log.
    pub fn open(storage: Box<dyn Storage>, clock: Clock) -> PortalResult<Self> {
        let state = storage.load_state()?.unwrap_or_default();
        let events = storage.load_events()?;
        let book = rebuild(&state, events)?;
        Ok(Portal {
            state,
            book,
            storage,
            clock,
        })
    }

    fn persist(&mut self) -> PortalResult<()> {
        self.storage.save_state(&self.state)?;
        Ok(())
    }

    fn caller(&self, id: AccountId) -> PortalResult<Caller> {
        self.state
            .directory
            .account(id)
            .map(Caller::from)
            .ok_or_else(|| AccountsError::UnknownUser(id).into())
    }

    pub fn account(&self, id: AccountId) -> Option<&Account> {
        self.state.directory.account(id)
    }

    pub fn find_account(&self, email: &str) -> Option<&Account> {
        self.state.directory.find_by_email(email)
    }

    pub fn trail(&self, id: TrailId) -> PortalResult<&Trail> {
        Ok(self.state.trails.get(id)?)
    }

    pub fn class(&self, id: ClassId) -> Option<&Class> {
        self.state.directory.class(id)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.state.catalog
    }

    pub fn events(&self) -> &[ResultEvent] {
        self.book.events()
    }

    pub fn progress_records(&self) -> impl Iterator<Item = &TrailProgress> {
        self.book.iter()
    }

    // accounts

    pub fn register_user(
        &mut self,
        profile: UserProfile,
        role: Role,
        password: &str,
    ) -> PortalResult<Account> {
        let account = self
            .state
            .directory
            .register_user(profile, role, password)?
            .clone();
        self.persist()?;
        Ok(account)
    }

    /// Creates the configured admin unless an account with that email exists.
    pub fn provision_admin(&mut self, profile: UserProfile, password: &str) -> PortalResult<Account> {
        if let Some(existing) = self.state.directory.find_by_email(&profile.email) {
            return Ok(existing.clone());
        }
        let account = self
            .state
            .directory
            .provision_admin(profile, password)?
            .clone();
        self.persist()?;
        Ok(account)
    }

    pub fn authenticate(&mut self, email: &str, password: &str) -> PortalResult<Session> {
        Ok(self.state.directory.authenticate(email, password)?)
    }

    pub fn session(&self, token: &str) -> Option<Caller> {
        self.state.directory.session(token).map(|s| Caller {
            id: s.account_id,
            role: s.role,
        })
    }

    pub fn create_class(
        &mut self,
        caller: AccountId,
        name: &str,
        description: &str,
        students: BTreeSet<AccountId>,
    ) -> PortalResult<Class> {
        let caller = self.caller(caller)?;
        let class = self
            .state
            .directory
            .create_class(caller, name, description, students)?
            .clone();
        self.persist()?;
        Ok(class)
    }

    /// Applies class changes; students added to a class with assigned trails
    /// get their progress initialized.
    pub fn update_class(
        &mut self,
        caller: AccountId,
        id: ClassId,
        changes: ClassChanges,
    ) -> PortalResult<Class> {
        let caller = self.caller(caller)?;
        let class = self
            .state
            .directory
            .update_class(caller, id, changes)?
            .clone();
        let assigned: Vec<TrailId> = self
            .state
            .trails
            .iter()
            .filter(|t| t.assignment(id).is_some())
            .map(|t| t.id)
            .collect();
        for trail in assigned {
            for &student in &class.student_ids {
                self.enrol(student, trail)?;
            }
        }
        self.persist()?;
        Ok(class)
    }

    pub fn remove_class(&mut self, caller: AccountId, id: ClassId) -> PortalResult<Class> {
        let caller = self.caller(caller)?;
        let trails = &self.state.trails;
        let book = &self.book;
        let removed = self.state.directory.remove_class(caller, id, |class| {
            trails
                .iter()
                .filter(|t| t.assignment(class.id).is_some())
                .any(|t| {
                    class.student_ids.iter().any(|&s| {
                        book.get(s, t.id).is_some_and(|p| !p.trail_complete)
                    })
                })
        })?;
        self.state.trails.unassign_class(id);
        self.persist()?;
        Ok(removed)
    }

    pub fn list_classes(&self, caller: AccountId) -> PortalResult<Vec<Class>> {
        let caller = self.caller(caller)?;
        let dir = &self.state.directory;
        Ok(match caller.role {
            Role::Mediator => dir
                .classes()
                .filter(|c| c.mediator_id == caller.id)
                .cloned()
                .collect(),
            Role::Student => dir.classes_of_student(caller.id).cloned().collect(),
            Role::Admin => dir.classes().cloned().collect(),
            Role::Developer => Vec::new(),
        })
    }

    // catalog

    pub fn submit_activity(
        &mut self,
        caller: AccountId,
        draft: ActivityDraft,
        package: &[u8],
    ) -> PortalResult<SubmissionReceipt> {
        let caller = self.caller(caller)?;
        let record = self
            .state
            .catalog
            .submit_activity(caller, draft, package)?
            .clone();
        self.storage.put_package(&record.package_ref, package)?;
        self.persist()?;
        Ok(SubmissionReceipt {
            activity: record,
            result_protocol: result_protocol(),
        })
    }

    pub fn moderate_activity(
        &mut self,
        caller: AccountId,
        id: ActivityId,
        decision: Decision,
        note: Option<String>,
    ) -> PortalResult<ActivityRecord> {
        let caller = self.caller(caller)?;
        let record = self
            .state
            .catalog
            .moderate_activity(caller, id, decision, note)?
            .clone();
        self.persist()?;
        Ok(record)
    }

    pub fn list_activities(
        &self,
        caller: AccountId,
        filter: &ActivityFilter,
    ) -> PortalResult<Vec<ActivityRecord>> {
        let caller = self.caller(caller)?;
        Ok(self
            .state
            .catalog
            .list_activities(caller, filter)
            .into_iter()
            .cloned()
            .collect())
    }

    pub fn withdraw_activity(&mut self, caller: AccountId, id: ActivityId) -> PortalResult<ActivityRecord> {
        let caller = self.caller(caller)?;
        let referenced = self.state.trails.references(id);
        let removed = self.state.catalog.withdraw_activity(caller, id, referenced)?;
        self.persist()?;
        Ok(removed)
    }

    fn visible_activity(&self, caller: Caller, id: ActivityId) -> PortalResult<&ActivityRecord> {
        self.state
            .catalog
            .get(id)
            .filter(|r| Catalog::visible_to(caller, r))
            .ok_or_else(|| CatalogError::UnknownActivity(id).into())
    }

    pub fn activity_dublincore(&self, caller: AccountId, id: ActivityId) -> PortalResult<Mf2Item> {
        let caller = self.caller(caller)?;
        Ok(interop::export_activity_dc(self.visible_activity(caller, id)?))
    }

    pub fn activity_list_review(&self, caller: AccountId, filter: &ActivityFilter) -> PortalResult<Mf2Item> {
        let list = self.list_activities(caller, filter)?;
        Ok(interop::export_activity_list(&list))
    }

    pub fn package(&self, caller: AccountId, id: ActivityId) -> PortalResult<Vec<u8>> {
        let caller = self.caller(caller)?;
        let record = self.visible_activity(caller, id)?;
        self.storage
            .get_package(&record.package_ref)?
            .ok_or_else(|| CatalogError::UnknownActivity(id).into())
    }

    // trails

    pub fn create_trail_draft(
        &mut self,
        caller: AccountId,
        name: &str,
        description: &str,
    ) -> PortalResult<Trail> {
        let caller = self.caller(caller)?;
        let trail = self
            .state
            .trails
            .create_trail_draft(caller, name, description)?
            .clone();
        self.persist()?;
        Ok(trail)
    }

    pub fn define_levels(
        &mut self,
        caller: AccountId,
        id: TrailId,
        levels: &[LevelSpec],
    ) -> PortalResult<Trail> {
        let caller = self.caller(caller)?;
        let trail = self
            .state
            .trails
            .define_levels(caller, id, levels, &self.state.catalog)?
            .clone();
        self.persist()?;
        Ok(trail)
    }

    /// Both authoring steps from one declarative document. Nothing is kept
    /// if the levels are invalid.
    pub fn create_trail_from_document(
        &mut self,
        caller: AccountId,
        doc: &TrailDocument,
    ) -> PortalResult<Trail> {
        let who = self.caller(caller)?;
        if who.role != Role::Mediator {
            return Err(TrailError::NotMediator.into());
        }
        if doc.name.trim().is_empty() {
            return Err(TrailError::EmptyName.into());
        }
        if doc.levels.is_empty() {
            return Err(TrailError::NoLevels.into());
        }
        for (i, spec) in doc.levels.iter().enumerate() {
            trails::build_level(i + 1, spec, &self.state.catalog)?;
        }
        let trail = self.create_trail_draft(caller, &doc.name, &doc.description)?;
        self.define_levels(caller, trail.id, &doc.levels)
    }

    pub fn assign_trail(
        &mut self,
        caller: AccountId,
        trail: TrailId,
        class: ClassId,
        deadline: Option<NaiveDate>,
    ) -> PortalResult<Assignment> {
        let who = self.caller(caller)?;
        let class = self
            .state
            .directory
            .class(class)
            .ok_or(AccountsError::UnknownClass(class))?
            .clone();
        let assignment = self
            .state
            .trails
            .assign_trail(who, trail, &class, deadline)?
            .clone();
        for &student in &class.student_ids {
            self.enrol(student, trail)?;
        }
        self.persist()?;
        Ok(assignment)
    }

    /// Initializes progress unless the student already has it (through
    /// another class).
    fn enrol(&mut self, student: AccountId, trail: TrailId) -> PortalResult<()> {
        let trail = self.state.trails.get(trail)?;
        match self.book.init_progress(student, trail) {
            Ok(progress) => {
                self.storage.save_snapshot(progress)?;
                self.state.enrolments.push((student, trail.id));
                Ok(())
            }
            Err(EngineError::AlreadyInitialized) => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn set_grade(
        &mut self,
        caller: AccountId,
        trail: TrailId,
        student: AccountId,
        grade: &str,
    ) -> PortalResult<Trail> {
        let who = self.caller(caller)?;
        let trail = self
            .state
            .trails
            .set_grade(who, trail, student, grade, &self.state.directory)?
            .clone();
        self.persist()?;
        Ok(trail)
    }

    fn covering<'a>(&'a self, trail: &'a Trail, student: AccountId) -> Vec<(&'a Assignment, &'a Class)> {
        trails::covering(trail, student, &self.state.directory)
    }

    fn grade_of(&self, trail: &Trail, student: AccountId) -> Option<String> {
        self.covering(trail, student)
            .into_iter()
            .find_map(|(a, _)| a.grades.get(&student).cloned())
    }

    pub fn student_trail_view(&self, caller: AccountId, id: TrailId) -> PortalResult<TrailView> {
        let who = self.caller(caller)?;
        let trail = self.state.trails.get(id)?;
        let covering = self.covering(trail, who.id);
        if covering.is_empty() {
            return Err(TrailError::NotAssigned.into());
        }
        let progress = self
            .book
            .get(who.id, id)
            .ok_or(EngineError::NoProgress)?;
        let catalog = &self.state.catalog;
        let levels = trail
            .levels
            .iter()
            .map(|level| LevelView {
                index: level.index,
                status: progress.level_status[level.index - 1],
                activities: level
                    .activity_ids
                    .iter()
                    .filter_map(|&a| catalog.get(a))
                    .map(|r| {
                        let objectives: Vec<_> = r.metadata.objectives.iter().copied().collect();
                        let mut domains: Vec<_> = objectives.iter().map(|c| c.domain()).collect();
                        domains.dedup();
                        ActivityCard {
                            id: r.id,
                            name: r.metadata.name.clone(),
                            description: r.metadata.description.clone(),
                            area: r.metadata.area.clone(),
                            kind: r.metadata.kind,
                            image_ref: r.metadata.image_ref.clone(),
                            objectives,
                            objective_domains: domains,
                            done: progress.succeeded(r.id),
                        }
                    })
                    .collect(),
            })
            .collect();
        let mediator_name = self
            .state
            .directory
            .account(trail.author_id)
            .map(|a| a.profile.display_name())
            .unwrap_or_default();
        let deadline = trails::effective_deadline(covering.iter().map(|(a, _)| *a));
        Ok(TrailView {
            trail_id: trail.id,
            name: trail.name.clone(),
            description: trail.description.clone(),
            mediator_name,
            class_names: covering.iter().map(|(_, c)| c.name.clone()).collect(),
            deadline: trails::deadline_label(deadline),
            grade: self
                .grade_of(trail, who.id)
                .unwrap_or_else(|| trails::NO_GRADE.to_owned()),
            level_count: trail.levels.len(),
            current_level: progress.current_level(),
            trail_complete: progress.trail_complete,
            levels,
        })
    }

    pub fn list_trails(&self, caller: AccountId) -> PortalResult<Vec<TrailSummary>> {
        let who = self.caller(caller)?;
        let class_name = |id: ClassId| self.state.directory.class(id).map(|c| c.name.clone());
        let out = match who.role {
            Role::Mediator | Role::Admin => self
                .state
                .trails
                .iter()
                .filter(|t| who.role == Role::Admin || t.author_id == who.id)
                .map(|t| TrailSummary {
                    id: t.id,
                    name: t.name.clone(),
                    description: t.description.clone(),
                    state: t.state,
                    level_count: t.levels.len(),
                    class_names: t.assignments.iter().filter_map(|a| class_name(a.class_id)).collect(),
                    current_level: None,
                    trail_complete: None,
                    deadline: trails::deadline_label(trails::effective_deadline(&t.assignments)),
                    grade: None,
                })
                .collect(),
            Role::Student => self
                .state
                .trails
                .iter()
                .filter_map(|t| {
                    let covering = self.covering(t, who.id);
                    if covering.is_empty() {
                        return None;
                    }
                    let progress = self.book.get(who.id, t.id);
                    Some(TrailSummary {
                        id: t.id,
                        name: t.name.clone(),
                        description: t.description.clone(),
                        state: t.state,
                        level_count: t.levels.len(),
                        class_names: covering.iter().map(|(_, c)| c.name.clone()).collect(),
                        current_level: progress.and_then(|p| p.current_level()),
                        trail_complete: progress.map(|p| p.trail_complete),
                        deadline: trails::deadline_label(trails::effective_deadline(
                            covering.iter().map(|(a, _)| *a),
                        )),
                        grade: self.grade_of(t, who.id),
                    })
                })
                .collect(),
            Role::Developer => Vec::new(),
        };
        Ok(out)
    }

    // engine

    /// Result-report bridge: applies one activity outcome for the calling
    /// student.
    pub fn record_result(
        &mut self,
        caller: AccountId,
        trail: TrailId,
        activity: ActivityId,
        success: bool,
    ) -> PortalResult<TrailProgress> {
        let who = self.caller(caller)?;
        let def = self.state.trails.get(trail)?;
        let covering = self.covering(def, who.id);
        if covering.is_empty() {
            return Err(EngineError::NotAssigned.into());
        }
        let now = (self.clock)();
        let late = trails::effective_deadline(covering.iter().map(|(a, _)| *a))
            .is_some_and(|d| now.date_naive() > d);
        let event = ResultEvent {
            student: who.id,
            trail,
            activity,
            success,
            received_at: now,
            late,
        };
        let logged_before = self.book.events().len();
        let outcome = self.book.record_result(event, def).cloned();
        if self.book.events().len() > logged_before {
            let event = self.book.events().last().expect("just logged").clone();
            self.storage.append_event(&event)?;
            let progress = self.book.get(who.id, trail).expect("logged events have progress");
            self.storage.save_snapshot(progress)?;
        }
        Ok(outcome?)
    }

    pub fn progress(&self, caller: AccountId, trail: TrailId) -> PortalResult<TrailProgress> {
        let who = self.caller(caller)?;
        self.state.trails.get(trail)?;
        self.book
            .get(who.id, trail)
            .cloned()
            .ok_or_else(|| EngineError::NotAssigned.into())
    }

    pub fn evaluate_level(
        &self,
        student: AccountId,
        trail: TrailId,
        level: usize,
    ) -> PortalResult<engine::LevelVerdict> {
        let def = self.state.trails.get(trail)?;
        let progress = self.book.get(student, trail).ok_or(EngineError::NoProgress)?;
        Ok(engine::evaluate_level(progress, &def.levels, level)?)
    }

    // interop

    pub fn export_hcard(&self, user: AccountId) -> PortalResult<Mf2Item> {
        let account = self
            .state
            .directory
            .account(user)
            .ok_or(AccountsError::UnknownUser(user))?;
        Ok(interop::export_hcard(account))
    }

    pub fn export_hresume(&self, user: AccountId) -> PortalResult<Mf2Item> {
        let account = self
            .state
            .directory
            .account(user)
            .ok_or(AccountsError::UnknownUser(user))?;
        let entries: Vec<ResumeEntry> = match account.role {
            Role::Student => self
                .book
                .iter()
                .filter(|p| p.student == user)
                .filter_map(|p| {
                    let t = self.state.trails.get(p.trail).ok()?;
                    let covering = self.covering(t, user);
                    let deadline = if covering.is_empty() {
                        None
                    } else {
                        trails::effective_deadline(covering.iter().map(|(a, _)| *a))
                    };
                    Some(ResumeEntry {
                        name: t.name.clone(),
                        description: t.description.clone(),
                        deadline,
                        status: if p.trail_complete { "complete" } else { "in-progress" }.to_owned(),
                        grade: self.grade_of(t, user),
                    })
                })
                .collect(),
            Role::Mediator => self
                .state
                .trails
                .iter()
                .filter(|t| t.author_id == user)
                .map(|t| ResumeEntry {
                    name: t.name.clone(),
                    description: t.description.clone(),
                    deadline: None,
                    status: match t.state {
                        TrailState::Draft => "draft",
                        TrailState::Published => "published",
                    }
                    .to_owned(),
                    grade: None,
                })
                .collect(),
            _ => Vec::new(),
        };
        Ok(interop::export_hresume(account, &entries)?)
    }

    /// Downloadable bundle: the h-card, plus the h-resume where the role has one.
    pub fn export_bundle(&self, user: AccountId) -> PortalResult<Mf2Document> {
        let mut items = vec![self.export_hcard(user)?];
        match self.export_hresume(user) {
            Ok(resume) => items.push(resume),
            Err(PortalError::Interop(InteropError::NotStudent)) => {}
            Err(e) => return Err(e),
        }
        Ok(Mf2Document { items })
    }

    // persistence

    /// Rebuilds every progress record from the log and checks it against the
    /// stored snapshots. Missing snapshots are rewritten.
    pub fn snapshot_and_recover(&mut self) -> PortalResult<RecoveryReport> {
        let events = self.storage.load_events()?;
        let rebuilt = rebuild(&self.state, events)?;
        let stored: BTreeMap<(AccountId, TrailId), TrailProgress> = self
            .storage
            .load_snapshots()?
            .into_iter()
            .map(|p| ((p.student, p.trail), p))
            .collect();
        let mut restored = 0;
        for progress in rebuilt.iter() {
            match stored.get(&(progress.student, progress.trail)) {
                Some(snap) if snap == progress => {}
                Some(_) => {
                    return Err(StoreError::SnapshotMismatch {
                        student: progress.student,
                        trail: progress.trail,
                    }
                    .into())
                }
                None => {
                    self.storage.save_snapshot(progress)?;
                    restored += 1;
                }
            }
        }
        let report = RecoveryReport {
            events: rebuilt.events().len(),
            records: rebuilt.iter().count(),
            restored,
        };
        self.book = rebuilt;
        Ok(report)
    }
}

fn rebuild(state: &StateDoc, events: Vec<ResultEvent>) -> PortalResult<ProgressBook> {
    let mut pairs = Vec::with_capacity(state.enrolments.len());
    for &(student, trail) in &state.enrolments {
        pairs.push((student, state.trails.get(trail)?));
    }
    Ok(ProgressBook::restore(pairs, events)?)
}
