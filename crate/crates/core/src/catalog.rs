//! Registry of serious games and virtual environments.
//!
//! Developers submit activities, admins moderate them. Only approved
//! activities are visible to mediators and students, and only approved
//! activities may be placed in a trail.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::accounts::{Caller, Role};
use crate::ids::{AccountId, ActivityId};
use crate::taxonomy::{Category, Selector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivityKind {
    SeriousGame,
    VirtualEnvironment,
}

impl ActivityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivityKind::SeriousGame => "SeriousGame",
            ActivityKind::VirtualEnvironment => "VirtualEnvironment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivityStatus {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Approved,
    Rejected,
}

/// Registration form as submitted. Every field is optional here so that
/// validation can report all missing fields at once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityDraft {
    pub name: Option<String>,
    pub description: Option<String>,
    pub area: Option<String>,
    pub kind: Option<ActivityKind>,
    pub format: Option<String>,
    pub language: Option<String>,
    pub license_notes: Option<String>,
    /// Categories or whole domains; domains expand to all their categories.
    pub objectives: Vec<Selector>,
    pub image_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityMetadata {
    pub name: String,
    pub description: String,
    pub area: String,
    pub kind: ActivityKind,
    pub format: String,
    pub language: String,
    pub license_notes: String,
    pub objectives: BTreeSet<Category>,
    pub image_ref: String,
}

impl ActivityDraft {
    pub fn validate(self) -> Result<ActivityMetadata, CatalogError> {
        fn present(v: &Option<String>) -> bool {
            v.as_deref().is_some_and(|s| !s.trim().is_empty())
        }
        let mut missing = Vec::new();
        if !present(&self.name) {
            missing.push("name");
        }
        if !present(&self.description) {
            missing.push("description");
        }
        if !present(&self.area) {
            missing.push("area");
        }
        if self.kind.is_none() {
            missing.push("kind");
        }
        if !present(&self.format) {
            missing.push("format");
        }
        if self.objectives.is_empty() {
            missing.push("objectives");
        }
        if !missing.is_empty() {
            return Err(CatalogError::IncompleteMetadata(missing));
        }
        Ok(ActivityMetadata {
            name: self.name.unwrap_or_default().trim().to_owned(),
            description: self.description.unwrap_or_default(),
            area: self.area.unwrap_or_default().trim().to_owned(),
            kind: self.kind.expect("checked above"),
            format: self.format.unwrap_or_default().trim().to_owned(),
            language: self.language.unwrap_or_default(),
            license_notes: self.license_notes.unwrap_or_default(),
            objectives: self.objectives.into_iter().flat_map(Selector::expand).collect(),
            image_ref: self.image_ref.unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub id: ActivityId,
    pub metadata: ActivityMetadata,
    /// Content address of the uploaded package (`sha256:<hex>`).
    pub package_ref: String,
    pub developer_id: AccountId,
    pub status: ActivityStatus,
    pub moderation_note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityFilter {
    pub status: Option<ActivityStatus>,
    pub area: Option<String>,
    pub kind: Option<ActivityKind>,
}

impl ActivityFilter {
    pub fn matches(&self, record: &ActivityRecord) -> bool {
        self.status.is_none_or(|s| s == record.status)
            && self
                .area
                .as_deref()
                .is_none_or(|a| a.trim().to_lowercase() == record.metadata.area.to_lowercase())
            && self.kind.is_none_or(|k| k == record.metadata.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("incomplete metadata, missing: {}", .0.join(", "))]
    IncompleteMetadata(Vec<&'static str>),
    #[error("package is empty")]
    EmptyPackage,
    #[error("caller is not a developer")]
    NotDeveloper,
    #[error("caller is not an admin")]
    NotAdmin,
    #[error("activity is not pending moderation")]
    NotPending,
    #[error("unknown activity {0}")]
    UnknownActivity(ActivityId),
    #[error("activity belongs to another developer")]
    NotSubmitter,
    #[error("activity is referenced by a trail")]
    ActivityInUse,
    #[error("rejected activities cannot be withdrawn")]
    NotWithdrawable,
}

pub fn package_ref(package: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(package)))
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Catalog {
    records: BTreeMap<ActivityId, ActivityRecord>,
    next_id: u64,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn submit_activity(
        &mut self,
        caller: Caller,
        draft: ActivityDraft,
        package: &[u8],
    ) -> Result<&ActivityRecord, CatalogError> {
        if caller.role != Role::Developer {
            return Err(CatalogError::NotDeveloper);
        }
        let metadata = draft.validate()?;
        if package.is_empty() {
            return Err(CatalogError::EmptyPackage);
        }
        self.next_id += 1;
        let id = ActivityId(self.next_id);
        let record = ActivityRecord {
            id,
            metadata,
            package_ref: package_ref(package),
            developer_id: caller.id,
            status: ActivityStatus::Pending,
            moderation_note: None,
        };
        Ok(self.records.entry(id).or_insert(record))
    }

    pub fn moderate_activity(
        &mut self,
        caller: Caller,
        id: ActivityId,
        decision: Decision,
        note: Option<String>,
    ) -> Result<&ActivityRecord, CatalogError> {
        if caller.role != Role::Admin {
            return Err(CatalogError::NotAdmin);
        }
        let record = self
            .records
            .get_mut(&id)
            .ok_or(CatalogError::UnknownActivity(id))?;
        if record.status != ActivityStatus::Pending {
            return Err(CatalogError::NotPending);
        }
        record.status = match decision {
            Decision::Approved => ActivityStatus::Approved,
            Decision::Rejected => ActivityStatus::Rejected,
        };
        record.moderation_note = note.filter(|n| !n.trim().is_empty());
        Ok(record)
    }

    /// Whether `caller` may see `record` at all.
    pub fn visible_to(caller: Caller, record: &ActivityRecord) -> bool {
        match caller.role {
            Role::Admin => true,
            Role::Developer => record.developer_id == caller.id,
            Role::Mediator | Role::Student => record.status == ActivityStatus::Approved,
        }
    }

    pub fn list_activities(&self, caller: Caller, filter: &ActivityFilter) -> Vec<&ActivityRecord> {
        self.records
            .values()
            .filter(|r| Self::visible_to(caller, r) && filter.matches(r))
            .collect()
    }

    /// Developer withdrawal of an own submission. `referenced` reports
    /// whether any trail uses the activity.
    pub fn withdraw_activity(
        &mut self,
        caller: Caller,
        id: ActivityId,
        referenced: bool,
    ) -> Result<ActivityRecord, CatalogError> {
        if caller.role != Role::Developer {
            return Err(CatalogError::NotDeveloper);
        }
        let record = self
            .records
            .get(&id)
            .ok_or(CatalogError::UnknownActivity(id))?;
        if record.developer_id != caller.id {
            return Err(CatalogError::NotSubmitter);
        }
        if record.status == ActivityStatus::Rejected {
            return Err(CatalogError::NotWithdrawable);
        }
        if referenced {
            return Err(CatalogError::ActivityInUse);
        }
        Ok(self.records.remove(&id).expect("checked above"))
    }

    pub fn get(&self, id: ActivityId) -> Option<&ActivityRecord> {
        self.records.get(&id)
    }

    pub fn approved(&self, id: ActivityId) -> Option<&ActivityRecord> {
        self.get(id).filter(|r| r.status == ActivityStatus::Approved)
    }

    pub fn records(&self) -> impl Iterator<Item = &ActivityRecord> {
        self.records.values()
    }
}
