//! Microformats2 exports.
//!
//! Every export is an [`Mf2Item`]: `{"type": [...], "properties": {...}}`
//! where each property maps to a non-empty list of strings or nested items.
//! Canonical serialization is compact JSON with `type` first and property
//! keys sorted, so exports are byte-stable.
//!
//! Profiles and nesting:
//! - `h-card` for people; the institution is a nested `h-card` under `org`.
//! - `h-resume` lists trails as nested `h-event`s under `experience`.
//! - a trail grade is an `h-review` nested in its `h-event` under `review`.
//! - activities are `dublincore` records; an activity list is an `h-review`
//!   whose `item` property nests them.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::accounts::{Account, Role};
use crate::catalog::ActivityRecord;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(try_from = "RawItem")]
pub struct Mf2Item {
    pub types: Vec<String>,
    pub properties: BTreeMap<String, Vec<Mf2Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mf2Value {
    Text(String),
    Item(Mf2Item),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    #[serde(rename = "type")]
    types: Vec<String>,
    #[serde(default)]
    properties: BTreeMap<String, Vec<Mf2Value>>,
}

impl TryFrom<RawItem> for Mf2Item {
    type Error = InteropError;

    fn try_from(raw: RawItem) -> Result<Self, Self::Error> {
        if raw.types.is_empty() {
            return Err(InteropError::Malformed("empty type list".into()));
        }
        if let Some((k, _)) = raw.properties.iter().find(|(_, v)| v.is_empty()) {
            return Err(InteropError::Malformed(format!("property `{k}` has no values")));
        }
        Ok(Mf2Item {
            types: raw.types,
            properties: raw.properties,
        })
    }
}

impl Serialize for Mf2Item {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("type", &self.types)?;
        map.serialize_entry("properties", &self.properties)?;
        map.end()
    }
}

impl Mf2Item {
    pub fn new(kind: &str) -> Self {
        Mf2Item {
            types: vec![kind.to_owned()],
            properties: BTreeMap::new(),
        }
    }

    /// Adds a text value; blank text is skipped so that no property is ever
    /// emitted empty.
    pub fn text(mut self, property: &str, value: impl Into<String>) -> Self {
        let value = value.into();
        if !value.trim().is_empty() {
            self.push(property, Mf2Value::Text(value));
        }
        self
    }

    pub fn item(mut self, property: &str, item: Mf2Item) -> Self {
        self.push(property, Mf2Value::Item(item));
        self
    }

    fn push(&mut self, property: &str, value: Mf2Value) {
        self.properties
            .entry(property.to_owned())
            .or_default()
            .push(value);
    }

    pub fn texts(&self, property: &str) -> Vec<&str> {
        self.properties
            .get(property)
            .into_iter()
            .flatten()
            .filter_map(|v| match v {
                Mf2Value::Text(t) => Some(t.as_str()),
                Mf2Value::Item(_) => None,
            })
            .collect()
    }

    pub fn items(&self, property: &str) -> Vec<&Mf2Item> {
        self.properties
            .get(property)
            .into_iter()
            .flatten()
            .filter_map(|v| match v {
                Mf2Value::Item(i) => Some(i),
                Mf2Value::Text(_) => None,
            })
            .collect()
    }

    pub fn has_type(&self, kind: &str) -> bool {
        self.types.iter().any(|t| t == kind)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("mf2 items always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, InteropError> {
        serde_json::from_str(text).map_err(|e| InteropError::Malformed(e.to_string()))
    }
}

/// Top-level download: a list of items, as a microformats parser emits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mf2Document {
    pub items: Vec<Mf2Item>,
}

impl Mf2Document {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("mf2 documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InteropError {
    #[error("malformed microformats2 json: {0}")]
    Malformed(String),
    #[error("only students and mediators have a trail resume")]
    NotStudent,
}

pub fn export_hcard(account: &Account) -> Mf2Item {
    let p = &account.profile;
    let mut card = Mf2Item::new("h-card")
        .text("given-name", &p.given_name)
        .text("family-name", &p.family_name)
        .text("email", &p.email)
        .text("x-course", &p.course);
    if !p.institution_name.trim().is_empty() || !p.institution_acronym.trim().is_empty() {
        let org = Mf2Item::new("h-card")
            .text("name", &p.institution_name)
            .text("nickname", &p.institution_acronym);
        card = card.item("org", org);
    }
    card
}

/// One trail line of a resume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumeEntry {
    pub name: String,
    pub description: String,
    pub deadline: Option<NaiveDate>,
    /// `complete`, `in-progress`, `draft` or `published`.
    pub status: String,
    pub grade: Option<String>,
}

/// Students list the trails they perform; mediators the trails they created.
pub fn export_hresume(account: &Account, entries: &[ResumeEntry]) -> Result<Mf2Item, InteropError> {
    if !matches!(account.role, Role::Student | Role::Mediator) {
        return Err(InteropError::NotStudent);
    }
    let mut resume = Mf2Item::new("h-resume")
        .text("name", account.profile.display_name())
        .item("contact", export_hcard(account));
    for entry in entries {
        let mut event = Mf2Item::new("h-event")
            .text("name", &entry.name)
            .text("description", &entry.description)
            .text("x-status", &entry.status);
        if let Some(d) = entry.deadline {
            event = event.text("end", d.to_string());
        }
        if let Some(grade) = entry.grade.as_deref().filter(|g| !g.trim().is_empty()) {
            let review = Mf2Item::new("h-review")
                .text("name", format!("Grade: {}", entry.name))
                .text("rating", grade);
            event = event.item("review", review);
        }
        resume = resume.item("experience", event);
    }
    Ok(resume)
}

pub fn export_activity_dc(record: &ActivityRecord) -> Mf2Item {
    let m = &record.metadata;
    let mut dc = Mf2Item::new("dublincore")
        .text("identifier", record.id.to_string())
        .text("title", &m.name)
        .text("description", &m.description)
        .text("subject", &m.area)
        .text("type", m.kind.as_str())
        .text("format", &m.format)
        .text("language", &m.language)
        .text("rights", &m.license_notes)
        .text("x-image", &m.image_ref);
    for c in &m.objectives {
        dc = dc.text("x-educational-objectives", c.name());
    }
    dc
}

pub fn export_activity_list<'a>(records: impl IntoIterator<Item = &'a ActivityRecord>) -> Mf2Item {
    records.into_iter().fold(
        Mf2Item::new("h-review").text("name", "Activities"),
        |review, r| review.item("item", export_activity_dc(r)),
    )
}
