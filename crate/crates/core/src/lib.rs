//! Learning trails over serious games and virtual environments.
//!
//! Mediators arrange approved activities into leveled trails with per-level
//! minimum success values. The engine unlocks levels as students report
//! results.

pub mod accounts;
pub mod catalog;
pub mod engine;
pub mod fixtures;
pub mod gateway;
pub mod ids;
pub mod interop;
pub mod service;
pub mod store;
pub mod taxonomy;
pub mod trails;

pub use accounts::{Account, Caller, Class, Role, UserProfile};
pub use catalog::{ActivityDraft, ActivityKind, ActivityRecord, ActivityStatus, Decision};
pub use engine::{LevelStatus, LevelVerdict, Overall, ResultEvent, TrailProgress};
pub use gateway::{Gateway, Request, Response};
pub use ids::{AccountId, ActivityId, ClassId, TrailId};
pub use interop::{Mf2Document, Mf2Item};
pub use service::{Portal, PortalError, PortalResult};
pub use store::{FileStore, MemoryStore, Storage};
pub use taxonomy::{Category, Domain, Selector};
pub use trails::{EvaluationConfig, Level, LevelSpec, Trail, TrailDocument};
