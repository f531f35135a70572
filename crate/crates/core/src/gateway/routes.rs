//! Endpoint descriptors: method, path template, who may call it.

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::http::Method;
use crate::accounts::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Op {
    Taxonomy,
    OpenApi,
    RegisterUser,
    CreateSession,
    SubmitActivity,
    ModerateActivity,
    ListActivities,
    WithdrawActivity,
    ActivityDublinCore,
    ActivityPackage,
    ListClasses,
    CreateClass,
    UpdateClass,
    RemoveClass,
    ListTrails,
    CreateTrail,
    DefineLevels,
    AssignTrail,
    SetGrade,
    TrailView,
    ReportResult,
    Progress,
    Export,
    VerifyStore,
}

/// Who may call an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    /// No session needed.
    Public,
    Roles(&'static [Role]),
}

#[derive(Debug, Clone, Copy)]
pub struct Endpoint {
    pub method: Method,
    pub path: &'static str,
    pub access: Access,
    pub op: Op,
    pub summary: &'static str,
}

impl Endpoint {
    pub fn allows(&self, role: Role) -> bool {
        match self.access {
            Access::Public => true,
            Access::Roles(roles) => roles.contains(&role),
        }
    }

    /// Matches a concrete path, returning the `{param}` values in order.
    pub fn matches<'p>(&self, path: &'p str) -> Option<Vec<&'p str>> {
        let want: Vec<&str> = self.path.trim_matches('/').split('/').collect();
        let got: Vec<&str> = path.trim_matches('/').split('/').collect();
        if want.len() != got.len() {
            return None;
        }
        let mut params = Vec::new();
        for (w, g) in want.iter().zip(&got) {
            if w.starts_with('{') {
                if g.is_empty() {
                    return None;
                }
                params.push(*g);
            } else if w != g {
                return None;
            }
        }
        Some(params)
    }
}

use Role::{Admin, Developer, Mediator, Student};

const EVERYONE: &[Role] = &[Mediator, Student, Developer, Admin];

macro_rules! ep {
    ($m:ident $p:literal, $access:expr, $op:ident, $summary:literal) => {
        Endpoint {
            method: Method::$m,
            path: $p,
            access: $access,
            op: Op::$op,
            summary: $summary,
        }
    };
}

pub const ENDPOINTS: &[Endpoint] = &[
    ep!(Get "/taxonomy", Access::Public, Taxonomy, "Learning domains and their ranked categories"),
    ep!(Get "/openapi.json", Access::Public, OpenApi, "This endpoint listing"),
    ep!(Post "/users", Access::Public, RegisterUser, "Register a mediator, student or developer account"),
    ep!(Post "/sessions", Access::Public, CreateSession, "Log in with email and password"),
    ep!(Post "/activities", Access::Roles(&[Developer]), SubmitActivity, "Submit an activity with its package for moderation"),
    ep!(Post "/activities/{id}/moderation", Access::Roles(&[Admin]), ModerateActivity, "Approve or reject a pending activity"),
    ep!(Get "/activities", Access::Roles(EVERYONE), ListActivities, "List activities visible to the caller"),
    ep!(Delete "/activities/{id}", Access::Roles(&[Developer]), WithdrawActivity, "Withdraw an own activity"),
    ep!(Get "/activities/{id}/dublincore", Access::Roles(EVERYONE), ActivityDublinCore, "Activity metadata as a dublincore record"),
    ep!(Get "/activities/{id}/package", Access::Roles(EVERYONE), ActivityPackage, "Download the activity package"),
    ep!(Get "/classes", Access::Roles(&[Mediator, Student]), ListClasses, "Classes owned (mediator) or joined (student)"),
    ep!(Post "/classes", Access::Roles(&[Mediator]), CreateClass, "Create a class"),
    ep!(Patch "/classes/{id}", Access::Roles(&[Mediator]), UpdateClass, "Change class name, description or members"),
    ep!(Delete "/classes/{id}", Access::Roles(&[Mediator]), RemoveClass, "Remove a class with no trails in progress"),
    ep!(Get "/trails", Access::Roles(&[Mediator, Student]), ListTrails, "Authored (mediator) or assigned (student) trails"),
    ep!(Post "/trails", Access::Roles(&[Mediator]), CreateTrail, "Create a trail draft, or a full trail from a document"),
    ep!(Put "/trails/{id}/levels", Access::Roles(&[Mediator]), DefineLevels, "Define levels and evaluation; publishes the trail"),
    ep!(Post "/trails/{id}/assignments", Access::Roles(&[Mediator]), AssignTrail, "Assign a published trail to a class"),
    ep!(Put "/trails/{id}/grades/{student}", Access::Roles(&[Mediator]), SetGrade, "Record a student's grade"),
    ep!(Get "/trails/{id}/view", Access::Roles(&[Student]), TrailView, "Student view of a trail with level states"),
    ep!(Post "/results", Access::Roles(&[Student]), ReportResult, "Report an activity outcome"),
    ep!(Get "/progress/{trail}", Access::Roles(&[Student]), Progress, "Raw progress record"),
    ep!(Get "/me/export", Access::Roles(EVERYONE), Export, "Personal data as microformats2 JSON"),
    ep!(Post "/admin/recovery", Access::Roles(&[Admin]), VerifyStore, "Replay the result log and verify snapshots"),
];

/// OpenAPI-style listing generated from the descriptors.
pub fn openapi() -> Value {
    let mut paths: Map<String, Value> = Map::new();
    for ep in ENDPOINTS {
        let roles: Vec<&str> = match ep.access {
            Access::Public => vec!["public"],
            Access::Roles(r) => r
                .iter()
                .map(|r| match r {
                    Mediator => "Mediator",
                    Student => "Student",
                    Developer => "Developer",
                    Admin => "Admin",
                })
                .collect(),
        };
        let entry = paths
            .entry(ep.path.to_owned())
            .or_insert_with(|| json!({}));
        entry[ep.method.as_str().to_ascii_lowercase()] = json!({
            "operationId": format!("{:?}", ep.op),
            "summary": ep.summary,
            "x-roles": roles,
        });
    }
    json!({
        "openapi": "3.0.3",
        "info": { "title": "trailkit", "version": env!("CARGO_PKG_VERSION") },
        "paths": paths,
    })
}
