//! HTTP-shaped API over the portal.
//!
//! [`Gateway::dispatch`] takes a transport-neutral [`Request`] and returns a
//! [`Response`]; the CLI binds it to a real HTTP server. Missing credentials
//! get 401 and a role outside the endpoint's allow-set gets 403. Module
//! errors map to stable codes.

pub mod http;
pub mod routes;

use std::collections::BTreeSet;
use std::str::FromStr;

use base64::Engine as _;
use chrono::NaiveDate;
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::accounts::{Caller, ClassChanges, Role, UserProfile};
use crate::catalog::{ActivityDraft, ActivityFilter, Decision};
use crate::ids::{AccountId, ActivityId, ClassId, TrailId};
use crate::service::{Portal, PortalError};
use crate::taxonomy;
use crate::trails::LevelSpec;

pub use http::{ApiError, Body, FormPart, Method, Request, Response};
pub use routes::{Access, Endpoint, Op, ENDPOINTS};

pub struct Gateway {
    portal: Mutex<Portal>,
}

#[derive(Deserialize)]
struct RegisterBody {
    profile: UserProfile,
    role: Role,
    password: String,
}

#[derive(Deserialize)]
struct LoginBody {
    email: String,
    password: String,
}

#[derive(Deserialize)]
struct SubmitBody {
    metadata: ActivityDraft,
    package_base64: String,
}

#[derive(Deserialize)]
struct ModerationBody {
    decision: Decision,
    #[serde(default)]
    note: Option<String>,
}

#[derive(Deserialize)]
struct ClassBody {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    students: BTreeSet<AccountId>,
}

#[derive(Deserialize)]
struct TrailBody {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    levels: Option<Vec<LevelSpec>>,
}

#[derive(Deserialize)]
struct LevelsBody {
    levels: Vec<LevelSpec>,
}

#[derive(Deserialize)]
struct AssignBody {
    class: ClassId,
    #[serde(default)]
    deadline: Option<NaiveDate>,
}

#[derive(Deserialize)]
struct GradeBody {
    grade: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultBody {
    trail: TrailId,
    activity: ActivityId,
    success: bool,
}

fn parse_json<T: DeserializeOwned>(body: &Body) -> Result<T, ApiError> {
    match body {
        Body::Json(bytes) => {
            serde_json::from_slice(bytes).map_err(|e| ApiError::malformed(e.to_string()))
        }
        Body::Empty => Err(ApiError::malformed("a JSON body is required")),
        Body::Multipart(_) => Err(ApiError::malformed("expected a JSON body")),
    }
}

fn param<T: FromStr>(raw: &str) -> Result<T, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::malformed(format!("bad path parameter `{raw}`")))
}

fn ok<T: serde::Serialize>(value: Result<T, PortalError>) -> Result<Response, ApiError> {
    value.map(|v| Response::json(200, &v)).map_err(ApiError::from)
}

fn created<T: serde::Serialize>(value: Result<T, PortalError>) -> Result<Response, ApiError> {
    value.map(|v| Response::json(201, &v)).map_err(ApiError::from)
}

impl Gateway {
    pub fn new(portal: Portal) -> Self {
        Gateway {
            portal: Mutex::new(portal),
        }
    }

    /// Direct access to the portal, e.g. for seeding or inspection.
    pub fn with_portal<R>(&self, f: impl FnOnce(&mut Portal) -> R) -> R {
        f(&mut self.portal.lock())
    }

    pub fn into_portal(self) -> Portal {
        self.portal.into_inner()
    }

    pub fn dispatch(&self, req: &Request) -> Response {
        match self.route(req) {
            Ok(resp) => resp,
            Err(err) => Response::error(&err),
        }
    }

    fn route(&self, req: &Request) -> Result<Response, ApiError> {
        let mut path_hit = false;
        let mut found = None;
        for ep in ENDPOINTS {
            if let Some(params) = ep.matches(&req.path) {
                path_hit = true;
                if ep.method == req.method {
                    found = Some((ep, params));
                    break;
                }
            }
        }
        let (ep, params) = match found {
            Some(f) => f,
            None if path_hit => {
                return Err(ApiError::new(405, "METHOD_NOT_ALLOWED", "method not allowed"))
            }
            None => return Err(ApiError::new(404, "NO_ROUTE", "no such endpoint")),
        };

        let mut portal = self.portal.lock();
        let caller = match ep.access {
            Access::Public => None,
            Access::Roles(_) => {
                let token = req
                    .authorization
                    .as_deref()
                    .and_then(|h| h.strip_prefix("Bearer "))
                    .map(str::trim)
                    .ok_or_else(ApiError::unauthenticated)?;
                let caller = portal.session(token).ok_or_else(ApiError::unauthenticated)?;
                if !ep.allows(caller.role) {
                    return Err(ApiError::forbidden_role());
                }
                Some(caller)
            }
        };
        let me = || caller.map(|c: Caller| c.id).expect("protected endpoint");

        match ep.op {
            Op::Taxonomy => Ok(Response::json(200, &taxonomy::domains())),
            Op::OpenApi => Ok(Response::json(200, &routes::openapi())),
            Op::RegisterUser => {
                let body: RegisterBody = parse_json(&req.body)?;
                created(portal.register_user(body.profile, body.role, &body.password).map(|a| {
                    json!({ "id": a.id, "role": a.role, "profile": a.profile })
                }))
            }
            Op::CreateSession => {
                let body: LoginBody = parse_json(&req.body)?;
                created(portal.authenticate(&body.email, &body.password))
            }
            Op::SubmitActivity => {
                let (draft, package) = submission(&req.body)?;
                created(portal.submit_activity(me(), draft, &package))
            }
            Op::ModerateActivity => {
                let body: ModerationBody = parse_json(&req.body)?;
                ok(portal.moderate_activity(me(), param(params[0])?, body.decision, body.note))
            }
            Op::ListActivities => {
                let query = req.query.as_deref().unwrap_or("");
                let filter: ActivityFilter = serde_urlencoded::from_str(query)
                    .map_err(|e| ApiError::malformed(e.to_string()))?;
                let mf2 = serde_urlencoded::from_str::<Vec<(String, String)>>(query)
                    .unwrap_or_default()
                    .iter()
                    .any(|(k, v)| k == "format" && v == "mf2");
                if mf2 {
                    let item = portal.activity_list_review(me(), &filter)?;
                    Ok(Response::bytes(200, http::MF2_JSON, item.to_canonical_json().into_bytes()))
                } else {
                    ok(portal.list_activities(me(), &filter))
                }
            }
            Op::WithdrawActivity => ok(portal.withdraw_activity(me(), param(params[0])?)),
            Op::ActivityDublinCore => {
                let item = portal.activity_dublincore(me(), param(params[0])?)?;
                Ok(Response::bytes(200, http::MF2_JSON, item.to_canonical_json().into_bytes()))
            }
            Op::ActivityPackage => {
                let bytes = portal.package(me(), param(params[0])?)?;
                Ok(Response::bytes(200, "application/octet-stream", bytes))
            }
            Op::ListClasses => ok(portal.list_classes(me())),
            Op::CreateClass => {
                let body: ClassBody = parse_json(&req.body)?;
                created(portal.create_class(me(), &body.name, &body.description, body.students))
            }
            Op::UpdateClass => {
                let changes: ClassChanges = parse_json(&req.body)?;
                ok(portal.update_class(me(), param(params[0])?, changes))
            }
            Op::RemoveClass => ok(portal.remove_class(me(), param(params[0])?)),
            Op::ListTrails => ok(portal.list_trails(me())),
            Op::CreateTrail => {
                let body: TrailBody = parse_json(&req.body)?;
                match body.levels {
                    None => created(portal.create_trail_draft(me(), &body.name, &body.description)),
                    Some(levels) => {
                        let doc = crate::trails::TrailDocument {
                            name: body.name,
                            description: body.description,
                            levels,
                        };
                        created(portal.create_trail_from_document(me(), &doc))
                    }
                }
            }
            Op::DefineLevels => {
                let body: LevelsBody = parse_json(&req.body)?;
                ok(portal.define_levels(me(), param(params[0])?, &body.levels))
            }
            Op::AssignTrail => {
                let body: AssignBody = parse_json(&req.body)?;
                created(portal.assign_trail(me(), param(params[0])?, body.class, body.deadline))
            }
            Op::SetGrade => {
                let body: GradeBody = parse_json(&req.body)?;
                let grade = match body.grade {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    _ => return Err(ApiError::malformed("grade must be text or a number")),
                };
                ok(portal.set_grade(me(), param(params[0])?, param(params[1])?, &grade))
            }
            Op::TrailView => ok(portal.student_trail_view(me(), param(params[0])?)),
            Op::ReportResult => {
                let body: ResultBody = parse_json(&req.body)?;
                ok(portal.record_result(me(), body.trail, body.activity, body.success))
            }
            Op::Progress => ok(portal.progress(me(), param(params[0])?)),
            Op::Export => {
                let doc = portal.export_bundle(me())?;
                Ok(Response::bytes(200, http::MF2_JSON, doc.to_canonical_json().into_bytes()))
            }
            Op::VerifyStore => ok(portal.snapshot_and_recover()),
        }
    }
}

/// Activity submissions arrive either as JSON with a base64 package or as a
/// multipart form with `metadata` (JSON) and `package` parts.
fn submission(body: &Body) -> Result<(ActivityDraft, Vec<u8>), ApiError> {
    match body {
        Body::Multipart(parts) => {
            let part = |name: &str| parts.iter().find(|p| p.name == name);
            let metadata = part("metadata").ok_or_else(|| ApiError::malformed("missing `metadata` part"))?;
            let draft = serde_json::from_slice(&metadata.data)
                .map_err(|e| ApiError::malformed(e.to_string()))?;
            let package = part("package").map(|p| p.data.clone()).unwrap_or_default();
            Ok((draft, package))
        }
        other => {
            let body: SubmitBody = parse_json(other)?;
            let package = base64::engine::general_purpose::STANDARD
                .decode(body.package_base64.as_bytes())
                .map_err(|e| ApiError::malformed(format!("package_base64: {e}")))?;
            Ok((body.metadata, package))
        }
    }
}
