//! Transport-neutral request/response types and the error-to-status map.

use serde::Serialize;
use serde_json::json;

use crate::accounts::AccountsError;
use crate::catalog::CatalogError;
use crate::engine::EngineError;
use crate::interop::InteropError;
use crate::service::PortalError;
use crate::store::StoreError;
use crate::trails::TrailError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
    Put,
    Patch,
    Delete,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Put => "PUT",
            Method::Patch => "PATCH",
            Method::Delete => "DELETE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "GET" => Method::Get,
            "POST" => Method::Post,
            "PUT" => Method::Put,
            "PATCH" => Method::Patch,
            "DELETE" => Method::Delete,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormPart {
    pub name: String,
    pub filename: Option<String>,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Empty,
    /// Raw bytes of a JSON document; parsed per endpoint.
    Json(Vec<u8>),
    Multipart(Vec<FormPart>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: Method,
    pub path: String,
    pub query: Option<String>,
    /// Value of the `Authorization` header.
    pub authorization: Option<String>,
    pub body: Body,
}

impl Request {
    pub fn new(method: Method, path_and_query: &str) -> Self {
        let (path, query) = match path_and_query.split_once('?') {
            Some((p, q)) => (p.to_owned(), Some(q.to_owned())),
            None => (path_and_query.to_owned(), None),
        };
        Request {
            method,
            path,
            query,
            authorization: None,
            body: Body::Empty,
        }
    }

    pub fn bearer(mut self, token: &str) -> Self {
        self.authorization = Some(format!("Bearer {token}"));
        self
    }

    pub fn json(mut self, value: &serde_json::Value) -> Self {
        self.body = Body::Json(serde_json::to_vec(value).expect("json values serialize"));
        self
    }

    pub fn raw_json(mut self, bytes: impl Into<Vec<u8>>) -> Self {
        self.body = Body::Json(bytes.into());
        self
    }

    pub fn multipart(mut self, parts: Vec<FormPart>) -> Self {
        self.body = Body::Multipart(parts);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

pub const JSON: &str = "application/json";
pub const MF2_JSON: &str = "application/mf2+json";

impl Response {
    pub fn json<T: Serialize + ?Sized>(status: u16, value: &T) -> Self {
        Response {
            status,
            content_type: JSON,
            body: serde_json::to_vec(value).expect("responses serialize"),
        }
    }

    pub fn bytes(status: u16, content_type: &'static str, body: Vec<u8>) -> Self {
        Response {
            status,
            content_type,
            body,
        }
    }

    pub fn error(err: &ApiError) -> Self {
        let mut body = json!({ "code": err.code, "message": err.message });
        if let Some(fields) = &err.fields {
            body["fields"] = json!(fields);
        }
        Response::json(err.status, &json!({ "error": body }))
    }

    pub fn json_value(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or(serde_json::Value::Null)
    }
}

/// An error as sent over the wire: stable machine code plus HTTP status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    pub fields: Option<Vec<&'static str>>,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            fields: None,
        }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(400, "MALFORMED_PAYLOAD", message)
    }

    pub fn unauthenticated() -> Self {
        Self::new(401, "UNAUTHENTICATED", "a valid session is required")
    }

    pub fn forbidden_role() -> Self {
        Self::new(403, "FORBIDDEN_ROLE", "this page is not available to your profile")
    }
}

/// Status and code for every module error. The same error always maps to
/// the same pair.
pub fn classify(err: &PortalError) -> (u16, &'static str) {
    use AccountsError as A;
    use CatalogError as C;
    use EngineError as E;
    use TrailError as T;
    match err {
        PortalError::Accounts(e) => match e {
            A::DuplicateEmail => (409, "DUPLICATE_EMAIL"),
            A::EmptyEmail => (422, "EMPTY_EMAIL"),
            A::AdminSelfRegistrationForbidden => (403, "ADMIN_SELF_REGISTRATION_FORBIDDEN"),
            A::InvalidCredentials => (401, "INVALID_CREDENTIALS"),
            A::NotMediator => (403, "NOT_MEDIATOR"),
            A::UnknownStudent(_) => (422, "UNKNOWN_STUDENT"),
            A::NonStudentMember(_) => (422, "NON_STUDENT_MEMBER"),
            A::EmptyName => (422, "EMPTY_NAME"),
            A::NotOwner => (403, "NOT_OWNER"),
            A::TrailsInProgress => (409, "TRAILS_IN_PROGRESS"),
            A::UnknownClass(_) => (404, "UNKNOWN_CLASS"),
            A::UnknownUser(_) => (404, "UNKNOWN_USER"),
        },
        PortalError::Catalog(e) => match e {
            C::IncompleteMetadata(_) => (422, "INCOMPLETE_METADATA"),
            C::EmptyPackage => (422, "EMPTY_PACKAGE"),
            C::NotDeveloper => (403, "NOT_DEVELOPER"),
            C::NotAdmin => (403, "NOT_ADMIN"),
            C::NotPending => (409, "NOT_PENDING"),
            C::UnknownActivity(_) => (404, "UNKNOWN_ACTIVITY"),
            C::NotSubmitter => (403, "NOT_SUBMITTER"),
            C::ActivityInUse => (409, "ACTIVITY_IN_USE"),
            C::NotWithdrawable => (409, "NOT_WITHDRAWABLE"),
        },
        PortalError::Trail(e) => match e {
            T::NotMediator => (403, "NOT_MEDIATOR"),
            T::EmptyName => (422, "EMPTY_NAME"),
            T::UnknownTrail(_) => (404, "UNKNOWN_TRAIL"),
            T::NotAuthor => (403, "NOT_AUTHOR"),
            T::TrailNotDraft => (409, "TRAIL_NOT_DRAFT"),
            T::TrailNotPublished => (409, "TRAIL_NOT_PUBLISHED"),
            T::NoLevels => (422, "NO_LEVELS"),
            T::EmptyLevel { .. } => (422, "EMPTY_LEVEL"),
            T::DuplicateActivity { .. } => (422, "DUPLICATE_ACTIVITY"),
            T::UnapprovedActivity { .. } => (422, "UNAPPROVED_ACTIVITY"),
            T::SelectionForeignActivity { .. } => (422, "SELECTION_FOREIGN_ACTIVITY"),
            T::EmptySelection { .. } => (422, "EMPTY_SELECTION"),
            T::SelectionOutsideObjectives { .. } => (422, "SELECTION_OUTSIDE_OBJECTIVES"),
            T::ThresholdMismatch { .. } => (422, "THRESHOLD_MISMATCH"),
            T::ThresholdOutOfRange { .. } => (422, "THRESHOLD_OUT_OF_RANGE"),
            T::NotOwner => (403, "NOT_OWNER"),
            T::AlreadyAssigned => (409, "ALREADY_ASSIGNED"),
            T::StudentNotAssigned => (422, "STUDENT_NOT_ASSIGNED"),
            T::NotAssigned => (403, "NOT_ASSIGNED"),
        },
        PortalError::Engine(e) => match e {
            E::NotAssigned => (403, "NOT_ASSIGNED"),
            E::AlreadyInitialized => (409, "ALREADY_INITIALIZED"),
            E::NoProgress => (404, "NO_PROGRESS"),
            E::UnknownActivity(_) => (422, "ACTIVITY_NOT_IN_TRAIL"),
            E::LevelLocked(_) => (409, "LEVEL_LOCKED"),
            E::LevelAlreadyCompleted(_) => (409, "LEVEL_ALREADY_COMPLETED"),
            E::TrailComplete => (409, "TRAIL_COMPLETE"),
            E::CategoryNotConfigured { .. } => (422, "CATEGORY_NOT_CONFIGURED"),
            E::UnknownLevel(_) => (404, "UNKNOWN_LEVEL"),
            E::MixedStreams => (422, "MIXED_STREAMS"),
        },
        PortalError::Interop(e) => match e {
            InteropError::Malformed(_) => (400, "MALFORMED_PAYLOAD"),
            InteropError::NotStudent => (403, "NOT_STUDENT"),
        },
        PortalError::Store(e) => match e {
            StoreError::CorruptLog { .. } => (500, "CORRUPT_LOG"),
            StoreError::SnapshotMismatch { .. } => (500, "SNAPSHOT_MISMATCH"),
            StoreError::Io(_) | StoreError::Encoding(_) => (500, "STORAGE_FAILURE"),
        },
    }
}

impl From<PortalError> for ApiError {
    fn from(err: PortalError) -> Self {
        let (status, code) = classify(&err);
        let fields = match &err {
            PortalError::Catalog(CatalogError::IncompleteMetadata(f)) => Some(f.clone()),
            _ => None,
        };
        ApiError {
            status,
            code,
            message: err.to_string(),
            fields,
        }
    }
}
