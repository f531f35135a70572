//! Binds the transport-neutral gateway to HTTP.

use std::sync::Arc;

use axum::body::Body as HttpBody;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::Router;
use tokio::net::TcpListener;
use trailkit_core::gateway::{ApiError, Body, FormPart, Method};
use trailkit_core::{Gateway, Request, Response};

/// Largest accepted request body; activity packages travel in it.
const BODY_LIMIT: usize = 64 * 1024 * 1024;

pub async fn serve(gateway: Arc<Gateway>, listener: TcpListener) -> anyhow::Result<()> {
    let app = Router::new()
        .fallback(handle)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(gateway);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn handle(State(gateway): State<Arc<Gateway>>, req: axum::extract::Request) -> axum::response::Response {
    let resp = match translate(req).await {
        Ok(request) => tokio::task::spawn_blocking(move || gateway.dispatch(&request))
            .await
            .unwrap_or_else(|_| Response::error(&ApiError::new(500, "INTERNAL", "request handler failed"))),
        Err(err) => Response::error(&err),
    };
    let mut out = axum::response::Response::new(HttpBody::from(resp.body));
    *out.status_mut() = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    out.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static(resp.content_type));
    out
}

async fn translate(req: axum::extract::Request) -> Result<Request, ApiError> {
    let method = Method::parse(req.method().as_str())
        .ok_or_else(|| ApiError::new(405, "METHOD_NOT_ALLOWED", "method not allowed"))?;
    let target = req.uri().path_and_query().map_or("/", |p| p.as_str());
    let mut request = Request::new(method, target);
    request.authorization = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    let multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if multipart {
        let mut form = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::malformed(e.body_text()))?;
        let mut parts = Vec::new();
        while let Some(field) = form
            .next_field()
            .await
            .map_err(|e| ApiError::malformed(e.body_text()))?
        {
            let name = field.name().unwrap_or_default().to_owned();
            let filename = field.file_name().map(str::to_owned);
            let data = field
                .bytes()
                .await
                .map_err(|e| ApiError::malformed(e.body_text()))?;
            parts.push(FormPart {
                name,
                filename,
                data: data.to_vec(),
            });
        }
        request.body = Body::Multipart(parts);
    } else {
        let bytes = axum::body::to_bytes(req.into_body(), BODY_LIMIT)
            .await
            .map_err(|e| ApiError::malformed(e.to_string()))?;
        if !bytes.is_empty() {
            request.body = Body::Json(bytes.to_vec());
        }
    }
    Ok(request)
}
