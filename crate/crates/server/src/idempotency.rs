//! `Idempotency-Key` replay for POST requests. The first response for a
//! (user, method, path, key) is stored and returned verbatim on replays.
//! Reusing a key with a different body is rejected.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use sha2::{Digest, Sha256};

use crate::{error_body, AppState, MAX_BODY};

pub const HEADER: &str = "idempotency-key";
pub const REPLAYED: &str = "idempotent-replayed";

#[derive(Clone)]
struct Stored {
    body_digest: String,
    status: StatusCode,
    content_type: Option<HeaderValue>,
    body: Bytes,
}

type Slot = Arc<tokio::sync::Mutex<Option<Stored>>>;

#[derive(Default)]
pub struct IdempotencyCache {
    slots: Mutex<HashMap<String, Slot>>,
}

impl IdempotencyCache {
    fn slot(&self, key: String) -> Slot {
        Arc::clone(self.slots.lock().expect("idempotency cache poisoned").entry(key).or_default())
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("idempotency cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn replay(stored: &Stored) -> Response {
    let mut resp = (stored.status, stored.body.clone()).into_response();
    if let Some(ct) = &stored.content_type {
        resp.headers_mut().insert(header::CONTENT_TYPE, ct.clone());
    }
    resp.headers_mut().insert(REPLAYED, HeaderValue::from_static("true"));
    resp
}

pub async fn middleware(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if req.method() != Method::POST {
        return next.run(req).await;
    }
    let Some(key) = req.headers().get(HEADER).and_then(|v| v.to_str().ok()).map(str::to_owned) else {
        return next.run(req).await;
    };
    let user = req.headers().get(crate::USER_HEADER).and_then(|v| v.to_str().ok()).unwrap_or("").to_owned();
    let scope = format!("{user}\n{}\n{}\n{key}", req.method(), req.uri().path());

    let (parts, body) = req.into_parts();
    let bytes = match to_bytes(body, MAX_BODY).await {
        Ok(b) => b,
        Err(e) => return error_body(StatusCode::PAYLOAD_TOO_LARGE, "BODY_TOO_LARGE", &e.to_string()),
    };
    let mut hasher = Sha256::new();
    hasher.update(parts.uri.query().unwrap_or("").as_bytes());
    hasher.update([0]);
    hasher.update(&bytes);
    let body_digest = hex::encode(hasher.finalize());

    let slot = state.idempotency.slot(scope);
    let mut guard = slot.lock().await;
    if let Some(stored) = guard.as_ref() {
        if stored.body_digest != body_digest {
            return error_body(
                StatusCode::UNPROCESSABLE_ENTITY,
                "IDEMPOTENCY_KEY_REUSED",
                "idempotency key was already used with a different request",
            );
        }
        return replay(stored);
    }

    let resp = next.run(Request::from_parts(parts, Body::from(bytes))).await;
    let (parts, body) = resp.into_parts();
    let body = match to_bytes(body, usize::MAX).await {
        Ok(b) => b,
        Err(e) => return error_body(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", &e.to_string()),
    };
    // Server faults are not remembered so the client can retry them.
    if !parts.status.is_server_error() {
        *guard = Some(Stored {
            body_digest,
            status: parts.status,
            content_type: parts.headers.get(header::CONTENT_TYPE).cloned(),
            body: body.clone(),
        });
    }
    Response::from_parts(parts, Body::from(body))
}
