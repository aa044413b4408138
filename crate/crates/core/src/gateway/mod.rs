//! HTTP face of the service: `/graphql`, `/upload`, media blobs, and health.

mod config;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, MethodRouter};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::api::{ApiError, Backend, ErrorCode, ExecutionResult, GraphQLError};
use crate::auth::{Action, AuthError, Principal, MEDIA_SCOPE};
use crate::clock::SystemClock;
use crate::idcard::HttpVerificationClient;
use crate::service::{Service, ServiceError};
use crate::store::MediaError;
use crate::Values;

pub use config::{
    ConfigError, ConfigLayer, ServiceConfig, DEFAULT_DATA_DIR, DEFAULT_HOST, DEFAULT_PORT,
    ENV_PREFIX,
};

/// Request body cap on `/graphql`.
pub const GRAPHQL_BODY_LIMIT: usize = 1024 * 1024;
/// Room for multipart boundaries and headers on top of the upload itself.
const MULTIPART_OVERHEAD: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    GraphQL,
    Sdl,
    Upload,
    Health,
    MediaBlob,
}

/// Every route the gateway serves. Query and mutation traffic only ever reaches `/graphql`.
pub const ROUTES: &[(&str, &str, Endpoint)] = &[
    ("POST", "/graphql", Endpoint::GraphQL),
    ("GET", "/graphql", Endpoint::Sdl),
    ("POST", "/upload", Endpoint::Upload),
    ("GET", "/healthz", Endpoint::Health),
    ("GET", "/media/{sha}", Endpoint::MediaBlob),
];

#[derive(Clone)]
struct AppState {
    service: Arc<Service>,
}

/// Builds the service a config describes, including its verification client.
pub fn build_service(config: &ServiceConfig) -> Result<Service, ServiceError> {
    let service = Service::open(config.service_options(), Arc::new(SystemClock))?;
    if let Some(url) = &config.verifier_url {
        let client = HttpVerificationClient::new(url.clone(), config.verifier_timeout)
            .map_err(|e| ServiceError::Auth(AuthError::Config(e.to_string())))?;
        service.set_verifier(Arc::new(client));
    }
    Ok(service)
}

pub fn router(service: Arc<Service>, cors_allowed_origins: &[String]) -> Router {
    let max_upload = service.media().max_bytes();
    let mut router = Router::new();
    for (path, group) in grouped_routes() {
        let mut method_router: MethodRouter<AppState> = MethodRouter::new();
        for endpoint in group {
            method_router = match endpoint {
                Endpoint::GraphQL => method_router
                    .merge(post(graphql).layer(DefaultBodyLimit::max(GRAPHQL_BODY_LIMIT))),
                Endpoint::Sdl => method_router.merge(get(sdl)),
                Endpoint::Upload => method_router.merge(
                    post(upload).layer(DefaultBodyLimit::max(max_upload + MULTIPART_OVERHEAD)),
                ),
                Endpoint::Health => method_router.merge(get(health)),
                Endpoint::MediaBlob => method_router.merge(get(media_blob)),
            };
        }
        router = router.route(path, method_router);
    }
    let mut router = router.with_state(AppState { service });
    let origins: Vec<HeaderValue> = cors_allowed_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    if !origins.is_empty() {
        router = router.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]),
        );
    }
    router
}

fn grouped_routes() -> Vec<(&'static str, Vec<Endpoint>)> {
    let mut out: Vec<(&'static str, Vec<Endpoint>)> = Vec::new();
    for (_, path, endpoint) in ROUTES {
        match out.iter_mut().find(|(p, _)| p == path) {
            Some((_, group)) => group.push(*endpoint),
            None => out.push((path, vec![*endpoint])),
        }
    }
    out
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve_on(
    listener: TcpListener,
    router: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds the configured address and serves until Ctrl-C or SIGTERM.
pub async fn serve(config: ServiceConfig, service: Arc<Service>) -> std::io::Result<()> {
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("bad listen address: {e}"),
            )
        })?;
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    serve_on(
        listener,
        router(service, &config.cors_allowed_origins),
        shutdown_signal(),
    )
    .await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down");
}

fn bad_request(message: impl Into<String>) -> Response {
    let body =
        json!({"errors": [{"message": message.into(), "extensions": {"code": "BAD_REQUEST"}}]});
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

fn http_error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = json!({"error": {"code": code, "message": message.into()}});
    (status, Json(body)).into_response()
}

enum Bearer {
    Absent,
    Token(String),
    Malformed,
}

fn bearer(headers: &HeaderMap) -> Bearer {
    let Some(value) = headers.get(header::AUTHORIZATION) else {
        return Bearer::Absent;
    };
    let Ok(value) = value.to_str() else {
        return Bearer::Malformed;
    };
    match value.split_once(' ') {
        Some((scheme, token))
            if scheme.eq_ignore_ascii_case("bearer") && !token.trim().is_empty() =>
        {
            Bearer::Token(token.trim().to_string())
        }
        _ => Bearer::Malformed,
    }
}

/// `Ok(None)` for anonymous requests; `Err` carries why a presented credential was refused.
async fn principal(
    service: &Arc<Service>,
    headers: &HeaderMap,
) -> Result<Option<Principal>, String> {
    match bearer(headers) {
        Bearer::Absent => Ok(None),
        Bearer::Malformed => Err("Authorization header must be `Bearer <token>`".into()),
        Bearer::Token(token) => {
            let service = service.clone();
            tokio::task::spawn_blocking(move || service.authenticate(&token))
                .await
                .map_err(|e| e.to_string())?
                .map(Some)
                .map_err(|e| format!("invalid token: {e}"))
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GraphQLRequest {
    query: String,
    #[serde(default)]
    variables: Option<Value>,
    #[serde(default)]
    operation_name: Option<String>,
}

async fn graphql(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    let request: GraphQLRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return bad_request(format!(
                "request body must be JSON {{query, variables?, operationName?}}: {e}"
            ))
        }
    };
    let variables = match request.variables {
        None | Some(Value::Null) => Values::new(),
        Some(Value::Object(map)) => map,
        Some(_) => return bad_request("variables must be a JSON object"),
    };
    let principal = match principal(&state.service, &headers).await {
        Ok(p) => p,
        Err(message) => {
            let result =
                ExecutionResult::error(GraphQLError::new(ErrorCode::Unauthenticated, message));
            return Json(result.to_json()).into_response();
        }
    };
    let service = state.service.clone();
    let result = tokio::task::spawn_blocking(move || {
        service.execute(
            &request.query,
            &variables,
            request.operation_name.as_deref(),
            principal,
        )
    })
    .await;
    match result {
        Ok(result) => Json(result.to_json()).into_response(),
        Err(e) => {
            log::error!("graphql execution panicked: {e}");
            let result =
                ExecutionResult::error(GraphQLError::new(ErrorCode::Internal, "internal error"));
            (StatusCode::INTERNAL_SERVER_ERROR, Json(result.to_json())).into_response()
        }
    }
}

async fn sdl(
    State(state): State<AppState>,
    Query(params): Query<std::collections::HashMap<String, String>>,
) -> Response {
    if !params.contains_key("sdl") {
        return bad_request("use POST for queries, or GET /graphql?sdl for the schema");
    }
    (
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        state.service.sdl(),
    )
        .into_response()
}

async fn health() -> Json<Value> {
    Json(
        json!({"status": "ok", "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")}),
    )
}

fn api_status(e: &ApiError) -> StatusCode {
    match e {
        ApiError::Media(MediaError::TooLarge { .. }) => StatusCode::PAYLOAD_TOO_LARGE,
        ApiError::Media(MediaError::UnsupportedMediaType(_)) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        ApiError::Media(MediaError::NotFound(_)) => StatusCode::NOT_FOUND,
        _ => match e.code() {
            ErrorCode::Unauthenticated => StatusCode::UNAUTHORIZED,
            ErrorCode::Forbidden => StatusCode::FORBIDDEN,
            ErrorCode::BadUserInput => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        },
    }
}

fn api_response(e: &ApiError) -> Response {
    http_error(api_status(e), e.code().as_str(), e.to_string())
}

/// Authenticates and authorizes before any of the body is read.
async fn authorize(
    state: &AppState,
    headers: &HeaderMap,
    action: Action,
) -> Result<Principal, Response> {
    let principal = match principal(&state.service, headers).await {
        Ok(Some(p)) => p,
        Ok(None) => {
            return Err(http_error(
                StatusCode::UNAUTHORIZED,
                "UNAUTHENTICATED",
                "authentication required",
            ))
        }
        Err(message) => {
            return Err(http_error(
                StatusCode::UNAUTHORIZED,
                "UNAUTHENTICATED",
                message,
            ))
        }
    };
    state
        .service
        .content()
        .authorize(Some(&principal), MEDIA_SCOPE, action)
        .map_err(|e| api_response(&e))?;
    Ok(principal)
}

async fn upload(
    State(state): State<AppState>,
    headers: HeaderMap,
    mut multipart: Multipart,
) -> Response {
    let principal = match authorize(&state, &headers, Action::Create).await {
        Ok(p) => p,
        Err(response) => return response,
    };
    let max = state.service.media().max_bytes();
    let declared = headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok());
    if declared.is_some_and(|len| len > max + MULTIPART_OVERHEAD) {
        return multipart_failure(StatusCode::PAYLOAD_TOO_LARGE, String::new(), max);
    }
    loop {
        let field = match multipart.next_field().await {
            Ok(Some(field)) => field,
            Ok(None) => return bad_request("multipart body has no file part"),
            Err(e) => return multipart_failure(e.status(), e.body_text(), max),
        };
        if field.file_name().is_none() && !matches!(field.name(), Some("file" | "files")) {
            continue;
        }
        let filename = field.file_name().unwrap_or("upload").to_string();
        let mime = field
            .content_type()
            .unwrap_or("application/octet-stream")
            .to_string();
        let bytes = match field.bytes().await {
            Ok(b) => b,
            Err(e) => return multipart_failure(e.status(), e.body_text(), max),
        };
        let service = state.service.clone();
        let stored = tokio::task::spawn_blocking(move || {
            service.upload(Some(&principal), &bytes, &filename, &mime)
        })
        .await;
        return match stored {
            Ok(Ok(asset)) => (StatusCode::CREATED, Json(json!(asset))).into_response(),
            Ok(Err(e)) => api_response(&e),
            Err(e) => http_error(
                StatusCode::INTERNAL_SERVER_ERROR,
                "INTERNAL_SERVER_ERROR",
                e.to_string(),
            ),
        };
    }
}

fn multipart_failure(status: StatusCode, text: String, max: usize) -> Response {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        let e = ApiError::Media(MediaError::TooLarge { size: max + 1, max });
        return http_error(
            status,
            e.code().as_str(),
            format!("upload exceeds the {max} byte limit"),
        );
    }
    http_error(status, "BAD_REQUEST", text)
}

async fn media_blob(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(sha): Path<String>,
) -> Response {
    if let Err(response) = authorize(&state, &headers, Action::FindOne).await {
        return response;
    }
    let service = state.service.clone();
    let blob = tokio::task::spawn_blocking(move || service.media().load_blob(&sha)).await;
    match blob {
        Ok(Ok(bytes)) => {
            let mime = match image::guess_format(&bytes) {
                Ok(image::ImageFormat::Png) => "image/png",
                Ok(image::ImageFormat::Jpeg) => "image/jpeg",
                _ => "application/octet-stream",
            };
            ([(header::CONTENT_TYPE, mime)], bytes).into_response()
        }
        Ok(Err(e)) => api_response(&ApiError::Media(e)),
        Err(e) => http_error(
            StatusCode::INTERNAL_SERVER_ERROR,
            "INTERNAL_SERVER_ERROR",
            e.to_string(),
        ),
    }
}
