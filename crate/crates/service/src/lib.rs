//! JSON-over-HTTP sessions around the decision engine.
//!
//! Each POSTed scenario becomes a session with a version counter. Mutations
//! take an optional `If-Match: "<version>"` header and fail with 409 when it
//! is stale; every response carries the current version as its `ETag`.
//! Sessions live as one JSON file each in the data directory.

pub mod error;
pub mod routes;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::{header, HeaderValue, Method};
use axum::Router;
use mcdm_core::ahp::DEFAULT_CR_THRESHOLD;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::ApiError;
pub use routes::AppState;
pub use store::Store;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Allowed browser origins, comma separated; `*` allows any.
    pub cors_origin: Option<String>,
    pub cr_threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("mcdm-data"),
            cors_origin: None,
            cr_threshold: DEFAULT_CR_THRESHOLD,
        }
    }
}

impl Config {
    /// Defaults overridden by `MCDM_HOST`, `MCDM_PORT`, `MCDM_DATA_DIR` and
    /// `MCDM_CORS_ORIGIN`.
    pub fn from_env() -> Result<Self, String> {
        let mut c = Config::default();
        if let Ok(h) = std::env::var("MCDM_HOST") {
            c.host = h;
        }
        if let Ok(p) = std::env::var("MCDM_PORT") {
            c.port = p.parse().map_err(|_| format!("MCDM_PORT is not a port number: {p}"))?;
        }
        if let Ok(d) = std::env::var("MCDM_DATA_DIR") {
            c.data_dir = d.into();
        }
        if let Ok(o) = std::env::var("MCDM_CORS_ORIGIN") {
            c.cors_origin = Some(o);
        }
        Ok(c)
    }
}

fn cors(origin: &str) -> Result<CorsLayer, String> {
    let allow = if origin.trim() == "*" {
        AllowOrigin::any()
    } else {
        let list = origin
            .split(',')
            .map(|o| HeaderValue::from_str(o.trim()).map_err(|_| format!("bad CORS origin `{o}`")))
            .collect::<Result<Vec<_>, _>>()?;
        AllowOrigin::list(list)
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::PUT])
        .allow_headers([header::CONTENT_TYPE, header::IF_MATCH])
        .expose_headers([header::ETAG, header::LOCATION]))
}

/// The full application: routes, state and optional CORS.
pub fn app(config: &Config) -> Result<Router, String> {
    let store = Store::with_threshold(&config.data_dir, config.cr_threshold);
    let router = routes::routes(AppState { store: Arc::new(store) });
    match &config.cors_origin {
        Some(o) => Ok(router.layer(cors(o)?)),
        None => Ok(router),
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let router = app(&config).map_err(std::io::Error::other)?;
    tokio::fs::create_dir_all(&config.data_dir).await?;
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad listen address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("mcdm service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
