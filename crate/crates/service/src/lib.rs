//! HTTP front end for BO-Muse sessions: create a session, post the human's
//! point when it is live, advance batch by batch, read state and export CSV.

pub mod api;
pub mod store;

use std::future::Future;
use std::sync::Arc;

pub use api::{router, router_with, AdvanceResponse, CreateRequest, Defaults, SessionView, SuggestionRequest};
pub use store::{Phase, SessionState, Store, StoreError};

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<Store>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    serve_with(listener, store, Defaults::default(), shutdown).await
}

pub async fn serve_with(
    listener: tokio::net::TcpListener,
    store: Arc<Store>,
    defaults: Defaults,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router_with(store, defaults)).with_graceful_shutdown(shutdown).await
}
