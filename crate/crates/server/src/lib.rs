//! Ingestion server: the hub every vehicle uploads to and every client
//! queries.
//!
//! [`store::Store`] owns the durable state; [`http::router`] exposes it as a
//! versioned JSON API. [`ServerHandle`] runs the API on a background thread,
//! which is how the CLI demo and the integration tests host it in-process.

pub mod error;
pub mod geojson;
pub mod http;
pub mod query;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

pub use error::ServerError;
pub use query::{BBox, Bucket, PotholeFilter, StatsBucket};
pub use store::{Store, StoreConfig};

use http::SharedStore;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub store: StoreConfig,
    pub ui_dir: Option<PathBuf>,
}

/// Binds and serves until the process exits.
pub async fn serve(cfg: ServerConfig) -> Result<(), ServerError> {
    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    serve_on(listener, cfg).await
}

/// Serves on an already bound listener; `cfg.listen` is ignored.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    cfg: ServerConfig,
) -> Result<(), ServerError> {
    let store: SharedStore = Arc::new(RwLock::new(Store::open(&cfg.store)?));
    tracing::info!(addr = %listener.local_addr()?, data_dir = %cfg.store.data_dir.display(), "listening");
    axum::serve(listener, http::router(store, cfg.ui_dir)).await?;
    Ok(())
}

/// A server running on its own thread and runtime; stops when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    store: SharedStore,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn start(cfg: ServerConfig) -> Result<Self, ServerError> {
        let store: SharedStore = Arc::new(RwLock::new(Store::open(&cfg.store)?));
        let std_listener = std::net::TcpListener::bind(cfg.listen)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let app = http::router(store.clone(), cfg.ui_dir);

        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let thread = std::thread::Builder::new()
            .name("podas-server".into())
            .spawn(move || {
                runtime.block_on(async move {
                    let listener = match tokio::net::TcpListener::from_std(std_listener) {
                        Ok(l) => l,
                        Err(e) => {
                            tracing::error!(error = %e, "listener setup failed");
                            return;
                        }
                    };
                    let res = axum::serve(listener, app)
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        })
                        .await;
                    if let Err(e) = res {
                        tracing::error!(error = %e, "server stopped");
                    }
                });
            })?;

        Ok(ServerHandle {
            addr,
            store,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Direct access to the store, bypassing HTTP.
    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}
