//! HTTP gateway for the memory engine.
//!
//! One [`Engine`] sits behind a fair async mutex, so requests are applied in
//! the order they reach it. Handlers add no rules of their own; every
//! mutation goes through the same engine call an in-process caller would
//! make.

mod config;
mod error;
mod routes;

use std::future::Future;
use std::io;
use std::sync::Arc;

use cma_core::{Alert, Clock, Engine, Error, FileStorage, SystemClock};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, Mutex};

pub use config::ServiceConfig;
pub use error::{status_for, ApiError, ErrorBody};
pub use routes::router;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("audit chain corrupt at seq {seq}; refusing to start")]
    ChainCorrupt { seq: u64 },
    #[error("address in use: {0}")]
    AddressInUse(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<Error> for ServeError {
    fn from(e: Error) -> Self {
        match e {
            Error::ChainCorrupt { seq } => Self::ChainCorrupt { seq },
            Error::Invalid(m) => Self::Config(m),
            e => Self::Engine(e),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Mutex<Engine>>,
    tokens: Arc<std::collections::BTreeMap<String, cma_core::PrincipalId>>,
    alerts: broadcast::Sender<Alert>,
}

impl AppState {
    pub fn new(mut engine: Engine, tokens: std::collections::BTreeMap<String, cma_core::PrincipalId>) -> Self {
        let (alerts, _) = broadcast::channel(1024);
        let tx = alerts.clone();
        engine.set_alert_sink(Box::new(move |a: &Alert| {
            let _ = tx.send(a.clone());
        }));
        Self { engine: Arc::new(Mutex::new(engine)), tokens: Arc::new(tokens), alerts }
    }

    /// Runs `f` against the engine on the blocking pool, after every
    /// request that reached the lock earlier.
    pub async fn with_engine<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Engine) -> cma_core::Result<T> + Send + 'static,
    {
        let mut guard = self.engine.clone().lock_owned().await;
        tokio::task::spawn_blocking(move || f(&mut guard))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(ApiError::from)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Alert> {
        self.alerts.subscribe()
    }

    fn principal_for(&self, token: &str) -> Option<cma_core::PrincipalId> {
        self.tokens.get(token).cloned()
    }
}

/// An opened, verified engine ready to be served.
pub struct Service {
    state: AppState,
    config: ServiceConfig,
}

impl Service {
    /// Opens storage under `data_dir`. Fails if the chain does not verify.
    pub fn open(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServeError> {
        config.validate()?;
        let storage = FileStorage::open(&config.data_dir)?;
        let engine = Engine::open(config.engine_config(), clock, Box::new(storage))?;
        tracing::info!(events = engine.events().len(), dir = %config.data_dir.display(), "chain verified");
        let state = AppState::new(engine, config.tokens.clone());
        Ok(Self { state, config })
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    /// Serves on `listener` until `shutdown` resolves.
    pub async fn run(self, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> io::Result<()> {
        let sweeper = (!self.config.sweep_interval.is_zero())
            .then(|| tokio::spawn(sweep_loop(self.state.clone(), self.config.sweep_interval)));
        let app = router(self.state);
        let out = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
        if let Some(s) = sweeper {
            s.abort();
        }
        out
    }
}

async fn sweep_loop(state: AppState, every: std::time::Duration) {
    let mut tick = tokio::time::interval(every);
    tick.tick().await;
    loop {
        tick.tick().await;
        let res = state
            .with_engine(|e| {
                let suspended = e.sweep_timeouts()?.len();
                let archived = e.decay_sweep()?.len();
                Ok((suspended, archived))
            })
            .await;
        match res {
            Ok((0, 0)) => {}
            Ok((suspended, archived)) => tracing::info!(suspended, archived, "sweep"),
            Err(e) => tracing::warn!(code = %e.body.code, "sweep failed: {}", e.body.message),
        }
    }
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => ServeError::AddressInUse(addr.to_string()),
        _ => ServeError::Io(e),
    })
}

/// Opens, verifies and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let addr = config.listen_address.clone();
    let service = Service::open(config, Arc::new(SystemClock))?;
    let listener = bind(&addr).await?;
    tracing::info!(%addr, "listening");
    service
        .run(listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
