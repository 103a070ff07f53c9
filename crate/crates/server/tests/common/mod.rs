#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::thread::JoinHandle;

use cma_core::gate::ApproverEntry;
use cma_core::{Clock, ManualClock, PrincipalId, RiskTier, Timestamp};
use cma_server::{bind, ServeError, Service, ServiceConfig};
use serde::Serialize;
use serde_json::Value;
use tokio::sync::oneshot;

pub const START: i64 = 1_767_225_600_000;

/// Token for a principal is `t-<principal>`.
pub fn token(who: &str) -> String {
    format!("t-{who}")
}

pub fn config(dir: &Path) -> ServiceConfig {
    let approver = |n: &str, t| ApproverEntry { principal: PrincipalId::new(n), tier_ceiling: t };
    let mut tokens = BTreeMap::new();
    for who in ["root", "alice", "bob", "carol", "operator", "system", "ada-1", "ada-2", "ada-b", "bo-1"] {
        tokens.insert(token(who), PrincipalId::new(who));
    }
    ServiceConfig {
        data_dir: dir.to_path_buf(),
        listen_address: "127.0.0.1:0".into(),
        approver_registry: vec![
            approver("root", RiskTier::R4),
            approver("alice", RiskTier::R4),
            approver("bob", RiskTier::R3),
            approver("carol", RiskTier::R2),
        ],
        principals: vec![PrincipalId::new("operator")],
        tokens,
        sweep_interval: std::time::Duration::ZERO,
        ..ServiceConfig::default()
    }
}

pub fn clock() -> ManualClock {
    ManualClock::new(Timestamp::from_unix_millis(START))
}

/// A gateway on an ephemeral port, served from its own runtime thread.
pub struct TestServer {
    pub url: String,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn start(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServeError> {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let service = Service::open(config.clone(), clock)?;
        let listener = rt.block_on(bind(&config.listen_address))?;
        let url = format!("http://{}", listener.local_addr()?);
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(service.run(listener, async {
                let _ = rx.await;
            }))
            .expect("serve");
        });
        Ok(Self { url, stop: Some(tx), thread: Some(thread) })
    }

    pub fn client(&self, who: &str) -> Client {
        Client::new(&self.url, &token(who))
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().expect("server thread");
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub struct Client {
    agent: ureq::Agent,
    base: String,
    auth: String,
}

#[derive(Debug)]
pub struct Reply {
    pub status: u16,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_string()
    }
}

impl Client {
    pub fn new(base: &str, token: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent, base: base.to_string(), auth: format!("Bearer {token}") }
    }

    fn finish(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
        let mut r = r.expect("transport");
        Reply { status: r.status().as_u16(), text: r.body_mut().read_to_string().expect("body") }
    }

    pub fn get(&self, path: &str) -> Reply {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).header("Authorization", &self.auth).call())
    }

    pub fn delete(&self, path: &str) -> Reply {
        Self::finish(self.agent.delete(format!("{}{path}", self.base)).header("Authorization", &self.auth).call())
    }

    pub fn post<T: Serialize>(&self, path: &str, body: &T) -> Reply {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .header("Authorization", &self.auth)
                .send_json(body),
        )
    }

    pub fn post_empty(&self, path: &str) -> Reply {
        Self::post(self, path, &serde_json::json!({}))
    }
}
