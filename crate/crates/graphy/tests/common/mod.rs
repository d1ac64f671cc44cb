#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::thread::JoinHandle;

use graphy::scrape::{scrape, ScrapeSummary};
use graphy::{App, AppConfig};
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

/// Writes a config using the fixture workflow, providers and repository,
/// with its data directory under `dir`.
pub fn write_config(dir: &Path) -> PathBuf {
    let f = fixtures();
    let config = serde_json::json!({
        "data_dir": dir.join("data"),
        "providers": f.join("providers.json"),
        "workflow": f.join("workflows/paper.json"),
        "repository": {"kind": "fixture", "manifest": f.join("repo/manifest.json")},
        "bind": "127.0.0.1:0",
        "workers": 2,
    });
    let path = dir.join("graphy.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
    path
}

/// Scrapes the Llama 3 seed at depth 1 into the config's data directory.
pub fn scrape_fixture(config: &Path) -> ScrapeSummary {
    let app = App::new(AppConfig::load(config).unwrap()).unwrap();
    let mut store = app.open_store().unwrap();
    let budget = app.config.budget;
    scrape(&app, &mut store, &["The Llama 3 Herd of Models".to_string()], budget).unwrap()
}

pub struct Server {
    pub base: String,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn start(config: &Path) -> Server {
        let app = App::new(AppConfig::load(config).unwrap()).unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let state = graphy::server::state(app).unwrap();
                let listener = graphy::server::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                graphy::server::serve(listener, state, async {
                    rx.await.ok();
                })
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        Server {
            base: format!("http://{addr}/api/v1"),
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn client(&self) -> Client {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Client {
            agent,
            base: self.base.clone(),
        }
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            tx.send(()).ok();
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

pub struct Client {
    agent: ureq::Agent,
    base: String,
}

impl Client {
    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut resp = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_json().unwrap())
    }

    pub fn get_text(&self, path: &str) -> (u16, String, String) {
        let mut resp = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        let status = resp.status().as_u16();
        let mime = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_string();
        (status, mime, resp.body_mut().read_to_string().unwrap())
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut resp = self.agent.post(&format!("{}{path}", self.base)).send_json(&body).unwrap();
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_json().unwrap())
    }

    /// POST that must succeed.
    pub fn ok(&self, path: &str, body: Value) -> Value {
        let (status, v) = self.post(path, body);
        assert!((200..300).contains(&status), "POST {path} -> {status}: {v}");
        v
    }
}

pub fn ids(v: &Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap().to_string())
        .collect()
}
