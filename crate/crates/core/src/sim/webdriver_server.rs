//! A WebDriver endpoint backed by [`SimEngine`].
//!
//! Speaks the subset of the W3C protocol that [`WebDriverBrowser`] uses, so
//! the real client can be exercised without a browser installed. Scripts are
//! not interpreted; `execute/sync` dispatches on the `/*vetl:<name>*/` marker
//! the client puts in front of every script. Each command advances the
//! engine's logical clock.
//!
//! [`WebDriverBrowser`]: crate::driver::WebDriverBrowser

use std::collections::HashMap;
use std::io::Cursor;
use std::sync::Arc;
use std::thread::JoinHandle;

use base64::Engine as _;
use serde_json::{json, Value};
use tiny_http::{Header, Method, Request, Response, Server};
use url::Url;

use super::engine::SimEngine;
use super::site::{FixtureSite, BUILTIN_FIXTURES};
use crate::driver::{DriverError, INDEX_ATTR};
use crate::geometry::Viewport;

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";
const WINDOW: &str = "vetl-main";

#[derive(Debug, Clone)]
pub struct EmulatorOptions {
    pub device_pixel_ratio: f64,
    /// Serve `/se/log`; when false clients must fall back to script polling.
    pub log_endpoint: bool,
}

impl Default for EmulatorOptions {
    fn default() -> Self {
        EmulatorOptions {
            device_pixel_ratio: 1.0,
            log_endpoint: true,
        }
    }
}

/// A running emulator bound to a loopback port. Stops on drop.
pub struct WebDriverEmulator {
    server: Arc<Server>,
    endpoint: String,
    thread: Option<JoinHandle<()>>,
}

impl WebDriverEmulator {
    /// Serves the builtin fixtures plus `extra` sites.
    pub fn start(extra: Vec<FixtureSite>, options: EmulatorOptions) -> std::io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("emulator bound to a non-IP address"))?;
        let server = Arc::new(server);
        let mut sites: Vec<FixtureSite> = BUILTIN_FIXTURES
            .iter()
            .filter_map(|n| FixtureSite::builtin(n))
            .collect();
        sites.extend(extra);
        let worker = Arc::clone(&server);
        let thread = std::thread::spawn(move || {
            let mut state = State {
                sites,
                options,
                sessions: HashMap::new(),
                next_session: 1,
            };
            for request in worker.incoming_requests() {
                state.handle(request);
            }
        });
        Ok(WebDriverEmulator {
            server,
            endpoint: format!("http://127.0.0.1:{port}"),
            thread: Some(thread),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Drop for WebDriverEmulator {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

struct Session {
    engine: SimEngine,
    viewport: Viewport,
}

struct State {
    sites: Vec<FixtureSite>,
    options: EmulatorOptions,
    sessions: HashMap<String, Session>,
    next_session: u64,
}

struct WdError {
    status: u16,
    code: &'static str,
    message: String,
}

fn wd_error(status: u16, code: &'static str, message: impl Into<String>) -> WdError {
    WdError {
        status,
        code,
        message: message.into(),
    }
}

impl From<DriverError> for WdError {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::StaleElement(m) => wd_error(404, "stale element reference", m),
            DriverError::NotInteractable(m) => wd_error(400, "element not interactable", m),
            DriverError::NavigationFailed(m) => wd_error(400, "invalid argument", m),
            DriverError::SessionLost(m) => wd_error(404, "invalid session id", m),
            other => wd_error(500, "unknown error", other.to_string()),
        }
    }
}

type WdResult = Result<Value, WdError>;

impl State {
    fn handle(&mut self, mut request: Request) {
        let mut body = String::new();
        let _ = request.as_reader().read_to_string(&mut body);
        let body: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
        let path = request.url().split('?').next().unwrap_or("").to_string();
        let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
        let result = self.route(request.method(), &segments, &body);
        let (status, payload) = match result {
            Ok(value) => (200, json!({ "value": value })),
            Err(e) => (
                e.status,
                json!({"value": {"error": e.code, "message": e.message, "stacktrace": ""}}),
            ),
        };
        let header = Header::from_bytes("Content-Type", "application/json; charset=utf-8")
            .expect("static header");
        let response = Response::from_string(payload.to_string())
            .with_status_code(status)
            .with_header(header);
        let _ = request.respond(response);
    }

    fn route(&mut self, method: &Method, segments: &[&str], body: &Value) -> WdResult {
        match (method, segments) {
            (Method::Get, ["status"]) => Ok(json!({"ready": true, "message": "vetl emulator"})),
            (Method::Post, ["session"]) => self.new_session(),
            (Method::Delete, ["session", id]) => {
                self.sessions.remove(*id);
                Ok(Value::Null)
            }
            (_, ["session", id, rest @ ..]) => {
                let id = id.to_string();
                let session = self
                    .sessions
                    .get_mut(&id)
                    .ok_or_else(|| wd_error(404, "invalid session id", id.clone()))?;
                session.engine.tick();
                let command = (method.clone(), rest.to_vec());
                Self::command(&self.sites, &self.options, session, command, body)
            }
            _ => Err(wd_error(404, "unknown command", segments.join("/"))),
        }
    }

    fn new_session(&mut self) -> WdResult {
        let id = format!("emu-{:04}", self.next_session);
        self.next_session += 1;
        let viewport = Viewport::default();
        let engine = SimEngine::new(
            FixtureSite::new("blank", Vec::<(String, String)>::new()),
            viewport,
            self.options.device_pixel_ratio,
        );
        self.sessions.insert(id.clone(), Session { engine, viewport });
        Ok(json!({"sessionId": id, "capabilities": {"browserName": "vetl-emulator"}}))
    }

    fn command(
        sites: &[FixtureSite],
        options: &EmulatorOptions,
        session: &mut Session,
        (method, rest): (Method, Vec<&str>),
        body: &Value,
    ) -> WdResult {
        let engine = &mut session.engine;
        match (method, rest.as_slice()) {
            (Method::Post, ["url"]) => {
                let raw = body["url"].as_str().unwrap_or_default();
                let url = Url::parse(raw).map_err(|e| wd_error(400, "invalid argument", format!("{raw}: {e}")))?;
                let host = url.host_str().unwrap_or_default();
                if let Some(site) = sites.iter().find(|s| format!("{}.fixture.test", s.name()) == host) {
                    if engine.site().name() != site.name() {
                        *engine = SimEngine::new(site.clone(), session.viewport, options.device_pixel_ratio);
                    }
                }
                engine.navigate(raw)?;
                Ok(Value::Null)
            }
            (Method::Get, ["url"]) => Ok(json!(engine.url())),
            (Method::Get, ["title"]) => Ok(json!(engine.title())),
            (Method::Get, ["source"]) => Ok(json!(engine.tagged_source())),
            (Method::Get, ["screenshot"]) => {
                let mut png = Vec::new();
                engine
                    .render()
                    .write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
                    .map_err(|e| wd_error(500, "unable to capture screen", e.to_string()))?;
                Ok(json!(base64::engine::general_purpose::STANDARD.encode(png)))
            }
            (Method::Post, ["window", "rect"]) => {
                let w = body["width"].as_u64().unwrap_or(session.viewport.width as u64) as u32;
                let h = body["height"].as_u64().unwrap_or(session.viewport.height as u64) as u32;
                let viewport = Viewport::new(w, h)
                    .ok_or_else(|| wd_error(400, "invalid argument", "window size must be positive"))?;
                session.viewport = viewport;
                engine.set_viewport(viewport);
                Ok(json!({"x": 0, "y": 0, "width": w, "height": h}))
            }
            (Method::Get, ["window"]) => Ok(json!(WINDOW)),
            (Method::Get, ["window", "handles"]) => Ok(json!([WINDOW])),
            (Method::Post, ["window"]) => Ok(Value::Null),
            (Method::Delete, ["window"]) => Ok(json!([])),
            (Method::Post, ["execute", "sync"]) => {
                let script = body["script"].as_str().unwrap_or_default();
                let args = body["args"].as_array().cloned().unwrap_or_default();
                execute(engine, script, &args)
            }
            (Method::Post, ["element", id, "click"]) => {
                let index = element_index(engine, id)?;
                engine.click(index)?;
                Ok(Value::Null)
            }
            (Method::Post, ["element", id, "clear"]) => {
                let index = element_index(engine, id)?;
                engine.clear(index)?;
                Ok(Value::Null)
            }
            (Method::Post, ["element", id, "value"]) => {
                let index = element_index(engine, id)?;
                let text = body["text"].as_str().unwrap_or_default();
                engine.send_keys(index, text)?;
                Ok(Value::Null)
            }
            (Method::Get, ["element", id, "property", "value"]) => {
                let index = element_index(engine, id)?;
                Ok(json!(engine.value(index)?))
            }
            (Method::Post, ["se", "log"]) if options.log_endpoint => Ok(Value::Array(
                engine
                    .drain_console()
                    .into_iter()
                    .map(|f| json!({"level": "SEVERE", "message": f.message, "source": f.source, "timestamp": f.timestamp_ms}))
                    .collect(),
            )),
            (m, path) => Err(wd_error(404, "unknown command", format!("{m} {}", path.join("/")))),
        }
    }
}

fn element_ref(engine: &SimEngine, index: usize) -> Value {
    json!({ ELEMENT_KEY: format!("g{}-{}", engine.generation(), index) })
}

fn element_index(engine: &SimEngine, id: &str) -> Result<usize, WdError> {
    let stale = || wd_error(404, "stale element reference", id.to_string());
    let (generation, index) = id
        .strip_prefix('g')
        .and_then(|rest| rest.split_once('-'))
        .ok_or_else(stale)?;
    let generation: u64 = generation.parse().map_err(|_| stale())?;
    let index: usize = index.parse().map_err(|_| stale())?;
    engine.check(generation, index)?;
    Ok(index)
}

fn execute(engine: &mut SimEngine, script: &str, args: &[Value]) -> WdResult {
    let name = script
        .trim_start()
        .strip_prefix("/*vetl:")
        .and_then(|s| s.split_once("*/"))
        .map(|(n, _)| n)
        .ok_or_else(|| wd_error(500, "javascript error", "the emulator only runs vetl scripts"))?;
    match name {
        "tag" => {
            if args.first().and_then(Value::as_str) != Some(INDEX_ATTR) {
                return Err(wd_error(500, "javascript error", "unexpected tag attribute"));
            }
            let viewport = engine.viewport();
            let elements: Vec<Value> = engine
                .geometry()
                .into_iter()
                .map(|(i, g)| {
                    json!({
                        "idx": i, "x": g.rect.x, "y": g.rect.y,
                        "width": g.rect.width, "height": g.rect.height,
                        "displayed": g.displayed, "enabled": g.enabled, "value": g.value,
                    })
                })
                .collect();
            Ok(json!({
                "generation": engine.generation(),
                "scrollX": 0.0, "scrollY": engine.scroll_y(),
                "width": viewport.width, "height": viewport.height,
                "dpr": engine.device_pixel_ratio(),
                "elements": elements,
            }))
        }
        "gen" => Ok(json!(engine.generation())),
        "resolve" => {
            let generation = args.first().and_then(Value::as_u64);
            let index = args.get(2).and_then(Value::as_str).and_then(|s| s.parse::<usize>().ok());
            match (generation, index) {
                (Some(g), Some(i)) if engine.check(g, i).is_ok() => Ok(element_ref(engine, i)),
                _ => Ok(Value::Null),
            }
        }
        "scroll" => {
            let id = args
                .first()
                .and_then(|a| a.get(ELEMENT_KEY))
                .and_then(Value::as_str)
                .unwrap_or_default();
            let index = element_index(engine, id)?;
            engine.scroll_into_view(index)?;
            Ok(Value::Null)
        }
        "ready" => Ok(json!("complete")),
        "console" => Ok(Value::Array(
            engine
                .drain_console()
                .into_iter()
                .map(|f| json!({"message": f.message, "source": f.source, "timestamp": f.timestamp_ms}))
                .collect(),
        )),
        other => Err(wd_error(500, "javascript error", format!("unknown script {other}"))),
    }
}
