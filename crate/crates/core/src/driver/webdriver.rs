//! W3C WebDriver client.
//!
//! Geometry is collected by a single script that tags every element with
//! [`INDEX_ATTR`] and reports page-relative rectangles. The tags survive into
//! the page source, which is how DOM nodes are matched with their geometry.
//! Scripts start with a `/*vetl:<name>*/` marker so a test server can
//! recognise them.

use std::collections::BTreeMap;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    check_url, parse_index, Browser, BrowserSession, DriverError, ElementGeometry, ElementHandle,
    FailureRecord, PageSnapshot, Rect, Viewport, WaitPolicy, INDEX_ATTR,
};

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";

pub(crate) const TAG_SCRIPT: &str = r#"/*vetl:tag*/
var attr = arguments[0];
if (window.__vetlGen === undefined) {
  window.__vetlGen = Date.now() * 1000 + Math.floor(Math.random() * 1000);
  window.__vetlNext = 0;
  window.__vetlConsole = [];
  var origError = console.error;
  console.error = function () {
    var parts = [];
    for (var i = 0; i < arguments.length; i++) { parts.push(String(arguments[i])); }
    window.__vetlConsole.push({ timestamp: Date.now(), message: parts.join(' '), source: location.href });
    return origError.apply(console, arguments);
  };
}
var all = document.getElementsByTagName('*');
var out = [];
for (var i = 0; i < all.length; i++) {
  var el = all[i];
  var idx = el.getAttribute(attr);
  if (idx === null) { idx = String(window.__vetlNext++); el.setAttribute(attr, idx); }
  var r = el.getBoundingClientRect();
  var style = window.getComputedStyle(el);
  var shown = el.getClientRects().length > 0 && style.visibility !== 'hidden';
  out.push({
    idx: Number(idx),
    x: r.left + window.scrollX, y: r.top + window.scrollY, width: r.width, height: r.height,
    displayed: shown,
    enabled: !el.disabled,
    value: ('value' in el && typeof el.value === 'string') ? el.value : null
  });
}
return {
  generation: window.__vetlGen,
  scrollX: window.scrollX, scrollY: window.scrollY,
  width: window.innerWidth, height: window.innerHeight,
  dpr: window.devicePixelRatio || 1,
  elements: out
};"#;

pub(crate) const GEN_SCRIPT: &str = "/*vetl:gen*/ return window.__vetlGen === undefined ? null : window.__vetlGen;";

pub(crate) const RESOLVE_SCRIPT: &str = r#"/*vetl:resolve*/
if (window.__vetlGen !== arguments[0]) { return null; }
return document.querySelector('[' + arguments[1] + '="' + arguments[2] + '"]');"#;

pub(crate) const SCROLL_SCRIPT: &str =
    "/*vetl:scroll*/ arguments[0].scrollIntoView({block: 'center', inline: 'nearest'});";

pub(crate) const READY_SCRIPT: &str = "/*vetl:ready*/ return document.readyState;";

pub(crate) const CONSOLE_SCRIPT: &str = r#"/*vetl:console*/
var out = window.__vetlConsole || [];
window.__vetlConsole = [];
return out;"#;

/// Connection options for [`WebDriverBrowser::connect`].
#[derive(Debug, Clone)]
pub struct WebDriverOptions {
    /// Browser executable path passed through the capabilities.
    pub browser_binary: Option<String>,
    pub browser_name: Option<String>,
    pub headless: bool,
    pub wait: WaitPolicy,
    pub http_timeout: Duration,
}

impl Default for WebDriverOptions {
    fn default() -> Self {
        WebDriverOptions {
            browser_binary: None,
            browser_name: None,
            headless: true,
            wait: WaitPolicy::default(),
            http_timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Deserialize)]
struct TagReport {
    generation: Value,
    #[serde(rename = "scrollX")]
    scroll_x: f64,
    #[serde(rename = "scrollY")]
    scroll_y: f64,
    dpr: f64,
    elements: Vec<TaggedElement>,
}

#[derive(Deserialize)]
struct TaggedElement {
    idx: usize,
    x: f64,
    y: f64,
    width: f64,
    height: f64,
    displayed: bool,
    enabled: bool,
    value: Option<String>,
}

#[derive(Deserialize)]
struct ConsoleEntry {
    #[serde(default)]
    level: Option<String>,
    message: String,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    timestamp: f64,
}

/// A browser driven over the W3C WebDriver HTTP protocol.
pub struct WebDriverBrowser {
    agent: ureq::Agent,
    session: BrowserSession,
    base: String,
    options: WebDriverOptions,
    main_window: Option<String>,
    /// Generation ids as reported by the page mapped to small counters.
    generations: BTreeMap<String, u64>,
    current_generation: Option<String>,
    use_log_endpoint: bool,
    actions: u64,
    closed: bool,
}

impl WebDriverBrowser {
    /// Opens a session at `endpoint`, sizes the window and loads `start_url`.
    pub fn connect(
        endpoint: &str,
        start_url: &str,
        viewport: Viewport,
        options: WebDriverOptions,
    ) -> Result<Self, DriverError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(options.http_timeout))
            .build()
            .into();
        let base = endpoint.trim_end_matches('/').to_string();
        let caps = capabilities(&options, viewport);
        let created = request(&agent, Method::Post, &format!("{base}/session"), Some(caps))
            .map_err(|e| match e {
                DriverError::SessionLost(m) | DriverError::Protocol(m) => {
                    DriverError::ConnectionFailed(m)
                }
                other => other,
            })?;
        let session_id = created
            .get("sessionId")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| DriverError::Protocol("new session response lacks sessionId".into()))?
            .to_string();
        let mut browser = WebDriverBrowser {
            agent,
            session: BrowserSession {
                endpoint: base.clone(),
                session_id,
                viewport,
                device_pixel_ratio: 1.0,
            },
            base,
            options,
            main_window: None,
            generations: BTreeMap::new(),
            current_generation: None,
            use_log_endpoint: true,
            actions: 0,
            closed: false,
        };
        browser.cmd(
            Method::Post,
            "window/rect",
            Some(json!({"width": viewport.width, "height": viewport.height})),
        )?;
        browser.main_window = browser
            .cmd(Method::Get, "window", None)?
            .as_str()
            .map(str::to_string);
        if let Err(e) = browser.navigate(start_url) {
            let _ = browser.close();
            return Err(e);
        }
        Ok(browser)
    }

    fn url(&self, path: &str) -> String {
        format!("{}/session/{}/{}", self.base, self.session.session_id, path)
    }

    fn cmd(&mut self, method: Method, path: &str, body: Option<Value>) -> Result<Value, DriverError> {
        if self.closed {
            return Err(DriverError::SessionLost("session closed".into()));
        }
        request(&self.agent, method, &self.url(path), body)
    }

    fn execute(&mut self, script: &str, args: Vec<Value>) -> Result<Value, DriverError> {
        self.cmd(
            Method::Post,
            "execute/sync",
            Some(json!({"script": script, "args": args})),
        )
    }

    fn generation_number(&mut self, raw: &Value) -> u64 {
        let key = raw.to_string();
        let next = self.generations.len() as u64 + 1;
        *self.generations.entry(key).or_insert(next)
    }

    /// Resolves a handle to a WebDriver element reference, failing with
    /// `StaleElement` when the page has moved on.
    fn resolve(&mut self, handle: &ElementHandle) -> Result<Value, DriverError> {
        let index = parse_index(handle)?;
        let raw = self
            .generations
            .iter()
            .find(|(_, &n)| n == handle.generation)
            .map(|(k, _)| k.clone())
            .ok_or_else(|| DriverError::StaleElement(handle.remote_id.clone()))?;
        let raw: Value = serde_json::from_str(&raw).unwrap_or(Value::Null);
        let found = self.execute(
            RESOLVE_SCRIPT,
            vec![raw, json!(INDEX_ATTR), json!(index.to_string())],
        )?;
        match found.get(ELEMENT_KEY).and_then(Value::as_str) {
            Some(id) => Ok(json!(id)),
            None => Err(DriverError::StaleElement(handle.remote_id.clone())),
        }
    }

    fn element_id(&mut self, handle: &ElementHandle) -> Result<String, DriverError> {
        if !handle.displayed || !handle.enabled {
            return Err(DriverError::NotInteractable(handle.remote_id.clone()));
        }
        Ok(self.resolve(handle)?.as_str().unwrap_or_default().to_string())
    }

    fn wait_for_ready(&mut self) -> Result<(), DriverError> {
        let deadline = Instant::now() + self.options.wait.navigation_timeout;
        loop {
            match self.execute(READY_SCRIPT, vec![]) {
                Ok(v) if v.as_str() == Some("complete") => return Ok(()),
                Ok(_) => {}
                // the document may be mid-unload
                Err(DriverError::Protocol(_)) | Err(DriverError::StaleElement(_)) => {}
                Err(e) => return Err(e),
            }
            if Instant::now() >= deadline {
                return Ok(());
            }
            thread::sleep(self.options.wait.poll_interval);
        }
    }

    /// Closes every window except the one the session started in.
    fn close_extra_windows(&mut self) -> Result<(), DriverError> {
        let Some(main) = self.main_window.clone() else {
            return Ok(());
        };
        let handles = self.cmd(Method::Get, "window/handles", None)?;
        let others: Vec<String> = handles
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(Value::as_str)
                    .filter(|h| *h != main)
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        if others.is_empty() {
            return Ok(());
        }
        for handle in others {
            self.cmd(Method::Post, "window", Some(json!({"handle": handle})))?;
            self.cmd(Method::Delete, "window", None)?;
        }
        self.cmd(Method::Post, "window", Some(json!({"handle": main})))?;
        Ok(())
    }

    fn capture(&mut self) -> Result<Option<PageSnapshot>, DriverError> {
        let url_before = self.current_url()?;
        let report = self.execute(TAG_SCRIPT, vec![json!(INDEX_ATTR)])?;
        let report: TagReport = serde_json::from_value(report)
            .map_err(|e| DriverError::Protocol(format!("geometry report: {e}")))?;
        let html = self
            .cmd(Method::Get, "source", None)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        let title = self
            .cmd(Method::Get, "title", None)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        let png = self.cmd(Method::Get, "screenshot", None)?;
        let png = base64::engine::general_purpose::STANDARD
            .decode(png.as_str().unwrap_or_default())
            .map_err(|e| DriverError::Protocol(format!("screenshot base64: {e}")))?;
        let url_after = self.current_url()?;
        let generation_after = self.execute(GEN_SCRIPT, vec![])?;
        if url_before != url_after || generation_after != report.generation {
            return Ok(None);
        }
        let screenshot = image::load_from_memory(&png)
            .map_err(|e| DriverError::Protocol(format!("screenshot decode: {e}")))?
            .to_rgba8();
        let generation = self.generation_number(&report.generation);
        self.current_generation = Some(report.generation.to_string());
        self.session.device_pixel_ratio = report.dpr;
        let elements = report
            .elements
            .into_iter()
            .map(|e| {
                (
                    e.idx,
                    ElementGeometry {
                        rect: Rect::new(e.x, e.y, e.width, e.height),
                        displayed: e.displayed,
                        enabled: e.enabled,
                        value: e.value,
                    },
                )
            })
            .collect();
        Ok(Some(PageSnapshot {
            url: url_after,
            title,
            html,
            screenshot,
            elements,
            scroll_x: report.scroll_x,
            scroll_y: report.scroll_y,
            viewport: self.session.viewport,
            device_pixel_ratio: report.dpr,
            generation,
        }))
    }
}

impl Browser for WebDriverBrowser {
    fn session(&self) -> &BrowserSession {
        &self.session
    }

    fn navigate(&mut self, url: &str) -> Result<(), DriverError> {
        check_url(url)?;
        self.cmd(Method::Post, "url", Some(json!({"url": url})))
            .map_err(|e| match e {
                DriverError::Protocol(m) => DriverError::NavigationFailed(m),
                other => other,
            })?;
        Ok(())
    }

    fn current_url(&mut self) -> Result<String, DriverError> {
        Ok(self
            .cmd(Method::Get, "url", None)?
            .as_str()
            .unwrap_or_default()
            .to_string())
    }

    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError> {
        self.close_extra_windows()?;
        for _ in 0..self.options.wait.snapshot_attempts.max(1) {
            if let Some(snapshot) = self.capture()? {
                return Ok(snapshot);
            }
            self.wait_for_ready()?;
        }
        Err(DriverError::Protocol(
            "page kept changing while capturing a snapshot".into(),
        ))
    }

    fn type_text(&mut self, element: &ElementHandle, text: &str) -> Result<(), DriverError> {
        let id = self.element_id(element)?;
        self.cmd(Method::Post, &format!("element/{id}/clear"), Some(json!({})))?;
        self.cmd(
            Method::Post,
            &format!("element/{id}/value"),
            Some(json!({"text": text})),
        )?;
        self.actions += 1;
        Ok(())
    }

    fn click(&mut self, element: &ElementHandle) -> Result<(), DriverError> {
        let id = self.element_id(element)?;
        self.cmd(Method::Post, &format!("element/{id}/click"), Some(json!({})))?;
        self.actions += 1;
        self.wait_for_ready()?;
        Ok(())
    }

    fn read_value(&mut self, element: &ElementHandle) -> Result<String, DriverError> {
        let id = self.resolve(element)?;
        let id = id.as_str().unwrap_or_default().to_string();
        Ok(self
            .cmd(Method::Get, &format!("element/{id}/property/value"), None)?
            .as_str()
            .unwrap_or_default()
            .to_string())
    }

    fn scroll_into_view(&mut self, element: &ElementHandle) -> Result<(), DriverError> {
        let id = self.resolve(element)?;
        self.execute(SCROLL_SCRIPT, vec![json!({ ELEMENT_KEY: id })])?;
        Ok(())
    }

    fn console_failures(&mut self) -> Result<Vec<FailureRecord>, DriverError> {
        let entries = if self.use_log_endpoint {
            match self.cmd(Method::Post, "se/log", Some(json!({"type": "browser"}))) {
                Ok(v) => v,
                Err(DriverError::Protocol(_)) => {
                    self.use_log_endpoint = false;
                    self.execute(CONSOLE_SCRIPT, vec![])?
                }
                Err(e) => return Err(e),
            }
        } else {
            self.execute(CONSOLE_SCRIPT, vec![])?
        };
        let entries: Vec<ConsoleEntry> = serde_json::from_value(entries).unwrap_or_default();
        Ok(entries
            .into_iter()
            .filter(|e| {
                e.level
                    .as_deref()
                    .map_or(true, |l| l.eq_ignore_ascii_case("SEVERE"))
            })
            .map(|e| FailureRecord {
                timestamp_ms: e.timestamp.max(0.0) as u64,
                message: e.message,
                source: e.source.unwrap_or_default(),
            })
            .collect())
    }

    fn action_count(&self) -> u64 {
        self.actions
    }

    fn close(&mut self) -> Result<(), DriverError> {
        if self.closed {
            return Ok(());
        }
        let url = format!("{}/session/{}", self.base, self.session.session_id);
        let result = request(&self.agent, Method::Delete, &url, None).map(|_| ());
        self.closed = true;
        result
    }
}

impl Drop for WebDriverBrowser {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

fn capabilities(options: &WebDriverOptions, viewport: Viewport) -> Value {
    let mut always = serde_json::Map::new();
    if let Some(name) = &options.browser_name {
        always.insert("browserName".into(), json!(name));
    }
    let mut chrome_args = vec![format!("--window-size={},{}", viewport.width, viewport.height)];
    let mut firefox_args = vec![];
    if options.headless {
        chrome_args.push("--headless=new".into());
        firefox_args.push("-headless".to_string());
    }
    let mut chrome = json!({"args": chrome_args});
    let mut firefox = json!({"args": firefox_args});
    if let Some(binary) = &options.browser_binary {
        chrome["binary"] = json!(binary);
        firefox["binary"] = json!(binary);
    }
    always.insert("goog:chromeOptions".into(), chrome);
    always.insert("moz:firefoxOptions".into(), firefox);
    always.insert(
        "goog:loggingPrefs".into(),
        json!({"browser": "SEVERE"}),
    );
    json!({"capabilities": {"alwaysMatch": always}})
}

#[derive(Clone, Copy)]
enum Method {
    Get,
    Post,
    Delete,
}

/// Sends one command and unwraps the `value` member of the response.
fn request(
    agent: &ureq::Agent,
    method: Method,
    url: &str,
    body: Option<Value>,
) -> Result<Value, DriverError> {
    let response = match method {
        Method::Get => agent.get(url).call(),
        Method::Delete => agent.delete(url).call(),
        Method::Post => agent.post(url).send_json(body.unwrap_or_else(|| json!({}))),
    };
    let response = response.map_err(|e| match e {
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            DriverError::ConnectionFailed(format!("{url}: {e}"))
        }
        other => DriverError::SessionLost(format!("{url}: {other}")),
    })?;
    let status = response.status().as_u16();
    let payload: Value = response
        .into_body()
        .with_config()
        .limit(256 * 1024 * 1024)
        .read_json()
        .map_err(|e| DriverError::Protocol(format!("{url}: unreadable response: {e}")))?;
    let value = payload.get("value").cloned().unwrap_or(Value::Null);
    if (200..300).contains(&status) {
        return Ok(value);
    }
    let code = value
        .get("error")
        .and_then(Value::as_str)
        .unwrap_or("unknown error")
        .to_string();
    let message = value
        .get("message")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Err(map_error(&code, format!("{code}: {message}")))
}

fn map_error(code: &str, message: String) -> DriverError {
    match code {
        "invalid session id" | "no such window" | "session not created" => {
            DriverError::SessionLost(message)
        }
        "stale element reference" | "no such element" | "detached shadow root" => {
            DriverError::StaleElement(message)
        }
        "element not interactable" | "element click intercepted" | "invalid element state" => {
            DriverError::NotInteractable(message)
        }
        _ => DriverError::Protocol(message),
    }
}
