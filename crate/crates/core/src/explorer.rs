//! The exploration loop.
//!
//! Each iteration takes a snapshot. If the page has an empty input box that
//! has not been tried during this page visit, the first one in document order
//! is filled with model-generated text and its interested element is
//! determined (by an element prompt or by DOM distance, depending on the
//! variant). Once no empty boxes remain, the bandit picks an element to
//! click, and the click is rewarded from the next snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::annotate::{annotate_elements, annotate_input, AnnotateOptions};
use crate::bandit::{curiosity_reward, BanditTables, Branch, SelectionContext, DEFAULT_EPSILON};
use crate::dom::{DomDocument, ElementKey, ElementKind, InputWidget, InteractiveElement};
use crate::driver::{Browser, DriverError, FailureRecord, PageSnapshot};
use crate::model::{ModelClient, ModelError, ModelExchange};
use crate::prompt::{
    build_element_prompt, build_input_prompt, parse_button_answer, parse_text_answer, AnswerKind,
    InputFlavor, PromptBundle, PromptOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Vision input prompt, vision element prompt.
    Vetl,
    /// Vision input prompt, nearest button by DOM distance.
    V1,
    /// Text-only input prompt, vision element prompt.
    Lv,
    /// Text-only input prompt, nearest button by DOM distance.
    L,
    /// Uniform random clicks, no typing.
    Random,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vetl" => Some(Variant::Vetl),
            "v1" => Some(Variant::V1),
            "lv" => Some(Variant::Lv),
            "l" => Some(Variant::L),
            "random" => Some(Variant::Random),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Vetl => "vetl",
            Variant::V1 => "v1",
            Variant::Lv => "lv",
            Variant::L => "l",
            Variant::Random => "random",
        }
    }

    fn input_flavor(&self) -> InputFlavor {
        match self {
            Variant::Vetl | Variant::V1 => InputFlavor::Vision,
            _ => InputFlavor::TextOnly,
        }
    }

    fn element_prompt(&self) -> bool {
        matches!(self, Variant::Vetl | Variant::Lv)
    }

    /// Whether some query of this variant carries a screenshot.
    pub fn needs_vision(&self) -> bool {
        matches!(self, Variant::Vetl | Variant::V1 | Variant::Lv)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub start_url: String,
    pub action_budget: u64,
    pub variant: Variant,
    pub epsilon: f64,
    pub rng_seed: u64,
    /// Extra origins the agent may visit besides the start URL's.
    #[serde(default)]
    pub allowed_origins: Vec<String>,
    pub candidate_kinds: BTreeSet<ElementKind>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub save_screenshots: bool,
    /// Iterations without an executed action before the run gives up.
    pub max_idle_iterations: u32,
    pub stroke_width: f64,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(start_url: &str, variant: Variant) -> Self {
        RunConfig {
            start_url: start_url.to_string(),
            action_budget: 200,
            variant,
            epsilon: DEFAULT_EPSILON,
            rng_seed: 0,
            allowed_origins: Vec::new(),
            candidate_kinds: ElementKind::ALL.into_iter().collect(),
            output_dir: None,
            save_screenshots: true,
            max_idle_iterations: 50,
            stroke_width: 3.0,
            notes: BTreeMap::new(),
        }
    }
}

/// The model clients a run may use.
#[derive(Clone, Default)]
pub struct Models {
    /// Answers vision prompts (and text prompts when `text` is absent).
    pub vision: Option<Arc<ModelClient>>,
    pub text: Option<Arc<ModelClient>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    TypeText,
    Click,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: u64,
    pub action_kind: ActionKind,
    pub element_key: ElementKey,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub url_before: String,
    pub url_after: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    /// Interested elements and candidates at selection time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interested: Vec<ElementKey>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<ElementKey>,
    #[serde(default)]
    pub model_exchange_refs: Vec<usize>,
    /// Local context of the filled widget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_context: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub actions: u64,
    pub states: usize,
    pub discovered: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    NoProgress,
    DriverLost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub visited_states: BTreeSet<String>,
    pub discovered_actions: BTreeSet<ElementKey>,
    pub failures: Vec<FailureRecord>,
    pub curve: Vec<CurvePoint>,
    pub actions_executed: u64,
    pub model_queries: usize,
    pub wall_time_secs: f64,
    pub termination: Termination,
    pub variant: Variant,
}

impl SessionMetrics {
    fn new(variant: Variant) -> Self {
        SessionMetrics {
            visited_states: BTreeSet::new(),
            discovered_actions: BTreeSet::new(),
            failures: Vec::new(),
            curve: Vec::new(),
            actions_executed: 0,
            model_queries: 0,
            wall_time_secs: 0.0,
            termination: Termination::BudgetExhausted,
            variant,
        }
    }

    fn record_curve(&mut self) {
        let point = CurvePoint {
            actions: self.actions_executed,
            states: self.visited_states.len(),
            discovered: self.discovered_actions.len(),
        };
        if self.curve.last() != Some(&point) {
            self.curve.push(point);
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("browser lost: {0}")]
    DriverLost(String, Box<SessionMetrics>),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("run directory: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: SessionMetrics,
    pub trace: Vec<StepRecord>,
    pub exchanges: Vec<ModelExchange>,
}

/// Lowercases scheme and host, drops the fragment, keeps the query and
/// removes a trailing slash from non-root paths.
pub fn normalize_url(raw: &str) -> String {
    let Ok(mut url) = Url::parse(raw.trim()) else {
        return raw.trim().to_string();
    };
    url.set_fragment(None);
    let path = url.path().to_string();
    if path.len() > 1 && path.ends_with('/') {
        url.set_path(path.trim_end_matches('/'));
        if url.path().is_empty() {
            url.set_path("/");
        }
    }
    url.to_string()
}

fn origin_of(raw: &str) -> Option<String> {
    Url::parse(raw).ok().map(|u| u.origin().ascii_serialization())
}

struct RunWriter {
    dir: PathBuf,
    trace: BufWriter<File>,
    exchanges: BufWriter<File>,
}

impl RunWriter {
    fn create(dir: &Path, config: &RunConfig) -> std::io::Result<Self> {
        fs::create_dir_all(dir.join("screenshots"))?;
        fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(config).expect("config serializes"),
        )?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            trace: BufWriter::new(File::create(dir.join("trace.jsonl"))?),
            exchanges: BufWriter::new(File::create(dir.join("exchanges.jsonl"))?),
        })
    }

    fn step(&mut self, step: &StepRecord) -> std::io::Result<()> {
        writeln!(self.trace, "{}", serde_json::to_string(step).expect("step serializes"))
    }

    fn exchange(&mut self, exchange: &ModelExchange) -> std::io::Result<()> {
        writeln!(self.exchanges, "{}", serde_json::to_string(exchange).expect("exchange serializes"))
    }

    fn screenshot(&self, name: &str, png: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join("screenshots").join(name), png)
    }

    fn finish(&mut self, metrics: &SessionMetrics) -> std::io::Result<()> {
        self.trace.flush()?;
        self.exchanges.flush()?;
        fs::write(
            self.dir.join("metrics.json"),
            serde_json::to_string_pretty(metrics).expect("metrics serializes"),
        )
    }
}

#[derive(Default)]
struct PageVisit {
    url: String,
    generation: u64,
    interested: Vec<ElementKey>,
    attempted: BTreeSet<ElementKey>,
    scrolled: BTreeSet<ElementKey>,
}

/// One exploration session over a browser.
pub struct Explorer<'b, B: Browser + ?Sized> {
    browser: &'b mut B,
    config: RunConfig,
    models: Models,
    prompt_options: PromptOptions,
    annotate_options: AnnotateOptions,
    tables: BanditTables,
    metrics: SessionMetrics,
    trace: Vec<StepRecord>,
    exchanges: Vec<ModelExchange>,
    seen: BTreeSet<ElementKey>,
    visit: PageVisit,
    pending_click: Option<StepRecord>,
    writer: Option<RunWriter>,
    origins: BTreeSet<String>,
    started: Instant,
}

enum Flow {
    Continue,
    Acted,
}

fn driver_lost(e: &DriverError) -> bool {
    matches!(e, DriverError::SessionLost(_) | DriverError::ConnectionFailed(_))
}

impl<'b, B: Browser + ?Sized> Explorer<'b, B> {
    pub fn new(browser: &'b mut B, config: RunConfig, models: Models) -> Result<Self, RunError> {
        if config.action_budget == 0 {
            return Err(RunError::Config("action budget must be positive".into()));
        }
        let tables = BanditTables::new(
            if config.variant == Variant::Random { 1.0 } else { config.epsilon },
            config.rng_seed,
        )
        .map_err(|e| RunError::Config(e.to_string()))?;
        match config.variant {
            Variant::Random => {}
            v if v.needs_vision() => {
                let ok = models.vision.as_ref().is_some_and(|m| m.supports_vision());
                if !ok {
                    return Err(RunError::Config("variant requires vision backend".into()));
                }
            }
            _ => {
                if models.text.is_none() && models.vision.is_none() {
                    return Err(RunError::Config("variant requires a text backend".into()));
                }
            }
        }
        let mut origins: BTreeSet<String> = config.allowed_origins.iter().filter_map(|o| origin_of(o)).collect();
        origins.extend(origin_of(&config.start_url));
        if origins.is_empty() {
            return Err(RunError::Config(format!("start URL {:?} is not absolute", config.start_url)));
        }
        let writer = match &config.output_dir {
            Some(dir) => Some(RunWriter::create(dir, &config)?),
            None => None,
        };
        Ok(Explorer {
            browser,
            annotate_options: AnnotateOptions {
                stroke: config.stroke_width,
                ..Default::default()
            },
            metrics: SessionMetrics::new(config.variant),
            config,
            models,
            prompt_options: PromptOptions::default(),
            tables,
            trace: Vec::new(),
            exchanges: Vec::new(),
            seen: BTreeSet::new(),
            visit: PageVisit::default(),
            pending_click: None,
            writer,
            origins,
            started: Instant::now(),
        })
    }

    pub fn with_prompt_options(mut self, options: PromptOptions) -> Self {
        self.prompt_options = options;
        self
    }

    pub fn tables(&self) -> &BanditTables {
        &self.tables
    }

    /// Runs until the budget is spent.
    pub fn run(mut self) -> Result<RunResult, RunError> {
        let mut idle = 0u32;
        let outcome = loop {
            if self.metrics.actions_executed >= self.config.action_budget {
                break Ok(Termination::BudgetExhausted);
            }
            if idle >= self.config.max_idle_iterations {
                log::warn!("no progress after {idle} iterations, stopping");
                break Ok(Termination::NoProgress);
            }
            match self.iterate() {
                Ok(Flow::Acted) => idle = 0,
                Ok(Flow::Continue) => idle += 1,
                Err(RunError::DriverLost(m, _)) => break Err(m),
                Err(other) => {
                    self.finish(Termination::DriverLost)?;
                    return Err(other);
                }
            }
        };
        match outcome {
            Ok(termination) => {
                if self.pending_click.is_some() {
                    if let Err(RunError::DriverLost(m, _)) = self.observe() {
                        log::warn!("final snapshot failed: {m}");
                    }
                }
                self.finish(termination)?;
                Ok(RunResult {
                    metrics: self.metrics,
                    trace: self.trace,
                    exchanges: self.exchanges,
                })
            }
            Err(message) => {
                self.finish(Termination::DriverLost)?;
                Err(RunError::DriverLost(message, Box::new(self.metrics)))
            }
        }
    }

    fn finish(&mut self, termination: Termination) -> Result<(), RunError> {
        if let Some(step) = self.pending_click.take() {
            self.commit(step)?;
        }
        self.metrics.termination = termination;
        self.metrics.wall_time_secs = self.started.elapsed().as_secs_f64();
        self.metrics.model_queries = self.exchanges.len();
        self.metrics.record_curve();
        if let Some(w) = self.writer.as_mut() {
            w.finish(&self.metrics)?;
        }
        Ok(())
    }

    fn lost(&self, e: DriverError) -> RunError {
        RunError::DriverLost(e.to_string(), Box::new(self.metrics.clone()))
    }

    fn commit(&mut self, step: StepRecord) -> Result<(), RunError> {
        if let Some(w) = self.writer.as_mut() {
            w.step(&step)?;
        }
        self.trace.push(step);
        Ok(())
    }

    fn in_scope(&self, url: &str) -> bool {
        origin_of(url).is_some_and(|o| self.origins.contains(&o))
    }

    /// Snapshot plus bookkeeping: resolves a pending click reward, merges the
    /// page into the metrics and drains console failures.
    fn observe(&mut self) -> Result<(PageSnapshot, Vec<InteractiveElement>, Vec<InputWidget>), RunError> {
        let snapshot = match self.browser.snapshot() {
            Ok(s) => s,
            Err(e) => return Err(self.lost(e)),
        };
        let (candidates, widgets) = match DomDocument::parse(&snapshot) {
            Ok(doc) => (
                doc.candidate_elements_of(&self.config.candidate_kinds),
                doc.detect_input_widgets(),
            ),
            Err(e) => {
                log::warn!("unparseable page {}: {e}", snapshot.url);
                (Vec::new(), Vec::new())
            }
        };
        let page_keys: BTreeSet<ElementKey> = candidates
            .iter()
            .map(|c| c.key.clone())
            .chain(widgets.iter().map(|w| w.key.clone()))
            .collect();
        if let Some(mut step) = self.pending_click.take() {
            let reward = curiosity_reward(&self.seen, &page_keys);
            self.tables.update(&step.element_key, reward);
            step.reward = Some(reward);
            step.q = Some(self.tables.q(&step.element_key));
            step.count = Some(self.tables.count(&step.element_key));
            step.url_after = snapshot.url.clone();
            self.commit(step)?;
        }
        self.seen.extend(page_keys.iter().cloned());
        self.metrics.visited_states.insert(normalize_url(&snapshot.url));
        self.metrics.discovered_actions.extend(page_keys);
        match self.browser.console_failures() {
            Ok(f) => self.metrics.failures.extend(f),
            Err(e) if driver_lost(&e) => return Err(self.lost(e)),
            Err(e) => log::warn!("console log unavailable: {e}"),
        }
        self.metrics.record_curve();
        let url = normalize_url(&snapshot.url);
        if url != self.visit.url || snapshot.generation != self.visit.generation {
            self.visit = PageVisit {
                url,
                generation: snapshot.generation,
                ..Default::default()
            };
        }
        Ok((snapshot, candidates, widgets))
    }

    fn recover(&mut self) -> Result<(), RunError> {
        match self.browser.navigate(&self.config.start_url) {
            Ok(()) => Ok(()),
            Err(e) if driver_lost(&e) => Err(self.lost(e)),
            Err(e) => {
                log::warn!("recovery navigation failed: {e}");
                Ok(())
            }
        }
    }

    fn iterate(&mut self) -> Result<Flow, RunError> {
        let (snapshot, candidates, widgets) = self.observe()?;
        if !self.in_scope(&snapshot.url) {
            log::info!("left the site at {}, returning to start", snapshot.url);
            self.recover()?;
            return Ok(Flow::Continue);
        }
        if self.config.variant != Variant::Random {
            let next = widgets
                .iter()
                .find(|w| !w.filled && !self.visit.attempted.contains(&w.key));
            if let Some(widget) = next {
                let widget = widget.clone();
                return self.fill(&snapshot, &widget);
            }
        }
        if candidates.is_empty() {
            self.recover()?;
            return Ok(Flow::Continue);
        }
        self.click(&snapshot, &candidates)
    }

    fn query(&mut self, client: &Arc<ModelClient>, bundle: &PromptBundle) -> Result<(String, usize), RunError> {
        let step = self.metrics.actions_executed as usize;
        let result = client.query(bundle, step);
        let mut exchange = client
            .last_exchange()
            .expect("the client logs every query");
        exchange.exchange_index = self.exchanges.len();
        if let Some(w) = self.writer.as_mut() {
            w.exchange(&exchange)?;
        }
        let index = exchange.exchange_index;
        self.exchanges.push(exchange);
        Ok((result?.0, index))
    }

    fn screenshot(&self, kind: &str, png: &[u8]) -> Result<(), RunError> {
        if let (Some(w), true) = (&self.writer, self.config.save_screenshots) {
            w.screenshot(&format!("{:04}_{kind}.png", self.metrics.actions_executed), png)?;
        }
        Ok(())
    }

    fn text_client(&self) -> Arc<ModelClient> {
        match self.config.variant.input_flavor() {
            InputFlavor::Vision => self.models.vision.clone(),
            InputFlavor::TextOnly => self.models.text.clone().or_else(|| self.models.vision.clone()),
        }
        .expect("backends checked at construction")
    }

    fn fill(&mut self, snapshot: &PageSnapshot, widget: &InputWidget) -> Result<Flow, RunError> {
        if !snapshot.in_viewport(&widget.handle.rect) {
            if self.visit.scrolled.insert(widget.key.clone()) {
                match self.browser.scroll_into_view(&widget.handle) {
                    Ok(()) => return Ok(Flow::Continue),
                    Err(e) if driver_lost(&e) => return Err(self.lost(e)),
                    Err(e) => log::debug!("scroll failed: {e}"),
                }
            }
            if self.config.variant.input_flavor() == InputFlavor::Vision {
                self.visit.attempted.insert(widget.key.clone());
                return Ok(Flow::Continue);
            }
        }
        self.visit.attempted.insert(widget.key.clone());
        let doc = DomDocument::parse(snapshot).map_err(|e| RunError::Config(e.to_string()))?;
        let gc = doc.global_context();
        let lc = widget.local_context.clone();
        let flavor = self.config.variant.input_flavor();
        let mut bundle = build_input_prompt(&gc, &lc, widget, flavor, &self.prompt_options);
        if flavor == InputFlavor::Vision {
            let rect = snapshot.to_viewport(&widget.handle.rect);
            let annotated = annotate_input(
                &snapshot.screenshot,
                &rect,
                snapshot.device_pixel_ratio,
                &self.annotate_options,
            )
            .and_then(|a| a.to_png());
            match annotated {
                Ok(png) => {
                    self.screenshot("input", &png)?;
                    bundle = bundle.with_image(png);
                }
                Err(e) => {
                    log::debug!("cannot annotate {}: {e}", widget.key);
                    return Ok(Flow::Continue);
                }
            }
        }
        let client = self.text_client();
        let (raw, exchange) = self.query(&client, &bundle)?;
        let answer = parse_text_answer(&raw);
        let text = answer.text().unwrap_or_default().to_string();
        let url_before = snapshot.url.clone();
        match self.browser.type_text(&widget.handle, &text) {
            Ok(()) => {}
            Err(e) if driver_lost(&e) => return Err(self.lost(e)),
            Err(e) => {
                log::debug!("typing into {} failed: {e}", widget.key);
                return Ok(Flow::Continue);
            }
        }
        let step_index = self.metrics.actions_executed;
        self.metrics.actions_executed += 1;
        let url_after = self.browser.current_url().map_err(|e| self.lost(e))?;
        self.commit(StepRecord {
            step_index,
            action_kind: ActionKind::TypeText,
            element_key: widget.key.clone(),
            label: widget.attrs.get("name").cloned().unwrap_or_default(),
            text: Some(text.clone()),
            url_before,
            url_after,
            reward: None,
            branch: None,
            q: None,
            count: None,
            interested: Vec::new(),
            candidates: Vec::new(),
            model_exchange_refs: vec![exchange],
            local_context: Some(lc.clone()),
        })?;
        if self.metrics.actions_executed >= self.config.action_budget {
            return Ok(Flow::Acted);
        }
        self.choose_interested(widget, &gc, &lc, &text)?;
        Ok(Flow::Acted)
    }

    /// Records the element that should follow the filled `widget`.
    fn choose_interested(&mut self, widget: &InputWidget, gc: &str, lc: &str, text: &str) -> Result<(), RunError> {
        let (snapshot, candidates, widgets) = self.observe()?;
        if normalize_url(&snapshot.url) != self.visit.url || candidates.is_empty() {
            return Ok(());
        }
        let Some(current) = widgets.iter().find(|w| w.key == widget.key).cloned() else {
            return Ok(());
        };
        let doc = DomDocument::parse(&snapshot).map_err(|e| RunError::Config(e.to_string()))?;
        let chosen = if self.config.variant.element_prompt() {
            let buttons: Vec<&InteractiveElement> =
                candidates.iter().filter(|c| snapshot.in_viewport(&c.handle.rect)).collect();
            if buttons.is_empty() {
                return Ok(());
            }
            let rects: Vec<(ElementKey, crate::geometry::Rect)> = buttons
                .iter()
                .map(|b| (b.key.clone(), snapshot.to_viewport(&b.handle.rect)))
                .collect();
            let annotated = annotate_elements(
                &snapshot.screenshot,
                &snapshot.to_viewport(&current.handle.rect),
                &rects,
                snapshot.device_pixel_ratio,
                &self.annotate_options,
            );
            let annotated = match annotated {
                Ok(a) => a,
                Err(e) => {
                    log::debug!("cannot annotate buttons: {e}");
                    return Ok(());
                }
            };
            let png = annotated.to_png().map_err(|e| RunError::Config(e.to_string()))?;
            self.screenshot("element", &png)?;
            let bundle = build_element_prompt(gc, lc, text, buttons.len(), &self.prompt_options)
                .with_image(png)
                .with_numbering(annotated.numbering.clone());
            let client = self.models.vision.clone().expect("vision backend checked at construction");
            let (raw, _) = self.query(&client, &bundle)?;
            let valid: BTreeSet<u32> = annotated.numbering.keys().copied().collect();
            let answer = parse_button_answer(&raw, &valid);
            match (answer.kind, answer.number_value) {
                (AnswerKind::ButtonNumber, Some(n)) => annotated.numbering.get(&n).cloned(),
                _ => None,
            }
        } else {
            doc.nearest_button(&current, &candidates).ok().map(|c| c.key)
        };
        if let Some(key) = chosen {
            if !self.visit.interested.contains(&key) {
                self.visit.interested.push(key);
            }
        }
        Ok(())
    }

    fn click(&mut self, snapshot: &PageSnapshot, candidates: &[InteractiveElement]) -> Result<Flow, RunError> {
        let keys: Vec<ElementKey> = candidates.iter().map(|c| c.key.clone()).collect();
        let present: BTreeSet<&ElementKey> = keys.iter().collect();
        let interested: Vec<ElementKey> = self
            .visit
            .interested
            .iter()
            .filter(|k| present.contains(k))
            .cloned()
            .collect();
        let ctx = SelectionContext::new(interested.clone(), keys.clone())
            .map_err(|e| RunError::Config(e.to_string()))?;
        let (target, branch) = self
            .tables
            .select_target(&ctx)
            .map_err(|e| RunError::Config(e.to_string()))?;
        let element = candidates
            .iter()
            .find(|c| c.key == target)
            .expect("selected key is a candidate");
        match self.browser.click(&element.handle) {
            Ok(()) => {}
            Err(e) if driver_lost(&e) => return Err(self.lost(e)),
            Err(e) => {
                log::debug!("click on {} failed: {e}", element.key);
                return Ok(Flow::Continue);
            }
        }
        let step_index = self.metrics.actions_executed;
        self.metrics.actions_executed += 1;
        self.pending_click = Some(StepRecord {
            step_index,
            action_kind: ActionKind::Click,
            element_key: target,
            label: element.label.clone(),
            text: None,
            url_before: snapshot.url.clone(),
            url_after: snapshot.url.clone(),
            reward: None,
            branch: Some(branch),
            q: None,
            count: None,
            interested,
            candidates: keys,
            model_exchange_refs: Vec::new(),
            local_context: None,
        });
        Ok(Flow::Acted)
    }
}

/// Convenience wrapper around [`Explorer`].
pub fn run<B: Browser + ?Sized>(browser: &mut B, config: RunConfig, models: Models) -> Result<RunResult, RunError> {
    Explorer::new(browser, config, models)?.run()
}
