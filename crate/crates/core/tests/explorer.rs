mod common;

use std::sync::Arc;

use vetl_core::driver::{Browser, BrowserSession, DriverError, ElementHandle, FailureRecord, PageSnapshot};
use vetl_core::explorer::{normalize_url, run, ActionKind, Models, RunConfig, RunError, Termination, Variant};
use vetl_core::geometry::Viewport;
use vetl_core::model::{ModelClient, ScriptedBackend};
use vetl_core::prompt::PromptFlavor;
use vetl_core::report::{load_run, verify_run};
use vetl_core::sim::{FixtureSite, SimBrowser};

use common::{ideal_client, site};

fn flow() -> SimBrowser {
    SimBrowser::fixture("flow", Viewport::default()).unwrap()
}

fn start() -> String {
    format!("{}/", FixtureSite::builtin("flow").unwrap().origin())
}

fn vision(text: &str) -> Models {
    Models {
        vision: Some(ideal_client(text)),
        text: None,
    }
}

#[test]
fn search_then_click_with_greedy_bandit() {
    let mut browser = flow();
    let mut config = RunConfig::new(&start(), Variant::Vetl);
    config.action_budget = 2;
    config.epsilon = 0.0;
    let result = run(&mut browser, config, vision("cats")).unwrap();
    assert_eq!(result.trace.len(), 2);
    assert_eq!(result.trace[0].action_kind, ActionKind::TypeText);
    assert_eq!(result.trace[0].text.as_deref(), Some("cats"));
    assert_eq!(result.trace[1].action_kind, ActionKind::Click);
    assert_eq!(result.trace[1].label, "Search");
    assert!(result.trace[1].url_after.ends_with("/results?q=cats"));
    assert_eq!(result.metrics.termination, Termination::BudgetExhausted);
    let flavors: Vec<PromptFlavor> = result.exchanges.iter().map(|e| e.flavor).collect();
    assert_eq!(flavors, [PromptFlavor::InputPrompt, PromptFlavor::ElementPrompt]);
}

#[test]
fn run_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut browser = flow();
    let mut config = RunConfig::new(&start(), Variant::Vetl);
    config.action_budget = 30;
    config.output_dir = Some(dir.path().to_path_buf());
    let result = run(&mut browser, config, vision("cats")).unwrap();
    assert_eq!(result.metrics.actions_executed, 30);
    let loaded = load_run(dir.path()).unwrap();
    assert_eq!(loaded.trace, result.trace);
    assert_eq!(loaded.exchanges.len(), result.exchanges.len());
    let v = verify_run(&loaded);
    assert!(v.ok(), "{:?}", v.problems());
    let shots: Vec<String> = std::fs::read_dir(dir.path().join("screenshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(shots.iter().any(|s| s.ends_with("_input.png")));
    assert!(shots.iter().any(|s| s.ends_with("_element.png")));
}

#[test]
fn dom_distance_variants_make_no_element_queries() {
    for variant in [Variant::V1, Variant::L] {
        let mut browser = flow();
        let mut config = RunConfig::new(&start(), variant);
        config.action_budget = 2;
        config.epsilon = 0.0;
        let models = if variant == Variant::L {
            Models {
                vision: None,
                text: Some(Arc::new(ModelClient::new(Arc::new(
                    ScriptedBackend::new(vec![], "Generated Input Text: dogs").text_only(),
                )))),
            }
        } else {
            vision("dogs")
        };
        let result = run(&mut browser, config, models).unwrap();
        assert_eq!(result.trace[1].label, "Search", "{variant:?}");
        assert!(result.exchanges.iter().all(|e| e.flavor != PromptFlavor::ElementPrompt));
        let want = if variant == Variant::L { PromptFlavor::LlmInputPrompt } else { PromptFlavor::InputPrompt };
        assert_eq!(result.exchanges[0].flavor, want);
    }
}

#[test]
fn lv_uses_the_text_backend_for_inputs() {
    let text = Arc::new(ModelClient::new(Arc::new(
        ScriptedBackend::new(vec![], "Generated Input Text: owls").text_only(),
    )));
    let vision_client = ideal_client("unused");
    let models = Models {
        vision: Some(Arc::clone(&vision_client)),
        text: Some(Arc::clone(&text)),
    };
    let mut config = RunConfig::new(&start(), Variant::Lv);
    config.action_budget = 2;
    config.epsilon = 0.0;
    let result = run(&mut flow(), config, models).unwrap();
    assert_eq!(result.trace[0].text.as_deref(), Some("owls"));
    assert_eq!(text.exchange_count(), 1);
    assert_eq!(vision_client.exchange_count(), 1);
    assert_eq!(vision_client.exchanges()[0].flavor, PromptFlavor::ElementPrompt);
}

#[test]
fn random_baseline_never_types() {
    let mut config = RunConfig::new(&start(), Variant::Random);
    config.action_budget = 40;
    let result = run(&mut flow(), config, Models::default()).unwrap();
    assert_eq!(result.trace.len(), 40);
    assert!(result.trace.iter().all(|s| s.action_kind == ActionKind::Click));
    assert!(result.exchanges.is_empty());
}

#[test]
fn console_failures_are_collected() {
    let mut config = RunConfig::new(&start(), Variant::Random);
    config.action_budget = 150;
    config.rng_seed = 1;
    let result = run(&mut flow(), config, Models::default()).unwrap();
    let sends = result.trace.iter().filter(|s| s.label == "Send report").count();
    assert!(sends > 0, "seed never pressed Send report");
    assert_eq!(result.metrics.failures.len(), sends);
}

#[test]
fn off_origin_pages_are_left_without_spending_budget() {
    let s = site(&[
        ("index.html", "<html><body><a href=\"http://elsewhere.test/\">Away</a><a href=\"/b\">B</a></body></html>"),
        ("b.html", "<html><body><a href=\"/\">Home</a></body></html>"),
    ]);
    let start = format!("{}/", s.origin());
    let mut b = SimBrowser::connect(s, &start, Viewport::default()).unwrap();
    let mut config = RunConfig::new(&start, Variant::Random);
    config.action_budget = 30;
    let result = run(&mut b, config, Models::default()).unwrap();
    assert_eq!(result.trace.len(), 30);
    let away: Vec<usize> = (0..30).filter(|&i| result.trace[i].label == "Away").collect();
    assert!(!away.is_empty());
    for i in away {
        assert!(result.trace[i].url_after.starts_with("http://elsewhere.test"));
        if i + 1 < 30 {
            assert_eq!(result.trace[i + 1].url_before, start);
        }
    }
}

#[test]
fn dead_ends_return_to_the_start() {
    let s = site(&[
        ("index.html", "<html><body><a href=\"/dead\">Dead end</a></body></html>"),
        ("dead.html", "<html><body><p>nothing here</p></body></html>"),
    ]);
    let start = format!("{}/", s.origin());
    let mut b = SimBrowser::connect(s, &start, Viewport::default()).unwrap();
    let mut config = RunConfig::new(&start, Variant::Random);
    config.action_budget = 5;
    let result = run(&mut b, config, Models::default()).unwrap();
    assert_eq!(result.trace.len(), 5);
    assert!(result.trace.iter().all(|s| s.url_before == start));
    assert_eq!(result.metrics.visited_states.len(), 2);
}

#[test]
fn pages_without_anything_to_do_stop_the_run() {
    let s = site(&[("index.html", "<html><body><p>static</p></body></html>")]);
    let start = format!("{}/", s.origin());
    let mut b = SimBrowser::connect(s, &start, Viewport::default()).unwrap();
    let mut config = RunConfig::new(&start, Variant::Random);
    config.max_idle_iterations = 5;
    let result = run(&mut b, config, Models::default()).unwrap();
    assert_eq!(result.metrics.termination, Termination::NoProgress);
    assert!(result.trace.is_empty());
}

/// Fails every command after `budget` of them with a lost session.
struct Flaky {
    inner: SimBrowser,
    budget: usize,
}

impl Flaky {
    fn spend(&mut self) -> Result<(), DriverError> {
        if self.budget == 0 {
            return Err(DriverError::SessionLost("browser crashed".into()));
        }
        self.budget -= 1;
        Ok(())
    }
}

impl Browser for Flaky {
    fn session(&self) -> &BrowserSession {
        self.inner.session()
    }
    fn navigate(&mut self, url: &str) -> Result<(), DriverError> {
        self.spend()?;
        self.inner.navigate(url)
    }
    fn current_url(&mut self) -> Result<String, DriverError> {
        self.spend()?;
        self.inner.current_url()
    }
    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError> {
        self.spend()?;
        self.inner.snapshot()
    }
    fn type_text(&mut self, e: &ElementHandle, text: &str) -> Result<(), DriverError> {
        self.spend()?;
        self.inner.type_text(e, text)
    }
    fn click(&mut self, e: &ElementHandle) -> Result<(), DriverError> {
        self.spend()?;
        self.inner.click(e)
    }
    fn read_value(&mut self, e: &ElementHandle) -> Result<String, DriverError> {
        self.spend()?;
        self.inner.read_value(e)
    }
    fn scroll_into_view(&mut self, e: &ElementHandle) -> Result<(), DriverError> {
        self.spend()?;
        self.inner.scroll_into_view(e)
    }
    fn console_failures(&mut self) -> Result<Vec<FailureRecord>, DriverError> {
        self.spend()?;
        self.inner.console_failures()
    }
    fn action_count(&self) -> u64 {
        self.inner.action_count()
    }
    fn close(&mut self) -> Result<(), DriverError> {
        self.inner.close()
    }
}

#[test]
fn lost_browser_flushes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = Flaky { inner: flow(), budget: 12 };
    let mut config = RunConfig::new(&start(), Variant::Random);
    config.output_dir = Some(dir.path().to_path_buf());
    let err = run(&mut b, config, Models::default()).unwrap_err();
    let RunError::DriverLost(message, metrics) = err else { panic!("expected DriverLost") };
    assert!(message.contains("crashed"));
    assert_eq!(metrics.termination, Termination::DriverLost);
    assert!(metrics.actions_executed > 0);
    let loaded = load_run(dir.path()).unwrap();
    assert_eq!(loaded.metrics.actions_executed, metrics.actions_executed);
    assert_eq!(loaded.trace.len() as u64, metrics.actions_executed);
}

#[test]
fn configuration_errors() {
    let text = Arc::new(ModelClient::new(Arc::new(ScriptedBackend::new(vec![], "x").text_only())));
    let err = run(
        &mut flow(),
        RunConfig::new(&start(), Variant::Vetl),
        Models {
            vision: Some(text),
            text: None,
        },
    )
    .err()
    .unwrap();
    assert!(err.to_string().contains("variant requires vision backend"));
    let err = run(&mut flow(), RunConfig::new(&start(), Variant::L), Models::default()).err().unwrap();
    assert!(matches!(err, RunError::Config(_)));
    let mut config = RunConfig::new(&start(), Variant::Random);
    config.epsilon = 2.0;
    config.variant = Variant::Vetl;
    assert!(matches!(run(&mut flow(), config, vision("x")), Err(RunError::Config(_))));
}

#[test]
fn url_normalization() {
    assert_eq!(normalize_url("HTTP://Flow.Fixture.Test/a/b/?x=1#frag"), "http://flow.fixture.test/a/b?x=1");
    assert_eq!(normalize_url("http://h.test"), "http://h.test/");
}
