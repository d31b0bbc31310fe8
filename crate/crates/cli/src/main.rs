use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use vetl_core::driver::{Browser, WebDriverBrowser, WebDriverOptions};
use vetl_core::explorer::{self, Models, RunConfig, RunError, RunResult, Variant};
use vetl_core::geometry::Viewport;
use vetl_core::model::{
    HttpChatBackend, ModelBackend, ModelBackendConfig, ModelClient, RecordReplayBackend, ReplayMode,
    ScriptedBackend,
};
use vetl_core::report::{curve_csv, find_runs, load_run, summarize, verify_run};
use vetl_core::sim::{FixtureServer, FixtureSite, SimBrowser, BUILTIN_FIXTURES};

#[derive(Parser)]
#[command(name = "vetl", version, about = "Automated web GUI exploration driven by a vision-language model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore a site and write a run directory.
    Run(RunArgs),
    /// Re-run a recorded session from a replay store and compare traces.
    Replay(ReplayArgs),
    /// Summarize and verify run directories.
    Report(ReportArgs),
    /// Work with the bundled fixture sites.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Subcommand)]
enum FixturesCommand {
    List,
    /// Serve a fixture over HTTP until interrupted.
    Serve {
        name: String,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Args, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunArgs {
    /// TOML file with the same keys as the flags (underscored); flags win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    url: Option<String>,
    /// Explore a bundled fixture instead of a URL.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
    /// vetl, v1, lv, l or random.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    model_endpoint: Option<String>,
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    model_vision: Option<bool>,
    #[arg(long)]
    text_model_endpoint: Option<String>,
    #[arg(long)]
    text_model_name: Option<String>,
    /// Scripted model answers (TOML), used instead of an endpoint.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Record every model exchange into this NDJSON store.
    #[arg(long, conflicts_with = "replay")]
    record: Option<PathBuf>,
    /// Answer model queries from this NDJSON store.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    webdriver: Option<String>,
    #[arg(long)]
    browser_binary: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    viewport_width: Option<u32>,
    #[arg(long)]
    viewport_height: Option<u32>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Run directory whose config.json and trace.jsonl are reproduced.
    run_dir: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories, or directories containing runs.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Write the per-run table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write each run's coverage curve to curve.csv inside the run.
    #[arg(long)]
    curves: bool,
}

/// Errors the user can fix by changing the invocation.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

macro_rules! merge {
    ($flags:ident, $file:ident, $($field:ident),*) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.take(); } )*
    };
}

impl RunArgs {
    fn resolve(mut self) -> Result<Self> {
        if let Some(path) = self.config.clone() {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut file: RunArgs =
                toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            merge!(
                self, file, url, fixture, budget, variant, epsilon, seed, model_endpoint, model_name,
                api_key_env, model_vision, text_model_endpoint, text_model_name, script, record, replay,
                webdriver, browser_binary, out, viewport_width, viewport_height
            );
        }
        Ok(self)
    }

    fn viewport(&self) -> Result<Viewport> {
        let d = Viewport::default();
        Viewport::new(
            self.viewport_width.unwrap_or(d.width),
            self.viewport_height.unwrap_or(d.height),
        )
        .ok_or_else(|| usage("viewport must be non-empty"))
    }

    fn start_url(&self) -> Result<String> {
        match (&self.url, &self.fixture) {
            (Some(url), _) => Ok(url.clone()),
            (None, Some(name)) => Ok(format!("{}/", fixture(name)?.origin())),
            (None, None) => Err(usage("either --url or --fixture is required")),
        }
    }

    fn run_config(&self) -> Result<RunConfig> {
        let variant = match &self.variant {
            Some(v) => Variant::parse(v).ok_or_else(|| usage(format!("unknown variant {v:?}")))?,
            None => Variant::Vetl,
        };
        let mut config = RunConfig::new(&self.start_url()?, variant);
        if let Some(b) = self.budget {
            if b == 0 {
                return Err(usage("--budget must be positive"));
            }
            config.action_budget = b;
        }
        if let Some(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                return Err(usage("--epsilon must be within [0, 1]"));
            }
            config.epsilon = e;
        }
        config.rng_seed = self.seed.unwrap_or(0);
        config.output_dir = Some(self.out.clone().unwrap_or_else(|| {
            PathBuf::from(format!("runs/{}-{}", variant.as_str(), config.rng_seed))
        }));
        let mut notes = BTreeMap::new();
        let mut note = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                notes.insert(k.to_string(), v);
            }
        };
        note("fixture", self.fixture.clone());
        note("model_endpoint", self.model_endpoint.clone());
        note("model_name", self.model_name.clone());
        note("model_vision", self.model_vision.map(|v| v.to_string()));
        note("text_model_endpoint", self.text_model_endpoint.clone());
        note("text_model_name", self.text_model_name.clone());
        note("script", self.script.as_ref().map(|p| p.display().to_string()));
        note("record", self.record.as_ref().map(|p| p.display().to_string()));
        note("replay", self.replay.as_ref().map(|p| p.display().to_string()));
        note("webdriver", self.webdriver.clone());
        note("browser_binary", self.browser_binary.clone());
        note("viewport", {
            let v = self.viewport()?;
            Some(format!("{}x{}", v.width, v.height))
        });
        config.notes = notes;
        Ok(config)
    }

    fn backend(&self, endpoint: Option<&String>, name: Option<&String>, vision: bool) -> Result<Option<Arc<dyn ModelBackend>>> {
        let live: Option<Arc<dyn ModelBackend>> = if let Some(path) = &self.script {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut backend = ScriptedBackend::from_toml(&text).map_err(|e| usage(e.to_string()))?;
            if !vision {
                backend = backend.text_only();
            }
            Some(Arc::new(backend))
        } else if let Some(endpoint) = endpoint {
            let config = ModelBackendConfig {
                endpoint: endpoint.clone(),
                model_name: name.cloned().unwrap_or_default(),
                api_key_env: self.api_key_env.clone(),
                supports_vision: vision,
                ..Default::default()
            };
            Some(Arc::new(HttpChatBackend::new(config).map_err(|e| usage(e.to_string()))?))
        } else {
            None
        };
        if let Some(store) = &self.replay {
            let backend = RecordReplayBackend::open(ReplayMode::Replay, store).map_err(|e| usage(e.to_string()))?;
            return Ok(Some(Arc::new(backend)));
        }
        match (live, &self.record) {
            (Some(inner), Some(store)) => Ok(Some(Arc::new(
                RecordReplayBackend::open(ReplayMode::Record(inner), store).map_err(|e| usage(e.to_string()))?,
            ))),
            (live, _) => Ok(live),
        }
    }

    fn models(&self) -> Result<Models> {
        let vision = self.model_vision.unwrap_or(true);
        let main = self.backend(self.model_endpoint.as_ref(), self.model_name.as_ref(), vision)?;
        let text = match &self.text_model_endpoint {
            Some(ep) => self.backend(Some(ep), self.text_model_name.as_ref(), false)?,
            None => None,
        };
        Ok(Models {
            vision: main.map(|b| Arc::new(ModelClient::new(b))),
            text: text.map(|b| Arc::new(ModelClient::new(b))),
        })
    }

    fn browser(&self, start_url: &str) -> Result<Box<dyn Browser>> {
        let viewport = self.viewport()?;
        if let Some(endpoint) = &self.webdriver {
            let options = WebDriverOptions {
                browser_binary: self.browser_binary.clone(),
                ..Default::default()
            };
            return Ok(Box::new(WebDriverBrowser::connect(endpoint, start_url, viewport, options)?));
        }
        match &self.fixture {
            Some(name) => Ok(Box::new(SimBrowser::connect(fixture(name)?, start_url, viewport)?)),
            None => Err(usage("--webdriver is required unless --fixture is given")),
        }
    }
}

fn fixture(name: &str) -> Result<FixtureSite> {
    FixtureSite::builtin(name).ok_or_else(|| {
        usage(format!("unknown fixture {name:?} (available: {})", BUILTIN_FIXTURES.join(", ")))
    })
}

fn execute(args: &RunArgs) -> Result<RunResult> {
    let config = args.run_config()?;
    let models = args.models()?;
    if config.variant != Variant::Random && models.vision.is_none() && models.text.is_none() {
        return Err(usage("a model backend is required (--model-endpoint, --script or --replay)"));
    }
    if config.variant.needs_vision() && !models.vision.as_ref().is_some_and(|m| m.supports_vision()) {
        return Err(usage("variant requires vision backend"));
    }
    let mut browser = args.browser(&config.start_url)?;
    let result = explorer::run(browser.as_mut(), config, models);
    if let Err(e) = browser.close() {
        log::warn!("closing the browser: {e}");
    }
    match result {
        Ok(r) => Ok(r),
        Err(RunError::Config(m)) => Err(usage(m)),
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let args = args.resolve()?;
    let result = execute(&args)?;
    let m = &result.metrics;
    println!(
        "{} actions, {} states, {} discovered actions, {} failures",
        m.actions_executed,
        m.visited_states.len(),
        m.discovered_actions.len(),
        m.failures.len()
    );
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let original = load_run(&args.run_dir)?;
    let config = &original.config;
    let note = |k: &str| config.notes.get(k).cloned();
    let (width, height) = note("viewport")
        .and_then(|v| v.split_once('x').map(|(w, h)| (w.parse().ok(), h.parse().ok())))
        .unwrap_or((None, None));
    let run = RunArgs {
        url: Some(config.start_url.clone()),
        fixture: note("fixture"),
        budget: Some(config.action_budget),
        variant: Some(config.variant.as_str().to_string()),
        epsilon: Some(config.epsilon),
        seed: Some(config.rng_seed),
        model_vision: note("model_vision").and_then(|v| v.parse().ok()),
        replay: Some(args.store.clone()),
        webdriver: note("webdriver"),
        browser_binary: note("browser_binary"),
        out: Some(args.out.clone().unwrap_or_else(|| args.run_dir.with_extension("replay"))),
        viewport_width: width,
        viewport_height: height,
        ..Default::default()
    };
    let result = execute(&run)?;
    let ours: Vec<String> = result.trace.iter().map(|s| serde_json::to_string(s).unwrap()).collect();
    let theirs: Vec<String> = original.trace.iter().map(|s| serde_json::to_string(s).unwrap()).collect();
    if ours == theirs {
        println!("replay matches: {} steps", ours.len());
        return Ok(());
    }
    let at = ours.iter().zip(&theirs).position(|(a, b)| a != b).unwrap_or(ours.len().min(theirs.len()));
    bail!("replay diverges at step {at} ({} vs {} steps)", ours.len(), theirs.len())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut runs = Vec::new();
    for dir in &args.dirs {
        for run in find_runs(dir)? {
            runs.push(load_run(&run)?);
        }
    }
    let mut broken = 0;
    for run in &runs {
        let problems = verify_run(run).problems();
        for p in &problems {
            eprintln!("{}: {p}", run.dir.display());
        }
        broken += usize::from(!problems.is_empty());
        if args.curves {
            fs::write(run.dir.join("curve.csv"), curve_csv(&run.metrics))?;
        }
    }
    let summary = summarize(&runs);
    print!("{}", summary.to_text());
    if let Some(path) = &args.csv {
        fs::write(path, summary.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    if broken > 0 {
        bail!("{broken} run(s) failed verification");
    }
    Ok(())
}

fn cmd_fixtures(command: FixturesCommand) -> Result<()> {
    match command {
        FixturesCommand::List => {
            for name in BUILTIN_FIXTURES {
                let pages = fixture(name)?.manifest().map(|m| m.pages.len()).unwrap_or(0);
                println!("{name}\t{pages} pages");
            }
            Ok(())
        }
        FixturesCommand::Serve { name, addr } => {
            let server = FixtureServer::start(fixture(&name)?, &addr)?;
            println!("serving {name} at {}", server.url());
            server.join();
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Report(args) => cmd_report(args),
        Command::Fixtures { command } => cmd_fixtures(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
