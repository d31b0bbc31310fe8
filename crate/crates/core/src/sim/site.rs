use std::collections::BTreeMap;

use serde::Deserialize;

macro_rules! fixture_files {
    ($dir:literal: $($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../../fixtures/", $dir, "/", $path)))),*]
    };
}

const SPLITTY: &[(&str, &str)] = fixture_files!("splitty":
    "index.html",
    "about.html",
    "event/new.html",
    "event/created.html",
    "event/expense.html",
    "event/expense-saved.html",
    "event/share.html",
    "fixture.js",
    "manifest.json",
);

const FORMZOO: &[(&str, &str)] = fixture_files!("formzoo":
    "index.html",
    "accepted.html",
    "text.html",
    "password.html",
    "email.html",
    "number.html",
    "search.html",
    "tel.html",
    "url.html",
    "textarea.html",
    "fixture.js",
    "manifest.json",
);

const FLOW: &[(&str, &str)] = fixture_files!("flow":
    "index.html",
    "about.html",
    "help.html",
    "results.html",
    "detail.html",
    "review/thanks.html",
    "report.html",
    "report/sent.html",
    "fixture.js",
    "manifest.json",
);

/// Names of the fixture sites compiled into the crate.
pub const BUILTIN_FIXTURES: &[&str] = &["splitty", "formzoo", "flow"];

/// A static site: relative file path to content.
#[derive(Debug, Clone)]
pub struct FixtureSite {
    name: String,
    files: BTreeMap<String, String>,
}

/// Expected states and element counts of a fixture site.
#[derive(Debug, Clone, Deserialize)]
pub struct FixtureManifest {
    pub name: String,
    pub start: String,
    pub pages: BTreeMap<String, PageExpectation>,
    #[serde(default)]
    pub form_gated: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PageExpectation {
    pub title: String,
    pub widgets: usize,
    pub candidates: usize,
}

impl FixtureSite {
    pub fn new<I, K, V>(name: &str, files: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        FixtureSite {
            name: name.to_string(),
            files: files
                .into_iter()
                .map(|(k, v)| (k.into().trim_start_matches('/').to_string(), v.into()))
                .collect(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let files = match name {
            "splitty" => SPLITTY,
            "formzoo" => FORMZOO,
            "flow" => FLOW,
            _ => return None,
        };
        Some(FixtureSite::new(name, files.iter().copied()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Origin used when the site is loaded by the simulated browser.
    pub fn origin(&self) -> String {
        format!("http://{}.fixture.test", self.name)
    }

    pub fn files(&self) -> impl Iterator<Item = (&str, &str)> {
        self.files.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn manifest(&self) -> Option<FixtureManifest> {
        self.files
            .get("manifest.json")
            .and_then(|m| serde_json::from_str(m).ok())
    }

    /// Looks up the file served for a URL path (query and fragment ignored).
    ///
    /// `/` maps to `index.html`, `/a/b` to `a/b.html` or `a/b/index.html`.
    pub fn resolve(&self, path: &str) -> Option<(&str, &str)> {
        let path = path.split(['?', '#']).next().unwrap_or("");
        let trimmed = path.trim_matches('/');
        let candidates = if trimmed.is_empty() {
            vec!["index.html".to_string()]
        } else {
            vec![
                trimmed.to_string(),
                format!("{trimmed}.html"),
                format!("{trimmed}/index.html"),
            ]
        };
        candidates
            .iter()
            .find_map(|c| self.files.get_key_value(c.as_str()))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

pub fn content_type(path: &str) -> &'static str {
    match path.rsplit('.').next() {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "application/javascript",
        Some("json") => "application/json",
        Some("css") => "text/css",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}
