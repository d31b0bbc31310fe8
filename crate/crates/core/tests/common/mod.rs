#![allow(dead_code)]

use std::sync::Arc;

use vetl_core::driver::{Browser, PageSnapshot};
use vetl_core::geometry::Viewport;
use vetl_core::model::{Matcher, ModelClient, ScriptEntry, ScriptedBackend};
use vetl_core::sim::{FixtureSite, SimBrowser};

pub fn site(files: &[(&str, &str)]) -> FixtureSite {
    FixtureSite::new("t", files.iter().copied())
}

pub fn browser_for(html: &str) -> SimBrowser {
    let site = site(&[("index.html", html)]);
    let start = format!("{}/", site.origin());
    SimBrowser::connect(site, &start, Viewport::default()).unwrap()
}

pub fn snapshot_of(html: &str) -> PageSnapshot {
    browser_for(html).snapshot().unwrap()
}

pub fn fixture_page(fixture: &str, path: &str) -> (SimBrowser, PageSnapshot) {
    let mut b = SimBrowser::fixture(fixture, Viewport::default()).unwrap();
    let origin = FixtureSite::builtin(fixture).unwrap().origin();
    b.navigate(&format!("{origin}{path}")).unwrap();
    let snap = b.snapshot().unwrap();
    (b, snap)
}

/// Answers every input prompt with `text` and every element prompt with
/// button 1.
pub fn ideal_client(text: &str) -> Arc<ModelClient> {
    let backend = ScriptedBackend::new(
        vec![ScriptEntry::sticky(
            Matcher::Substring("The input box will be filled with".into()),
            "Selected Button Number: 1",
        )],
        &format!("Generated Input Text: {text}"),
    );
    Arc::new(ModelClient::new(Arc::new(backend)))
}
