//! Simulated browser over static fixture sites.
//!
//! [`SimBrowser`] drives the page model in-process. [`WebDriverEmulator`]
//! exposes the same model over the WebDriver wire protocol so the HTTP client
//! can be tested end to end. [`FixtureServer`] serves the raw files for use
//! with a real browser.

mod browser;
mod engine;
mod layout;
mod serve;
mod site;
mod webdriver_server;

pub use browser::SimBrowser;
pub use engine::{SimEngine, TICK_MS};
pub use serve::FixtureServer;
pub use site::{content_type, FixtureManifest, FixtureSite, PageExpectation, BUILTIN_FIXTURES};
pub use webdriver_server::{EmulatorOptions, WebDriverEmulator};
