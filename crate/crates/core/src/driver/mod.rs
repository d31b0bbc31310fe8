//! Browser session abstraction.
//!
//! Every page observation is a [`PageSnapshot`]: URL, title, the serialized
//! DOM, a viewport screenshot and per-element geometry. Elements in the
//! serialized DOM carry a `data-vetl-idx` attribute that links them to their
//! geometry entry; handles built from a snapshot are only valid for the
//! document generation they were captured from.

mod webdriver;

use std::collections::BTreeMap;
use std::time::Duration;

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::geometry::{Rect, Viewport};
pub use webdriver::{WebDriverBrowser, WebDriverOptions};

/// Attribute used to tag elements of the serialized DOM with their index.
pub const INDEX_ATTR: &str = "data-vetl-idx";

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("webdriver server unreachable: {0}")]
    ConnectionFailed(String),
    #[error("navigation failed: {0}")]
    NavigationFailed(String),
    #[error("browser session lost: {0}")]
    SessionLost(String),
    #[error("stale element {0}")]
    StaleElement(String),
    #[error("element not interactable: {0}")]
    NotInteractable(String),
    #[error("webdriver protocol error: {0}")]
    Protocol(String),
}

/// An open browser session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrowserSession {
    pub endpoint: String,
    pub session_id: String,
    pub viewport: Viewport,
    pub device_pixel_ratio: f64,
}

/// Reference to one element of one document generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementHandle {
    /// Value of the element's index attribute in the snapshot DOM.
    pub remote_id: String,
    pub generation: u64,
    /// Page coordinates in CSS pixels.
    pub rect: Rect,
    pub displayed: bool,
    pub enabled: bool,
}

/// Geometry and live state of one tagged element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementGeometry {
    pub rect: Rect,
    pub displayed: bool,
    pub enabled: bool,
    /// Current `value` property for form controls.
    #[serde(default)]
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureRecord {
    pub timestamp_ms: u64,
    pub message: String,
    pub source: String,
}

/// One observation of the browser.
#[derive(Debug, Clone)]
pub struct PageSnapshot {
    pub url: String,
    pub title: String,
    /// Serialized DOM with every element tagged by [`INDEX_ATTR`].
    pub html: String,
    /// Viewport-only raster, `viewport × device_pixel_ratio` pixels.
    pub screenshot: RgbaImage,
    pub elements: BTreeMap<usize, ElementGeometry>,
    pub scroll_x: f64,
    pub scroll_y: f64,
    pub viewport: Viewport,
    pub device_pixel_ratio: f64,
    pub generation: u64,
}

impl PageSnapshot {
    pub fn handle(&self, index: usize) -> Option<ElementHandle> {
        self.elements.get(&index).map(|g| ElementHandle {
            remote_id: index.to_string(),
            generation: self.generation,
            rect: g.rect,
            displayed: g.displayed,
            enabled: g.enabled,
        })
    }

    /// Converts a page rectangle into viewport CSS coordinates.
    pub fn to_viewport(&self, rect: &Rect) -> Rect {
        rect.translate(-self.scroll_x, -self.scroll_y)
    }

    pub fn in_viewport(&self, rect: &Rect) -> bool {
        self.to_viewport(rect)
            .within(self.viewport.width as f64, self.viewport.height as f64)
    }
}

/// Browser operations used by the explorer.
///
/// Implementations count one web action per successful `type_text` and
/// `click`; nothing else moves the counter.
pub trait Browser {
    fn session(&self) -> &BrowserSession;
    fn navigate(&mut self, url: &str) -> Result<(), DriverError>;
    fn current_url(&mut self) -> Result<String, DriverError>;
    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError>;
    /// Clears the element and types `text` into it.
    fn type_text(&mut self, element: &ElementHandle, text: &str) -> Result<(), DriverError>;
    fn click(&mut self, element: &ElementHandle) -> Result<(), DriverError>;
    fn read_value(&mut self, element: &ElementHandle) -> Result<String, DriverError>;
    fn scroll_into_view(&mut self, element: &ElementHandle) -> Result<(), DriverError>;
    /// Severe console entries logged since the previous call.
    fn console_failures(&mut self) -> Result<Vec<FailureRecord>, DriverError>;
    fn action_count(&self) -> u64;
    fn close(&mut self) -> Result<(), DriverError>;
}

/// Timeouts shared by the browser implementations.
#[derive(Debug, Clone, Copy)]
pub struct WaitPolicy {
    /// Upper bound on waiting for document readiness after a click.
    pub navigation_timeout: Duration,
    pub poll_interval: Duration,
    /// Capture attempts before a snapshot gives up on a moving page.
    pub snapshot_attempts: usize,
}

impl Default for WaitPolicy {
    fn default() -> Self {
        WaitPolicy {
            navigation_timeout: Duration::from_secs(5),
            poll_interval: Duration::from_millis(100),
            snapshot_attempts: 4,
        }
    }
}

pub(crate) fn parse_index(handle: &ElementHandle) -> Result<usize, DriverError> {
    handle
        .remote_id
        .parse()
        .map_err(|_| DriverError::StaleElement(handle.remote_id.clone()))
}

pub(crate) fn check_url(url: &str) -> Result<url::Url, DriverError> {
    url::Url::parse(url).map_err(|e| DriverError::NavigationFailed(format!("{url}: {e}")))
}
