use std::collections::BTreeMap;

use super::engine::SimEngine;
use super::site::FixtureSite;
use crate::driver::{
    check_url, parse_index, Browser, BrowserSession, DriverError, ElementHandle, FailureRecord,
    PageSnapshot,
};
use crate::geometry::Viewport;

/// In-process [`Browser`] over a [`FixtureSite`].
///
/// Every command advances the engine's logical clock, so pages with timed
/// redirects behave the same on every run.
pub struct SimBrowser {
    engine: SimEngine,
    session: BrowserSession,
    actions: u64,
    closed: bool,
}

impl SimBrowser {
    pub fn connect(site: FixtureSite, start_url: &str, viewport: Viewport) -> Result<Self, DriverError> {
        Self::with_pixel_ratio(site, start_url, viewport, 1.0)
    }

    pub fn with_pixel_ratio(
        site: FixtureSite,
        start_url: &str,
        viewport: Viewport,
        device_pixel_ratio: f64,
    ) -> Result<Self, DriverError> {
        check_url(start_url)?;
        let endpoint = format!("sim://{}", site.name());
        let mut engine = SimEngine::new(site, viewport, device_pixel_ratio);
        engine.navigate(start_url)?;
        Ok(SimBrowser {
            session: BrowserSession {
                endpoint,
                session_id: format!("sim-{}", engine.site().name()),
                viewport,
                device_pixel_ratio: engine.device_pixel_ratio(),
            },
            engine,
            actions: 0,
            closed: false,
        })
    }

    /// Opens a builtin fixture at its manifest start page.
    pub fn fixture(name: &str, viewport: Viewport) -> Result<Self, DriverError> {
        let site = FixtureSite::builtin(name)
            .ok_or_else(|| DriverError::NavigationFailed(format!("unknown fixture {name}")))?;
        let start = format!("{}/", site.origin());
        Self::connect(site, &start, viewport)
    }

    pub fn engine(&self) -> &SimEngine {
        &self.engine
    }

    fn live(&mut self) -> Result<(), DriverError> {
        if self.closed {
            return Err(DriverError::SessionLost("session closed".into()));
        }
        self.engine.tick();
        Ok(())
    }

    fn resolve(&self, element: &ElementHandle) -> Result<usize, DriverError> {
        let index = parse_index(element)?;
        self.engine.check(element.generation, index)?;
        Ok(index)
    }
}

impl Browser for SimBrowser {
    fn session(&self) -> &BrowserSession {
        &self.session
    }

    fn navigate(&mut self, url: &str) -> Result<(), DriverError> {
        self.live()?;
        self.engine.navigate(url)
    }

    fn current_url(&mut self) -> Result<String, DriverError> {
        self.live()?;
        Ok(self.engine.url())
    }

    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError> {
        self.live()?;
        let elements: BTreeMap<_, _> = self
            .engine
            .geometry()
            .into_iter()
            .filter(|(_, g)| g.displayed)
            .collect();
        Ok(PageSnapshot {
            url: self.engine.url(),
            title: self.engine.title(),
            html: self.engine.tagged_source(),
            screenshot: self.engine.render(),
            elements,
            scroll_x: 0.0,
            scroll_y: self.engine.scroll_y(),
            viewport: self.engine.viewport(),
            device_pixel_ratio: self.engine.device_pixel_ratio(),
            generation: self.engine.generation(),
        })
    }

    fn type_text(&mut self, element: &ElementHandle, text: &str) -> Result<(), DriverError> {
        self.live()?;
        let index = self.resolve(element)?;
        self.engine.clear(index)?;
        self.engine.send_keys(index, text)?;
        self.actions += 1;
        Ok(())
    }

    fn click(&mut self, element: &ElementHandle) -> Result<(), DriverError> {
        self.live()?;
        let index = self.resolve(element)?;
        self.engine.click(index)?;
        self.actions += 1;
        Ok(())
    }

    fn read_value(&mut self, element: &ElementHandle) -> Result<String, DriverError> {
        self.live()?;
        let index = self.resolve(element)?;
        self.engine.value(index)
    }

    fn scroll_into_view(&mut self, element: &ElementHandle) -> Result<(), DriverError> {
        self.live()?;
        let index = self.resolve(element)?;
        self.engine.scroll_into_view(index)
    }

    fn console_failures(&mut self) -> Result<Vec<FailureRecord>, DriverError> {
        self.live()?;
        Ok(self.engine.drain_console())
    }

    fn action_count(&self) -> u64 {
        self.actions
    }

    fn close(&mut self) -> Result<(), DriverError> {
        self.closed = true;
        Ok(())
    }
}
