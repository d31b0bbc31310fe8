//! Page model of the simulated browser.
//!
//! Handles navigation over a [`FixtureSite`], native form validation and GET
//! submission, `data-nav` navigation buttons, `data-console-error-if-empty`
//! forms and `<meta http-equiv="refresh">` redirects. Time is a logical
//! clock that advances a fixed step per command, which keeps every run
//! reproducible.

use std::collections::HashMap;

use ego_tree::{NodeId, NodeRef};
use image::{Rgba, RgbaImage};
use scraper::node::Node;
use scraper::Html;
use url::Url;

use super::layout::{self, collapse, LayoutResult, LayoutSource, Paint, CHAR_WIDTH};
use super::site::FixtureSite;
use crate::driver::{DriverError, ElementGeometry, FailureRecord, INDEX_ATTR};
use crate::geometry::{Rect, Viewport};

/// Logical milliseconds added per engine command.
pub const TICK_MS: u64 = 50;

const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source",
    "track", "wbr",
];
const RAW_TEXT_TAGS: &[&str] = &["script", "style"];

struct Page {
    url: Url,
    doc: Html,
    elements: Vec<NodeId>,
    index_of: HashMap<NodeId, usize>,
    values: Vec<Option<String>>,
    layout: LayoutResult,
    generation: u64,
    scroll_y: f64,
    refresh: Option<(u64, String)>,
}

impl LayoutSource for (&HashMap<NodeId, usize>, usize) {
    fn index_of(&self, node: NodeRef<'_, Node>) -> Option<usize> {
        self.0.get(&node.id()).copied()
    }

    fn element_count(&self) -> usize {
        self.1
    }
}

/// The simulated browser's state: one tab, one page.
pub struct SimEngine {
    site: FixtureSite,
    origin: Url,
    viewport: Viewport,
    device_pixel_ratio: f64,
    page: Page,
    next_generation: u64,
    clock_ms: u64,
    console: Vec<FailureRecord>,
}

fn element<'a>(node: &NodeRef<'a, Node>) -> Option<&'a scraper::node::Element> {
    match node.value() {
        Node::Element(e) => Some(e),
        _ => None,
    }
}

fn is_text_control(e: &scraper::node::Element) -> bool {
    match e.name() {
        "textarea" => true,
        "input" => !matches!(
            input_type(e).as_str(),
            "submit" | "button" | "reset" | "image" | "checkbox" | "radio" | "file" | "hidden"
        ),
        _ => false,
    }
}

fn input_type(e: &scraper::node::Element) -> String {
    e.attr("type").unwrap_or("text").trim().to_ascii_lowercase()
}

impl SimEngine {
    pub fn new(site: FixtureSite, viewport: Viewport, device_pixel_ratio: f64) -> Self {
        let origin = Url::parse(&site.origin()).expect("fixture origin is a valid URL");
        let blank = Url::parse("about:blank").expect("static URL");
        let mut engine = SimEngine {
            site,
            origin,
            viewport,
            device_pixel_ratio: if device_pixel_ratio > 0.0 { device_pixel_ratio } else { 1.0 },
            page: Page {
                url: blank.clone(),
                doc: Html::new_document(),
                elements: Vec::new(),
                index_of: HashMap::new(),
                values: Vec::new(),
                layout: LayoutResult::default(),
                generation: 0,
                scroll_y: 0.0,
                refresh: None,
            },
            next_generation: 1,
            clock_ms: 0,
            console: Vec::new(),
        };
        engine.load(blank, String::new());
        engine
    }

    pub fn origin(&self) -> &Url {
        &self.origin
    }

    pub fn site(&self) -> &FixtureSite {
        &self.site
    }

    pub fn viewport(&self) -> Viewport {
        self.viewport
    }

    pub fn device_pixel_ratio(&self) -> f64 {
        self.device_pixel_ratio
    }

    pub fn set_viewport(&mut self, viewport: Viewport) {
        self.viewport = viewport;
        self.relayout();
    }

    /// Advances the logical clock and fires any due redirect.
    pub fn tick(&mut self) {
        self.clock_ms += TICK_MS;
        if let Some((due, target)) = self.page.refresh.clone() {
            if self.clock_ms >= due {
                self.page.refresh = None;
                if let Ok(url) = self.page.url.join(&target) {
                    self.open(url);
                }
            }
        }
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn url(&self) -> String {
        self.page.url.to_string()
    }

    pub fn generation(&self) -> u64 {
        self.page.generation
    }

    pub fn title(&self) -> String {
        self.page
            .doc
            .tree
            .root()
            .descendants()
            .find(|n| element(n).is_some_and(|e| e.name() == "title"))
            .map(|n| collapse(&text_of(n)))
            .unwrap_or_default()
    }

    /// Navigates to an absolute URL. Unknown hosts load an empty page under
    /// that URL so the caller can detect that it left the site.
    pub fn navigate(&mut self, raw: &str) -> Result<(), DriverError> {
        let url = Url::parse(raw).map_err(|e| DriverError::NavigationFailed(format!("{raw}: {e}")))?;
        if !matches!(url.scheme(), "http" | "https" | "about") {
            return Err(DriverError::NavigationFailed(format!("unsupported scheme in {raw}")));
        }
        self.open(url);
        Ok(())
    }

    fn open(&mut self, url: Url) {
        let same_origin = url.origin() == self.origin.origin();
        let html = if url.scheme() == "about" {
            String::new()
        } else if same_origin {
            match self.site.resolve(url.path()) {
                Some((path, content)) if path.ends_with(".html") => content.to_string(),
                Some((_, content)) => format!("<html><body><pre>{}</pre></body></html>", escape_text(content)),
                None => "<html><head><title>Not Found</title></head><body><h1>Not Found</h1>\
                         <div><a href=\"/\">Home</a></div></body></html>"
                    .to_string(),
            }
        } else {
            "<html><head><title></title></head><body></body></html>".to_string()
        };
        self.load(url, html);
    }

    fn load(&mut self, url: Url, html: String) {
        let doc = Html::parse_document(&html);
        let elements: Vec<NodeId> = doc
            .tree
            .root()
            .descendants()
            .filter(|n| element(n).is_some())
            .map(|n| n.id())
            .collect();
        let index_of: HashMap<NodeId, usize> =
            elements.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let values = elements
            .iter()
            .map(|id| {
                let node = doc.tree.get(*id).expect("node id from this tree");
                let e = element(&node)?;
                match e.name() {
                    "textarea" => Some(text_of(node)),
                    "input" => Some(sanitize(e, e.attr("value").unwrap_or(""))),
                    "select" => Some(
                        node.descendants()
                            .filter_map(|o| element(&o).filter(|e| e.name() == "option").map(|e| (o, e)))
                            .find(|(_, e)| e.attr("selected").is_some())
                            .or_else(|| {
                                node.descendants()
                                    .filter_map(|o| element(&o).filter(|e| e.name() == "option").map(|e| (o, e)))
                                    .next()
                            })
                            .map(|(o, e)| e.attr("value").map(str::to_string).unwrap_or_else(|| collapse(&text_of(o))))
                            .unwrap_or_default(),
                    ),
                    _ => None,
                }
            })
            .collect();
        let refresh = doc
            .tree
            .root()
            .descendants()
            .filter_map(|n| element(&n))
            .find(|e| {
                e.name() == "meta"
                    && e.attr("http-equiv").is_some_and(|h| h.eq_ignore_ascii_case("refresh"))
            })
            .and_then(|e| parse_refresh(e.attr("content")?))
            .map(|(secs, target)| (self.clock_ms + (secs * 1000.0) as u64, target));
        let generation = self.next_generation;
        self.next_generation += 1;
        self.page = Page {
            url,
            doc,
            elements,
            index_of,
            values,
            layout: LayoutResult::default(),
            generation,
            scroll_y: 0.0,
            refresh,
        };
        self.relayout();
    }

    fn relayout(&mut self) {
        let source = (&self.page.index_of, self.page.elements.len());
        self.page.layout = layout::layout(
            self.page.doc.tree.root(),
            &source,
            self.viewport.width as f64,
        );
        let max_scroll = (self.page.layout.height - self.viewport.height as f64).max(0.0);
        self.page.scroll_y = self.page.scroll_y.min(max_scroll);
    }

    fn node(&self, index: usize) -> Result<NodeRef<'_, Node>, DriverError> {
        self.page
            .elements
            .get(index)
            .and_then(|id| self.page.doc.tree.get(*id))
            .ok_or_else(|| DriverError::StaleElement(index.to_string()))
    }

    /// Checks that `generation` is the live document and `index` exists.
    pub fn check(&self, generation: u64, index: usize) -> Result<(), DriverError> {
        if generation != self.page.generation {
            return Err(DriverError::StaleElement(format!("{generation}:{index}")));
        }
        self.node(index).map(|_| ())
    }

    fn enabled(&self, node: NodeRef<'_, Node>) -> bool {
        let Some(e) = element(&node) else { return false };
        if !matches!(e.name(), "input" | "button" | "select" | "textarea" | "option" | "fieldset") {
            return true;
        }
        e.attr("disabled").is_none()
            && !node.ancestors().any(|a| {
                element(&a).is_some_and(|ae| ae.name() == "fieldset" && ae.attr("disabled").is_some())
            })
    }

    pub fn geometry(&self) -> Vec<(usize, ElementGeometry)> {
        (0..self.page.elements.len())
            .map(|i| {
                let node = self.node(i).expect("index in range");
                let rect = self.page.layout.rects[i].unwrap_or_default();
                (
                    i,
                    ElementGeometry {
                        rect,
                        displayed: self.page.layout.displayed[i],
                        enabled: self.enabled(node),
                        value: self.page.values[i].clone(),
                    },
                )
            })
            .collect()
    }

    pub fn scroll_y(&self) -> f64 {
        self.page.scroll_y
    }

    pub fn value(&self, index: usize) -> Result<String, DriverError> {
        self.node(index)?;
        Ok(self.page.values[index].clone().unwrap_or_default())
    }

    fn interactable(&self, index: usize) -> Result<NodeRef<'_, Node>, DriverError> {
        let node = self.node(index)?;
        if !self.page.layout.displayed[index] || !self.enabled(node) {
            return Err(DriverError::NotInteractable(format!("element {index}")));
        }
        Ok(node)
    }

    pub fn clear(&mut self, index: usize) -> Result<(), DriverError> {
        let node = self.interactable(index)?;
        let e = element(&node).expect("indexed nodes are elements");
        if !is_text_control(e) || e.attr("readonly").is_some() {
            return Err(DriverError::NotInteractable(format!("element {index} is not editable")));
        }
        self.page.values[index] = Some(String::new());
        self.relayout();
        Ok(())
    }

    /// Appends typed text, applying the sanitation a browser applies.
    pub fn send_keys(&mut self, index: usize, text: &str) -> Result<(), DriverError> {
        let node = self.interactable(index)?;
        let e = element(&node).expect("indexed nodes are elements");
        if !is_text_control(e) || e.attr("readonly").is_some() {
            return Err(DriverError::NotInteractable(format!("element {index} is not editable")));
        }
        let mut value = self.page.values[index].clone().unwrap_or_default();
        if e.name() == "textarea" {
            value.push_str(text);
        } else {
            value.extend(text.chars().filter(|c| *c != '\n' && *c != '\r'));
        }
        if let Some(max) = e.attr("maxlength").and_then(|m| m.trim().parse::<usize>().ok()) {
            value = value.chars().take(max).collect();
        }
        let value = sanitize(e, &value);
        self.page.values[index] = Some(value);
        Ok(())
    }

    pub fn scroll_into_view(&mut self, index: usize) -> Result<(), DriverError> {
        self.node(index)?;
        let rect = self.page.layout.rects[index].unwrap_or_default();
        let max_scroll = (self.page.layout.height - self.viewport.height as f64).max(0.0);
        let target = rect.y + rect.height / 2.0 - self.viewport.height as f64 / 2.0;
        self.page.scroll_y = target.clamp(0.0, max_scroll);
        Ok(())
    }

    pub fn drain_console(&mut self) -> Vec<FailureRecord> {
        std::mem::take(&mut self.console)
    }

    /// Dispatches a click and performs its default action.
    pub fn click(&mut self, index: usize) -> Result<(), DriverError> {
        let node = self.interactable(index)?;
        enum Action {
            Go(String),
            Submit(NodeId, Option<NodeId>),
            Reset(NodeId),
            Nothing,
        }
        let mut action = Action::Nothing;
        for n in std::iter::once(node).chain(node.ancestors()) {
            let Some(e) = element(&n) else { continue };
            if let Some(nav) = e.attr("data-nav") {
                action = Action::Go(nav.to_string());
                break;
            }
            match e.name() {
                "a" if e.attr("href").is_some() => {
                    action = Action::Go(e.attr("href").unwrap_or_default().to_string());
                    break;
                }
                "button" | "input" => {
                    let kind = if e.name() == "button" {
                        e.attr("type").unwrap_or("submit").trim().to_ascii_lowercase()
                    } else {
                        input_type(e)
                    };
                    let form = n
                        .ancestors()
                        .find(|a| element(a).is_some_and(|ae| ae.name() == "form"))
                        .map(|f| f.id());
                    match (kind.as_str(), form) {
                        ("submit" | "image", Some(f)) => action = Action::Submit(f, Some(n.id())),
                        ("reset", Some(f)) => action = Action::Reset(f),
                        _ => {}
                    }
                    break;
                }
                _ => {}
            }
        }
        match action {
            Action::Go(href) => {
                if let Ok(url) = self.page.url.join(&href) {
                    self.follow(url);
                }
            }
            Action::Submit(form, submitter) => self.submit(form, submitter),
            Action::Reset(form) => self.reset(form),
            Action::Nothing => {}
        }
        Ok(())
    }

    fn follow(&mut self, url: Url) {
        let mut a = url.clone();
        let mut b = self.page.url.clone();
        a.set_fragment(None);
        b.set_fragment(None);
        if a == b && url.fragment().is_some() {
            self.page.url = url;
        } else {
            self.open(url);
        }
    }

    fn form_controls(&self, form: NodeId) -> Vec<usize> {
        let form = self.page.doc.tree.get(form).expect("form id from this tree");
        form.descendants()
            .filter(|n| {
                element(n).is_some_and(|e| matches!(e.name(), "input" | "textarea" | "select"))
                    && self.enabled(*n)
            })
            .filter_map(|n| self.page.index_of.get(&n.id()).copied())
            .collect()
    }

    fn reset(&mut self, form: NodeId) {
        for i in self.form_controls(form) {
            let node = self.node(i).expect("control index");
            let e = element(&node).expect("control element");
            let initial = match e.name() {
                "textarea" => text_of(node),
                _ => sanitize(e, e.attr("value").unwrap_or("")),
            };
            self.page.values[i] = Some(initial);
        }
    }

    fn submit(&mut self, form_id: NodeId, submitter: Option<NodeId>) {
        let form_node = self.page.doc.tree.get(form_id).expect("form id from this tree");
        let form = element(&form_node).expect("form element").clone();
        let controls = self.form_controls(form_id);
        let skip_validation = form.attr("novalidate").is_some()
            || submitter
                .and_then(|s| self.page.doc.tree.get(s))
                .and_then(|s| element(&s).map(|e| e.attr("formnovalidate").is_some()))
                .unwrap_or(false);
        if !skip_validation {
            for &i in &controls {
                let node = self.node(i).expect("control index");
                let e = element(&node).expect("control element");
                let value = self.page.values[i].clone().unwrap_or_default();
                if !control_valid(e, &value) {
                    return;
                }
            }
        }
        if let Some(message) = form.attr("data-console-error-if-empty") {
            let empty = controls.iter().any(|&i| {
                let node = self.node(i).expect("control index");
                let e = element(&node).expect("control element");
                is_text_control(e) && self.page.values[i].as_deref().unwrap_or("").trim().is_empty()
            });
            if empty {
                self.console.push(FailureRecord {
                    timestamp_ms: self.clock_ms,
                    message: message.to_string(),
                    source: self.page.url.to_string(),
                });
                return;
            }
        }
        let mut pairs: Vec<(String, String)> = Vec::new();
        for &i in &controls {
            let node = self.node(i).expect("control index");
            let e = element(&node).expect("control element");
            let Some(name) = e.attr("name").filter(|n| !n.is_empty()) else { continue };
            let kind = input_type(e);
            if e.name() == "input" {
                match kind.as_str() {
                    "submit" | "button" | "reset" | "image" | "file" => continue,
                    "checkbox" | "radio" if e.attr("checked").is_none() => continue,
                    "checkbox" | "radio" => {
                        pairs.push((name.to_string(), e.attr("value").unwrap_or("on").to_string()));
                        continue;
                    }
                    _ => {}
                }
            }
            pairs.push((name.to_string(), self.page.values[i].clone().unwrap_or_default()));
        }
        if let Some(s) = submitter.and_then(|s| self.page.doc.tree.get(s)) {
            if let Some(e) = element(&s) {
                if let (Some(name), Some(value)) = (e.attr("name"), e.attr("value")) {
                    pairs.push((name.to_string(), value.to_string()));
                }
            }
        }
        let action = form.attr("action").unwrap_or("");
        let Ok(mut target) = self.page.url.join(action) else { return };
        target.set_fragment(None);
        target.set_query(None);
        if !pairs.is_empty() {
            target.query_pairs_mut().extend_pairs(pairs);
        }
        self.open(target);
    }

    /// Serialized DOM with every element tagged by its index.
    pub fn tagged_source(&self) -> String {
        let mut out = String::new();
        for child in self.page.doc.tree.root().children() {
            self.serialize(child, &mut out, false);
        }
        out
    }

    fn serialize(&self, node: NodeRef<'_, Node>, out: &mut String, raw: bool) {
        match node.value() {
            Node::Doctype(_) => out.push_str("<!DOCTYPE html>"),
            Node::Comment(c) => {
                out.push_str("<!--");
                out.push_str(c);
                out.push_str("-->");
            }
            Node::Text(t) => {
                if raw {
                    out.push_str(t);
                } else {
                    out.push_str(&escape_text(t));
                }
            }
            Node::Element(e) => {
                out.push('<');
                out.push_str(e.name());
                for (name, value) in e.attrs() {
                    if name == INDEX_ATTR {
                        continue;
                    }
                    out.push(' ');
                    out.push_str(name);
                    out.push_str("=\"");
                    out.push_str(&escape_attr(value));
                    out.push('"');
                }
                if let Some(i) = self.page.index_of.get(&node.id()) {
                    out.push_str(&format!(" {INDEX_ATTR}=\"{i}\""));
                }
                out.push('>');
                if VOID_TAGS.contains(&e.name()) {
                    return;
                }
                let raw = RAW_TEXT_TAGS.contains(&e.name());
                for child in node.children() {
                    self.serialize(child, out, raw);
                }
                out.push_str("</");
                out.push_str(e.name());
                out.push('>');
            }
            _ => {
                for child in node.children() {
                    self.serialize(child, out, raw);
                }
            }
        }
    }

    /// Viewport raster at the current scroll offset.
    pub fn render(&self) -> RgbaImage {
        let scale = self.device_pixel_ratio;
        let w = (self.viewport.width as f64 * scale).round() as u32;
        let h = (self.viewport.height as f64 * scale).round() as u32;
        let mut img = RgbaImage::from_pixel(w, h, Rgba([255, 255, 255, 255]));
        let to_px = |r: &Rect| r.translate(0.0, -self.page.scroll_y).scale(scale);
        for paint in &self.page.layout.paints {
            match paint {
                Paint::Text { rect, chars, link } => {
                    let color = if *link { Rgba([30, 70, 150, 255]) } else { Rgba([50, 50, 50, 255]) };
                    draw_glyphs(&mut img, &to_px(rect), *chars, scale, color);
                }
                Paint::Field { rect, element } => {
                    let r = to_px(rect);
                    fill(&mut img, &r, Rgba([150, 150, 150, 255]));
                    fill(&mut img, &inset(&r, scale.max(1.0)), Rgba([255, 255, 255, 255]));
                    let chars = self
                        .page
                        .values
                        .get(*element)
                        .and_then(|v| v.as_ref())
                        .map_or(0, |v| v.chars().count());
                    let text = Rect::new(r.x + 6.0 * scale, r.y, r.width, 18.0 * scale);
                    let fit = ((rect.width - 12.0) / CHAR_WIDTH).max(0.0) as usize;
                    draw_glyphs(&mut img, &text.translate(0.0, 5.0 * scale), chars.min(fit), scale, Rgba([20, 20, 20, 255]));
                }
                Paint::Button { rect, chars } => {
                    let r = to_px(rect);
                    fill(&mut img, &r, Rgba([110, 110, 110, 255]));
                    fill(&mut img, &inset(&r, scale.max(1.0)), Rgba([226, 226, 226, 255]));
                    let text = Rect::new(r.x + 10.0 * scale, r.y + 6.0 * scale, r.width, 18.0 * scale);
                    draw_glyphs(&mut img, &text, *chars, scale, Rgba([30, 30, 30, 255]));
                }
                Paint::Rule { rect } => {
                    let r = to_px(rect);
                    fill(&mut img, &Rect::new(r.x, r.bottom() - scale, r.width, scale), Rgba([180, 180, 180, 255]));
                }
            }
        }
        img
    }
}

fn inset(r: &Rect, by: f64) -> Rect {
    Rect::new(r.x + by, r.y + by, r.width - 2.0 * by, r.height - 2.0 * by)
}

fn fill(img: &mut RgbaImage, r: &Rect, color: Rgba<u8>) {
    let x0 = r.x.max(0.0).floor() as i64;
    let y0 = r.y.max(0.0).floor() as i64;
    let x1 = (r.right().min(img.width() as f64)).ceil() as i64;
    let y1 = (r.bottom().min(img.height() as f64)).ceil() as i64;
    for y in y0..y1 {
        for x in x0..x1 {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Text is painted as one block per character.
fn draw_glyphs(img: &mut RgbaImage, r: &Rect, chars: usize, scale: f64, color: Rgba<u8>) {
    for i in 0..chars {
        let x = r.x + (i as f64 * CHAR_WIDTH + 1.0) * scale;
        let glyph = Rect::new(x, r.y + 4.0 * scale, 6.0 * scale, 10.0 * scale);
        fill(img, &glyph, color);
    }
}

fn text_of(node: NodeRef<'_, Node>) -> String {
    node.descendants()
        .filter_map(|d| match d.value() {
            Node::Text(t) => Some(t.to_string()),
            _ => None,
        })
        .collect()
}

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn escape_attr(s: &str) -> String {
    s.replace('&', "&amp;").replace('"', "&quot;")
}

fn parse_refresh(content: &str) -> Option<(f64, String)> {
    let mut parts = content.splitn(2, [';', ',']);
    let secs: f64 = parts.next()?.trim().parse().ok()?;
    let rest = parts.next()?.trim();
    let target = rest
        .strip_prefix("url=")
        .or_else(|| rest.strip_prefix("URL="))
        .unwrap_or(rest)
        .trim_matches(['\'', '"'])
        .to_string();
    Some((secs.max(0.0), target))
}

/// The value a browser exposes after assigning `raw` to the control.
fn sanitize(e: &scraper::node::Element, raw: &str) -> String {
    if e.name() != "input" {
        return raw.to_string();
    }
    match input_type(e).as_str() {
        "number" | "range" => {
            let t = raw.trim();
            if t.is_empty() || valid_float(t) {
                t.to_string()
            } else {
                String::new()
            }
        }
        "email" | "url" | "tel" => raw.trim().to_string(),
        _ => raw.to_string(),
    }
}

fn valid_float(s: &str) -> bool {
    !s.starts_with('+')
        && !s.ends_with('.')
        && !s.contains(['x', 'X', ' '])
        && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '-' | '.' | 'e' | 'E' | '+'))
        && s.parse::<f64>().is_ok_and(f64::is_finite)
}

/// Native constraint validation for one control.
pub(crate) fn control_valid(e: &scraper::node::Element, value: &str) -> bool {
    if !matches!(e.name(), "input" | "textarea") {
        return true;
    }
    let kind = if e.name() == "textarea" { "textarea".to_string() } else { input_type(e) };
    if matches!(kind.as_str(), "submit" | "button" | "reset" | "image" | "hidden") {
        return true;
    }
    if value.is_empty() {
        return e.attr("required").is_none();
    }
    let attr_num = |name: &str| e.attr(name).and_then(|v| v.trim().parse::<f64>().ok());
    let len = value.chars().count();
    if let Some(min) = e.attr("minlength").and_then(|v| v.trim().parse::<usize>().ok()) {
        if len < min {
            return false;
        }
    }
    if let Some(max) = e.attr("maxlength").and_then(|v| v.trim().parse::<usize>().ok()) {
        if len > max {
            return false;
        }
    }
    match kind.as_str() {
        "number" | "range" => {
            let Ok(v) = value.parse::<f64>() else { return false };
            if attr_num("min").is_some_and(|m| v < m) || attr_num("max").is_some_and(|m| v > m) {
                return false;
            }
            let step = e.attr("step").map(str::trim);
            if step.is_some_and(|s| s.eq_ignore_ascii_case("any")) {
                return true;
            }
            let step = step.and_then(|s| s.parse::<f64>().ok()).filter(|s| *s > 0.0).unwrap_or(1.0);
            let base = attr_num("min").or_else(|| attr_num("value")).unwrap_or(0.0);
            let steps = (v - base) / step;
            (steps - steps.round()).abs() < 1e-9
        }
        "email" => {
            let parts: Vec<&str> = if e.attr("multiple").is_some() {
                value.split(',').map(str::trim).collect()
            } else {
                vec![value]
            };
            parts.iter().all(|p| valid_email(p)) && pattern_ok(e, value)
        }
        "url" => Url::parse(value).is_ok() && pattern_ok(e, value),
        "textarea" => true,
        _ => pattern_ok(e, value),
    }
}

fn valid_email(s: &str) -> bool {
    let mut parts = s.splitn(2, '@');
    let local = parts.next().unwrap_or("");
    let domain = parts.next().unwrap_or("");
    !local.is_empty()
        && !domain.is_empty()
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !s.contains(char::is_whitespace)
        && domain.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
}

fn pattern_ok(e: &scraper::node::Element, value: &str) -> bool {
    match e.attr("pattern") {
        None => true,
        Some(p) => match regex::Regex::new(&format!("^(?:{p})$")) {
            Ok(re) => re.is_match(value),
            Err(_) => true,
        },
    }
}
