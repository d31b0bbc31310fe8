//! DOM analysis of a [`PageSnapshot`].
//!
//! Input widgets are the `input`/`textarea` elements a user can type free
//! text into. Candidate elements are everything clickable. Both are matched
//! with their geometry through the index attribute the driver stamps on
//! every element.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use ego_tree::{NodeId, NodeRef};
use scraper::node::{Element, Node};
use scraper::Html;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::driver::{ElementHandle, PageSnapshot, INDEX_ATTR};

/// Input types treated as free-text widgets. Anything else the browser
/// does not know falls back to `text`.
pub const TEXT_INPUT_TYPES: &[&str] = &["text", "password", "email", "number", "search", "tel", "url"];

const NON_TEXT_INPUT_TYPES: &[&str] = &[
    "checkbox", "radio", "file", "color", "range", "date", "time", "datetime-local", "month",
    "week", "hidden", "submit", "button", "reset", "image",
];

const NON_RENDERED: &[&str] = &["head", "script", "style", "title", "template", "noscript"];

/// Longest local context handed to prompts.
pub const LOCAL_CONTEXT_MAX_CHARS: usize = 120;
/// Tree distance searched for local context.
pub const LOCAL_CONTEXT_RADIUS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum DomError {
    #[error("DOM unparseable: {0}")]
    ParseError(String),
    #[error("no candidate elements on the page")]
    NoCandidates,
    #[error("element {0} is not part of the snapshot")]
    UnknownElement(String),
}

/// Stable identity of an element across reloads of the same page.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementKey(String);

impl ElementKey {
    /// Hashes the tag, normalized id, name and visible text, and the DOM
    /// path with same-tag sibling indices.
    pub fn compute(tag: &str, id: &str, name: &str, text: &str, path: &str) -> Self {
        let mut hasher = Sha256::new();
        for part in [tag, &normalize(id), &normalize(name), &normalize(text), path] {
            hasher.update(part.as_bytes());
            hasher.update([0x1f]);
        }
        let digest = hex::encode(hasher.finalize());
        ElementKey(format!("{tag}-{}", &digest[..16]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElementKey {
    fn from(s: &str) -> Self {
        ElementKey(s.to_string())
    }
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintDescription {
    pub attribute: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputWidget {
    pub handle: ElementHandle,
    pub key: ElementKey,
    pub tag: String,
    pub input_type: String,
    /// `type`, `id`, `placeholder`, `name` and `value` when present.
    pub attrs: BTreeMap<String, String>,
    pub constraints: Vec<ConstraintDescription>,
    pub local_context: String,
    pub filled: bool,
    /// Every attribute of the element, used for constraint extraction.
    #[serde(skip)]
    pub raw_attrs: BTreeMap<String, String>,
}

impl InputWidget {
    pub fn index(&self) -> usize {
        self.handle.remote_id.parse().unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Button,
    Link,
    SubmitInput,
    ClickableOther,
}

impl ElementKind {
    pub const ALL: [ElementKind; 4] = [
        ElementKind::Button,
        ElementKind::Link,
        ElementKind::SubmitInput,
        ElementKind::ClickableOther,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "button" => Some(ElementKind::Button),
            "link" => Some(ElementKind::Link),
            "submit_input" => Some(ElementKind::SubmitInput),
            "clickable_other" => Some(ElementKind::ClickableOther),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractiveElement {
    pub handle: ElementHandle,
    pub key: ElementKey,
    pub label: String,
    pub kind: ElementKind,
}

impl InteractiveElement {
    pub fn index(&self) -> usize {
        self.handle.remote_id.parse().unwrap_or(usize::MAX)
    }
}

/// Parsed DOM of one snapshot.
pub struct DomDocument<'s> {
    snapshot: &'s PageSnapshot,
    html: Html,
    by_index: HashMap<usize, NodeId>,
    order: HashMap<NodeId, usize>,
    hidden: HashSet<NodeId>,
}

impl<'s> DomDocument<'s> {
    pub fn parse(snapshot: &'s PageSnapshot) -> Result<Self, DomError> {
        let html = Html::parse_document(&snapshot.html);
        let mut by_index = HashMap::new();
        let mut order = HashMap::new();
        let mut hidden = HashSet::new();
        for (position, node) in html.tree.root().descendants().enumerate() {
            order.insert(node.id(), position);
            let Some(e) = element(&node) else { continue };
            if NON_RENDERED.contains(&e.name())
                || node.parent().is_some_and(|p| hidden.contains(&p.id()))
            {
                hidden.insert(node.id());
            }
            if let Some(raw) = e.attr(INDEX_ATTR) {
                let index: usize = raw
                    .trim()
                    .parse()
                    .map_err(|_| DomError::ParseError(format!("bad {INDEX_ATTR} value {raw:?}")))?;
                if by_index.insert(index, node.id()).is_some() {
                    return Err(DomError::ParseError(format!("duplicate {INDEX_ATTR} {index}")));
                }
            }
        }
        Ok(DomDocument {
            snapshot,
            html,
            by_index,
            order,
            hidden,
        })
    }

    pub fn snapshot(&self) -> &PageSnapshot {
        self.snapshot
    }

    fn node(&self, index: usize) -> Option<NodeRef<'_, Node>> {
        self.by_index.get(&index).and_then(|id| self.html.tree.get(*id))
    }

    fn index_of(&self, node: NodeRef<'_, Node>) -> Option<usize> {
        element(&node)?.attr(INDEX_ATTR)?.trim().parse().ok()
    }

    fn live_handle(&self, index: usize) -> Option<ElementHandle> {
        self.snapshot
            .handle(index)
            .filter(|h| h.displayed && h.enabled && !h.rect.is_degenerate())
    }

    /// Displayed, enabled, editable text widgets in document order.
    pub fn detect_input_widgets(&self) -> Vec<InputWidget> {
        let mut out = Vec::new();
        for node in self.html.tree.root().descendants() {
            let Some(e) = element(&node) else { continue };
            let (tag, input_type) = match e.name() {
                "textarea" => ("textarea", "textarea".to_string()),
                "input" => match widget_input_type(e) {
                    Some(t) => ("input", t),
                    None => continue,
                },
                _ => continue,
            };
            if e.attr("readonly").is_some() || e.attr("disabled").is_some() {
                continue;
            }
            let Some(index) = self.index_of(node) else { continue };
            let Some(handle) = self.live_handle(index) else { continue };
            let mut attrs = BTreeMap::new();
            for name in ["type", "id", "placeholder", "name", "value"] {
                if let Some(v) = e.attr(name) {
                    attrs.insert(name.to_string(), v.to_string());
                }
            }
            let raw_attrs: BTreeMap<String, String> =
                e.attrs().filter(|(k, _)| *k != INDEX_ATTR).map(|(k, v)| (k.to_string(), v.to_string())).collect();
            let current = self
                .snapshot
                .elements
                .get(&index)
                .and_then(|g| g.value.clone())
                .unwrap_or_else(|| {
                    if tag == "textarea" { text_content(node) } else { e.attr("value").unwrap_or("").to_string() }
                });
            let constraints = extract_constraints(tag, &input_type, &raw_attrs);
            out.push(InputWidget {
                handle,
                key: self.key_of(node),
                tag: tag.to_string(),
                input_type,
                attrs,
                constraints,
                local_context: self.local_context_of(node),
                filled: !current.trim().is_empty(),
                raw_attrs,
            });
        }
        out
    }

    /// Document title, whitespace-trimmed.
    pub fn global_context(&self) -> String {
        if !self.snapshot.title.trim().is_empty() {
            return collapse(&self.snapshot.title);
        }
        self.html
            .tree
            .root()
            .descendants()
            .find(|n| element(n).is_some_and(|e| e.name() == "title"))
            .map(|n| collapse(&text_content(n)))
            .unwrap_or_default()
    }

    /// Text of the closest element around `widget` that renders text itself.
    pub fn local_context(&self, widget: &InputWidget) -> String {
        match self.node(widget.index()) {
            Some(node) => self.local_context_of(node),
            None => String::new(),
        }
    }

    fn local_context_of(&self, start: NodeRef<'_, Node>) -> String {
        let start_pos = self.order[&start.id()];
        let mut seen = HashSet::from([start.id()]);
        let mut frontier = vec![start];
        for _ in 0..LOCAL_CONTEXT_RADIUS {
            let mut next = Vec::new();
            for node in &frontier {
                let neighbours = node.parent().into_iter().chain(node.children());
                for n in neighbours {
                    if element(&n).is_some() && seen.insert(n.id()) {
                        next.push(n);
                    }
                }
            }
            let best = next
                .iter()
                .filter(|n| !self.hidden.contains(&n.id()) && !own_text(**n).is_empty())
                .min_by_key(|n| {
                    let pos = self.order[&n.id()];
                    if pos < start_pos { (0, start_pos - pos) } else { (1, pos - start_pos) }
                });
            if let Some(n) = best {
                let text = rendered_text(*n, &self.hidden);
                return text.chars().take(LOCAL_CONTEXT_MAX_CHARS).collect();
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        String::new()
    }

    /// Every candidate element of the default kinds.
    pub fn candidate_elements(&self) -> Vec<InteractiveElement> {
        self.candidate_elements_of(&ElementKind::ALL.into_iter().collect())
    }

    pub fn candidate_elements_of(&self, kinds: &BTreeSet<ElementKind>) -> Vec<InteractiveElement> {
        let mut out: Vec<InteractiveElement> = Vec::new();
        let mut keys = HashSet::new();
        for node in self.html.tree.root().descendants() {
            let Some(e) = element(&node) else { continue };
            let Some(kind) = element_kind(e) else { continue };
            if !kinds.contains(&kind) || e.attr("disabled").is_some() {
                continue;
            }
            let Some(index) = self.index_of(node) else { continue };
            let Some(handle) = self.live_handle(index) else { continue };
            let key = self.key_of(node);
            if !keys.insert(key.clone()) {
                continue;
            }
            out.push(InteractiveElement {
                handle,
                key,
                label: label_of(node, &self.hidden),
                kind,
            });
        }
        out
    }

    pub fn key_of_index(&self, index: usize) -> Option<ElementKey> {
        self.node(index).map(|n| self.key_of(n))
    }

    fn key_of(&self, node: NodeRef<'_, Node>) -> ElementKey {
        let e = element(&node).expect("keys are computed for elements");
        let mut path = Vec::new();
        for n in std::iter::once(node).chain(node.ancestors()) {
            let Some(ne) = element(&n) else { continue };
            let position = n
                .prev_siblings()
                .filter(|s| element(s).is_some_and(|se| se.name() == ne.name()))
                .count();
            path.push(format!("{}[{position}]", ne.name()));
        }
        path.reverse();
        let text = rendered_text(node, &self.hidden);
        let text: String = text.chars().take(64).collect();
        ElementKey::compute(
            e.name(),
            e.attr("id").unwrap_or(""),
            e.attr("name").unwrap_or(""),
            &text,
            &path.join("/"),
        )
    }

    /// Edges on the tree path between two elements.
    pub fn dom_distance(&self, a: &ElementHandle, b: &ElementHandle) -> Result<usize, DomError> {
        let node = |h: &ElementHandle| {
            h.remote_id
                .parse::<usize>()
                .ok()
                .and_then(|i| self.node(i))
                .ok_or_else(|| DomError::UnknownElement(h.remote_id.clone()))
        };
        Ok(tree_distance(node(a)?, node(b)?))
    }

    /// The candidate closest to `widget` in the tree; ties go to the earlier
    /// one in document order.
    pub fn nearest_button(
        &self,
        widget: &InputWidget,
        candidates: &[InteractiveElement],
    ) -> Result<InteractiveElement, DomError> {
        let mut best: Option<(usize, usize, &InteractiveElement)> = None;
        for c in candidates {
            let d = self.dom_distance(&widget.handle, &c.handle)?;
            let pos = self.order[&self.by_index[&c.index()]];
            if best.is_none_or(|(bd, bp, _)| (d, pos) < (bd, bp)) {
                best = Some((d, pos, c));
            }
        }
        best.map(|(_, _, c)| c.clone()).ok_or(DomError::NoCandidates)
    }
}

fn element<'a>(node: &NodeRef<'a, Node>) -> Option<&'a Element> {
    match node.value() {
        Node::Element(e) => Some(e),
        _ => None,
    }
}

fn widget_input_type(e: &Element) -> Option<String> {
    let raw = e.attr("type").unwrap_or("text").trim().to_ascii_lowercase();
    if TEXT_INPUT_TYPES.contains(&raw.as_str()) {
        Some(raw)
    } else if NON_TEXT_INPUT_TYPES.contains(&raw.as_str()) {
        None
    } else {
        Some("text".to_string())
    }
}

fn element_kind(e: &Element) -> Option<ElementKind> {
    match e.name() {
        "button" => Some(ElementKind::Button),
        "a" if e.attr("href").is_some() => Some(ElementKind::Link),
        "input" => {
            let t = e.attr("type").unwrap_or("text").trim().to_ascii_lowercase();
            matches!(t.as_str(), "submit" | "button").then_some(ElementKind::SubmitInput)
        }
        _ if e.attr("role").is_some_and(|r| r.trim().eq_ignore_ascii_case("button"))
            || e.attr("onclick").is_some() =>
        {
            Some(ElementKind::ClickableOther)
        }
        _ => None,
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn text_content(node: NodeRef<'_, Node>) -> String {
    node.descendants()
        .filter_map(|d| match d.value() {
            Node::Text(t) => Some(&**t),
            _ => None,
        })
        .collect()
}

/// Text of the node's direct text children.
fn own_text(node: NodeRef<'_, Node>) -> String {
    let raw: Vec<&str> = node
        .children()
        .filter_map(|c| match c.value() {
            Node::Text(t) => Some(&**t),
            _ => None,
        })
        .collect();
    collapse(&raw.join(" "))
}

fn rendered_text(node: NodeRef<'_, Node>, hidden: &HashSet<NodeId>) -> String {
    let mut parts = Vec::new();
    for d in node.descendants() {
        if let Node::Text(t) = d.value() {
            if d.parent().is_some_and(|p| !hidden.contains(&p.id())) {
                parts.push(&**t);
            }
        }
    }
    collapse(&parts.join(" "))
}

fn label_of(node: NodeRef<'_, Node>, hidden: &HashSet<NodeId>) -> String {
    let e = element(&node).expect("labels are computed for elements");
    let text = rendered_text(node, hidden);
    if !text.is_empty() {
        return text;
    }
    for attr in ["aria-label", "value", "title", "alt"] {
        if let Some(v) = e.attr(attr).map(collapse).filter(|v| !v.is_empty()) {
            return v;
        }
    }
    node.descendants()
        .filter_map(|d| element(&d).filter(|de| de.name() == "img").and_then(|de| de.attr("alt")))
        .map(collapse)
        .find(|v| !v.is_empty())
        .unwrap_or_default()
}

fn tree_distance(a: NodeRef<'_, Node>, b: NodeRef<'_, Node>) -> usize {
    let a_chain: Vec<NodeId> = std::iter::once(a).chain(a.ancestors()).map(|n| n.id()).collect();
    let a_depth: HashMap<NodeId, usize> = a_chain.iter().enumerate().map(|(d, id)| (*id, d)).collect();
    for (up_b, n) in std::iter::once(b).chain(b.ancestors()).enumerate() {
        if let Some(up_a) = a_depth.get(&n.id()) {
            return up_a + up_b;
        }
    }
    unreachable!("nodes of one tree share the root")
}

/// Constraint sentences for a widget from its attributes.
///
/// `input_type` is the normalized widget type (`textarea` for textareas).
pub fn extract_constraints(
    tag: &str,
    input_type: &str,
    attrs: &BTreeMap<String, String>,
) -> Vec<ConstraintDescription> {
    let get = |name: &str| attrs.get(name).map(|v| v.trim().to_string());
    let mut out = Vec::new();
    let mut push = |attribute: &str, text: String| {
        out.push(ConstraintDescription {
            attribute: attribute.to_string(),
            text,
        })
    };
    if tag == "textarea" {
        push("textarea", "multi-line input is allowed".to_string());
        return out;
    }
    match input_type {
        "text" | "password" => {
            let noun = if input_type == "text" { "text" } else { "password" };
            if let Some(v) = get("maxlength") {
                push("maxlength", format!("maximum length of {noun} is {v}"));
            }
            if let Some(v) = get("minlength") {
                push("minlength", format!("minimum length of {noun} is {v}"));
            }
        }
        "email" => {
            if attrs.contains_key("multiple") {
                push(
                    "multiple",
                    "multiple emails are allowed, with each email separated by a comma".to_string(),
                );
            }
        }
        "number" => {
            if let Some(v) = get("max") {
                push("max", format!("maximum value of number is {v}"));
            }
            if let Some(v) = get("min") {
                push("min", format!("minimum value of number is {v}"));
            }
            if let Some(step) = get("step") {
                let since = get("min").unwrap_or_else(|| "0".to_string());
                push("step", format!("number interval is {step} since {since}"));
            }
        }
        "tel" => {
            if let Some(v) = get("pattern") {
                push("pattern", format!("telephone number has regular expression pattern {v}"));
            }
        }
        _ => {}
    }
    out
}

/// Convenience wrapper: parse and detect in one call.
pub fn detect_input_widgets(snapshot: &PageSnapshot) -> Result<Vec<InputWidget>, DomError> {
    Ok(DomDocument::parse(snapshot)?.detect_input_widgets())
}

/// Convenience wrapper: parse and enumerate candidates in one call.
pub fn candidate_elements(snapshot: &PageSnapshot) -> Result<Vec<InteractiveElement>, DomError> {
    Ok(DomDocument::parse(snapshot)?.candidate_elements())
}
