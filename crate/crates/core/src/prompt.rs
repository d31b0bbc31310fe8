//! Prompt assembly and answer parsing.
//!
//! Prompts are built from sections (role play, visual information, global
//! context, local context, input widget, output structure) joined by single
//! spaces. Section wording comes from a TOML resource; the built-in copy can
//! be replaced at runtime with [`Templates::from_toml`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{ElementKey, InputWidget};

pub const DEFAULT_TEMPLATES: &str = include_str!("../resources/templates.toml");

/// Upper bound on prompt length in characters.
pub const MAX_PROMPT_CHARS: usize = 4000;

pub const TEXT_MARKER: &str = "Generated Input Text:";
pub const BUTTON_MARKER: &str = "Selected Button Number:";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template file: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputTemplates {
    pub rp: String,
    pub vi: String,
    pub gc: String,
    pub lc: String,
    pub iw_type: String,
    pub iw_topic: String,
    pub iw_value: String,
    pub iw_constraints: String,
    pub os: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementTemplates {
    pub rp: String,
    pub vi: String,
    pub gc: String,
    pub lc: String,
    pub iw: String,
    pub os: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub input: InputTemplates,
    pub element: ElementTemplates,
}

impl Templates {
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        Ok(toml::from_str(text)?)
    }
}

impl Default for Templates {
    fn default() -> Self {
        static PARSED: OnceLock<Templates> = OnceLock::new();
        PARSED
            .get_or_init(|| Templates::from_toml(DEFAULT_TEMPLATES).expect("bundled templates parse"))
            .clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SectionKind {
    Rp,
    Vi,
    Gc,
    Lc,
    Iw,
    Os,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub kind: SectionKind,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFlavor {
    InputPrompt,
    ElementPrompt,
    LlmInputPrompt,
}

/// Whether an input prompt carries the screenshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFlavor {
    Vision,
    TextOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub flavor: PromptFlavor,
    pub text: String,
    pub sections: Vec<PromptSection>,
    /// PNG bytes of the annotated screenshot.
    #[serde(skip)]
    pub image: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub button_numbering: BTreeMap<u32, ElementKey>,
}

impl PromptBundle {
    fn from_sections(flavor: PromptFlavor, mut sections: Vec<PromptSection>, max_chars: usize) -> Self {
        truncate_sections(&mut sections, max_chars);
        let text = sections
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        PromptBundle {
            flavor,
            text,
            sections,
            image: None,
            button_numbering: BTreeMap::new(),
        }
    }

    pub fn with_image(mut self, png: Vec<u8>) -> Self {
        self.image = Some(png);
        self
    }

    pub fn with_numbering(mut self, numbering: BTreeMap<u32, ElementKey>) -> Self {
        self.button_numbering = numbering;
        self
    }

    pub fn kinds(&self) -> Vec<SectionKind> {
        self.sections.iter().map(|s| s.kind).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PromptOptions {
    pub templates: Templates,
    /// Attributes tried, in order, for the "is about" sentence.
    pub topic_priority: Vec<String>,
    pub max_chars: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            templates: Templates::default(),
            topic_priority: vec!["id".into(), "placeholder".into(), "name".into()],
            max_chars: MAX_PROMPT_CHARS,
        }
    }
}

/// Substitutes `{name}` placeholders in one pass, so substituted values are
/// never re-expanded. Unknown placeholders are left as written.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn section(kind: SectionKind, text: String) -> PromptSection {
    PromptSection { kind, text }
}

/// Prompt asking for text for one input box.
pub fn build_input_prompt(
    gc: &str,
    lc: &str,
    widget: &InputWidget,
    flavor: InputFlavor,
    options: &PromptOptions,
) -> PromptBundle {
    let t = &options.templates.input;
    let mut sections = vec![section(SectionKind::Rp, t.rp.clone())];
    if flavor == InputFlavor::Vision {
        sections.push(section(SectionKind::Vi, t.vi.clone()));
    }
    sections.push(section(SectionKind::Gc, render(&t.gc, &[("title", gc)])));
    sections.push(section(SectionKind::Lc, render(&t.lc, &[("text", lc)])));
    if let Some(kind) = widget.attrs.get("type") {
        sections.push(section(SectionKind::Iw, render(&t.iw_type, &[("type", kind)])));
    }
    let topic = options
        .topic_priority
        .iter()
        .find_map(|a| widget.attrs.get(a).filter(|v| !v.trim().is_empty()));
    if let Some(topic) = topic {
        sections.push(section(SectionKind::Iw, render(&t.iw_topic, &[("topic", topic)])));
    }
    if let Some(value) = widget.attrs.get("value") {
        sections.push(section(SectionKind::Iw, render(&t.iw_value, &[("value", value)])));
    }
    if !widget.constraints.is_empty() {
        let joined = widget
            .constraints
            .iter()
            .map(|c| c.text.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        sections.push(section(
            SectionKind::Iw,
            render(&t.iw_constraints, &[("constraints", &joined)]),
        ));
    }
    sections.push(section(SectionKind::Os, t.os.clone()));
    let prompt_flavor = match flavor {
        InputFlavor::Vision => PromptFlavor::InputPrompt,
        InputFlavor::TextOnly => PromptFlavor::LlmInputPrompt,
    };
    PromptBundle::from_sections(prompt_flavor, sections, options.max_chars)
}

/// Renders `1,2,…,n`.
pub fn number_range(n: usize) -> String {
    (1..=n).map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Prompt asking which numbered button submits the filled input.
pub fn build_element_prompt(
    gc: &str,
    lc: &str,
    generated_text: &str,
    n_buttons: usize,
    options: &PromptOptions,
) -> PromptBundle {
    let t = &options.templates.element;
    let sections = vec![
        section(SectionKind::Rp, t.rp.clone()),
        section(SectionKind::Vi, render(&t.vi, &[("numbers", &number_range(n_buttons.max(1)))])),
        section(SectionKind::Gc, render(&t.gc, &[("title", gc)])),
        section(SectionKind::Lc, render(&t.lc, &[("text", lc)])),
        section(SectionKind::Iw, render(&t.iw, &[("text", generated_text)])),
        section(SectionKind::Os, t.os.clone()),
    ];
    PromptBundle::from_sections(PromptFlavor::ElementPrompt, sections, options.max_chars)
}

fn total_len(sections: &[PromptSection]) -> usize {
    let chars: usize = sections.iter().map(|s| s.text.chars().count()).sum();
    chars + sections.len().saturating_sub(1)
}

/// Shortens the prompt to `max` characters: local context first, then
/// widget sentences from the last, then global context.
fn truncate_sections(sections: &mut [PromptSection], max: usize) {
    let mut order: Vec<usize> = Vec::new();
    order.extend(sections.iter().position(|s| s.kind == SectionKind::Lc));
    order.extend((0..sections.len()).rev().filter(|&i| sections[i].kind == SectionKind::Iw));
    order.extend(sections.iter().position(|s| s.kind == SectionKind::Gc));
    for i in order {
        let over = total_len(sections).saturating_sub(max);
        if over == 0 {
            return;
        }
        let text = &mut sections[i].text;
        let keep = text.chars().count().saturating_sub(over);
        *text = text.chars().take(keep).collect();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    GeneratedText,
    ButtonNumber,
    FallbackRaw,
    FallbackSkip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub kind: AnswerKind,
    pub text_value: Option<String>,
    pub number_value: Option<u32>,
}

impl ParsedAnswer {
    /// The text to type, whichever way it was obtained.
    pub fn text(&self) -> Option<&str> {
        self.text_value.as_deref()
    }
}

/// Text after the last marker, or the whole answer when the model left the
/// marker out.
pub fn parse_text_answer(raw: &str) -> ParsedAnswer {
    let lower = raw.to_ascii_lowercase();
    let marker = TEXT_MARKER.to_ascii_lowercase();
    match lower.rfind(&marker) {
        Some(at) => ParsedAnswer {
            kind: AnswerKind::GeneratedText,
            text_value: Some(raw[at + marker.len()..].trim().to_string()),
            number_value: None,
        },
        None => ParsedAnswer {
            kind: AnswerKind::FallbackRaw,
            text_value: Some(raw.trim().to_string()),
            number_value: None,
        },
    }
}

fn integer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+\b").expect("static regex"))
}

/// First integer after the marker (or anywhere, without a marker), accepted
/// only when it names one of the `valid` buttons.
pub fn parse_button_answer(raw: &str, valid: &BTreeSet<u32>) -> ParsedAnswer {
    let lower = raw.to_ascii_lowercase();
    let marker = BUTTON_MARKER.to_ascii_lowercase();
    let haystack = match lower.find(&marker) {
        Some(at) => &raw[at + marker.len()..],
        None => raw,
    };
    let number = integer_re()
        .find(haystack)
        .and_then(|m| m.as_str().parse::<u32>().ok())
        .filter(|n| valid.contains(n));
    match number {
        Some(n) => ParsedAnswer {
            kind: AnswerKind::ButtonNumber,
            text_value: None,
            number_value: Some(n),
        },
        None => ParsedAnswer {
            kind: AnswerKind::FallbackSkip,
            text_value: None,
            number_value: None,
        },
    }
}
