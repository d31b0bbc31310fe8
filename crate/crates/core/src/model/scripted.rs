use std::sync::Mutex;

use regex::Regex;
use serde::Deserialize;

use super::{ModelBackend, ModelError};
use crate::prompt::PromptBundle;

#[derive(Debug, Clone)]
pub enum Matcher {
    Substring(String),
    Pattern(Regex),
    Any,
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Substring(s) => prompt.contains(s.as_str()),
            Matcher::Pattern(re) => re.is_match(prompt),
            Matcher::Any => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub response: String,
    /// Sticky entries answer every matching query; others are used once.
    pub sticky: bool,
}

impl ScriptEntry {
    pub fn once(matcher: Matcher, response: &str) -> Self {
        ScriptEntry {
            matcher,
            response: response.to_string(),
            sticky: false,
        }
    }

    pub fn sticky(matcher: Matcher, response: &str) -> Self {
        ScriptEntry {
            matcher,
            response: response.to_string(),
            sticky: true,
        }
    }
}

/// On-disk script format (TOML).
///
/// ```toml
/// default = "Generated Input Text: hello"
/// vision = true
///
/// [[entry]]
/// contains = "type number"
/// response = "Generated Input Text: 199"
/// sticky = true
///
/// [[entry]]
/// pattern = "marked with 1,2"
/// response = "Selected Button Number: 2"
/// ```
#[derive(Debug, Clone, Deserialize)]
pub struct ScriptFile {
    #[serde(default)]
    pub default: String,
    #[serde(default = "yes")]
    pub vision: bool,
    #[serde(default, rename = "entry")]
    pub entries: Vec<ScriptFileEntry>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScriptFileEntry {
    #[serde(default)]
    pub contains: Option<String>,
    #[serde(default)]
    pub pattern: Option<String>,
    pub response: String,
    #[serde(default)]
    pub sticky: bool,
}

/// Deterministic backend answering from an ordered script.
pub struct ScriptedBackend {
    name: String,
    vision: bool,
    default_response: String,
    entries: Mutex<Vec<ScriptEntry>>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>, default_response: &str) -> Self {
        ScriptedBackend {
            name: "scripted".into(),
            vision: true,
            default_response: default_response.to_string(),
            entries: Mutex::new(entries),
        }
    }

    pub fn text_only(mut self) -> Self {
        self.vision = false;
        self
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let file: ScriptFile =
            toml::from_str(text).map_err(|e| ModelError::Config(format!("script: {e}")))?;
        let mut entries = Vec::new();
        for e in file.entries {
            let matcher = match (e.contains, e.pattern) {
                (Some(s), None) => Matcher::Substring(s),
                (None, Some(p)) => Matcher::Pattern(
                    Regex::new(&p).map_err(|err| ModelError::Config(format!("script pattern {p:?}: {err}")))?,
                ),
                (None, None) => Matcher::Any,
                (Some(_), Some(_)) => {
                    return Err(ModelError::Config("script entry has both contains and pattern".into()))
                }
            };
            entries.push(ScriptEntry {
                matcher,
                response: e.response,
                sticky: e.sticky,
            });
        }
        let mut backend = ScriptedBackend::new(entries, &file.default);
        backend.vision = file.vision;
        Ok(backend)
    }

    pub fn remaining(&self) -> usize {
        self.entries.lock().expect("script poisoned").len()
    }
}

impl ModelBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports_vision(&self) -> bool {
        self.vision
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<String, ModelError> {
        let mut entries = self.entries.lock().expect("script poisoned");
        match entries.iter().position(|e| e.matcher.matches(&bundle.text)) {
            Some(i) if entries[i].sticky => Ok(entries[i].response.clone()),
            Some(i) => Ok(entries.remove(i).response),
            None => Ok(self.default_response.clone()),
        }
    }
}
