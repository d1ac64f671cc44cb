//! Rule-based subnodes: section slicing and regular-expression captures.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::schema::{OutputKind, OutputSchema};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("no-match")]
    NoMatch,
}

/// `{"section": "Abstract"}` or `{"pattern": "(?m)^Title: (?P<title>.+)$"}`.
///
/// Section rules write the section body into `field` (default: the schema's
/// primary field); array outputs get one item per non-empty line. Pattern
/// rules return the named capture groups of the first match, or of every
/// match for array outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub enum RuleSpec {
    Section { section: String, field: Option<String> },
    Pattern { regex: Regex },
}

impl PartialEq for RuleSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                RuleSpec::Section { section: a, field: fa },
                RuleSpec::Section { section: b, field: fb },
            ) => a == b && fa == fb,
            (RuleSpec::Pattern { regex: a }, RuleSpec::Pattern { regex: b }) => a.as_str() == b.as_str(),
            _ => false,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    section: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
}

impl TryFrom<RawRule> for RuleSpec {
    type Error = String;

    fn try_from(raw: RawRule) -> Result<Self, Self::Error> {
        match (raw.section, raw.pattern) {
            (Some(section), None) if !section.trim().is_empty() => Ok(RuleSpec::Section {
                section: section.trim().to_string(),
                field: raw.field,
            }),
            (None, Some(pattern)) => {
                if raw.field.is_some() {
                    return Err("pattern rules name their fields with capture groups".into());
                }
                let regex = Regex::new(&pattern).map_err(|e| e.to_string())?;
                if regex.capture_names().flatten().next().is_none() {
                    return Err(format!("pattern {pattern:?} has no named capture group"));
                }
                Ok(RuleSpec::Pattern { regex })
            }
            _ => Err("a rule sets exactly one non-empty \"section\" or \"pattern\"".into()),
        }
    }
}

impl From<RuleSpec> for RawRule {
    fn from(rule: RuleSpec) -> Self {
        match rule {
            RuleSpec::Section { section, field } => RawRule {
                section: Some(section),
                field,
                pattern: None,
            },
            RuleSpec::Pattern { regex } => RawRule {
                section: None,
                field: None,
                pattern: Some(regex.as_str().to_string()),
            },
        }
    }
}

const SECTION_KEYWORDS: &[&str] = &[
    "abstract",
    "acknowledgement",
    "acknowledgements",
    "acknowledgment",
    "acknowledgments",
    "appendix",
    "background",
    "bibliography",
    "conclusion",
    "conclusions",
    "discussion",
    "evaluation",
    "experiments",
    "introduction",
    "method",
    "methodology",
    "methods",
    "references",
    "related work",
    "results",
];

static NUMBERING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\d+(?:\.\d+)*\.?|[IVX]+\.|[A-Z]\.)\s+").expect("valid regex"));
static NUMBERED_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d+(?:\.\d+)*\s+\p{Lu}").expect("valid regex"));
static ITEM_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\[\d+\]|\d+[.)])\s*").expect("valid regex"));
static QUOTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"[“"]([^”"]{4,})[”"]"#).expect("valid regex"));

fn heading_key(line: &str) -> String {
    let stripped = NUMBERING.replace(line.trim(), "");
    stripped
        .trim()
        .trim_end_matches([':', '.'])
        .trim()
        .to_lowercase()
}

/// A line is a heading if, after dropping numbering, it is a known section
/// name, or it is a short numbered title like "3 Method Overview".
fn is_heading(line: &str) -> bool {
    let t = line.trim();
    if t.is_empty() {
        return false;
    }
    if SECTION_KEYWORDS.binary_search(&heading_key(t).as_str()).is_ok() {
        return true;
    }
    NUMBERED_HEADING.is_match(t)
        && t.split_whitespace().count() <= 8
        && !t.ends_with(['.', ',', ';'])
}

/// Text between the heading named `section` and the next heading.
///
/// Also accepts run-in headings such as "Abstract: We study ...".
pub fn section_body(text: &str, section: &str) -> Option<String> {
    let wanted = section.trim().to_lowercase();
    let lines: Vec<&str> = text.lines().flat_map(|l| l.split('\u{c}')).collect();
    for (i, line) in lines.iter().enumerate() {
        let trimmed = line.trim();
        let mut body: Vec<String> = Vec::new();
        if heading_key(trimmed) != wanted {
            let de_numbered = NUMBERING.replace(trimmed, "");
            let lower = de_numbered.to_lowercase();
            let Some(rest) = lower.strip_prefix(&wanted) else { continue };
            let Some(sep) = rest.chars().next().filter(|c| matches!(c, ':' | '—' | '–' | '.')) else {
                continue;
            };
            let offset = de_numbered.len() - rest.len() + sep.len_utf8();
            let Some(after) = de_numbered.get(offset..) else { continue };
            body.push(after.trim().to_string());
        }
        body.extend(
            lines[i + 1..]
                .iter()
                .take_while(|l| !is_heading(l))
                .map(|l| l.to_string()),
        );
        let joined = body.join("\n").trim().to_string();
        return (!joined.is_empty()).then_some(joined);
    }
    None
}

/// One list item per non-empty line: leading "[n]"/"n." markers dropped,
/// and a quoted title preferred over the whole line.
pub fn section_items(body: &str) -> Vec<String> {
    body.lines()
        .map(|l| ITEM_MARKER.replace(l.trim(), "").trim().to_string())
        .filter(|l| !l.is_empty())
        .map(|l| match QUOTED.captures(&l) {
            Some(c) => c[1].trim().trim_end_matches(',').to_string(),
            None => l,
        })
        .collect()
}

fn captures_object(regex: &Regex, caps: &regex::Captures<'_>) -> Value {
    let mut m = Map::new();
    for name in regex.capture_names().flatten() {
        if let Some(v) = caps.name(name) {
            m.insert(name.to_string(), Value::String(v.as_str().trim().to_string()));
        }
    }
    Value::Object(m)
}

/// Applies `rule` to the full document text. The result is raw JSON still
/// to be validated against `schema`.
pub fn rule_extract(text: &str, rule: &RuleSpec, schema: &OutputSchema) -> Result<Value, RuleError> {
    match rule {
        RuleSpec::Section { section, field } => {
            let body = section_body(text, section).ok_or(RuleError::NoMatch)?;
            let field = field.as_deref().unwrap_or_else(|| schema.primary_field());
            let item = |s: String| {
                let mut m = Map::new();
                m.insert(field.to_string(), Value::String(s));
                Value::Object(m)
            };
            Ok(match schema.kind {
                OutputKind::SingleTyped => item(body),
                OutputKind::ArrayTyped => Value::Array(section_items(&body).into_iter().map(item).collect()),
            })
        }
        RuleSpec::Pattern { regex } => match schema.kind {
            OutputKind::SingleTyped => regex
                .captures(text)
                .map(|c| captures_object(regex, &c))
                .ok_or(RuleError::NoMatch),
            OutputKind::ArrayTyped => {
                let all: Vec<Value> = regex.captures_iter(text).map(|c| captures_object(regex, &c)).collect();
                if all.is_empty() {
                    Err(RuleError::NoMatch)
                } else {
                    Ok(Value::Array(all))
                }
            }
        },
    }
}
