//! The language model behind generation: a deterministic offline model and
//! one backed by a completion provider.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::intent::{IntentProposal, ReportIntent, ReportKind, Vocabulary};
use super::payload::{PayloadRow, PayloadTable};
use super::report::cite_marker;
use super::{GenerationError, Result};
use crate::graph::{NodeId, PropertyValue, ValueType};
use crate::inspection::{OutputKind, OutputSchema, TypedOutput};
use crate::providers::{CompletionRequest, ProviderRegistry};

/// A model's placement of one fact into one category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub fact: NodeId,
    pub category: String,
    #[serde(default)]
    pub rationale: Option<String>,
    /// Dimension ids supporting the placement.
    #[serde(default)]
    pub evidence: Vec<NodeId>,
}

pub struct CategorizeContext<'a> {
    pub intent: &'a ReportIntent,
    pub payload: &'a PayloadTable,
    /// Categories created by earlier batches, in creation order.
    pub existing: &'a [String],
    /// Zero-based index of the batch.
    pub batch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Introduction,
    Category,
    Conclusion,
}

pub struct SectionRequest<'a> {
    pub kind: SectionKind,
    pub heading: &'a str,
    pub intent: &'a ReportIntent,
    pub payload: &'a PayloadTable,
    /// Members of the category, or every selected fact for the
    /// introduction and conclusion.
    pub members: Vec<&'a PayloadRow>,
    /// Every category name, in order.
    pub categories: &'a [String],
}

pub trait GenerationModel: Send + Sync {
    fn id(&self) -> &str;

    /// `Ok(None)` when the model does not interpret instructions.
    fn propose_intent(&self, instruction: &str, vocabulary: &Vocabulary) -> Result<Option<IntentProposal>>;

    fn categorize(&self, batch: &[&PayloadRow], ctx: &CategorizeContext<'_>) -> Result<Vec<Placement>>;

    /// Paragraphs of one section. Citations are [`cite_marker`]s.
    fn write_section(&self, request: &SectionRequest<'_>) -> Result<Vec<String>>;
}

/// Deterministic model: no intent interpretation (the keyword fallback
/// applies), exact-text grouping on the first requested dimension, and
/// template prose built only from payload strings.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineModel;

fn kind_phrase(kind: ReportKind) -> &'static str {
    match kind {
        ReportKind::RelatedWork => "related work",
        ReportKind::Survey => "survey",
        ReportKind::Summary => "summary",
    }
}

fn joined_names(names: &[String]) -> String {
    names.join("; ")
}

impl GenerationModel for OfflineModel {
    fn id(&self) -> &str {
        "offline"
    }

    fn propose_intent(&self, _: &str, _: &Vocabulary) -> Result<Option<IntentProposal>> {
        Ok(None)
    }

    fn categorize(&self, batch: &[&PayloadRow], ctx: &CategorizeContext<'_>) -> Result<Vec<Placement>> {
        let Some(label) = ctx.intent.required_dimensions.first() else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for row in batch {
            // distinct texts in extraction order, each with its supporting items
            let mut groups: Vec<(String, Vec<NodeId>)> = Vec::new();
            for item in row.dimensions.get(label).into_iter().flatten() {
                let Some(text) = ctx.payload.text_of(label, item) else { continue };
                match groups.iter_mut().find(|(t, _)| *t == text) {
                    Some((_, ids)) => ids.push(item.id),
                    None => groups.push((text, vec![item.id])),
                }
            }
            out.extend(groups.into_iter().map(|(text, evidence)| Placement {
                fact: row.fact_id,
                category: text,
                rationale: Some(format!("Shared {label}")),
                evidence,
            }));
        }
        Ok(out)
    }

    fn write_section(&self, req: &SectionRequest<'_>) -> Result<Vec<String>> {
        let n = req.members.len();
        let k = req.categories.len();
        Ok(match req.kind {
            SectionKind::Introduction => vec![format!(
                "This {} covers {n} papers organized into {k} themes: {}.",
                kind_phrase(req.intent.report_kind),
                joined_names(req.categories)
            )],
            SectionKind::Conclusion => vec![format!(
                "In summary, the {n} selected papers fall into {k} themes: {}.",
                joined_names(req.categories)
            )],
            SectionKind::Category => {
                let works: Vec<String> = req
                    .members
                    .iter()
                    .map(|r| format!("{} {}", r.title(), cite_marker(r.fact_id)))
                    .collect();
                let mut paragraphs = vec![format!("Works addressing {}: {}.", req.heading, works.join(", "))];
                let mut details = Vec::new();
                for row in &req.members {
                    for label in req.intent.required_dimensions.iter().skip(1) {
                        for item in row.dimensions.get(label).into_iter().flatten() {
                            if let Some(text) = req.payload.text_of(label, item) {
                                details.push(format!("{} {} reports {label}: {text}.", row.title(), cite_marker(row.fact_id)));
                            }
                        }
                    }
                }
                if !details.is_empty() {
                    paragraphs.push(details.join(" "));
                }
                paragraphs
            }
        })
    }
}

/// Model answering through a [`ProviderRegistry`] route.
pub struct LlmModel {
    registry: Arc<ProviderRegistry>,
    model_id: String,
}

impl LlmModel {
    pub fn new(registry: Arc<ProviderRegistry>, model_id: impl Into<String>) -> Self {
        LlmModel {
            registry,
            model_id: model_id.into(),
        }
    }

    fn ask(&self, task: &str, prompt: String, schema: OutputSchema) -> Result<TypedOutput> {
        let request = CompletionRequest::new(&self.model_id, prompt)
            .for_task("report", task)
            .with_schema(schema);
        let result = self.registry.complete(&request)?;
        result
            .parsed
            .ok_or_else(|| GenerationError::ProviderFailure(format!("{task}: no structured output")))
    }
}

fn text_list(v: Option<&PropertyValue>) -> Vec<String> {
    match v {
        Some(PropertyValue::TextList(items)) => items.clone(),
        Some(PropertyValue::Text(s)) => s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
        _ => Vec::new(),
    }
}

fn text(v: Option<&PropertyValue>) -> Option<String> {
    v.map(PropertyValue::display_text).filter(|s| !s.trim().is_empty())
}

/// Compact text rendering of a row for prompts.
fn describe_row(row: &PayloadRow, payload: &PayloadTable) -> String {
    let mut out = String::new();
    for (attr, value) in &row.attributes {
        if let Some(v) = value {
            let _ = write!(out, " {attr}: {};", v.display_text());
        }
    }
    for (label, items) in &row.dimensions {
        let texts: Vec<String> = items.iter().filter_map(|i| payload.text_of(label, i)).collect();
        if !texts.is_empty() {
            let _ = write!(out, " {label}: {};", texts.join(" | "));
        }
    }
    out
}

impl GenerationModel for LlmModel {
    fn id(&self) -> &str {
        &self.model_id
    }

    fn propose_intent(&self, instruction: &str, vocabulary: &Vocabulary) -> Result<Option<IntentProposal>> {
        let prompt = format!(
            "A user asked for a report: \"{instruction}\"\n\
             Pick the paper attributes and extracted dimensions needed to write it.\n\
             Attributes: {}\nDimensions: {}\n\
             report_kind is one of related-work, survey, summary.",
            vocabulary.attributes.iter().cloned().collect::<Vec<_>>().join(", "),
            vocabulary.dimensions.iter().cloned().collect::<Vec<_>>().join(", "),
        );
        let schema = OutputSchema::new(
            OutputKind::SingleTyped,
            BTreeMap::from([
                ("attributes".to_string(), ValueType::TextList),
                ("dimensions".to_string(), ValueType::TextList),
                ("report_kind".to_string(), ValueType::Text),
            ]),
            ["dimensions".to_string()].into(),
        )
        .expect("static schema");
        let out = self.ask("intent", prompt, schema)?;
        let Some(map) = out.items().first() else {
            return Ok(None);
        };
        let report_kind = text(map.get("report_kind"))
            .and_then(|k| serde_json::from_value(serde_json::Value::String(k.trim().to_lowercase())).ok());
        Ok(Some(IntentProposal {
            attributes: text_list(map.get("attributes")),
            dimensions: text_list(map.get("dimensions")),
            report_kind,
        }))
    }

    fn categorize(&self, batch: &[&PayloadRow], ctx: &CategorizeContext<'_>) -> Result<Vec<Placement>> {
        let mut prompt = format!(
            "Group papers into themes for a report on: \"{}\".\n",
            ctx.intent.instruction
        );
        if ctx.existing.is_empty() {
            prompt.push_str("There are no themes yet; create them.\n");
        } else {
            let _ = writeln!(prompt, "Existing themes (reuse when they fit): {}", ctx.existing.join("; "));
        }
        prompt.push_str("Papers:\n");
        for (i, row) in batch.iter().enumerate() {
            let _ = writeln!(prompt, "[{}] {}{}", i + 1, row.title(), describe_row(row, ctx.payload));
        }
        prompt.push_str("Give one item per (paper, theme); paper is the bracketed number. A paper may join several themes.");
        let schema = OutputSchema::new(
            OutputKind::ArrayTyped,
            BTreeMap::from([
                ("paper".to_string(), ValueType::Text),
                ("category".to_string(), ValueType::Text),
                ("rationale".to_string(), ValueType::Text),
            ]),
            ["paper".to_string(), "category".to_string()].into(),
        )
        .expect("static schema");
        let out = self.ask(&format!("categorize:{}", ctx.batch), prompt, schema)?;
        let mut placements = Vec::new();
        for item in out.items() {
            let index = text(item.get("paper"))
                .map(|p| p.trim().trim_matches(|c| c == '[' || c == ']').to_string())
                .and_then(|p| p.parse::<usize>().ok());
            let (Some(i), Some(category)) = (index, text(item.get("category"))) else {
                continue;
            };
            let Some(row) = i.checked_sub(1).and_then(|i| batch.get(i)) else {
                continue;
            };
            let evidence = ctx
                .intent
                .required_dimensions
                .first()
                .and_then(|l| row.dimensions.get(l))
                .map(|items| items.iter().map(|d| d.id).collect())
                .unwrap_or_default();
            placements.push(Placement {
                fact: row.fact_id,
                category: category.trim().to_string(),
                rationale: text(item.get("rationale")),
                evidence,
            });
        }
        Ok(placements)
    }

    fn write_section(&self, req: &SectionRequest<'_>) -> Result<Vec<String>> {
        let mut prompt = format!(
            "Write the \"{}\" section of a {} for: \"{}\".\n",
            req.heading,
            kind_phrase(req.intent.report_kind),
            req.intent.instruction
        );
        if req.kind != SectionKind::Category {
            let _ = writeln!(prompt, "The themes are: {}.", req.categories.join("; "));
        }
        prompt.push_str("Papers:\n");
        for (i, row) in req.members.iter().enumerate() {
            let _ = writeln!(prompt, "[{}] {}{}", i + 1, row.title(), describe_row(row, req.payload));
        }
        prompt.push_str(
            "Cite papers only by their bracketed number, e.g. [1]. Use only facts listed above. \
             Separate paragraphs with a blank line.",
        );
        let schema = OutputSchema::of(OutputKind::SingleTyped, &[("text", ValueType::Text)]);
        let out = self.ask(&format!("section:{}", req.heading), prompt, schema)?;
        let body = out
            .items()
            .first()
            .and_then(|m| text(m.get("text")))
            .ok_or_else(|| GenerationError::ProviderFailure("empty section".into()))?;
        let marker = Regex::new(r"\[(\d+)\]").expect("valid regex");
        let paragraphs = body
            .split("\n\n")
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                marker
                    .replace_all(p, |c: &regex::Captures<'_>| {
                        let n: usize = c[1].parse().unwrap_or(0);
                        match n.checked_sub(1).and_then(|i| req.members.get(i)) {
                            Some(row) => cite_marker(row.fact_id),
                            None => String::new(),
                        }
                    })
                    .into_owned()
            })
            .collect();
        Ok(paragraphs)
    }
}
