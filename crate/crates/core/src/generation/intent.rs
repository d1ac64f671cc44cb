use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::model::GenerationModel;
use super::{GenerationError, Result};
use crate::graph::{GraphSchema, NodeRole};
use crate::text::{stem, tokens};

/// Attributes requested whenever the schema has them.
const ALWAYS_ATTRIBUTES: [&str; 2] = ["title", "abstract"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    RelatedWork,
    Survey,
    #[default]
    Summary,
}

impl ReportKind {
    pub fn title(self) -> &'static str {
        match self {
            ReportKind::RelatedWork => "Related Work",
            ReportKind::Survey => "Survey",
            ReportKind::Summary => "Summary",
        }
    }

    /// Keyword guess from an instruction.
    pub fn infer(instruction: &str) -> Self {
        let folded = instruction.to_lowercase();
        if folded.contains("related work") {
            ReportKind::RelatedWork
        } else if folded.contains("survey") || folded.contains("review") {
            ReportKind::Survey
        } else {
            ReportKind::Summary
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportIntent {
    pub instruction: String,
    pub required_attributes: Vec<String>,
    pub required_dimensions: Vec<String>,
    pub report_kind: ReportKind,
}

/// What a model proposes before schema filtering.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentProposal {
    pub attributes: Vec<String>,
    pub dimensions: Vec<String>,
    pub report_kind: Option<ReportKind>,
}

/// User edits applied at confirmation; `None` keeps the proposed value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentEdit {
    #[serde(default)]
    pub attributes: Option<Vec<String>>,
    #[serde(default)]
    pub dimensions: Option<Vec<String>>,
    #[serde(default)]
    pub report_kind: Option<ReportKind>,
}

/// The attribute and dimension names a report can ask for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub attributes: BTreeSet<String>,
    pub dimensions: BTreeSet<String>,
}

impl Vocabulary {
    pub fn from_schema(schema: &GraphSchema) -> Self {
        let attributes = schema
            .labels_with_role(NodeRole::Fact)
            .filter_map(|l| schema.label(l))
            .flat_map(|ls| ls.properties.keys().cloned())
            .collect();
        let dimensions = schema.labels_with_role(NodeRole::Dimension).map(str::to_string).collect();
        Vocabulary { attributes, dimensions }
    }

    /// Case-insensitive lookup of a dimension label.
    fn dimension(&self, name: &str) -> Option<&String> {
        let name = name.trim();
        self.dimensions.iter().find(|d| d.eq_ignore_ascii_case(name))
    }

    fn attribute(&self, name: &str) -> Option<&String> {
        let name = name.trim();
        self.attributes.iter().find(|a| a.eq_ignore_ascii_case(name))
    }

    fn always_attributes(&self) -> Vec<String> {
        ALWAYS_ATTRIBUTES
            .iter()
            .filter(|a| self.attributes.contains(**a))
            .map(|a| a.to_string())
            .collect()
    }

    /// Keeps known names (canonical spelling, first occurrence) and puts
    /// the always-requested attributes first.
    fn filter(&self, proposal: &IntentProposal) -> (Vec<String>, Vec<String>) {
        let mut attributes = self.always_attributes();
        for a in proposal.attributes.iter().filter_map(|a| self.attribute(a)) {
            if !attributes.contains(a) {
                attributes.push(a.clone());
            }
        }
        let mut dimensions: Vec<String> = Vec::new();
        for d in proposal.dimensions.iter().filter_map(|d| self.dimension(d)) {
            if !dimensions.contains(d) {
                dimensions.push(d.clone());
            }
        }
        (attributes, dimensions)
    }
}

/// Deterministic fallback: a dimension is requested when its label's stem
/// occurs among the instruction's word stems.
pub fn keyword_intent(instruction: &str, vocabulary: &Vocabulary) -> IntentProposal {
    let stems: BTreeSet<String> = tokens(instruction).map(|t| stem(&t)).collect();
    let label_stems = |label: &str| -> Vec<String> { tokens(label).map(|t| stem(&t)).collect() };
    IntentProposal {
        attributes: Vec::new(),
        dimensions: vocabulary
            .dimensions
            .iter()
            .filter(|d| {
                let s = label_stems(d);
                !s.is_empty() && s.iter().all(|x| stems.contains(x))
            })
            .cloned()
            .collect(),
        report_kind: Some(ReportKind::infer(instruction)),
    }
}

/// Proposes an intent for confirmation. The model's proposal is used when
/// it names at least one known dimension; otherwise the keyword fallback.
pub fn interpret_intent(instruction: &str, vocabulary: &Vocabulary, model: &dyn GenerationModel) -> Result<ReportIntent> {
    let instruction = instruction.trim();
    if instruction.is_empty() {
        return Err(GenerationError::EmptyInstruction);
    }
    let from_model = model
        .propose_intent(instruction, vocabulary)
        .ok()
        .flatten()
        .map(|p| (vocabulary.filter(&p), p.report_kind))
        .filter(|((_, dims), _)| !dims.is_empty());
    let ((attributes, dimensions), kind) = match from_model {
        Some(found) => found,
        None => {
            let p = keyword_intent(instruction, vocabulary);
            (vocabulary.filter(&p), p.report_kind)
        }
    };
    if dimensions.is_empty() {
        return Err(GenerationError::NoUsableIntent);
    }
    Ok(ReportIntent {
        instruction: instruction.to_string(),
        required_attributes: attributes,
        required_dimensions: dimensions,
        report_kind: kind.unwrap_or_else(|| ReportKind::infer(instruction)),
    })
}

impl ReportIntent {
    /// Applies user edits, checking every name against the vocabulary.
    pub fn edited(&self, edit: &IntentEdit, vocabulary: &Vocabulary) -> Result<ReportIntent> {
        let mut out = self.clone();
        if let Some(attrs) = &edit.attributes {
            out.required_attributes = canonical(attrs, |a| vocabulary.attribute(a), GenerationError::UnknownAttribute)?;
        }
        if let Some(dims) = &edit.dimensions {
            out.required_dimensions = canonical(dims, |d| vocabulary.dimension(d), GenerationError::UnknownDimension)?;
        }
        if let Some(kind) = edit.report_kind {
            out.report_kind = kind;
        }
        if out.required_dimensions.is_empty() {
            return Err(GenerationError::NoUsableIntent);
        }
        if out.required_attributes.is_empty() {
            return Err(GenerationError::NoAttributes);
        }
        Ok(out)
    }
}

fn canonical<'v>(
    names: &[String],
    lookup: impl Fn(&str) -> Option<&'v String>,
    unknown: fn(String) -> GenerationError,
) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for n in names {
        let c = lookup(n).ok_or_else(|| unknown(n.clone()))?;
        if !out.contains(c) {
            out.push(c.clone());
        }
    }
    Ok(out)
}
