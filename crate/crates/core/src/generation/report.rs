use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::intent::ReportIntent;
use super::mindmap::MindMap;
use super::model::{GenerationModel, SectionKind, SectionRequest};
use super::payload::{Citation, PayloadRow, PayloadTable};
use super::{GenerationError, Result};
use crate::graph::NodeId;

const CITE_OPEN: &str = "{{cite:";
const CITE_CLOSE: &str = "}}";

/// Placeholder for a citation inside draft paragraphs; renderers turn it
/// into the target format's citation syntax.
pub fn cite_marker(fact: NodeId) -> String {
    format!("{CITE_OPEN}{}{CITE_CLOSE}", fact.to_hex())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment<'a> {
    Text(&'a str),
    Cite(NodeId),
}

/// Splits a paragraph into text and citation segments. Malformed markers
/// stay text.
pub fn parse_segments(paragraph: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = paragraph;
    while let Some(start) = rest.find(CITE_OPEN) {
        let after = &rest[start + CITE_OPEN.len()..];
        let parsed = after
            .find(CITE_CLOSE)
            .and_then(|end| after[..end].parse::<NodeId>().ok().map(|id| (id, end)));
        match parsed {
            Some((id, end)) => {
                if start > 0 {
                    out.push(Segment::Text(&rest[..start]));
                }
                out.push(Segment::Cite(id));
                rest = &after[end + CITE_CLOSE.len()..];
            }
            None => {
                let cut = start + CITE_OPEN.len();
                out.push(Segment::Text(&rest[..cut]));
                rest = &rest[cut..];
            }
        }
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest));
    }
    out
}

fn cited_in(paragraphs: &[String]) -> Vec<NodeId> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in paragraphs {
        for s in parse_segments(p) {
            if let Segment::Cite(id) = s {
                if seen.insert(id) {
                    out.push(id);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub kind: SectionKind,
    pub paragraphs: Vec<String>,
    /// Facts cited in the paragraphs, in first-citation order.
    pub cited: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub key: String,
    #[serde(flatten)]
    pub citation: Citation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDraft {
    pub title: String,
    pub sections: Vec<Section>,
    pub bibliography: BTreeMap<NodeId, BibEntry>,
}

impl ReportDraft {
    /// Every cited fact, across sections.
    pub fn cited(&self) -> BTreeSet<NodeId> {
        self.sections.iter().flat_map(|s| s.cited.iter().copied()).collect()
    }

    /// Every cited fact has a bibliography entry.
    pub fn validate(&self) -> Result<()> {
        match self.cited().into_iter().find(|id| !self.bibliography.contains_key(id)) {
            Some(id) => Err(GenerationError::UnknownFact(id)),
            None => Ok(()),
        }
    }
}

/// Cite key of a fact.
pub(crate) fn cite_key(fact: NodeId) -> String {
    format!("f{}", fact.to_hex())
}

/// Drops citations of facts outside the payload.
fn keep_known_citations(paragraph: &str, payload: &PayloadTable) -> String {
    parse_segments(paragraph)
        .into_iter()
        .map(|s| match s {
            Segment::Text(t) => t.to_string(),
            Segment::Cite(id) if payload.row(id).is_some() => cite_marker(id),
            Segment::Cite(_) => String::new(),
        })
        .collect()
}

/// Writes an introduction, one section per category (in mind-map order)
/// and a conclusion. Every category member is cited in its section.
pub fn write_report(
    mindmap: &MindMap,
    intent: &ReportIntent,
    payload: &PayloadTable,
    model: &dyn GenerationModel,
) -> Result<ReportDraft> {
    mindmap.validate(payload)?;
    let categories = mindmap.category_names();
    let everyone: Vec<&PayloadRow> = payload.rows.iter().collect();
    let mut sections = Vec::new();
    let mut section = |kind: SectionKind, heading: &str, members: Vec<&PayloadRow>| -> Result<()> {
        let request = SectionRequest {
            kind,
            heading,
            intent,
            payload,
            members: members.clone(),
            categories: &categories,
        };
        let mut paragraphs: Vec<String> = model
            .write_section(&request)?
            .iter()
            .map(|p| keep_known_citations(p, payload))
            .filter(|p| !p.trim().is_empty())
            .collect();
        if kind == SectionKind::Category {
            let cited: BTreeSet<NodeId> = cited_in(&paragraphs).into_iter().collect();
            let missing: Vec<String> = members
                .iter()
                .filter(|r| !cited.contains(&r.fact_id))
                .map(|r| format!("{} {}", r.title(), cite_marker(r.fact_id)))
                .collect();
            if !missing.is_empty() {
                paragraphs.push(format!("See also {}.", missing.join(", ")));
            }
        }
        sections.push(Section {
            heading: heading.to_string(),
            kind,
            cited: cited_in(&paragraphs),
            paragraphs,
        });
        Ok(())
    };
    section(SectionKind::Introduction, "Introduction", everyone.clone())?;
    for c in &mindmap.categories {
        let members = c.members.iter().filter_map(|m| payload.row(m.fact)).collect();
        section(SectionKind::Category, &c.name, members)?;
    }
    section(SectionKind::Conclusion, "Conclusion", everyone)?;

    let bibliography = sections
        .iter()
        .flat_map(|s| s.cited.iter())
        .filter_map(|id| {
            let row = payload.row(*id)?;
            Some((
                *id,
                BibEntry {
                    key: cite_key(*id),
                    citation: row.citation.clone(),
                },
            ))
        })
        .collect();
    Ok(ReportDraft {
        title: intent.report_kind.title().to_string(),
        sections,
        bibliography,
    })
}
