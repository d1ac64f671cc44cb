//! A report job: intent → confirmed → mind map → confirmed → draft, with a
//! pause for the user after each proposal.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::intent::{interpret_intent, IntentEdit, ReportIntent, Vocabulary};
use super::mindmap::{build_mindmap, MindMap};
use super::model::GenerationModel;
use super::payload::{collect_payload, default_batch_size, PayloadTable};
use super::render::{render_report, ReportFormat};
use super::report::{write_report, ReportDraft};
use super::{GenerationError, Result};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStage {
    IntentProposed,
    IntentConfirmed,
    MindmapProposed,
    MindmapConfirmed,
    Drafted,
}

impl fmt::Display for JobStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            JobStage::IntentProposed => "intent_proposed",
            JobStage::IntentConfirmed => "intent_confirmed",
            JobStage::MindmapProposed => "mindmap_proposed",
            JobStage::MindmapConfirmed => "mindmap_confirmed",
            JobStage::Drafted => "drafted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportJob {
    pub selected: Vec<NodeId>,
    pub stage: JobStage,
    pub intent: ReportIntent,
    #[serde(default)]
    pub payload: Option<PayloadTable>,
    #[serde(default)]
    pub mindmap: Option<MindMap>,
    #[serde(default)]
    pub draft: Option<ReportDraft>,
}

impl ReportJob {
    /// Interprets `instruction` and pauses for confirmation.
    pub fn start(graph: &Graph, selected: Vec<NodeId>, instruction: &str, model: &dyn GenerationModel) -> Result<Self> {
        if selected.is_empty() {
            return Err(GenerationError::EmptySelection);
        }
        if let Some(unknown) = selected.iter().find(|id| graph.fact(**id).is_none()) {
            return Err(GenerationError::UnknownFact(*unknown));
        }
        let intent = interpret_intent(instruction, &Vocabulary::from_schema(graph.schema()), model)?;
        Ok(ReportJob {
            selected,
            stage: JobStage::IntentProposed,
            intent,
            payload: None,
            mindmap: None,
            draft: None,
        })
    }

    fn expect(&self, allowed: &[JobStage]) -> Result<()> {
        if allowed.contains(&self.stage) {
            Ok(())
        } else {
            Err(GenerationError::InvalidStage {
                expected: allowed.iter().map(ToString::to_string).collect::<Vec<_>>().join(" or "),
                actual: self.stage.to_string(),
            })
        }
    }

    /// Applies the user's edits and gathers the payload.
    pub fn confirm_intent(&mut self, graph: &Graph, edit: &IntentEdit) -> Result<&ReportIntent> {
        self.expect(&[JobStage::IntentProposed])?;
        let intent = self.intent.edited(edit, &Vocabulary::from_schema(graph.schema()))?;
        let payload = collect_payload(graph, &self.selected, &intent)?;
        self.intent = intent;
        self.payload = Some(payload);
        self.stage = JobStage::IntentConfirmed;
        Ok(&self.intent)
    }

    /// Builds (or rebuilds) the mind map and pauses for review.
    pub fn propose_mindmap(&mut self, model: &dyn GenerationModel, batch_size: Option<usize>) -> Result<&MindMap> {
        self.expect(&[JobStage::IntentConfirmed, JobStage::MindmapProposed])?;
        let payload = self.payload.as_ref().expect("payload exists once the intent is confirmed");
        let batch = batch_size.unwrap_or_else(|| default_batch_size(payload));
        let map = build_mindmap(payload, &self.intent, model, batch)?;
        self.stage = JobStage::MindmapProposed;
        Ok(self.mindmap.insert(map))
    }

    /// Accepts the proposed mind map, or a user-edited replacement that
    /// still satisfies the mind-map invariants.
    pub fn confirm_mindmap(&mut self, edited: Option<MindMap>) -> Result<&MindMap> {
        self.expect(&[JobStage::MindmapProposed])?;
        let payload = self.payload.as_ref().expect("payload exists once the intent is confirmed");
        if let Some(map) = edited {
            map.validate(payload)?;
            self.mindmap = Some(map);
        }
        self.stage = JobStage::MindmapConfirmed;
        Ok(self.mindmap.as_ref().expect("proposed map exists"))
    }

    /// Writes (or rewrites) the report.
    pub fn write_draft(&mut self, model: &dyn GenerationModel) -> Result<&ReportDraft> {
        self.expect(&[JobStage::MindmapConfirmed, JobStage::Drafted])?;
        let payload = self.payload.as_ref().expect("payload exists once the intent is confirmed");
        let map = self.mindmap.as_ref().expect("confirmed map exists");
        let draft = write_report(map, &self.intent, payload, model)?;
        self.stage = JobStage::Drafted;
        Ok(self.draft.insert(draft))
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        self.expect(&[JobStage::Drafted])?;
        render_report(self.draft.as_ref().expect("draft exists"), format)
    }
}
