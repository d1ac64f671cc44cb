use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::pdf::PdfTextExtractor;
use super::{IngestError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Pdf,
    Plaintext,
    StructuredJson,
}

impl DocKind {
    /// Kind implied by a file extension (`pdf`, `json`, `txt`/`md`/`text`).
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "pdf" => Some(DocKind::Pdf),
            "json" => Some(DocKind::StructuredJson),
            "txt" | "text" | "md" => Some(DocKind::Plaintext),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub kind: DocKind,
    pub bytes: Vec<u8>,
    pub source_uri: Option<String>,
}

impl RawDocument {
    pub fn new(doc_id: impl Into<String>, kind: DocKind, bytes: impl Into<Vec<u8>>) -> Self {
        RawDocument {
            doc_id: doc_id.into(),
            kind,
            bytes: bytes.into(),
            source_uri: None,
        }
    }

    /// Reads a file; the doc id is the file stem, the kind comes from the
    /// extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let kind = DocKind::from_extension(ext)
            .ok_or_else(|| IngestError::UnsupportedKind(ext.to_string()))?;
        let doc_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let bytes = std::fs::read(path)?;
        Ok(RawDocument {
            doc_id,
            kind,
            bytes,
            source_uri: Some(path.display().to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedText {
    pub text: String,
    pub metadata: BTreeMap<String, Value>,
}

/// Extracts UTF-8 text. Page breaks come out as `\f`.
///
/// Structured JSON documents yield `title + "\n\n" + body` and carry every
/// other top-level field in the metadata map.
pub fn extract_text(doc: &RawDocument, pdf: &dyn PdfTextExtractor) -> Result<ExtractedText> {
    let corrupt = |reason: &str| IngestError::CorruptDocument {
        doc_id: doc.doc_id.clone(),
        reason: reason.to_string(),
    };
    match doc.kind {
        DocKind::Plaintext => {
            let text = String::from_utf8(doc.bytes.clone()).map_err(|_| corrupt("not valid UTF-8"))?;
            Ok(ExtractedText {
                text,
                metadata: BTreeMap::new(),
            })
        }
        DocKind::StructuredJson => {
            let value: Value =
                serde_json::from_slice(&doc.bytes).map_err(|e| corrupt(&e.to_string()))?;
            let Value::Object(fields) = value else {
                return Err(corrupt("top-level JSON value is not an object"));
            };
            let title = fields.get("title").and_then(Value::as_str);
            let body = fields.get("body").and_then(Value::as_str);
            let text = match (title, body) {
                (Some(t), Some(b)) => format!("{t}\n\n{b}"),
                (Some(t), None) => t.to_string(),
                (None, Some(b)) => b.to_string(),
                (None, None) => String::new(),
            };
            let metadata = fields.into_iter().filter(|(k, _)| k != "body").collect();
            Ok(ExtractedText { text, metadata })
        }
        DocKind::Pdf => {
            let extracted = pdf.extract(&doc.bytes).map_err(|reason| corrupt(&reason))?;
            let mut metadata = BTreeMap::new();
            metadata.insert("page_count".to_string(), Value::from(extracted.pages.len()));
            Ok(ExtractedText {
                text: extracted.pages.join("\u{c}"),
                metadata,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::MinimalPdfExtractor;

    #[test]
    fn plaintext_is_identity() {
        let doc = RawDocument::new("d", DocKind::Plaintext, "hello");
        let out = extract_text(&doc, &MinimalPdfExtractor).unwrap();
        assert_eq!(out.text, "hello");
        assert!(out.metadata.is_empty());
    }

    #[test]
    fn structured_json_concatenates_title_and_body() {
        let doc = RawDocument::new(
            "d",
            DocKind::StructuredJson,
            r#"{"title":"T","body":"B"}"#,
        );
        let out = extract_text(&doc, &MinimalPdfExtractor).unwrap();
        assert_eq!(out.text, "T\n\nB");
        assert_eq!(out.metadata.len(), 1);
        assert_eq!(out.metadata["title"], Value::from("T"));
    }

    #[test]
    fn empty_pdf_is_corrupt() {
        let doc = RawDocument::new("d", DocKind::Pdf, Vec::new());
        assert!(matches!(
            extract_text(&doc, &MinimalPdfExtractor),
            Err(IngestError::CorruptDocument { .. })
        ));
    }

    #[test]
    fn invalid_inputs_are_corrupt() {
        let doc = RawDocument::new("d", DocKind::Plaintext, vec![0xff, 0xfe]);
        assert!(extract_text(&doc, &MinimalPdfExtractor).is_err());
        let doc = RawDocument::new("d", DocKind::StructuredJson, "[1,2]");
        assert!(extract_text(&doc, &MinimalPdfExtractor).is_err());
    }
}
