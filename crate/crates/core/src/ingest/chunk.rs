use serde::{Deserialize, Serialize};

use super::{IngestError, Result};

/// How far back a chunk boundary may move to land on whitespace.
const SNAP_WINDOW: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    /// `[start, end)` in chars of the extracted text.
    #[serde(rename = "span")]
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkParams {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        ChunkParams {
            size: 1200,
            overlap: 200,
        }
    }
}

/// Splits `text` into overlapping character windows.
///
/// Each window is `size` chars unless its end can move back (by at most 40
/// chars) onto a whitespace boundary. The next window starts exactly
/// `overlap` chars before the previous end, so with no snapping the stride
/// is `size - overlap`. The final window may be shorter.
pub fn chunk_text(doc_id: &str, text: &str, params: ChunkParams) -> Result<Vec<Chunk>> {
    let ChunkParams { size, overlap } = params;
    if size == 0 || overlap >= size {
        return Err(IngestError::InvalidParams(format!(
            "need 0 <= overlap < size, got size={size} overlap={overlap}"
        )));
    }
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = (start + size).min(n);
        if end < n {
            // keep end - overlap > start so the walk always advances
            let floor = (start + overlap + 1).max(end.saturating_sub(SNAP_WINDOW));
            if let Some(p) = (floor..=end).rev().find(|&p| chars[p].is_whitespace()) {
                end = p;
            }
        }
        chunks.push(Chunk {
            doc_id: doc_id.to_string(),
            index: chunks.len(),
            text: chars[start..end].iter().collect(),
            char_span: (start, end),
        });
        if end == n {
            break;
        }
        start = end - overlap;
    }
    Ok(chunks)
}
