//! Small text utilities shared by the extractive provider, the embedder,
//! title normalization and intent interpretation.

use std::collections::BTreeSet;

// includes request verbs and filler that appear in extraction queries and
// report instructions without naming content
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "across", "address", "addressing", "after", "all", "also", "an",
    "and", "any", "are", "as", "at", "be", "been", "being", "between", "both", "but", "by",
    "can", "could", "describe", "did", "do", "does", "each", "extract", "focus", "focusing",
    "for", "from", "give", "had", "has", "have", "how", "i", "identify", "if", "in", "into",
    "is", "it", "its", "list", "main", "me", "more", "most", "my", "no", "not", "of", "on",
    "or", "other", "our", "out", "over", "paper", "papers", "please", "so", "some", "such",
    "summarise", "summarize", "than", "that", "the", "their", "them", "then", "there", "these",
    "they", "this", "those", "through", "to", "under", "up", "us", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "why", "will", "with", "would", "write",
    "you", "your",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercased alphanumeric runs.
pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// Suffix-stripping stemmer. Coarse, but stable and enough to make
/// "challenge", "challenges" and "challenging" agree.
pub fn stem(token: &str) -> String {
    const SUFFIXES: &[(&str, &str)] = &[
        ("ingly", ""),
        ("edly", ""),
        ("ings", ""),
        ("ing", ""),
        ("ions", ""),
        ("ion", ""),
        ("ies", "y"),
        ("es", ""),
        ("ed", ""),
        ("ly", ""),
        ("s", ""),
    ];
    let lower = token.to_lowercase();
    let mut out = lower.clone();
    for (suffix, replacement) in SUFFIXES {
        if *suffix == "s" && lower.ends_with("ss") {
            continue;
        }
        if let Some(base) = lower.strip_suffix(suffix) {
            if base.chars().count() >= 3 {
                out = format!("{base}{replacement}");
                break;
            }
        }
    }
    if out.chars().count() > 4 && out.ends_with('e') {
        out.pop();
    }
    out
}

/// Stems of the non-stopword tokens of `text`.
pub fn content_stems(text: &str) -> BTreeSet<String> {
    tokens(text)
        .filter(|t| !is_stopword(t))
        .map(|t| stem(&t))
        .collect()
}

/// Lowercase, punctuation stripped, whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    let stripped: String = title
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Lowercase alphanumerics only; the folding used by `contains` filters, so
/// that "Llama3" finds "The Llama 3 Herd of Models".
pub fn fold_alnum(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Splits text into sentences on terminal punctuation followed by
/// whitespace, and on line or page breaks.
pub fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\n' | '\r' | '\u{c}' => flush_sentence(&mut current, &mut out),
            '.' | '!' | '?' => {
                current.push(c);
                if chars.peek().is_none_or(|n| n.is_whitespace()) {
                    flush_sentence(&mut current, &mut out);
                }
            }
            _ => current.push(c),
        }
    }
    flush_sentence(&mut current, &mut out);
    out
}

fn flush_sentence(current: &mut String, out: &mut Vec<String>) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    current.clear();
}

/// English singular of a subnode name, used as the default Dimension label
/// ("Challenges" -> "Challenge").
pub fn singular(name: &str) -> String {
    if let Some(base) = name.strip_suffix("ies") {
        if base.len() >= 2 {
            return format!("{base}y");
        }
    }
    if name.ends_with("ss") || name.ends_with("us") || name.ends_with("is") {
        return name.to_string();
    }
    match name.strip_suffix('s') {
        Some(base) if base.len() >= 3 => base.to_string(),
        _ => name.to_string(),
    }
}
