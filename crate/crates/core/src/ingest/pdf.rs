//! Text-layer PDF extraction. No OCR, no layout reconstruction: it walks the
//! content streams (plain or FlateDecode) and collects the strings shown by
//! the text operators, one entry per content stream.

use std::io::Read;

use flate2::read::ZlibDecoder;
use regex::bytes::Regex;
use std::sync::LazyLock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdfText {
    pub pages: Vec<String>,
}

/// Plug point for a real PDF text extractor.
pub trait PdfTextExtractor: Send + Sync {
    fn extract(&self, bytes: &[u8]) -> Result<PdfText, String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MinimalPdfExtractor;

static PAGE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"/Type\s*/Page\b").unwrap());
static STREAM_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)obj(.*?)stream\r?\n").unwrap());

impl PdfTextExtractor for MinimalPdfExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<PdfText, String> {
        if !bytes.starts_with(b"%PDF-") {
            return Err("missing %PDF header".into());
        }
        let page_count = PAGE_RE.find_iter(bytes).count();
        let mut pages = Vec::new();
        for caps in STREAM_RE.captures_iter(bytes) {
            let dict = caps.get(1).expect("group 1").as_bytes();
            let start = caps.get(0).expect("group 0").end();
            let Some(len) = find(&bytes[start..], b"endstream") else {
                return Err("unterminated stream".into());
            };
            let raw = &bytes[start..start + len];
            if contains(dict, b"/Subtype") {
                continue;
            }
            let data = if contains(dict, b"/FlateDecode") {
                let mut out = Vec::new();
                if ZlibDecoder::new(raw).read_to_end(&mut out).is_err() {
                    continue;
                }
                out
            } else if contains(dict, b"/Filter") {
                continue;
            } else {
                raw.to_vec()
            };
            if contains(&data, b"BT") {
                pages.push(content_text(&data));
            }
        }
        if page_count == 0 && pages.is_empty() {
            return Err("no pages".into());
        }
        while pages.len() < page_count {
            pages.push(String::new());
        }
        Ok(PdfText { pages })
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    find(haystack, needle).is_some()
}

enum Operand {
    Str(String),
    Num(f64),
    ArrayStart,
    Array(Vec<Operand>),
    Other,
}

fn content_text(data: &[u8]) -> String {
    let mut out = String::new();
    let mut stack: Vec<Operand> = Vec::new();
    let mut i = 0;
    while i < data.len() {
        let c = data[i];
        match c {
            b'(' => {
                let (s, next) = literal_string(data, i + 1);
                stack.push(Operand::Str(s));
                i = next;
            }
            b'<' if data.get(i + 1) == Some(&b'<') => {
                stack.push(Operand::Other);
                i += 2;
            }
            b'>' if data.get(i + 1) == Some(&b'>') => i += 2,
            b'<' => {
                let end = data[i..].iter().position(|&b| b == b'>').map_or(data.len(), |p| i + p);
                stack.push(Operand::Str(hex_string(&data[i + 1..end])));
                i = end + 1;
            }
            b'[' => {
                stack.push(Operand::ArrayStart);
                i += 1;
            }
            b']' => {
                let mut items = Vec::new();
                while let Some(op) = stack.pop() {
                    if matches!(op, Operand::ArrayStart) {
                        break;
                    }
                    items.push(op);
                }
                items.reverse();
                stack.push(Operand::Array(items));
                i += 1;
            }
            b'%' => {
                while i < data.len() && data[i] != b'\n' && data[i] != b'\r' {
                    i += 1;
                }
            }
            b'/' => {
                i += 1;
                while i < data.len() && is_regular(data[i]) {
                    i += 1;
                }
                stack.push(Operand::Other);
            }
            c if c.is_ascii_whitespace() => i += 1,
            c if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' => {
                let start = i;
                i += 1;
                while i < data.len() && (data[i].is_ascii_digit() || data[i] == b'.') {
                    i += 1;
                }
                let n = std::str::from_utf8(&data[start..i])
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(0.0);
                stack.push(Operand::Num(n));
            }
            _ => {
                let start = i;
                while i < data.len() && is_regular(data[i]) {
                    i += 1;
                }
                if i == start {
                    i += 1;
                    continue;
                }
                apply_operator(&data[start..i], &mut stack, &mut out);
                stack.clear();
            }
        }
    }
    tidy(&out)
}

fn apply_operator(op: &[u8], stack: &mut [Operand], out: &mut String) {
    match op {
        b"Tj" => {
            if let Some(Operand::Str(s)) = stack.last() {
                out.push_str(s);
            }
        }
        b"'" | b"\"" => {
            out.push('\n');
            if let Some(Operand::Str(s)) = stack.last() {
                out.push_str(s);
            }
        }
        b"TJ" => {
            if let Some(Operand::Array(items)) = stack.last() {
                for item in items {
                    match item {
                        Operand::Str(s) => out.push_str(s),
                        Operand::Num(n) if *n < -250.0 => out.push(' '),
                        _ => {}
                    }
                }
            }
        }
        b"Td" | b"TD" => {
            let dy = match stack {
                [.., Operand::Num(_), Operand::Num(dy)] => *dy,
                _ => 0.0,
            };
            out.push(if dy != 0.0 { '\n' } else { ' ' });
        }
        b"T*" | b"Tm" | b"ET" => out.push('\n'),
        _ => {}
    }
}

fn is_regular(b: u8) -> bool {
    !b.is_ascii_whitespace() && !b"()<>[]{}/%".contains(&b)
}

fn literal_string(data: &[u8], mut i: usize) -> (String, usize) {
    let mut depth = 1;
    let mut bytes = Vec::new();
    while i < data.len() {
        let c = data[i];
        match c {
            b'\\' => {
                i += 1;
                let Some(&e) = data.get(i) else { break };
                match e {
                    b'n' => bytes.push(b'\n'),
                    b'r' => bytes.push(b'\r'),
                    b't' => bytes.push(b'\t'),
                    b'b' => bytes.push(8),
                    b'f' => bytes.push(12),
                    b'\r' | b'\n' => {}
                    b'0'..=b'7' => {
                        let mut v = 0u32;
                        let mut n = 0;
                        while n < 3 && i < data.len() && (b'0'..=b'7').contains(&data[i]) {
                            v = v * 8 + u32::from(data[i] - b'0');
                            i += 1;
                            n += 1;
                        }
                        bytes.push(v as u8);
                        continue;
                    }
                    other => bytes.push(other),
                }
            }
            b'(' => {
                depth += 1;
                bytes.push(c);
            }
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return (decode(&bytes), i + 1);
                }
                bytes.push(c);
            }
            _ => bytes.push(c),
        }
        i += 1;
    }
    (decode(&bytes), i)
}

fn hex_string(digits: &[u8]) -> String {
    let clean: Vec<u8> = digits.iter().copied().filter(u8::is_ascii_hexdigit).collect();
    let mut bytes = Vec::with_capacity(clean.len() / 2 + 1);
    for pair in clean.chunks(2) {
        let hi = (pair[0] as char).to_digit(16).unwrap_or(0);
        let lo = pair.get(1).and_then(|c| (*c as char).to_digit(16)).unwrap_or(0);
        bytes.push((hi * 16 + lo) as u8);
    }
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> String {
    if let Some(rest) = bytes.strip_prefix(&[0xfe, 0xff]) {
        let units: Vec<u16> = rest
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
            .collect();
        return String::from_utf16_lossy(&units);
    }
    bytes.iter().map(|&b| b as char).collect()
}

fn tidy(raw: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    for line in raw.lines() {
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            continue;
        }
        lines.push(collapsed);
    }
    lines.join("\n")
}
