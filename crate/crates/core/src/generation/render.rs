use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{parse_segments, ReportDraft, Segment};
use super::{GenerationError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Latex,
}

impl ReportFormat {
    pub fn mime(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "text/markdown",
            ReportFormat::Latex => "application/x-tex",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Latex => "tex",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = GenerationError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "latex" | "tex" => Ok(ReportFormat::Latex),
            _ => Err(GenerationError::UnsupportedFormat(s.to_string())),
        }
    }
}

pub fn render_report(draft: &ReportDraft, format: ReportFormat) -> Result<String> {
    draft.validate()?;
    Ok(match format {
        ReportFormat::Markdown => markdown(draft),
        ReportFormat::Latex => latex(draft),
    })
}

fn key_of(draft: &ReportDraft, id: &crate::graph::NodeId) -> String {
    draft.bibliography[id].key.clone()
}

fn entry_text(authors: &[String], title: &str, year: Option<i64>) -> (String, String, String) {
    let authors = authors.join(", ");
    let year = year.map(|y| y.to_string()).unwrap_or_default();
    (authors, title.to_string(), year)
}

fn markdown(draft: &ReportDraft) -> String {
    let mut out = format!("# {}\n", draft.title);
    for s in &draft.sections {
        let _ = write!(out, "\n## {}\n", s.heading);
        for p in &s.paragraphs {
            out.push('\n');
            for seg in parse_segments(p) {
                match seg {
                    Segment::Text(t) => out.push_str(t),
                    Segment::Cite(id) => {
                        let _ = write!(out, "[@{}]", key_of(draft, &id));
                    }
                }
            }
            out.push('\n');
        }
    }
    if !draft.bibliography.is_empty() {
        out.push_str("\n---\n\n**References**\n\n");
        for e in draft.bibliography.values() {
            let (authors, title, year) = entry_text(&e.citation.authors, &e.citation.title, e.citation.year);
            let mut line = format!("- [@{}] ", e.key);
            if !authors.is_empty() {
                let _ = write!(line, "{authors}. ");
            }
            let _ = write!(line, "*{title}*.");
            if !year.is_empty() {
                let _ = write!(line, " {year}.");
            }
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Escapes LaTeX special characters in running text.
fn tex_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(c);
            }
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            _ => out.push(c),
        }
    }
    out
}

fn latex(draft: &ReportDraft) -> String {
    let mut out = String::new();
    out.push_str("\\documentclass{article}\n\\usepackage[utf8]{inputenc}\n\\usepackage[T1]{fontenc}\n");
    let _ = writeln!(out, "\\title{{{}}}", tex_escape(&draft.title));
    out.push_str("\\date{}\n\\begin{document}\n\\maketitle\n");
    for s in &draft.sections {
        let _ = writeln!(out, "\n\\section{{{}}}", tex_escape(&s.heading));
        for p in &s.paragraphs {
            out.push('\n');
            for seg in parse_segments(p) {
                match seg {
                    Segment::Text(t) => out.push_str(&tex_escape(t)),
                    Segment::Cite(id) => {
                        let _ = write!(out, "\\cite{{{}}}", key_of(draft, &id));
                    }
                }
            }
            out.push('\n');
        }
    }
    if !draft.bibliography.is_empty() {
        out.push_str("\n\\begin{thebibliography}{99}\n");
        for e in draft.bibliography.values() {
            let (authors, title, year) = entry_text(&e.citation.authors, &e.citation.title, e.citation.year);
            let _ = write!(out, "\\bibitem{{{}}} ", e.key);
            if !authors.is_empty() {
                let _ = write!(out, "{}. ", tex_escape(&authors));
            }
            let _ = write!(out, "\\emph{{{}}}.", tex_escape(&title));
            if !year.is_empty() {
                let _ = write!(out, " {year}.");
            }
            out.push('\n');
        }
        out.push_str("\\end{thebibliography}\n");
    }
    out.push_str("\n\\end{document}\n");
    out
}
