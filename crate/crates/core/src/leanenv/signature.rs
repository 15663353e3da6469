//! Declaration discovery and header (signature) extraction for Lean 4 files.
//!
//! Comparison of signatures is textual: the header from the declaration
//! keyword up to its `:=` is stripped of comments, whitespace-normalized and
//! compared byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scan::{scan_source, ForbiddenToken};
use super::syntax::{is_ident_char, mask};

const DECL_KEYWORDS: &[&str] = &[
    "theorem", "lemma", "def", "abbrev", "instance", "example", "opaque", "axiom",
];

const MODIFIERS: &[&str] = &[
    "private",
    "protected",
    "noncomputable",
    "unsafe",
    "partial",
    "nonrec",
    "scoped",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclSignature {
    pub keyword: String,
    pub name: String,
    pub binders_and_hypotheses: String,
    pub conclusion: String,
    pub normalized: String,
}

impl DeclSignature {
    pub fn new(keyword: &str, name: &str, binders: &str, conclusion: &str) -> Self {
        let keyword = normalize(keyword);
        let name = normalize(name);
        let binders = normalize(binders);
        let conclusion = normalize(conclusion);
        let joined = if binders.is_empty() {
            format!("{keyword} {name} : {conclusion}")
        } else {
            format!("{keyword} {name} {binders} : {conclusion}")
        };
        Self {
            normalized: normalize(&joined),
            keyword,
            name,
            binders_and_hypotheses: binders,
            conclusion,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("declaration `{0}` not found")]
    DeclNotFound(String),
    #[error("declaration `{0}` is defined {1} times")]
    ParseAmbiguity(String, usize),
    #[error("declaration `{0}` has no `:=` boundary")]
    MissingBoundary(String),
}

/// A top-level declaration located in a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub keyword: String,
    /// Name as written; `None` for `example` and anonymous instances.
    pub name: Option<String>,
    /// Name prefixed with the enclosing namespaces.
    pub qualified_name: Option<String>,
    /// Byte offset of the keyword.
    pub start: usize,
    /// Byte offset of the `:=` (or `where` / pattern-match `|`), if any.
    pub boundary: Option<usize>,
    /// Byte offset where the next top-level command begins.
    pub end: usize,
}

impl Declaration {
    fn matches(&self, decl_name: &str) -> bool {
        self.name.as_deref() == Some(decl_name) || self.qualified_name.as_deref() == Some(decl_name)
    }
}

fn is_open(c: char) -> bool {
    matches!(c, '(' | '[' | '{' | '⦃' | '⟨' | '⟦')
}

fn is_close(c: char) -> bool {
    matches!(c, ')' | ']' | '}' | '⦄' | '⟩' | '⟧')
}

/// Collapses whitespace runs to one space, drops spaces just inside brackets
/// and trims. Idempotent.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            let after_open = out.chars().next_back().is_some_and(is_open);
            if !out.is_empty() && !after_open && !is_close(c) {
                out.push(' ');
            }
            pending_space = false;
        }
        out.push(c);
    }
    out
}

fn words_with_offsets(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        let rest = &line[pos..];
        let skip = rest.len() - rest.trim_start().len();
        let start = pos + skip;
        if start >= line.len() {
            return None;
        }
        let tail = &line[start..];
        let len = tail
            .char_indices()
            .find(|&(_, c)| c.is_whitespace())
            .map_or(tail.len(), |(i, _)| i);
        pos = start + len;
        Some((start, &line[start..start + len]))
    })
}

/// First byte offset of the declaration keyword on a command line, skipping
/// modifiers and `@[...]` attributes.
fn decl_keyword_on_line(line: &str) -> Option<(usize, &str)> {
    let mut rest_start = 0;
    loop {
        let rest = &line[rest_start..];
        let trimmed = rest.trim_start();
        let base = rest_start + rest.len() - trimmed.len();
        if trimmed.starts_with("@[") {
            let mut depth = 0i32;
            let mut close = None;
            for (i, c) in trimmed.char_indices() {
                match c {
                    '[' => depth += 1,
                    ']' => {
                        depth -= 1;
                        if depth == 0 {
                            close = Some(i);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            rest_start = base + close? + 1;
            continue;
        }
        let (off, word) = words_with_offsets(trimmed).next()?;
        let word_end = word
            .char_indices()
            .find(|&(_, c)| !is_ident_char(c))
            .map_or(word.len(), |(i, _)| i);
        let word = &word[..word_end];
        if MODIFIERS.contains(&word) {
            rest_start = base + off + word.len();
            continue;
        }
        return DECL_KEYWORDS
            .iter()
            .find(|k| **k == word)
            .map(|k| (base + off, *k));
    }
}

/// Finds every top-level declaration in `src`.
///
/// A command begins on a line whose first non-blank character (after
/// comment masking) sits in column 0; declaration bodies are expected to be
/// indented, which is how Lean sources are conventionally laid out.
pub fn declarations(src: &str) -> Vec<Declaration> {
    let masked = mask(src);
    let code = masked.code.as_str();

    let mut line_starts = vec![0usize];
    line_starts.extend(code.match_indices('\n').map(|(i, _)| i + 1));

    let mut namespaces: Vec<Option<String>> = Vec::new();
    let mut decls: Vec<Declaration> = Vec::new();

    for (li, &ls) in line_starts.iter().enumerate() {
        let le = line_starts.get(li + 1).map_or(code.len(), |&n| n - 1);
        let line = &code[ls..le];
        if line.is_empty() || line.starts_with(char::is_whitespace) {
            continue;
        }
        // A column-0 command closes the previous declaration.
        if let Some(prev) = decls.last_mut() {
            if prev.end == usize::MAX {
                prev.end = ls;
            }
        }
        let mut words = words_with_offsets(line).map(|(_, w)| w);
        match words.next() {
            Some("namespace") => {
                namespaces.push(words.next().map(str::to_owned));
                continue;
            }
            Some("section") | Some("mutual") => {
                namespaces.push(None);
                continue;
            }
            Some("end") => {
                namespaces.pop();
                continue;
            }
            _ => {}
        }
        let Some((kw_off, keyword)) = decl_keyword_on_line(line) else {
            continue;
        };
        let start = ls + kw_off;
        let after_kw = start + keyword.len();
        let name = if matches!(keyword, "example") {
            None
        } else {
            let rest = &code[after_kw..];
            let trimmed = rest.trim_start();
            let n_start = after_kw + rest.len() - trimmed.len();
            let n_len = trimmed
                .char_indices()
                .find(|&(_, c)| !(is_ident_char(c) || c == '.' || c == '«' || c == '»'))
                .map_or(trimmed.len(), |(i, _)| i);
            (n_len > 0).then(|| code[n_start..n_start + n_len].to_owned())
        };
        let qualified_name = name.as_ref().map(|n| {
            if let Some(stripped) = n.strip_prefix("_root_.") {
                return stripped.to_owned();
            }
            let mut parts: Vec<&str> = namespaces.iter().flatten().map(String::as_str).collect();
            parts.push(n);
            parts.join(".")
        });
        decls.push(Declaration {
            keyword: keyword.to_owned(),
            name,
            qualified_name,
            start,
            boundary: None,
            end: usize::MAX,
        });
    }
    if let Some(prev) = decls.last_mut() {
        if prev.end == usize::MAX {
            prev.end = code.len();
        }
    }
    for d in &mut decls {
        d.boundary = find_boundary(code, d.start, d.end);
    }
    decls
}

/// Offset of the `:=` / `where` / line-leading `|` that ends a header.
fn find_boundary(code: &str, start: usize, end: usize) -> Option<usize> {
    let text = &code[start..end];
    let mut depth = 0i32;
    let mut prev: Option<char> = None;
    let mut line_blank = false;
    for (i, c) in text.char_indices() {
        if is_open(c) {
            depth += 1;
        } else if is_close(c) {
            depth -= 1;
        } else if depth <= 0 {
            if c == ':' && text[i..].starts_with(":=") {
                return Some(start + i);
            }
            if c == '|' && line_blank && !text[i..].starts_with("||") {
                return Some(start + i);
            }
            if c == 'w'
                && text[i..].starts_with("where")
                && !prev.is_some_and(is_ident_char)
                && !text[i + 5..].starts_with(is_ident_char)
            {
                return Some(start + i);
            }
        }
        if c == '\n' {
            line_blank = true;
        } else if !c.is_whitespace() {
            line_blank = false;
        }
        prev = Some(c);
    }
    None
}

/// Splits `text` (a header without the keyword and name) at its first
/// depth-0 colon that is not part of `:=`.
fn split_binders(text: &str) -> (usize, Option<usize>) {
    let mut depth = 0i32;
    for (i, c) in text.char_indices() {
        if is_open(c) {
            depth += 1;
        } else if is_close(c) {
            depth -= 1;
        } else if c == ':' && depth == 0 && !text[i..].starts_with(":=") {
            return (i, Some(i + 1));
        }
    }
    (text.len(), None)
}

fn signature_of(src: &str, masked_wc: &str, d: &Declaration) -> Result<DeclSignature, SignatureError> {
    let label = d.name.clone().unwrap_or_else(|| d.keyword.clone());
    let boundary = d
        .boundary
        .ok_or_else(|| SignatureError::MissingBoundary(label.clone()))?;
    debug_assert_eq!(src.len(), masked_wc.len());
    let header = &masked_wc[d.start..boundary];
    let after_kw = &header[d.keyword.len()..];
    let (name, rest) = match &d.name {
        Some(n) => {
            let idx = after_kw.find(n.as_str()).unwrap_or(0);
            (n.as_str(), &after_kw[idx + n.len()..])
        }
        None => ("", after_kw),
    };
    let (colon, concl_start) = split_binders(rest);
    let binders = &rest[..colon];
    let conclusion = concl_start.map_or("", |s| &rest[s..]);
    Ok(DeclSignature::new(&d.keyword, name, binders, conclusion))
}

/// Extracts the normalized header of the declaration called `decl_name`.
pub fn extract_signature(src: &str, decl_name: &str) -> Result<DeclSignature, SignatureError> {
    let decls = declarations(src);
    let found: Vec<&Declaration> = decls.iter().filter(|d| d.matches(decl_name)).collect();
    match found.as_slice() {
        [] => Err(SignatureError::DeclNotFound(decl_name.to_owned())),
        [d] => {
            let masked = mask(src);
            signature_of(src, &masked.without_comments, d)
        }
        many => Err(SignatureError::ParseAmbiguity(decl_name.to_owned(), many.len())),
    }
}

/// A declaration whose body still contains `sorry`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SorryDecl {
    pub name: String,
    pub qualified_name: String,
    pub signature: DeclSignature,
    /// Body text after `:=`, comments kept, surrounding whitespace trimmed.
    pub body: String,
}

/// Every named declaration in `src` whose body contains a code-level `sorry`.
pub fn sorry_declarations(src: &str) -> Vec<SorryDecl> {
    let masked = mask(src);
    let mut out = Vec::new();
    for d in declarations(src) {
        let (Some(name), Some(qualified), Some(boundary)) =
            (d.name.as_ref(), d.qualified_name.as_ref(), d.boundary)
        else {
            continue;
        };
        let body_start = if src[boundary..].starts_with(":=") {
            boundary + 2
        } else {
            boundary
        };
        let body = &src[body_start..d.end];
        let has_sorry = scan_source(body)
            .iter()
            .any(|(t, _)| *t == ForbiddenToken::Sorry);
        if !has_sorry {
            continue;
        }
        if let Ok(signature) = signature_of(src, &masked.without_comments, &d) {
            out.push(SorryDecl {
                name: name.clone(),
                qualified_name: qualified.clone(),
                signature,
                body: body.trim().to_owned(),
            });
        }
    }
    out
}
