//! Forbidden-token scanner: whole-word `sorry`, `admit` and `axiom` in code.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::syntax::{is_ident_char, segments, SegmentKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForbiddenToken {
    Sorry,
    Admit,
    Axiom,
}

impl ForbiddenToken {
    pub const ALL: [ForbiddenToken; 3] = [Self::Sorry, Self::Admit, Self::Axiom];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sorry => "sorry",
            Self::Admit => "admit",
            Self::Axiom => "axiom",
        }
    }

    fn from_word(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == word)
    }
}

impl fmt::Display for ForbiddenToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForbiddenHit {
    pub token: ForbiddenToken,
    pub file: PathBuf,
    pub line: usize,
}

/// Occurrences of forbidden tokens in one source text, as `(token, line)`.
///
/// A word is a maximal run of identifier characters and dots with leading and
/// trailing dots trimmed, so `sorryFree`, `Foo.sorry` and `h.admit'` are not
/// hits while `exact sorry` and `(sorry)` are.
pub fn scan_source(src: &str) -> Vec<(ForbiddenToken, usize)> {
    let mut hits = Vec::new();
    let mut line = 1usize;
    for seg in segments(src) {
        let text = &src[seg.start..seg.end];
        if seg.kind != SegmentKind::Code {
            line += text.matches('\n').count();
            continue;
        }
        let mut word_start: Option<usize> = None;
        let mut word_line = line;
        for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
            if is_ident_char(c) || c == '.' {
                if word_start.is_none() {
                    word_start = Some(i);
                    word_line = line;
                }
            } else {
                if let Some(s) = word_start.take() {
                    let word = text[s..i].trim_matches('.');
                    if let Some(tok) = ForbiddenToken::from_word(word) {
                        hits.push((tok, word_line));
                    }
                }
                if c == '\n' {
                    line += 1;
                }
            }
        }
    }
    hits
}

/// Scans every file and reports hits in file order, then line order.
pub fn scan_forbidden<P: AsRef<Path>>(files: &[P]) -> std::io::Result<Vec<ForbiddenHit>> {
    let mut out = Vec::new();
    for file in files {
        let file = file.as_ref();
        let src = fs::read_to_string(file)?;
        out.extend(scan_source(&src).into_iter().map(|(token, line)| ForbiddenHit {
            token,
            file: file.to_path_buf(),
            line,
        }));
    }
    Ok(out)
}
