//! Comment- and string-aware segmentation of Lean 4 source text.
//!
//! Everything that inspects Lean files (the forbidden-token scanner, the
//! declaration-header extractor, the input-file parser) works on top of the
//! segments produced here, so that a `sorry` inside `/- ... -/` or inside a
//! string literal is never mistaken for code.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Code,
    LineComment,
    /// `/- ... -/`, nestable; includes doc comments `/-- -/` and `/-! -/`.
    BlockComment,
    /// `"..."` with escapes, or a raw string `r#"..."#`.
    Str,
    /// `'a'`, `'\n'`.
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn is_comment(&self) -> bool {
        matches!(self.kind, SegmentKind::LineComment | SegmentKind::BlockComment)
    }
}

/// Characters that may continue a Lean identifier.
pub fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '!' || c == '?'
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }
}

/// Splits `src` into maximal runs of code, comments, string and char literals.
///
/// Unterminated comments and strings run to the end of the input. The
/// returned segments cover the whole input without gaps.
pub fn segments(src: &str) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    let mut cur = Cursor { src, pos: 0 };
    let mut code_start = 0;
    let mut prev: Option<char> = None;

    let push = |out: &mut Vec<Segment>, kind, start, end| {
        if start < end {
            out.push(Segment { kind, start, end });
        }
    };

    while let Some(c) = cur.peek() {
        let start = cur.pos;
        let kind = if cur.starts_with("--") {
            lex_line_comment(&mut cur);
            Some(SegmentKind::LineComment)
        } else if cur.starts_with("/-") {
            lex_block_comment(&mut cur);
            Some(SegmentKind::BlockComment)
        } else if c == '"' {
            lex_string(&mut cur);
            Some(SegmentKind::Str)
        } else if c == 'r' && !prev.is_some_and(is_ident_char) && raw_string_hashes(&cur).is_some() {
            lex_raw_string(&mut cur);
            Some(SegmentKind::Str)
        } else if c == '\'' && !prev.is_some_and(is_ident_char) && char_literal_len(&cur).is_some() {
            let len = char_literal_len(&cur).unwrap_or(0);
            cur.pos += len;
            Some(SegmentKind::Char)
        } else {
            None
        };

        match kind {
            Some(kind) => {
                push(&mut out, SegmentKind::Code, code_start, start);
                push(&mut out, kind, start, cur.pos);
                code_start = cur.pos;
                prev = src[..cur.pos].chars().next_back();
            }
            None => {
                cur.bump();
                prev = Some(c);
            }
        }
    }
    push(&mut out, SegmentKind::Code, code_start, src.len());
    out
}

fn lex_line_comment(cur: &mut Cursor<'_>) {
    while let Some(c) = cur.peek() {
        if c == '\n' {
            break;
        }
        cur.bump();
    }
}

fn lex_block_comment(cur: &mut Cursor<'_>) {
    cur.pos += 2;
    let mut depth = 1usize;
    while cur.peek().is_some() {
        if cur.starts_with("/-") {
            cur.pos += 2;
            depth += 1;
        } else if cur.starts_with("-/") {
            cur.pos += 2;
            depth -= 1;
            if depth == 0 {
                return;
            }
        } else {
            cur.bump();
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>) {
    cur.bump();
    while let Some(c) = cur.bump() {
        match c {
            '\\' => {
                cur.bump();
            }
            '"' => return,
            _ => {}
        }
    }
}

/// Number of `#` marks if the cursor sits on a raw-string opener `r#*"`.
fn raw_string_hashes(cur: &Cursor<'_>) -> Option<usize> {
    let rest = &cur.src[cur.pos + 1..];
    let hashes = rest.bytes().take_while(|&b| b == b'#').count();
    (rest.as_bytes().get(hashes) == Some(&b'"')).then_some(hashes)
}

fn lex_raw_string(cur: &mut Cursor<'_>) {
    let hashes = raw_string_hashes(cur).unwrap_or(0);
    cur.pos += 1 + hashes + 1;
    let closing: String = std::iter::once('"').chain(std::iter::repeat_n('#', hashes)).collect();
    match cur.src[cur.pos..].find(&closing) {
        Some(off) => cur.pos += off + closing.len(),
        None => cur.pos = cur.src.len(),
    }
}

/// Byte length of a char literal starting at the cursor, if there is one.
fn char_literal_len(cur: &Cursor<'_>) -> Option<usize> {
    let first = cur.peek_at(1)?;
    match first {
        '\\' => {
            // '\n', '\'', '\x41', '\u{1F600}'
            let rest = &cur.src[cur.pos + 2..];
            let close = rest.char_indices().skip(1).take(10).find(|&(_, c)| c == '\'')?;
            Some(2 + close.0 + 1)
        }
        '\'' | '\n' => None,
        c => (cur.peek_at(2)? == '\'').then(|| 1 + c.len_utf8() + 1),
    }
}

/// Two same-length views of a source file.
#[derive(Debug, Clone)]
pub struct Masked {
    /// Comments and the interiors of string/char literals replaced by spaces.
    /// Delimiters and newlines survive, so byte offsets and line numbers match
    /// the original.
    pub code: String,
    /// Only comments blanked; literal contents preserved.
    pub without_comments: String,
}

pub fn mask(src: &str) -> Masked {
    let segs = segments(src);
    let mut code = String::with_capacity(src.len());
    let mut without_comments = String::with_capacity(src.len());
    for seg in &segs {
        let text = &src[seg.start..seg.end];
        match seg.kind {
            SegmentKind::Code => {
                code.push_str(text);
                without_comments.push_str(text);
            }
            SegmentKind::LineComment | SegmentKind::BlockComment => {
                let blank = blank_out(text);
                code.push_str(&blank);
                without_comments.push_str(&blank);
            }
            SegmentKind::Str | SegmentKind::Char => {
                let delim = text.chars().next().map_or(0, char::len_utf8);
                let last = text.chars().next_back().map_or(0, char::len_utf8);
                if text.len() >= delim + last && text.len() > 1 {
                    code.push_str(&text[..delim]);
                    code.push_str(&blank_out(&text[delim..text.len() - last]));
                    code.push_str(&text[text.len() - last..]);
                } else {
                    code.push_str(&blank_out(text));
                }
                without_comments.push_str(text);
            }
        }
    }
    Masked {
        code,
        without_comments,
    }
}

/// Same byte length, newlines kept, everything else a space.
fn blank_out(text: &str) -> String {
    text.bytes()
        .map(|b| if b == b'\n' { '\n' } else { ' ' })
        .collect()
}

/// 1-based line number of a byte offset.
pub fn line_of(src: &str, offset: usize) -> usize {
    src.as_bytes()[..offset.min(src.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(SegmentKind, &str)> {
        segments(src)
            .into_iter()
            .map(|s| (s.kind, &src[s.start..s.end]))
            .collect()
    }

    #[test]
    fn line_comment_runs_to_newline() {
        let k = kinds("a -- sorry\nb");
        assert_eq!(
            k,
            vec![
                (SegmentKind::Code, "a "),
                (SegmentKind::LineComment, "-- sorry"),
                (SegmentKind::Code, "\nb"),
            ]
        );
    }

    #[test]
    fn nested_block_comments() {
        let k = kinds("x /- a /- b -/ c -/ y");
        assert_eq!(k[1], (SegmentKind::BlockComment, "/- a /- b -/ c -/"));
        assert_eq!(k[2], (SegmentKind::Code, " y"));
    }

    #[test]
    fn string_escapes_do_not_terminate() {
        let k = kinds(r#"s := "a \" -- b" sorry"#);
        assert_eq!(k[1], (SegmentKind::Str, r#""a \" -- b""#));
        assert_eq!(k[2], (SegmentKind::Code, " sorry"));
    }

    #[test]
    fn raw_string() {
        let k = kinds(r###"x r#"a " b"# y"###);
        assert_eq!(k[1], (SegmentKind::Str, r###"r#"a " b"#"###));
    }

    #[test]
    fn char_literal_with_quote() {
        let k = kinds("c = '\"' sorry");
        assert_eq!(k[1], (SegmentKind::Char, "'\"'"));
        assert_eq!(k[2], (SegmentKind::Code, " sorry"));
    }

    #[test]
    fn primes_are_identifiers_not_chars() {
        let k = kinds("h' x'");
        assert_eq!(k, vec![(SegmentKind::Code, "h' x'")]);
    }

    #[test]
    fn unterminated_comment_runs_to_eof() {
        let k = kinds("a /- never closed\n sorry");
        assert_eq!(k.len(), 2);
        assert_eq!(k[1].0, SegmentKind::BlockComment);
    }

    #[test]
    fn mask_preserves_length_and_lines() {
        let src = "theorem t /- é -/ : \"sorry\" := by\n  -- x\n  rfl";
        let m = mask(src);
        assert_eq!(m.code.len(), src.len());
        assert_eq!(m.without_comments.len(), src.len());
        assert!(!m.code.contains("sorry"));
        assert!(m.without_comments.contains("\"sorry\""));
        assert_eq!(m.code.lines().count(), src.lines().count());
    }
}
