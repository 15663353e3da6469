//! Frame-sequence export.
//!
//! Text format, one block per frame, blocks separated by a blank line:
//!
//! ```text
//! frame 3 revision 1
//! 0 Lem_A formalized
//! 1 Thm_T not_yet
//! edge Lem_A Thm_T
//! ```
//!
//! Node lines are sorted by (level, id) and edge lines by (dependency,
//! dependent). The DOT format emits one `digraph` per frame with the same
//! ordering, nodes carrying a `class` attribute and a fill color per status
//! and one `rank=same` group per level.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{depth_layout, Frame, FrameStatus, LayoutCycle, RunLedger};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Text,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported trace format `{0}` (expected `text` or `dot`)")]
pub struct UnsupportedFormat(pub String);

impl FromStr for TraceFormat {
    type Err = UnsupportedFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(TraceFormat::Text),
            "dot" => Ok(TraceFormat::Dot),
            other => Err(UnsupportedFormat(other.to_owned())),
        }
    }
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Text => "txt",
            TraceFormat::Dot => "dot",
        }
    }
}

fn color(s: FrameStatus) -> &'static str {
    match s {
        FrameStatus::Formalized => "#3B5B92",
        FrameStatus::NotYet => "#B4B7BD",
        FrameStatus::Failing => "#B65F45",
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("ledger has no frames")]
    NoFrames,
    #[error(transparent)]
    Cycle(#[from] LayoutCycle),
}

struct Laid<'a> {
    frame: &'a Frame,
    /// `(level, id, status)` sorted.
    nodes: Vec<(usize, &'a str, FrameStatus)>,
    edges: Vec<(&'a str, &'a str)>,
}

fn lay_out(frame: &Frame) -> Result<Laid<'_>, LayoutCycle> {
    let levels = depth_layout(frame)?;
    let mut nodes: Vec<(usize, &str, FrameStatus)> = frame
        .node_states
        .iter()
        .map(|(id, s)| (levels[id], id.as_str(), *s))
        .collect();
    nodes.sort();
    let mut edges: Vec<(&str, &str)> = frame.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    edges.sort();
    Ok(Laid { frame, nodes, edges })
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn export_trace(ledger: &RunLedger, format: TraceFormat) -> Result<String, TraceError> {
    let frames: Vec<&Frame> = ledger.frames().collect();
    if frames.is_empty() {
        return Err(TraceError::NoFrames);
    }
    let mut out = String::new();
    for (i, frame) in frames.into_iter().enumerate() {
        let laid = lay_out(frame)?;
        match format {
            TraceFormat::Text => {
                if i > 0 {
                    out.push('\n');
                }
                render_text(&mut out, &laid);
            }
            TraceFormat::Dot => render_dot(&mut out, &laid),
        }
    }
    Ok(out)
}

fn render_text(out: &mut String, laid: &Laid<'_>) {
    let _ = writeln!(out, "frame {} revision {}", laid.frame.index, laid.frame.plan_revision);
    for (level, id, status) in &laid.nodes {
        let _ = writeln!(out, "{level} {id} {}", status.as_str());
    }
    for (a, b) in &laid.edges {
        let _ = writeln!(out, "edge {a} {b}");
    }
}

fn render_dot(out: &mut String, laid: &Laid<'_>) {
    let _ = writeln!(out, "digraph frame_{} {{", laid.frame.index);
    let _ = writeln!(out, "  rankdir=BT;");
    let _ = writeln!(
        out,
        "  label=\"frame {} revision {}\";",
        laid.frame.index, laid.frame.plan_revision
    );
    let _ = writeln!(out, "  node [shape=box, style=filled, fontcolor=white];");
    for (_, id, status) in &laid.nodes {
        let _ = writeln!(
            out,
            "  {} [class=\"{}\", fillcolor=\"{}\"];",
            dot_id(id),
            status.as_str(),
            color(*status)
        );
    }
    let mut level_start = 0;
    while level_start < laid.nodes.len() {
        let level = laid.nodes[level_start].0;
        let level_end = laid.nodes[level_start..]
            .iter()
            .position(|n| n.0 != level)
            .map_or(laid.nodes.len(), |p| level_start + p);
        let members: Vec<String> = laid.nodes[level_start..level_end].iter().map(|n| dot_id(n.1)).collect();
        let _ = writeln!(out, "  {{ rank=same; {}; }}", members.join("; "));
        level_start = level_end;
    }
    for (a, b) in &laid.edges {
        let _ = writeln!(out, "  {} -> {};", dot_id(a), dot_id(b));
    }
    let _ = writeln!(out, "}}");
}
