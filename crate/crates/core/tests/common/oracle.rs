//! Brute-force reference implementations and random input generators.
//! Nothing here calls into the code under test except to build inputs.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use proofloop::ledger::Frame;
use proofloop::plan::{AnchorDecl, DiffCause, PlanDiff, PlanNode, ProofPlan, Rewrite, StatementId};

pub fn anchor() -> AnchorDecl {
    AnchorDecl {
        decl_name: "t".into(),
        signature: "theorem t : True".into(),
        original_body: "by sorry".into(),
    }
}

/// A random DAG of 1..=max_nodes nodes in shuffled insertion order. Edges
/// only go from lower to higher rank; the rank of `Ni` is `i`.
pub fn random_dag(rng: &mut StdRng, max_nodes: usize) -> Vec<PlanNode> {
    let n = rng.random_range(1..=max_nodes);
    let density: f64 = rng.random_range(0.0..0.3);
    let mut nodes: Vec<PlanNode> = (0..n)
        .map(|i| {
            let deps: Vec<String> = (0..i).filter(|_| rng.random_bool(density)).map(|j| format!("N{j}")).collect();
            PlanNode::new(format!("N{i}"), format!("statement {i}")).with_deps(deps)
        })
        .collect();
    let target = rng.random_range(0..n);
    nodes[target].anchor = Some(anchor());
    nodes.shuffle(rng);
    nodes
}

fn rank(id: &StatementId) -> f64 {
    let s = id.as_str();
    // `Ni` has rank i, added `Ai_k` sits just above `Ni`.
    match s.split_once('_') {
        Some((a, k)) => a[1..].parse::<f64>().unwrap() + 0.5 + k.parse::<f64>().unwrap() / 1000.0,
        None => s[1..].parse().unwrap(),
    }
}

/// A random valid diff: removals (never the anchor) with the dependents
/// patched, rewrites of statement, sketch or deps, and added helpers.
/// Every edge still points from lower to higher rank, so the result is
/// acyclic.
pub fn random_diff(rng: &mut StdRng, plan: &ProofPlan) -> PlanDiff {
    let anchor_id = plan.anchor_node().id.clone();
    let ids: Vec<StatementId> = plan.nodes().iter().map(|n| n.id.clone()).collect();
    let mut diff = PlanDiff::new(DiffCause::DecompositionSplit);

    let removes: BTreeSet<StatementId> = ids
        .iter()
        .filter(|id| **id != anchor_id && rng.random_bool(0.08))
        .cloned()
        .collect();
    diff.removes = removes.iter().cloned().collect();
    let survivors: Vec<StatementId> = ids.iter().filter(|id| !removes.contains(*id)).cloned().collect();

    let mut adds: Vec<PlanNode> = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let Some(host) = survivors.get(rng.random_range(0..survivors.len().max(1))) else {
            break;
        };
        let r = rank(host);
        let id = StatementId::from(format!("A{}_{}", r.floor() as u64, adds.len() + 1));
        let deps: Vec<StatementId> = survivors
            .iter()
            .chain(adds.iter().map(|a| &a.id))
            .filter(|d| rank(d) < rank(&id) && rng.random_bool(0.2))
            .cloned()
            .collect();
        adds.push(PlanNode::new(id, "helper").with_deps(deps));
    }

    for id in &survivors {
        let node = plan.get(id).unwrap();
        let touches_removed = node.deps.iter().any(|d| removes.contains(d));
        if !touches_removed && !rng.random_bool(0.15) {
            continue;
        }
        let mut rw = Rewrite {
            id: id.clone(),
            informal: None,
            sketch: None,
            deps: None,
        };
        let mut deps: Vec<StatementId> = node.deps.iter().filter(|d| !removes.contains(*d)).cloned().collect();
        match rng.random_range(0..4) {
            0 => rw.informal = Some(format!("{} (revised)", node.informal)),
            1 => rw.sketch = Some("new sketch".into()),
            2 => {
                let candidates: Vec<&StatementId> = survivors
                    .iter()
                    .chain(adds.iter().map(|a| &a.id))
                    .filter(|d| rank(d) < rank(id) && !deps.contains(d))
                    .collect();
                if let Some(extra) = candidates.get(rng.random_range(0..candidates.len().max(1))) {
                    deps.push((*extra).clone());
                }
            }
            _ => rw.informal = Some(node.informal.clone()),
        }
        if touches_removed || deps != node.deps {
            rw.deps = Some(deps);
        }
        diff.rewrites.push(rw);
    }
    diff.adds = adds;
    diff
}

/// Nodes of the old plan that survive and either had a rewrite change
/// something, or transitively depend (in the new graph) on a node whose
/// statement or deps changed or on a removed node.
pub fn invalidation_oracle(old: &ProofPlan, new_nodes: &[PlanNode], diff: &PlanDiff) -> BTreeSet<StatementId> {
    let mut seeds: BTreeSet<StatementId> = diff.removes.iter().cloned().collect();
    let mut changed = BTreeSet::new();
    for rw in &diff.rewrites {
        let before = old.get(&rw.id).unwrap();
        let stmt = rw.informal.as_ref().is_some_and(|s| *s != before.informal);
        let deps = rw.deps.as_ref().is_some_and(|d| *d != before.deps);
        let sketch = rw.sketch.as_ref().is_some_and(|s| *s != before.sketch);
        if stmt || deps {
            seeds.insert(rw.id.clone());
        }
        if stmt || deps || sketch {
            changed.insert(rw.id.clone());
        }
    }
    let deps_of: BTreeMap<&StatementId, &Vec<StatementId>> = new_nodes.iter().map(|n| (&n.id, &n.deps)).collect();
    let mut out = BTreeSet::new();
    for n in new_nodes {
        if old.get(&n.id).is_none() {
            continue;
        }
        if changed.contains(&n.id) {
            out.insert(n.id.clone());
            continue;
        }
        // Depth-first over everything n transitively uses.
        let mut stack: Vec<&StatementId> = n.deps.iter().collect();
        let mut seen = BTreeSet::new();
        while let Some(d) = stack.pop() {
            if !seen.insert(d) {
                continue;
            }
            if seeds.contains(d) {
                out.insert(n.id.clone());
                break;
            }
            if let Some(ds) = deps_of.get(d) {
                stack.extend(ds.iter());
            }
        }
    }
    out
}

/// Longest path from any source, by relaxing every edge |V| times.
pub fn longest_path_oracle(frame: &Frame) -> BTreeMap<StatementId, usize> {
    let mut level: BTreeMap<StatementId, usize> = frame.node_states.iter().map(|(id, _)| (id.clone(), 0)).collect();
    for _ in 0..frame.node_states.len() {
        for (d, n) in &frame.edges {
            let candidate = level[d] + 1;
            if candidate > level[n] {
                level.insert(n.clone(), candidate);
            }
        }
    }
    level
}

pub fn random_frame(rng: &mut StdRng, max_nodes: usize) -> Frame {
    let nodes = random_dag(rng, max_nodes);
    let plan = ProofPlan::create(nodes).unwrap();
    Frame::of_plan(0, &plan)
}

// ---------------------------------------------------------------------------
// Lean scanner oracle.

const CODE_WORDS: &[&str] = &[
    "sorry", "admit", "axiom", "sorryFree", "Foo.sorry", "h.admit'", "admit'", "sorry!", "axioms", "x", "theorem",
    "t", ":", ":=", "by", "exact", "(", ")", "⟨", "⟩", ",", "+", "1", "simp", "Nat.succ", "sorry.", ".admit",
];
const TEXT_WORDS: &[&str] = &["sorry", "admit", "axiom", "--", "-", "/", "x", "'", "\"", "(", "⟩", "ok"];

/// A random file and the forbidden words a correct scanner reports, as
/// `(word, line)`, known from construction.
pub fn random_lean_file(rng: &mut StdRng) -> (String, Vec<(String, usize)>) {
    let mut src = String::new();
    let mut expect = Vec::new();
    let line = |s: &str| s.matches('\n').count() + 1;
    for _ in 0..rng.random_range(0..60) {
        match rng.random_range(0..10) {
            0..=4 => {
                let w = CODE_WORDS[rng.random_range(0..CODE_WORDS.len())];
                let bare = w.trim_matches('.');
                if matches!(bare, "sorry" | "admit" | "axiom") {
                    expect.push((bare.to_owned(), line(&src)));
                }
                src.push_str(w);
            }
            5 => {
                src.push_str("-- ");
                src.push_str(&text(rng, false));
                src.push('\n');
            }
            6 => src.push_str(&block_comment(rng, 0)),
            7 => src.push_str(&string_literal(rng)),
            8 => src.push_str(["'a'", "'\\n'", "'\\''", "'-'", "'\"'"][rng.random_range(0..5)]),
            _ => src.push('\n'),
        }
        src.push(if rng.random_bool(0.2) { '\n' } else { ' ' });
    }
    (src, expect)
}

fn text(rng: &mut StdRng, newlines: bool) -> String {
    let mut s = String::new();
    for _ in 0..rng.random_range(0..6) {
        let w = TEXT_WORDS[rng.random_range(0..TEXT_WORDS.len())];
        s.push_str(w);
        s.push(if newlines && rng.random_bool(0.3) { '\n' } else { ' ' });
    }
    s
}

fn block_comment(rng: &mut StdRng, depth: usize) -> String {
    let mut s = String::from(["/- ", "/-- ", "/-! "][rng.random_range(0..3)]);
    for _ in 0..rng.random_range(0..4) {
        if depth < 3 && rng.random_bool(0.3) {
            s.push_str(&block_comment(rng, depth + 1));
        } else {
            // Text words may contain `-` and `/` but the separators keep them
            // from forming `-/` or `/-`.
            s.push_str(&text(rng, true));
        }
        s.push(' ');
    }
    s.push_str(" -/");
    s
}

fn string_literal(rng: &mut StdRng) -> String {
    let mut s = String::from("\"");
    for _ in 0..rng.random_range(0..6) {
        match rng.random_range(0..6) {
            0 => s.push_str("\\\""),
            1 => s.push_str("\\\\"),
            2 => s.push_str("\\n"),
            3 => s.push_str("-- /- "),
            _ => s.push_str(["sorry ", "admit ", "axiom ", "ok "][rng.random_range(0..4)]),
        }
    }
    s.push('"');
    s
}

fn ident(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '!' | '?')
}

/// Character-level reference scanner: a single pass with explicit state
/// for line comments, nested block comments, strings with escapes and char
/// literals. Masked characters become spaces; words are then split on
/// anything that is neither an identifier character nor a dot.
pub fn char_oracle(src: &str) -> Vec<(String, usize)> {
    #[derive(PartialEq)]
    enum St {
        Code,
        Line,
        Block(usize),
        Str,
        Char,
    }
    let cs: Vec<char> = src.chars().collect();
    let mut code = String::new();
    let mut st = St::Code;
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        let next = cs.get(i + 1).copied();
        match st {
            St::Code => {
                if c == '-' && next == Some('-') {
                    st = St::Line;
                    code.push(' ');
                } else if c == '/' && next == Some('-') {
                    st = St::Block(1);
                    code.push_str("  ");
                    i += 2;
                    continue;
                } else if c == '"' {
                    st = St::Str;
                    code.push(' ');
                } else if c == '\'' && !(i > 0 && ident(cs[i - 1])) && is_char_lit(&cs[i..]) {
                    st = St::Char;
                    code.push(' ');
                } else {
                    code.push(c);
                }
            }
            St::Line => {
                if c == '\n' {
                    st = St::Code;
                    code.push('\n');
                } else {
                    code.push(' ');
                }
            }
            St::Block(d) => {
                if c == '/' && next == Some('-') {
                    st = St::Block(d + 1);
                    code.push_str("  ");
                    i += 2;
                    continue;
                }
                if c == '-' && next == Some('/') {
                    st = if d == 1 { St::Code } else { St::Block(d - 1) };
                    code.push_str("  ");
                    i += 2;
                    continue;
                }
                code.push(if c == '\n' { '\n' } else { ' ' });
            }
            St::Str => {
                if c == '\\' {
                    code.push(' ');
                    if let Some(n) = next {
                        code.push(if n == '\n' { '\n' } else { ' ' });
                    }
                    i += 2;
                    continue;
                }
                if c == '"' {
                    st = St::Code;
                }
                code.push(if c == '\n' { '\n' } else { ' ' });
            }
            St::Char => {
                if c == '\\' {
                    code.push_str("  ");
                    i += 2;
                    continue;
                }
                if c == '\'' {
                    st = St::Code;
                }
                code.push(' ');
            }
        }
        i += 1;
    }
    let mut out = Vec::new();
    for (ln, l) in code.split('\n').enumerate() {
        for w in l.split(|c: char| !(ident(c) || c == '.')) {
            let w = w.trim_matches('.');
            if matches!(w, "sorry" | "admit" | "axiom") {
                out.push((w.to_owned(), ln + 1));
            }
        }
    }
    out
}

/// `'x'` or `'\?'`-style escapes, as the generator emits them.
fn is_char_lit(cs: &[char]) -> bool {
    match cs.get(1) {
        Some('\\') => cs.get(3) == Some(&'\''),
        Some('\'') | Some('\n') | None => false,
        Some(_) => cs.get(2) == Some(&'\''),
    }
}

// ---------------------------------------------------------------------------
// Statistics oracle: textbook two-pass formulas.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
