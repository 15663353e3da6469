//! `lake`-backed verifier.
//!
//! Builds run `lake build <module>` in the workspace root. Diagnostics are
//! read from the combined output using Lean's
//! `severity: file:line:col: message` shape; a `declaration uses 'sorry'`
//! warning is a sorry site. The axiom audit elaborates a small driver file
//! containing `#print axioms` through `lake env lean` and parses its answer,
//! which is one of
//!
//! ```text
//! 'Name' depends on axioms: [propext, Classical.choice, Quot.sound]
//! 'Name' does not depend on any axioms
//! ```

use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use wait_timeout::ChildExt;

use super::{BuildReport, BuildScope, SorrySite, Verifier, VerifierError, Workspace};

pub const DEFAULT_BUILD_TIMEOUT: Duration = Duration::from_secs(20 * 60);
const DRIVER_FILE: &str = ".proofloop/AxiomAudit.lean";

#[derive(Debug, Clone)]
pub struct LakeVerifier {
    lake: PathBuf,
    timeout: Duration,
}

fn on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(name))
        .find(|p| p.is_file())
}

impl LakeVerifier {
    /// Finds `lake` under `toolchain_root/bin`, then on `PATH`, then in
    /// `~/.elan/bin`.
    pub fn locate(toolchain_root: Option<&Path>, timeout: Duration) -> Result<Self, VerifierError> {
        let lake = match toolchain_root {
            Some(root) => {
                let p = root.join("bin").join("lake");
                if !p.is_file() {
                    return Err(VerifierError::ToolchainMissing(format!("{} does not exist", p.display())));
                }
                p
            }
            None => on_path("lake")
                .or_else(|| {
                    let home = std::env::var_os("HOME")?;
                    let p = PathBuf::from(home).join(".elan/bin/lake");
                    p.is_file().then_some(p)
                })
                .ok_or_else(|| VerifierError::ToolchainMissing("`lake` is not on PATH or in ~/.elan/bin".into()))?,
        };
        Ok(Self { lake, timeout })
    }

    pub fn with_lake(lake: impl Into<PathBuf>, timeout: Duration) -> Self {
        Self {
            lake: lake.into(),
            timeout,
        }
    }

    fn run(&self, ws: &Workspace, args: &[&str]) -> Result<(ExitStatus, String, Duration), VerifierError> {
        let started = Instant::now();
        let mut child = Command::new(&self.lake)
            .args(args)
            .current_dir(ws.root())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => VerifierError::ToolchainMissing(self.lake.display().to_string()),
                _ => VerifierError::Io(e),
            })?;
        // Drain both pipes concurrently so neither can fill up and stall the
        // child.
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        let err_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });
        let status = match child.wait_timeout(self.timeout)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                // Readers are left to finish on their own: grandchildren may
                // still hold the pipes open.
                return Err(VerifierError::BuildTimeout(self.timeout));
            }
        };
        let mut text = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
        let err = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
        if !err.is_empty() {
            if !text.is_empty() && !text.ends_with('\n') {
                text.push('\n');
            }
            text.push_str(&err);
        }
        Ok((status, text, started.elapsed()))
    }
}

fn diagnostic_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)^(?:[^\w\n]*\s)?(warning|error): (.+?):(\d+):(\d+): (.*)$").expect("valid regex")
    })
}

/// Sorry sites and error messages in build output.
pub fn parse_build_output(text: &str) -> (Vec<SorrySite>, Vec<String>) {
    let mut sites = Vec::new();
    let mut errors = Vec::new();
    for cap in diagnostic_re().captures_iter(text) {
        let file = cap[2].trim_start_matches("./");
        let line: usize = cap[3].parse().unwrap_or(0);
        let msg = cap[5].trim();
        match &cap[1] {
            "warning" if msg.starts_with("declaration uses 'sorry'") => sites.push(SorrySite {
                file: PathBuf::from(file),
                line,
            }),
            "error" => errors.push(msg.to_owned()),
            _ => {}
        }
    }
    (sites, errors)
}

/// Axiom list printed by `#print axioms decl_name`.
pub fn parse_axiom_output(text: &str, decl_name: &str) -> Result<BTreeSet<String>, VerifierError> {
    let short = decl_name.rsplit('.').next().unwrap_or(decl_name);
    let mentions = |prefix: &str| prefix.contains(decl_name) || prefix.contains(short);
    if let Some(idx) = text.find("depends on axioms:") {
        if !mentions(&text[..idx]) {
            return Err(VerifierError::DriverFail(format!("axiom list does not name `{decl_name}`")));
        }
        let rest = &text[idx + "depends on axioms:".len()..];
        let open = rest.find('[').ok_or_else(|| VerifierError::DriverFail("missing `[`".into()))?;
        let close = rest.find(']').ok_or_else(|| VerifierError::DriverFail("missing `]`".into()))?;
        if close < open {
            return Err(VerifierError::DriverFail("malformed axiom list".into()));
        }
        return Ok(rest[open + 1..close]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect());
    }
    if let Some(idx) = text.find("does not depend on any axioms") {
        if mentions(&text[..idx]) {
            return Ok(BTreeSet::new());
        }
    }
    Err(VerifierError::DriverFail(text.lines().take(5).collect::<Vec<_>>().join(" | ")))
}

impl Verifier for LakeVerifier {
    fn mode(&self) -> &'static str {
        "real"
    }

    fn build(&self, ws: &Workspace, scope: &BuildScope) -> Result<BuildReport, VerifierError> {
        let module;
        let mut args = vec!["build"];
        if let BuildScope::Node(id) = scope {
            module = ws.module_of(id).ok_or_else(|| VerifierError::NoSource(id.clone()))?;
            args.push(&module);
        }
        let (status, text, elapsed) = self.run(ws, &args)?;
        let (sorry_sites, mut errors) = parse_build_output(&text);
        if !status.success() && errors.is_empty() {
            errors.push(format!("lake build exited with {status}"));
        }
        Ok(BuildReport {
            clean: status.success() && errors.is_empty() && sorry_sites.is_empty(),
            sorry_sites,
            errors,
            diagnostics: text,
            elapsed_ms: elapsed.as_millis() as u64,
        })
    }

    fn axioms(&self, ws: &Workspace, decl_name: &str) -> Result<BTreeSet<String>, VerifierError> {
        let module = ws
            .module_of(ws.target())
            .ok_or_else(|| VerifierError::NoSource(ws.target().clone()))?;
        let driver = ws.root().join(DRIVER_FILE);
        std::fs::write(&driver, format!("import {module}\n\n#print axioms {decl_name}\n"))?;
        let (_, text, _) = self.run(ws, &["env", "lean", DRIVER_FILE])?;
        parse_axiom_output(&text, decl_name)
    }
}
