//! On-disk Lake workspace holding one Lean file per plan node.
//!
//! Layout under the root:
//!
//! ```text
//! lakefile.toml
//! lean-toolchain
//! Proofloop/<Module>.lean        one per node that has a source
//! .proofloop/workspace.json      node-to-file map, anchor, toolchain pin
//! .proofloop.lock                present while a run owns the workspace
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{AnchorDecl, StatementId};

pub const LOCK_FILE: &str = ".proofloop.lock";
const META_DIR: &str = ".proofloop";
const META_FILE: &str = "workspace.json";
const LIB_NAME: &str = "Proofloop";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("workspace metadata {path}: {source}")]
    Metadata {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("workspace {0} is locked by another run (remove {LOCK_FILE} if stale)")]
    Locked(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Metadata {
    target: StatementId,
    anchor: AnchorDecl,
    toolchain_pin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mathlib_rev: Option<String>,
    node_files: BTreeMap<StatementId, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    root: PathBuf,
    meta: Metadata,
}

/// Lean module component for a statement id: identifier characters kept,
/// everything else mapped to `_`, and a leading `N` if it would not start
/// with a letter.
pub fn module_name(id: &StatementId) -> String {
    let mut out: String = id
        .as_str()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert(0, 'N');
    }
    out
}

impl Workspace {
    /// Lays out a fresh workspace. Existing node files are left alone but
    /// forgotten.
    pub fn create(
        root: impl Into<PathBuf>,
        target: StatementId,
        anchor: AnchorDecl,
        toolchain_pin: impl Into<String>,
        mathlib_rev: Option<String>,
    ) -> Result<Self, WorkspaceError> {
        let root = root.into();
        let lib = root.join(LIB_NAME);
        fs::create_dir_all(&lib).map_err(io_err(&lib))?;
        let meta_dir = root.join(META_DIR);
        fs::create_dir_all(&meta_dir).map_err(io_err(&meta_dir))?;
        let ws = Self {
            root,
            meta: Metadata {
                target,
                anchor,
                toolchain_pin: toolchain_pin.into(),
                mathlib_rev,
                node_files: BTreeMap::new(),
            },
        };
        ws.write_file(Path::new("lean-toolchain"), &format!("{}\n", ws.meta.toolchain_pin))?;
        ws.write_file(Path::new("lakefile.toml"), &ws.lakefile())?;
        ws.save()?;
        Ok(ws)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WorkspaceError> {
        let root = root.into();
        let path = root.join(META_DIR).join(META_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let meta = serde_json::from_str(&text).map_err(|source| WorkspaceError::Metadata { path, source })?;
        Ok(Self { root, meta })
    }

    fn lakefile(&self) -> String {
        let mut s = format!(
            "name = \"proofloop-workspace\"\ndefaultTargets = [\"{LIB_NAME}\"]\n\n[[lean_lib]]\nname = \"{LIB_NAME}\"\nglobs = [\"{LIB_NAME}.+\"]\n"
        );
        if let Some(rev) = &self.meta.mathlib_rev {
            s.push_str(&format!(
                "\n[[require]]\nname = \"mathlib\"\nscope = \"leanprover-community\"\nrev = \"{rev}\"\n"
            ));
        }
        s
    }

    fn save(&self) -> Result<(), WorkspaceError> {
        let path = self.root.join(META_DIR).join(META_FILE);
        let text = serde_json::to_string_pretty(&self.meta).map_err(|source| WorkspaceError::Metadata {
            path: path.clone(),
            source,
        })?;
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    fn write_file(&self, rel: &Path, contents: &str) -> Result<(), WorkspaceError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, contents).map_err(io_err(&path))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn target(&self) -> &StatementId {
        &self.meta.target
    }

    pub fn anchor(&self) -> &AnchorDecl {
        &self.meta.anchor
    }

    pub fn toolchain_pin(&self) -> &str {
        &self.meta.toolchain_pin
    }

    /// Relative path the target's source lives at (whether or not written).
    pub fn target_file(&self) -> PathBuf {
        self.meta
            .node_files
            .get(&self.meta.target)
            .cloned()
            .unwrap_or_else(|| self.default_rel(&self.meta.target))
    }

    fn default_rel(&self, id: &StatementId) -> PathBuf {
        PathBuf::from(LIB_NAME).join(format!("{}.lean", module_name(id)))
    }

    /// Relative path for `id`, allocating a fresh one if the sanitized name
    /// collides with another node's.
    fn rel_for(&self, id: &StatementId) -> PathBuf {
        if let Some(p) = self.meta.node_files.get(id) {
            return p.clone();
        }
        let taken: Vec<&PathBuf> = self.meta.node_files.values().collect();
        let base = module_name(id);
        let mut candidate = self.default_rel(id);
        let mut n = 2;
        while taken.contains(&&candidate) {
            candidate = PathBuf::from(LIB_NAME).join(format!("{base}_{n}.lean"));
            n += 1;
        }
        candidate
    }

    /// Writes (or overwrites) the source of one node.
    pub fn write_node(&mut self, id: &StatementId, source: &str) -> Result<PathBuf, WorkspaceError> {
        let rel = self.rel_for(id);
        self.write_file(&rel, source)?;
        if self.meta.node_files.insert(id.clone(), rel.clone()).is_none() {
            self.save()?;
        }
        Ok(self.root.join(rel))
    }

    pub fn read_node(&self, id: &StatementId) -> Result<Option<String>, WorkspaceError> {
        let Some(path) = self.node_path(id) else {
            return Ok(None);
        };
        fs::read_to_string(&path).map(Some).map_err(io_err(&path))
    }

    pub fn node_path(&self, id: &StatementId) -> Option<PathBuf> {
        self.meta.node_files.get(id).map(|rel| self.root.join(rel))
    }

    /// Lean module name of a node's file, e.g. `Proofloop.Lem_Foo`.
    pub fn module_of(&self, id: &StatementId) -> Option<String> {
        let rel = self.meta.node_files.get(id)?;
        let stem = rel.file_stem()?.to_str()?;
        Some(format!("{LIB_NAME}.{stem}"))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &StatementId> {
        self.meta.node_files.keys()
    }

    /// Absolute paths of every node file, ordered by node id.
    pub fn files(&self) -> Vec<PathBuf> {
        self.meta.node_files.values().map(|rel| self.root.join(rel)).collect()
    }

    /// Drops a node's file mapping (the file itself is deleted).
    pub fn remove_node(&mut self, id: &StatementId) -> Result<(), WorkspaceError> {
        if let Some(rel) = self.meta.node_files.remove(id) {
            let path = self.root.join(rel);
            match fs::remove_file(&path) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(io_err(&path)(e)),
            }
            self.save()?;
        }
        Ok(())
    }

    /// Takes the workspace lock; released when the guard drops.
    pub fn lock(&self) -> Result<LockGuard, WorkspaceError> {
        LockGuard::acquire(&self.root)
    }
}

/// Exclusive ownership of a workspace directory.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    pub fn acquire(root: &Path) -> Result<Self, WorkspaceError> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(WorkspaceError::Locked(root.to_path_buf())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
