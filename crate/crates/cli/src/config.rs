//! Settings resolution: command-line flag, then config file, then
//! environment variable, then the built-in default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use proofloop::leanenv::{default_permitted, DEFAULT_BUILD_TIMEOUT};
use proofloop::ledger::CostModel;
use proofloop::looper::LoopConfig;

pub const ENV_WALL_CLOCK: &str = "PROOFLOOP_WALL_CLOCK";
pub const ENV_COMPILE_BUDGET: &str = "PROOFLOOP_COMPILE_BUDGET";
pub const ENV_REPLAN_LIMIT: &str = "PROOFLOOP_REPLAN_LIMIT";
pub const ENV_TOOLCHAIN_ROOT: &str = "PROOFLOOP_TOOLCHAIN_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VerifierKind {
    Sim,
    Real,
}

/// Values given on the command line. `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flags {
    pub backend: Option<BackendKind>,
    pub fixture: Option<PathBuf>,
    pub verifier: Option<VerifierKind>,
    pub rules: Option<PathBuf>,
    pub wall_clock: Option<Duration>,
    pub compile_budget: Option<u32>,
    pub replan_limit: Option<u32>,
    pub permit: Vec<String>,
    pub out: Option<PathBuf>,
    pub toolchain_root: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveFile {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub max_tokens: Option<u32>,
    pub templates: Option<PathBuf>,
    #[serde(default, with = "opt_duration")]
    pub timeout: Option<Duration>,
}

/// The TOML config file. Relative paths are resolved against the file's
/// directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub backend: Option<BackendKind>,
    pub fixture: Option<PathBuf>,
    pub verifier: Option<VerifierKind>,
    pub rules: Option<PathBuf>,
    #[serde(default, with = "opt_duration")]
    pub wall_clock: Option<Duration>,
    pub compile_budget: Option<u32>,
    pub replan_limit: Option<u32>,
    pub check_retry_limit: Option<u32>,
    pub permit: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub toolchain_root: Option<PathBuf>,
    pub toolchain_pin: Option<String>,
    pub mathlib_rev: Option<String>,
    #[serde(default, with = "opt_duration")]
    pub build_timeout: Option<Duration>,
    #[serde(default)]
    pub live: LiveFile,
    pub cost: Option<CostModel>,
}

mod opt_duration {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| humantime::parse_duration(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{var}: {msg}")]
    Env { var: &'static str, msg: String },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut file: ConfigFile = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut file.fixture,
            &mut file.rules,
            &mut file.out,
            &mut file.toolchain_root,
            &mut file.live.templates,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSettings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub max_tokens: Option<u32>,
    pub templates: Option<PathBuf>,
    pub timeout: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub backend: BackendKind,
    pub fixture: Option<PathBuf>,
    pub verifier: VerifierKind,
    pub rules: Option<PathBuf>,
    pub loop_config: LoopConfig,
    pub permitted: BTreeSet<String>,
    pub out: PathBuf,
    pub toolchain_root: Option<PathBuf>,
    pub toolchain_pin: String,
    pub mathlib_rev: Option<String>,
    pub build_timeout: Duration,
    pub live: LiveSettings,
    pub cost: CostModel,
}

/// List price of the default live model, USD per million tokens.
pub fn default_cost_model() -> CostModel {
    CostModel::per_million(15.0, 75.0, 1.5, 18.75)
}

fn env_parse<T>(
    env: &dyn Fn(&str) -> Option<String>,
    var: &'static str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>, ConfigError> {
    env(var)
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse(v.trim()).map_err(|msg| ConfigError::Env { var, msg }))
        .transpose()
}

/// Pure: the same inputs always give the same settings.
pub fn resolve(
    flags: &Flags,
    file: Option<&ConfigFile>,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Settings, ConfigError> {
    let empty = ConfigFile::default();
    let file = file.unwrap_or(&empty);
    let duration = |s: &str| humantime::parse_duration(s).map_err(|e| e.to_string());
    let count = |s: &str| s.parse::<u32>().map_err(|e| e.to_string());

    let defaults = LoopConfig::default();
    let loop_config = LoopConfig {
        wall_clock_budget: flags
            .wall_clock
            .or(file.wall_clock)
            .or(env_parse(env, ENV_WALL_CLOCK, duration)?)
            .unwrap_or(defaults.wall_clock_budget),
        compile_budget: flags
            .compile_budget
            .or(file.compile_budget)
            .or(env_parse(env, ENV_COMPILE_BUDGET, count)?)
            .unwrap_or(defaults.compile_budget),
        replan_limit: flags
            .replan_limit
            .or(file.replan_limit)
            .or(env_parse(env, ENV_REPLAN_LIMIT, count)?)
            .unwrap_or(defaults.replan_limit),
        check_retry_limit: file.check_retry_limit.unwrap_or(defaults.check_retry_limit),
    };
    loop_config.validate().map_err(ConfigError::Invalid)?;

    let permitted = if !flags.permit.is_empty() {
        flags.permit.iter().cloned().collect()
    } else if let Some(p) = &file.permit {
        p.iter().cloned().collect()
    } else {
        default_permitted()
    };

    Ok(Settings {
        backend: flags.backend.or(file.backend).unwrap_or(BackendKind::Scripted),
        fixture: flags.fixture.clone().or_else(|| file.fixture.clone()),
        verifier: flags.verifier.or(file.verifier).unwrap_or(VerifierKind::Sim),
        rules: flags.rules.clone().or_else(|| file.rules.clone()),
        loop_config,
        permitted,
        out: flags
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("proofloop-out")),
        toolchain_root: flags
            .toolchain_root
            .clone()
            .or_else(|| file.toolchain_root.clone())
            .or_else(|| env(ENV_TOOLCHAIN_ROOT).filter(|v| !v.is_empty()).map(PathBuf::from)),
        toolchain_pin: file
            .toolchain_pin
            .clone()
            .unwrap_or_else(|| "leanprover/lean4:stable".into()),
        mathlib_rev: file.mathlib_rev.clone(),
        build_timeout: file.build_timeout.unwrap_or(DEFAULT_BUILD_TIMEOUT),
        live: LiveSettings {
            endpoint: file.live.endpoint.clone(),
            model: file.live.model.clone(),
            max_tokens: file.live.max_tokens,
            templates: file.live.templates.clone(),
            timeout: file.live.timeout,
        },
        cost: file.cost.unwrap_or_else(default_cost_model),
    })
}
