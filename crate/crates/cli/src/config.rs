//! Config documents: `{"model": .., "experiment": .., "seeds": ..}`.
//!
//! A manifest written by a previous run is also accepted; its `config`
//! snapshot is used as-is.

use std::path::Path;

use rwre::env::EnvironmentModel;
use rwre::harness::ExperimentConfig;
use rwre::rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const DEFAULT_MASTER_SEED: u64 = 0xC0FFEE;
pub const SEED_ENV_VAR: &str = "RWRE_SEED";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: EnvironmentModel,
    #[serde(default = "empty_object")]
    pub experiment: Value,
    #[serde(default)]
    pub seeds: Seeds,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Cli,
    Env,
    Config,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedSeeds {
    pub master: u64,
    pub env: u64,
    pub walk: u64,
    pub source: SeedSource,
}

/// Master seed: CLI flag, then `RWRE_SEED`, then the config, then the
/// default. Explicit `env`/`walk` seeds in the config only apply when the
/// master seed also comes from the config or the default.
pub fn resolve_seeds(seeds: &Seeds, cli: Option<u64>, env_var: Option<&str>) -> Result<ResolvedSeeds, CliError> {
    let from_env =
        match env_var {
            Some(s) => Some(s.trim().parse::<u64>().map_err(|_| {
                CliError::Config(format!("{SEED_ENV_VAR} must be an unsigned 64-bit integer, got {s:?}"))
            })?),
            None => None,
        };
    let (master, source) = match (cli, from_env, seeds.master) {
        (Some(s), _, _) => (s, SeedSource::Cli),
        (None, Some(s), _) => (s, SeedSource::Env),
        (None, None, Some(s)) => (s, SeedSource::Config),
        (None, None, None) => (DEFAULT_MASTER_SEED, SeedSource::Default),
    };
    let keep = matches!(source, SeedSource::Config | SeedSource::Default);
    let env = seeds.env.filter(|_| keep).unwrap_or_else(|| rng::derive(master, &[1]));
    let walk = seeds.walk.filter(|_| keep).unwrap_or_else(|| rng::derive(master, &[2]));
    Ok(ResolvedSeeds {
        master,
        env,
        walk,
        source,
    })
}

fn parse_error(path: &Path, err: serde_path_to_error::Error<serde_json::Error>) -> CliError {
    let inner = err.inner();
    let field = err.path().to_string();
    CliError::Config(format!(
        "{}: line {}, column {}: field `{}`: {}",
        path.display(),
        inner.line(),
        inner.column(),
        field,
        inner
    ))
}

/// Reads a config or a manifest from `path`.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> Result<RunConfig, CliError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let is_manifest = raw.get("config").is_some() && raw.get("tool_version").is_some();
    if is_manifest {
        let snapshot = serde_json::to_string(&raw["config"]).expect("value serializes");
        let mut de = serde_json::Deserializer::from_str(&snapshot);
        return serde_path_to_error::deserialize(&mut de)
            .map_err(|e| parse_error(path, e))
            .map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{m} (in manifest config)")),
                other => other,
            });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| parse_error(path, e))
}

/// Merges the model, the experiment section and the resolved seeds into a
/// full experiment config.
pub fn experiment(run: &RunConfig, seeds: &ResolvedSeeds) -> Result<ExperimentConfig, CliError> {
    let mut obj = match &run.experiment {
        Value::Object(m) => m.clone(),
        Value::Null => Map::new(),
        _ => return Err(CliError::Config("field `experiment`: must be an object".into())),
    };
    for key in ["model", "env_seed", "walk_seed"] {
        if obj.contains_key(key) {
            return Err(CliError::Config(format!(
                "field `experiment.{key}`: set this in the top-level `model` or `seeds` section"
            )));
        }
    }
    obj.insert(
        "model".into(),
        serde_json::to_value(&run.model).expect("model serializes"),
    );
    obj.insert("env_seed".into(), seeds.env.into());
    obj.insert("walk_seed".into(), seeds.walk.into());
    serde_path_to_error::deserialize(Value::Object(obj))
        .map_err(|e| CliError::Config(format!("field `experiment.{}`: {}", e.path(), e.inner())))
}

/// Self-describing snapshot with every default filled in and the seeds resolved.
pub fn snapshot(cfg: &ExperimentConfig, seeds: &ResolvedSeeds) -> RunConfig {
    let mut experiment = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(m) = &mut experiment {
        m.remove("model");
        m.remove("env_seed");
        m.remove("walk_seed");
    }
    RunConfig {
        model: cfg.model.clone(),
        experiment,
        seeds: Seeds {
            master: Some(seeds.master),
            env: Some(seeds.env),
            walk: Some(seeds.walk),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        let s = Seeds {
            master: Some(5),
            env: Some(7),
            walk: None,
        };
        let r = resolve_seeds(&s, Some(1), Some("2")).unwrap();
        assert_eq!((r.master, r.source), (1, SeedSource::Cli));
        assert_ne!(r.env, 7);
        let r = resolve_seeds(&s, None, Some("2")).unwrap();
        assert_eq!((r.master, r.source), (2, SeedSource::Env));
        let r = resolve_seeds(&s, None, None).unwrap();
        assert_eq!((r.master, r.env, r.source), (5, 7, SeedSource::Config));
        let r = resolve_seeds(&Seeds::default(), None, None).unwrap();
        assert_eq!((r.master, r.source), (DEFAULT_MASTER_SEED, SeedSource::Default));
        assert!(resolve_seeds(&s, None, Some("x")).is_err());
    }

    #[test]
    fn parse_reports_field_and_line() {
        let text = "{\n  \"model\": {\"type\": \"constant\", \"p\": \"high\"}\n}";
        let err = parse(text, Path::new("c.json")).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("field `model`"), "{err}");
        let text = "{\n  \"model\": {\"type\": \"constant\", \"p\": 0.7},\n  \"seeds\": {\"master\": -1}\n}";
        let err = parse(text, Path::new("c.json")).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("seeds.master"), "{err}");
    }

    #[test]
    fn experiment_field_errors_name_the_field() {
        let run = parse(
            r#"{"model": {"type": "constant", "p": 0.75}, "experiment": {"replicas": "many"}}"#,
            Path::new("c.json"),
        )
        .unwrap();
        let seeds = resolve_seeds(&run.seeds, None, None).unwrap();
        let err = experiment(&run, &seeds).unwrap_err().to_string();
        assert!(err.contains("experiment.replicas"), "{err}");
    }

    #[test]
    fn snapshot_round_trips() {
        let run = parse(r#"{"model": {"type": "constant", "p": 0.75}}"#, Path::new("c.json")).unwrap();
        let seeds = resolve_seeds(&run.seeds, None, None).unwrap();
        let cfg = experiment(&run, &seeds).unwrap();
        let snap = snapshot(&cfg, &seeds);
        let again = resolve_seeds(&snap.seeds, None, None).unwrap();
        assert_eq!((again.env, again.walk), (seeds.env, seeds.walk));
        assert_eq!(experiment(&snap, &again).unwrap(), cfg);
    }
}
