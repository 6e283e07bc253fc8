use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::DEFAULT_FLAT_CAP;
use crate::model::HierarchicalModel;
use crate::refine::TraceEntry;

use super::format::{parse_macro, parse_mode, parse_template, serialize_macro, serialize_template};

pub const BUNDLE_FILE: &str = "bundle.toml";
const TEMPLATE_FILE: &str = "template.txt";
const MACRO_FILE: &str = "macro.txt";

/// Solver settings stored next to the model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub eta: f64,
    pub epsilon: f64,
    pub k: usize,
    pub max_iterations: usize,
    pub flat_cap: u64,
    pub seed: u64,
    /// Overrides the mode line of the macro file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub override_local_optimality: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eta: 0.9,
            epsilon: 1e-8,
            k: 8,
            max_iterations: 1_000_000,
            flat_cap: DEFAULT_FLAT_CAP,
            seed: 0,
            mode: None,
            override_local_optimality: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    template: PathBuf,
    #[serde(rename = "macro")]
    macro_file: PathBuf,
    #[serde(default)]
    run: RunConfig,
}

/// A model on disk: template file, macro file and run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub template_path: PathBuf,
    pub macro_path: PathBuf,
    pub run: RunConfig,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

impl ModelBundle {
    /// Reads a bundle from its directory or its manifest file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() {
            path.join(BUNDLE_FILE)
        } else {
            path.to_path_buf()
        };
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let text = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| io_err(&manifest_path, e))?;
        Ok(ModelBundle {
            template_path: dir.join(m.template),
            macro_path: dir.join(m.macro_file),
            run: m.run,
        })
    }

    /// Writes `model` into `dir` (created if needed) as a bundle.
    pub fn write(dir: impl AsRef<Path>, model: &HierarchicalModel, run: RunConfig) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let bundle = ModelBundle {
            template_path: dir.join(TEMPLATE_FILE),
            macro_path: dir.join(MACRO_FILE),
            run,
        };
        let manifest = Manifest {
            template: TEMPLATE_FILE.into(),
            macro_file: MACRO_FILE.into(),
            run: bundle.run.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| io_err(dir, e))?;
        for (path, body) in [
            (dir.join(BUNDLE_FILE), text),
            (
                bundle.template_path.clone(),
                serialize_template(model.template()),
            ),
            (bundle.macro_path.clone(), serialize_macro(model)),
        ] {
            fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        }
        Ok(bundle)
    }

    /// Parses both files; the run's mode, when set, replaces the file's.
    pub fn model(&self) -> Result<HierarchicalModel> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| io_err(p, e));
        let template = parse_template(&read(&self.template_path)?)?;
        let model = parse_macro(&read(&self.macro_path)?, &template)?;
        match &self.run.mode {
            None => Ok(model),
            Some(text) => {
                let mode = parse_mode(text, model.template()).map_err(Error::InvalidArgument)?;
                let model = model.with_mode(mode);
                model.ensure_valid()?;
                Ok(model)
            }
        }
    }
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceEntry]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(trace).map_err(|e| io_err(path, e))?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::generate::{chain_grid, token_model, ChainGridSpec, TokenLayout};
    use crate::model::ExitMode;

    #[test]
    fn token_bundle_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        let written = ModelBundle::write(dir.path(), &m, RunConfig::default()).unwrap();
        let loaded = ModelBundle::load(dir.path()).unwrap();
        assert_eq!(written, loaded);
        assert_eq!(loaded.model().unwrap(), m);
        let via_file = ModelBundle::load(dir.path().join(BUNDLE_FILE)).unwrap();
        assert_eq!(via_file.model().unwrap(), m);
    }

    #[test]
    fn grid_bundle_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ChainGridSpec {
            levels: 3,
            width: 5,
            chain_len: 4,
            seed: 9,
            fixed: None,
        };
        let m = chain_grid(&spec).unwrap();
        let b = ModelBundle::write(dir.path(), &m, RunConfig::default()).unwrap();
        assert_eq!(b.model().unwrap(), m);
    }

    #[test]
    fn mode_override_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        let run = RunConfig {
            mode: Some("success-target".into()),
            ..RunConfig::default()
        };
        let b = ModelBundle::write(dir.path(), &m, run).unwrap();
        assert!(matches!(b.model(), Err(Error::Invalid(_))));
        let b = ModelBundle {
            run: RunConfig {
                mode: Some("single".into()),
                ..b.run
            },
            ..b
        };
        assert_eq!(b.model().unwrap().mode(), ExitMode::Single);
    }

    #[test]
    fn missing_manifest_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ModelBundle::load(dir.path()), Err(Error::Io(_))));
    }

    #[test]
    fn trace_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.json");
        let trace = vec![TraceEntry {
            iter: 1,
            lb: 7.68,
            ub: 18.75,
            wall_ms: 0.5,
            queue_size: 1,
            refined_count: 0,
        }];
        write_trace(&path, &trace).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace);
    }
}
