//! Tool defaults from a TOML or JSON file, and input document parsing.

use std::path::Path;

use isoedit_core::editing::EditSpec;
use isoedit_core::flows::FlowConfig;
use isoedit_core::rigid::RigidConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{parse_json, AppError, AppResult};

/// Defaults filled into specs that leave the corresponding field out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub lambda: f64,
    pub splits: usize,
    pub tau: f64,
    pub mesh_resolution: usize,
    pub volume_resolution: usize,
    pub undo_depth: usize,
    pub seed: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            lambda: 0.1,
            splits: 8,
            tau: 0.01,
            mesh_resolution: 64,
            volume_resolution: 128,
            undo_depth: 50,
            seed: 0,
        }
    }
}

impl Defaults {
    /// Read `.toml` or `.json` by extension.
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let d: Defaults = if ext.eq_ignore_ascii_case("toml") {
            toml::from_str(&text).map_err(|e| AppError::Parse {
                document: "config",
                field: e.span().map(|s| format!("byte {}", s.start)).unwrap_or_default(),
                message: e.message().to_string(),
            })?
        } else {
            parse_json("config", &text)?
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> AppResult<()> {
        let bad = |field: &str, message: &str| {
            Err(AppError::Parse { document: "config", field: field.into(), message: message.into() })
        };
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", "must be positive");
        }
        if self.splits == 0 {
            return bad("splits", "must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be positive");
        }
        if self.mesh_resolution < 8 || self.volume_resolution < 32 {
            return bad("mesh_resolution", "mesh needs ≥ 8 cells per axis, volume ≥ 32");
        }
        if self.undo_depth == 0 {
            return bad("undo_depth", "must be at least 1");
        }
        Ok(())
    }

    fn fill(&self, doc: &mut Value, keys: &[(&str, Value)]) {
        if let Value::Object(map) = doc {
            for (k, v) in keys {
                map.entry(k.to_string()).or_insert_with(|| v.clone());
            }
        }
    }

    /// Parse and validate an edit spec, taking λ, splits and seed from the
    /// defaults when absent.
    pub fn edit_spec(&self, text: &str) -> AppResult<EditSpec> {
        let mut doc: Value = parse_json("edit spec", text)?;
        self.fill(
            &mut doc,
            &[("lambda", self.lambda.into()), ("splits", self.splits.into()), ("seed", self.seed.into())],
        );
        let spec: EditSpec = from_value("edit spec", doc)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn flow_config(&self, text: &str) -> AppResult<FlowConfig> {
        let mut doc: Value = parse_json("smoothing config", text)?;
        self.fill(
            &mut doc,
            &[("tau", self.tau.into()), ("lambda", self.lambda.into()), ("seed", self.seed.into())],
        );
        let c: FlowConfig = from_value("smoothing config", doc)?;
        c.validate()?;
        Ok(c)
    }

    pub fn rigid_config(&self, text: &str) -> AppResult<RigidConfig> {
        let mut doc: Value = parse_json("rigid config", text)?;
        self.fill(&mut doc, &[("seed", self.seed.into())]);
        let c: RigidConfig = from_value("rigid config", doc)?;
        c.validate()?;
        Ok(c)
    }
}

pub fn from_value<T: serde::de::DeserializeOwned>(document: &'static str, v: Value) -> AppResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| AppError::Parse {
        document,
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}
