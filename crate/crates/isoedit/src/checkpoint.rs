//! Versioned JSON checkpoints.
//!
//! ```json
//! { "format": "isoedit-checkpoint", "version": 1, "kind": "siren",
//!   "widths": [3, 32, 32, 32, 1], "omega0": 8.0, "param_count": 2273,
//!   "domain": { "lower": [-2, -2, -2], "upper": [2, 2, 2] },
//!   "encoding": "base64", "params": "..." }
//! ```
//!
//! `params` is either a JSON array of numbers (`"encoding": "plain"`) or the
//! little-endian `f64` bytes in standard base64. Both round-trip bit-exactly.
//! Latent decoders also carry `latent_dim` (the code is the trailing part of
//! `params`) and optionally the per-member `latents` of a trained family.

use std::path::Path;

use base64::Engine as _;
use isoedit_core::field::{AnalyticField, AnalyticShape, Domain, FieldModel, ImplicitField, LatentField, MlpArch, SirenMlp};
use isoedit_core::rigid::TangentialField;
use isoedit_core::ParamVector;
use serde::{Deserialize, Serialize};

use crate::error::{parse_json, AppError, AppResult};

pub const FORMAT: &str = "isoedit-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Siren,
    Latent,
    Analytic,
    /// Tangential displacement network from rigid editing.
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Plain,
    #[default]
    Base64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Params {
    Plain(Vec<f64>),
    Base64(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    widths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega0: Option<f64>,
    param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latent_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<AnalyticShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<Domain>,
    encoding: Encoding,
    params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latents: Option<Vec<Vec<f64>>>,
}

/// Anything a checkpoint file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Stored {
    Field(FieldModel),
    Tangent(TangentialField),
}

/// A checkpoint's contents plus optional per-member latent codes.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub content: Stored,
    pub latents: Option<Vec<Vec<f64>>>,
}

impl From<FieldModel> for Checkpoint {
    fn from(f: FieldModel) -> Self {
        Checkpoint { content: Stored::Field(f), latents: None }
    }
}

impl From<TangentialField> for Checkpoint {
    fn from(f: TangentialField) -> Self {
        Checkpoint { content: Stored::Tangent(f), latents: None }
    }
}

impl Checkpoint {
    pub fn with_latents(mut self, latents: Vec<Vec<f64>>) -> Self {
        self.latents = Some(latents);
        self
    }

    pub fn into_field(self) -> AppResult<FieldModel> {
        match self.content {
            Stored::Field(f) => Ok(f),
            Stored::Tangent(_) => Err(AppError::format("checkpoint holds a tangential network, not a field")),
        }
    }

    pub fn to_json(&self, encoding: Encoding) -> String {
        let doc = self.document(encoding);
        serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> AppResult<Self> {
        let doc: Document = parse_json("checkpoint", text)?;
        Self::from_document(doc)
    }

    pub fn save(&self, path: &Path, encoding: Encoding) -> AppResult<()> {
        std::fs::write(path, self.to_json(encoding)).map_err(|e| AppError::io(path, e))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text)
    }

    fn document(&self, encoding: Encoding) -> Document {
        let mut doc = Document {
            format: FORMAT.into(),
            version: VERSION,
            kind: Kind::Siren,
            widths: None,
            omega0: None,
            param_count: 0,
            latent_dim: None,
            shape: None,
            center: None,
            scale: None,
            domain: None,
            encoding,
            params: Params::Plain(Vec::new()),
            latents: self.latents.clone(),
        };
        let (arch, params, domain): (Option<&MlpArch>, &[f64], Option<Domain>) = match &self.content {
            Stored::Field(FieldModel::Siren(f)) => (Some(f.arch()), f.params(), Some(*f.domain())),
            Stored::Field(FieldModel::Latent(f)) => {
                doc.kind = Kind::Latent;
                doc.latent_dim = Some(f.latent_dim());
                (Some(f.arch()), f.params(), Some(*f.domain()))
            }
            Stored::Field(FieldModel::Analytic(f)) => {
                doc.kind = Kind::Analytic;
                doc.shape = Some(f.shape().clone());
                doc.center = Some(f.center());
                doc.scale = Some(f.scale());
                (None, f.params(), Some(*f.domain()))
            }
            Stored::Tangent(t) => {
                doc.kind = Kind::Tangent;
                (Some(t.arch()), t.params(), None)
            }
        };
        if let Some(a) = arch {
            doc.widths = Some(a.widths.clone());
            doc.omega0 = Some(a.omega0);
        }
        doc.domain = domain;
        doc.param_count = params.len();
        doc.params = match encoding {
            Encoding::Plain => Params::Plain(params.to_vec()),
            Encoding::Base64 => Params::Base64(encode_f64(params)),
        };
        doc
    }

    fn from_document(doc: Document) -> AppResult<Self> {
        let bad = |field: &str, message: &str| AppError::Parse {
            document: "checkpoint",
            field: field.into(),
            message: message.into(),
        };
        if doc.format != FORMAT {
            return Err(bad("format", "not an isoedit checkpoint"));
        }
        if doc.version != VERSION {
            return Err(bad("version", "unsupported checkpoint version"));
        }
        let params = match (&doc.params, doc.encoding) {
            (Params::Plain(v), Encoding::Plain) => v.clone(),
            (Params::Base64(s), Encoding::Base64) => decode_f64(s).map_err(|m| bad("params", &m))?,
            _ => return Err(bad("params", "does not match the declared encoding")),
        };
        if params.len() != doc.param_count {
            return Err(bad("param_count", "does not match the number of parameters"));
        }
        if !params.iter().all(|v| v.is_finite()) {
            return Err(bad("params", "non-finite parameter"));
        }
        let domain = doc.domain.unwrap_or_default();
        Domain::new(domain.lower, domain.upper)?;
        let arch = || -> AppResult<MlpArch> {
            let widths = doc.widths.clone().ok_or_else(|| bad("widths", "missing"))?;
            let omega0 = doc.omega0.ok_or_else(|| bad("omega0", "missing"))?;
            Ok(MlpArch::new(widths, omega0)?)
        };
        let content = match doc.kind {
            Kind::Siren => Stored::Field(SirenMlp::new(arch()?, ParamVector::new(params), domain)?.into()),
            Kind::Latent => {
                let l = doc.latent_dim.ok_or_else(|| bad("latent_dim", "missing"))?;
                Stored::Field(LatentField::new(arch()?, ParamVector::new(params), l, domain)?.into())
            }
            Kind::Analytic => {
                let shape = doc.shape.clone().ok_or_else(|| bad("shape", "missing"))?;
                let f = AnalyticField::new(shape, params)?
                    .with_center(doc.center.unwrap_or([0.0; 3]))
                    .with_scale(doc.scale.unwrap_or(1.0))
                    .with_domain(domain);
                Stored::Field(f.into())
            }
            Kind::Tangent => Stored::Tangent(TangentialField::from_params(arch()?, params)?),
        };
        if let (Some(latents), Some(l)) = (&doc.latents, doc.latent_dim) {
            if latents.iter().any(|z| z.len() != l) {
                return Err(bad("latents", "every code must have latent_dim entries"));
            }
        }
        Ok(Checkpoint { content, latents: doc.latents })
    }
}

pub fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn decode_f64(text: &str) -> Result<Vec<f64>, String> {
    let bytes = base64::engine::general_purpose::STANDARD.decode(text).map_err(|e| e.to_string())?;
    if bytes.len() % 8 != 0 {
        return Err("byte length is not a multiple of 8".into());
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Load a field checkpoint.
pub fn load_field(path: &Path) -> AppResult<FieldModel> {
    Checkpoint::load(path)?.into_field()
}

pub fn save_field(path: &Path, field: &FieldModel) -> AppResult<()> {
    Checkpoint::from(field.clone()).save(path, Encoding::Base64)
}
