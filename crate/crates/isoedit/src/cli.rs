use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use isoedit_core::editing;
use isoedit_core::field::{FieldModel, ImplicitField};
use isoedit_core::flows::FlowConfig;
use isoedit_core::geometry::estimate_volume;
use isoedit_core::rigid;
use isoedit_core::training::{self, FitConfig, TrainConfig};
use serde_json::{json, Value};

use crate::checkpoint::{load_field, Checkpoint, Encoding};
use crate::config::Defaults;
use crate::error::{parse_json, AppError, AppResult};
use crate::ops::{basis_mesh, extract_mesh, fit_target, parse_family};
use crate::{mesh_io, report, service};

#[derive(Debug, Parser)]
#[command(name = "isoedit", version, about = "Edit neural implicit shapes through their boundary sensitivity")]
pub struct Cli {
    /// Defaults file (TOML or JSON) for λ, splits, τ, resolutions and seed.
    #[arg(long, global = true, env = "ISOEDIT_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EncodingArg {
    Plain,
    Base64,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Plain => Encoding::Plain,
            EncodingArg::Base64 => Encoding::Base64,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a network to an analytic shape (`sphere:1`, `torus:0.6,0.25`, `blobby`, ...) or an OBJ mesh.
    Fit {
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
        /// Fit settings as JSON; flags below override it.
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Loss trace CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "base64")]
        encoding: EncodingArg,
    },
    /// Apply an edit spec.
    Edit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Report as JSON, or CSV when the path ends in `.csv`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Mean-curvature smoothing.
    Smooth {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        preserve_volume: bool,
        #[arg(long)]
        samples: Option<usize>,
        /// Volume trace resolution; 0 disables the trace.
        #[arg(long)]
        volume_res: Option<usize>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rigidity-regularized editing.
    RigidEdit {
        #[arg(long)]
        model: PathBuf,
        /// Rigid editing config as JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Where to store the tangential network.
        #[arg(long)]
        tangent_out: Option<PathBuf>,
        /// Energy trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Train a latent decoder on a shape family.
    TrainFamily {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 8)]
        latent_dim: usize,
        #[arg(long)]
        out: PathBuf,
        /// Training settings as JSON; flags below override it.
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Edit a latent decoder through its latent code only.
    SemanticEdit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Start from this family member's code instead of the stored one.
        #[arg(long)]
        member: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Extract the zero level set (`.obj`, `.ply` or `.bin`).
    Mesh {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        res: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mesh with one basis function as a per-vertex channel.
    BasisViz {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        param_index: usize,
        #[arg(long)]
        res: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enclosed volume.
    Volume {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        res: Option<usize>,
    },
    /// Run the HTTP service.
    Serve {
        /// Directory of checkpoints sessions may open by name.
        #[arg(long, env = "ISOEDIT_MODELS")]
        models: Option<PathBuf>,
        #[arg(long, env = service::ADDR_VAR, default_value = service::DEFAULT_ADDR)]
        addr: String,
    },
}

fn read(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> AppResult<()> {
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn write_report<T: serde::Serialize>(path: &Path, value: &T, csv: impl FnOnce() -> String) -> AppResult<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write(path, csv())
    } else {
        write(path, serde_json::to_string_pretty(value).expect("report serializes"))
    }
}

fn settings<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>, document: &'static str) -> AppResult<T> {
    match path {
        Some(p) => parse_json(document, &read(p)?),
        None => Ok(T::default()),
    }
}

/// Run a parsed command, returning the JSON summary printed on stdout.
pub fn run(cli: Cli) -> AppResult<Value> {
    let defaults = match &cli.config {
        Some(p) => Defaults::load(p)?,
        None => Defaults::default(),
    };
    match cli.command {
        Command::Fit { target, out, settings: s, iterations, seed, log, encoding } => {
            let mut cfg: FitConfig = settings(s.as_deref(), "fit settings")?;
            if let Some(n) = iterations {
                cfg.iterations = n;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let target = fit_target(&target)?;
            let outcome = training::fit_sdf(target.as_ref(), &cfg)?;
            Checkpoint::from(FieldModel::from(outcome.field)).save(&out, encoding.into())?;
            if let Some(p) = log {
                write(&p, report::loss_csv(&outcome.report.loss_trace))?;
            }
            let r = &outcome.report;
            Ok(json!({
                "holdout_residual": r.holdout_residual,
                "normal_error_deg": r.normal_error_deg,
                "max_normal_error_deg": r.max_normal_error_deg,
                "out": out,
            }))
        }
        Command::Edit { model, spec, out, report: rp } => {
            let spec = defaults.edit_spec(&read(&spec)?)?;
            let field = load_field(&model)?;
            let (edited, rep) = editing::edit(&field, &spec)?;
            Checkpoint::from(edited).save(&out, Encoding::Base64)?;
            if let Some(p) = rp {
                write_report(&p, &rep, || report::edit_csv(&rep))?;
            }
            Ok(json!({
                "iterations": rep.iterations.len(),
                "initial_deviation": rep.initial_deviation,
                "final_deviation": rep.final_deviation(),
                "converged": rep.converged,
                "snapshot": rep.snapshot,
            }))
        }
        Command::Smooth { model, iters, tau, preserve_volume, samples, volume_res, trace, out } => {
            let field = load_field(&model)?;
            let mut cfg = FlowConfig {
                tau: tau.unwrap_or(defaults.tau),
                iterations: iters,
                volume_preserving: preserve_volume,
                lambda: defaults.lambda,
                seed: defaults.seed,
                volume_resolution: Some(defaults.volume_resolution),
                ..Default::default()
            };
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(r) = volume_res {
                cfg.volume_resolution = (r > 0).then_some(r);
            }
            let (smoothed, tr) = isoedit_core::flows::run_smoothing(&field, &cfg)?;
            if let Some(p) = trace {
                write(&p, report::smoothing_csv(&tr))?;
            }
            if let Some(p) = out {
                Checkpoint::from(smoothed).save(&p, Encoding::Base64)?;
            }
            let change = match (tr.volumes.first(), tr.volumes.last()) {
                (Some(a), Some(b)) if *a > 0.0 => Some((b - a) / a),
                _ => None,
            };
            Ok(json!({ "steps": tr.steps.len(), "volumes": tr.volumes, "relative_volume_change": change }))
        }
        Command::RigidEdit { model, spec, alpha, iterations, out, tangent_out, trace } => {
            let mut cfg = defaults.rigid_config(&read(&spec)?)?;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(n) = iterations {
                cfg.iterations = n;
            }
            cfg.validate()?;
            let field = load_field(&model)?;
            let outcome = rigid::rigid_edit(&field, &cfg)?;
            Checkpoint::from(outcome.field).save(&out, Encoding::Base64)?;
            if let Some(p) = tangent_out {
                Checkpoint::from(outcome.tangent).save(&p, Encoding::Base64)?;
            }
            if let Some(p) = trace {
                write(&p, report::energy_csv(&outcome.trace))?;
            }
            Ok(json!({ "final": outcome.trace.last(), "steps": outcome.trace.len() }))
        }
        Command::TrainFamily { family, latent_dim, out, settings: s, iterations, seed, log } => {
            let fam = parse_family(&read(&family)?)?;
            let mut cfg: TrainConfig = settings(s.as_deref(), "training settings")?;
            if let Some(n) = iterations {
                cfg.iterations = n;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let ad = training::train_auto_decoder(&fam, latent_dim, &cfg)?;
            let field = ad.field(0)?;
            Checkpoint::from(FieldModel::from(field)).with_latents(ad.latents.clone()).save(&out, Encoding::Base64)?;
            if let Some(p) = log {
                write(&p, report::loss_csv(&ad.loss_trace))?;
            }
            Ok(json!({ "members": fam.len(), "residuals": ad.residuals, "max_residual": ad.max_residual() }))
        }
        Command::SemanticEdit { model, spec, member, out, report: rp } => {
            let spec = defaults.edit_spec(&read(&spec)?)?;
            let ckpt = Checkpoint::load(&model)?;
            let latents = ckpt.latents.clone();
            let FieldModel::Latent(decoder) = ckpt.into_field()? else {
                return Err(isoedit_core::Error::invalid("model", "semantic edits need a latent decoder").into());
            };
            let start = match member {
                Some(k) => {
                    let code = latents.as_ref().and_then(|l| l.get(k));
                    decoder.with_latent(code.ok_or_else(|| isoedit_core::Error::invalid("member", "no such family member"))?)?
                }
                None => decoder,
            };
            let (edited, rep) = training::semantic_edit(&start, &spec)?;
            let latent = edited.latent().to_vec();
            let mut ck = Checkpoint::from(FieldModel::from(edited));
            if let Some(l) = latents {
                ck = ck.with_latents(l);
            }
            ck.save(&out, Encoding::Base64)?;
            if let Some(p) = rp {
                write_report(&p, &rep, || report::edit_csv(&rep))?;
            }
            Ok(json!({
                "iterations": rep.iterations.len(),
                "initial_deviation": rep.initial_deviation,
                "final_deviation": rep.final_deviation(),
                "latent": latent,
            }))
        }
        Command::Mesh { model, res, out } => {
            let field = load_field(&model)?;
            let m = extract_mesh(&field, res.unwrap_or(defaults.mesh_resolution))?;
            mesh_io::write_mesh(&out, &m)?;
            Ok(json!({
                "vertices": m.vertices.len(),
                "triangles": m.triangles.len(),
                "area": m.area(),
                "volume": m.enclosed_volume(),
            }))
        }
        Command::BasisViz { model, param_index, res, out } => {
            let field = load_field(&model)?;
            let m = basis_mesh(&field, param_index, res.unwrap_or(defaults.mesh_resolution))?;
            mesh_io::write_mesh(&out, &m)?;
            let v = &m.channels[0].values;
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
            Ok(json!({ "vertices": v.len(), "min": lo, "max": hi, "param_count": field.param_count() }))
        }
        Command::Volume { model, res } => {
            let field = load_field(&model)?;
            let res = res.unwrap_or(defaults.volume_resolution);
            Ok(json!({ "volume": estimate_volume(&field, res)?, "res": res }))
        }
        Command::Serve { models, addr } => {
            let state = service::AppState::new(models, defaults);
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::io(&addr, e))?;
            eprintln!("listening on {addr}");
            rt.block_on(service::serve(&addr, state)).map_err(|e| AppError::io(&addr, e))?;
            Ok(json!({}))
        }
    }
}

/// Parse arguments and run; returns the process exit code. Errors go to
/// stderr as a single JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let field = e.get(clap::error::ContextKind::InvalidArg).map(|v| v.to_string());
            let err = json!({ "error": { "kind": "usage", "field": field, "message": e.kind().to_string() } });
            eprintln!("{err}");
            return 2;
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{v}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
