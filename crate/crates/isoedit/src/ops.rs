//! Operations shared by the CLI and the service.

use std::path::Path;

use isoedit_core::field::{AnalyticField, AnalyticShape, Domain, ImplicitField};
use isoedit_core::geometry::{marching_cubes, Mesh};
use isoedit_core::sensitivity::basis_row_masked;
use isoedit_core::training::{AnalyticTarget, MeshTarget, SdfTarget, ShapeFamily};
use serde::Deserialize;

use crate::error::{parse_json, AppError, AppResult};

pub fn extract_mesh<F: ImplicitField + ?Sized>(field: &F, res: usize) -> AppResult<Mesh> {
    Ok(marching_cubes(field, res)?)
}

/// Surface mesh with channel `basis_<p>` holding `b_p(x)` at every vertex:
/// the normal velocity of the surface per unit change of parameter `p`.
pub fn basis_mesh<F: ImplicitField + ?Sized>(field: &F, p: usize, res: usize) -> AppResult<Mesh> {
    if p >= field.param_count() {
        return Err(isoedit_core::Error::invalid("param_index", format!("must be below {}", field.param_count())).into());
    }
    let mut mesh = marching_cubes(field, res)?;
    let values = mesh
        .vertices
        .iter()
        .map(|&x| Ok(basis_row_masked(field, x, p..p + 1)?[0]))
        .collect::<AppResult<Vec<f64>>>()?;
    mesh.add_channel(format!("basis_{p}"), values)?;
    Ok(mesh)
}

/// Three overlapping spheres, the smoothing test shape.
pub fn blobby() -> AnalyticField {
    let centers = vec![[-0.45, 0.0, 0.0], [0.4, 0.25, 0.0], [0.05, -0.3, 0.35]];
    AnalyticField::new(AnalyticShape::SphereUnion { centers }, vec![0.55, 0.45, 0.4]).expect("three radii")
}

/// Capped cylinder used by the rigid editing fixture.
pub fn cylinder() -> AnalyticField {
    AnalyticField::new(AnalyticShape::Cylinder { rounding: 0.05 }, vec![0.4, 0.8]).expect("two parameters")
}

/// Named analytic shapes: `sphere[:r]`, `torus[:R,r]`, `ellipsoid:a,b,c`,
/// `box:hx,hy,hz[,rounding]`, `cylinder[:r,h]`, `capsule:h,r`, `blobby`.
pub fn analytic_by_name(spec: &str) -> AppResult<AnalyticField> {
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    let bad = |m: &str| AppError::Parse { document: "arguments", field: "target".into(), message: m.into() };
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad("bad number"))?
    };
    let need = |n: usize, default: &[f64]| -> AppResult<Vec<f64>> {
        match nums.len() {
            0 if !default.is_empty() => Ok(default.to_vec()),
            k if k == n => Ok(nums.clone()),
            _ => Err(bad(&format!("`{name}` takes {n} numbers"))),
        }
    };
    let field = match name {
        "sphere" => AnalyticField::new(AnalyticShape::Sphere, need(1, &[1.0])?)?,
        "torus" => AnalyticField::new(AnalyticShape::Torus, need(2, &[0.6, 0.25])?)?,
        "ellipsoid" => AnalyticField::new(AnalyticShape::Ellipsoid, need(3, &[])?)?,
        "capsule" => AnalyticField::new(AnalyticShape::Capsule, need(2, &[])?)?,
        "cylinder" if nums.is_empty() => cylinder(),
        "cylinder" => AnalyticField::new(AnalyticShape::Cylinder { rounding: 0.05 }, need(2, &[])?)?,
        "box" => {
            let (half, rounding) = match nums.len() {
                3 => (nums.clone(), 0.0),
                4 => (nums[..3].to_vec(), nums[3]),
                _ => return Err(bad("`box` takes 3 or 4 numbers")),
            };
            AnalyticField::new(AnalyticShape::RoundedBox { rounding }, half)?
        }
        "blobby" if nums.is_empty() => blobby(),
        _ => return Err(bad("unknown shape name")),
    };
    Ok(field)
}

/// A fitting target: a mesh file (`.obj`) or an analytic shape name.
pub fn fit_target(spec: &str) -> AppResult<Box<dyn SdfTarget>> {
    if spec.to_ascii_lowercase().ends_with(".obj") {
        let mesh = crate::mesh_io::read_obj(Path::new(spec))?;
        Ok(Box::new(MeshTarget::new(mesh, Domain::default())?))
    } else {
        Ok(Box::new(AnalyticTarget(analytic_by_name(spec)?)))
    }
}

/// Family files either list members explicitly or name a generator.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FamilyDoc {
    Generated(Generator),
    Explicit(ShapeFamily),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Generator {
    generate: String,
    #[serde(default = "default_count")]
    count: usize,
    #[serde(default)]
    seed: u64,
}

fn default_count() -> usize {
    50
}

pub fn parse_family(text: &str) -> AppResult<ShapeFamily> {
    let doc: FamilyDoc = parse_json("family", text)?;
    let fam = match doc {
        FamilyDoc::Explicit(f) => f,
        FamilyDoc::Generated(g) => match g.generate.as_str() {
            "rounded_boxes" => ShapeFamily::rounded_boxes(g.count, g.seed),
            "spheres" => ShapeFamily::spheres(g.count, 0.4, 1.0),
            "capsules" => ShapeFamily::capsules(g.count, g.seed),
            "ellipsoids" => ShapeFamily::ellipsoids(g.count, g.seed),
            _ => {
                return Err(AppError::Parse {
                    document: "family",
                    field: "generate".into(),
                    message: "expected rounded_boxes, spheres, capsules or ellipsoids".into(),
                })
            }
        },
    };
    fam.validate()?;
    Ok(fam)
}
