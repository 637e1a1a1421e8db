//! Mesh export (OBJ, PLY, binary) and OBJ import.
//!
//! Binary layout, all little-endian:
//!
//! | bytes            | content                                   |
//! |------------------|-------------------------------------------|
//! | 4                | magic `ISOM`                              |
//! | 4 × u32          | version (1), vertex count V, triangle count T, channel count C |
//! | 12·V             | positions, f32 `x y z` per vertex         |
//! | 12·T             | indices, u32 `a b c` per triangle         |
//! | per channel      | u32 name length n, n bytes UTF-8 name, 4·V bytes f32 values |

use std::fmt::Write as _;
use std::path::Path;

use isoedit_core::geometry::{Mesh, ScalarChannel};

use crate::error::{AppError, AppResult};

pub const MAGIC: &[u8; 4] = b"ISOM";
pub const BINARY_VERSION: u32 = 1;

pub fn to_binary(mesh: &Mesh) -> Vec<u8> {
    let v = mesh.vertices.len();
    let mut out = Vec::with_capacity(20 + 12 * v + 12 * mesh.triangles.len() + mesh.channels.len() * (4 * v + 16));
    out.extend_from_slice(MAGIC);
    for n in [BINARY_VERSION, v as u32, mesh.triangles.len() as u32, mesh.channels.len() as u32] {
        out.extend_from_slice(&n.to_le_bytes());
    }
    for p in &mesh.vertices {
        for c in p {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        for i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    for ch in &mesh.channels {
        out.extend_from_slice(&(ch.name.len() as u32).to_le_bytes());
        out.extend_from_slice(ch.name.as_bytes());
        for x in &ch.values {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    out
}

/// Decode a binary mesh. Values come back widened from `f32`.
pub fn from_binary(bytes: &[u8]) -> AppResult<Mesh> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(AppError::format("binary mesh: bad magic"));
    }
    if r.u32()? != BINARY_VERSION {
        return Err(AppError::format("binary mesh: unsupported version"));
    }
    let (nv, nt, nc) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let mut mesh = Mesh::default();
    for _ in 0..nv {
        mesh.vertices.push([r.f32()?, r.f32()?, r.f32()?]);
    }
    for _ in 0..nt {
        mesh.triangles.push([r.u32()?, r.u32()?, r.u32()?]);
    }
    for _ in 0..nc {
        let n = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(n)?).map_err(|_| AppError::format("binary mesh: channel name"))?;
        let values = (0..nv).map(|_| r.f32()).collect::<AppResult<Vec<_>>>()?;
        mesh.channels.push(ScalarChannel { name: name.to_string(), values });
    }
    if r.at != bytes.len() {
        return Err(AppError::format("binary mesh: trailing bytes"));
    }
    mesh.validate()?;
    Ok(mesh)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> AppResult<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| AppError::format("binary mesh: truncated"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> AppResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> AppResult<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

/// Diverging colour map: blue for negative, white at zero, red for positive,
/// symmetric around zero and scaled by the largest magnitude.
pub fn diverging_colors(values: &[f64]) -> Vec<[f64; 3]> {
    let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    values
        .iter()
        .map(|v| {
            let t = if m > 0.0 { (v / m).clamp(-1.0, 1.0) } else { 0.0 };
            if t >= 0.0 {
                [1.0, 1.0 - t, 1.0 - t]
            } else {
                [1.0 + t, 1.0 + t, 1.0]
            }
        })
        .collect()
}

/// Wavefront OBJ. The first scalar channel, if any, is written as vertex
/// colours and its raw values as `# vc` comment lines.
pub fn to_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    let channel = mesh.channels.first();
    let colors = channel.map(|c| diverging_colors(&c.values));
    if let Some(c) = channel {
        let _ = writeln!(s, "# channel {}", c.name);
    }
    for (i, p) in mesh.vertices.iter().enumerate() {
        match &colors {
            Some(c) => {
                let [r, g, b] = c[i];
                let _ = writeln!(s, "v {} {} {} {r:.6} {g:.6} {b:.6}", p[0], p[1], p[2]);
            }
            None => {
                let _ = writeln!(s, "v {} {} {}", p[0], p[1], p[2]);
            }
        }
    }
    if let Some(c) = channel {
        for v in &c.values {
            let _ = writeln!(s, "# vc {v}");
        }
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

/// ASCII PLY with every scalar channel as a float property and the first
/// one also as `uchar` colours.
pub fn to_ply(mesh: &Mesh) -> String {
    let mut s = String::new();
    let names: Vec<String> = mesh.channels.iter().map(|c| sanitize(&c.name)).collect();
    let colors = mesh.channels.first().map(|c| diverging_colors(&c.values));
    let _ = writeln!(s, "ply\nformat ascii 1.0\nelement vertex {}", mesh.vertices.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    for n in &names {
        let _ = writeln!(s, "property double {n}");
    }
    if colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(s, "element face {}\nproperty list uchar uint vertex_indices\nend_header", mesh.triangles.len());
    for (i, p) in mesh.vertices.iter().enumerate() {
        let _ = write!(s, "{} {} {}", p[0], p[1], p[2]);
        for c in &mesh.channels {
            let _ = write!(s, " {}", c.values[i]);
        }
        if let Some(c) = &colors {
            for x in c[i] {
                let _ = write!(s, " {}", (x * 255.0).round() as u8);
            }
        }
        s.push('\n');
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// Parse vertices and faces of an OBJ file; polygons are fan-triangulated.
pub fn parse_obj(text: &str) -> AppResult<Mesh> {
    let mut mesh = Mesh::default();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let bad = |m: &str| AppError::Parse { document: "obj", field: format!("line {}", ln + 1), message: m.into() };
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(|t| t.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad("bad coordinate"))?;
                if c.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                mesh.vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let n = mesh.vertices.len() as i64;
                let idx: Vec<u32> = it
                    .map(|t| {
                        let i: i64 = t.split('/').next().unwrap_or("").parse().map_err(|_| bad("bad index"))?;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(bad("index out of range"));
                        }
                        Ok(i as u32)
                    })
                    .collect::<AppResult<_>>()?;
                if idx.len() < 3 {
                    return Err(bad("face needs three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

pub fn read_obj(path: &Path) -> AppResult<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_obj(&text)
}

/// Write by extension: `.obj`, `.ply` or `.bin`.
pub fn write_mesh(path: &Path, mesh: &Mesh) -> AppResult<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let bytes = match ext.as_str() {
        "obj" => to_obj(mesh).into_bytes(),
        "ply" => to_ply(mesh).into_bytes(),
        "bin" => to_binary(mesh),
        _ => {
            return Err(AppError::Parse {
                document: "arguments",
                field: "out".into(),
                message: "mesh output must end in .obj, .ply or .bin".into(),
            })
        }
    };
    std::fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}
