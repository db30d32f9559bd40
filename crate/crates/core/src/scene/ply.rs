use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianCloud};
use crate::math::{Quat, Vec3};
use crate::scalar::Real;

const SH_REST_COUNT: usize = 9;

fn property_names(sh_degree: u8) -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if sh_degree >= 1 {
        names.extend((0..SH_REST_COUNT).map(|i| format!("f_rest_{i}")));
    }
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

/// Vertex record in file order. `f_rest_*` is channel-major: all red
/// coefficients first, then green, then blue.
fn to_record<T: Real>(g: &Gaussian<T>, sh_degree: u8) -> Vec<f32> {
    let mut v = Vec::with_capacity(26);
    v.extend(g.position.to_array().map(Real::as_f32));
    v.extend([0.0f32; 3]);
    v.extend(g.sh_dc.to_array().map(Real::as_f32));
    if sh_degree >= 1 {
        for c in 0..3 {
            for k in 0..3 {
                v.push(g.sh_rest[k][c].as_f32());
            }
        }
    }
    v.push(g.opacity_logit.as_f32());
    v.extend(g.log_scale.to_array().map(Real::as_f32));
    v.extend(g.rotation.to_array().map(Real::as_f32));
    v
}

/// Writes `cloud` as a binary little-endian PLY in the layout used by the
/// common Gaussian-splatting viewers.
pub fn write_ply<T: Real, W: Write>(cloud: &GaussianCloud<T>, mut out: W) -> std::io::Result<()> {
    let names = property_names(cloud.sh_degree);
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", cloud.len());
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(cloud.len() * names.len() * 4);
    for g in &cloud.gaussians {
        for v in to_record(g, cloud.sh_degree) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()
}

pub fn save_ply<T: Real>(cloud: &GaussianCloud<T>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply(cloud, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

struct Header {
    count: usize,
    properties: Vec<String>,
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = String::new();
    let mut next = |r: &mut R| -> Result<String> {
        line.clear();
        let n = r.read_line(&mut line).map_err(|e| Error::format(format!("PLY header: {e}")))?;
        if n == 0 {
            return Err(Error::format("PLY header truncated"));
        }
        Ok(line.trim_end().to_string())
    };
    if next(r)? != "ply" {
        return Err(Error::format("not a PLY file"));
    }
    let mut count = None;
    let mut properties = Vec::new();
    loop {
        let l = next(r)?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            ["end_header"] => break,
            ["format", f, _] => {
                if *f != "binary_little_endian" {
                    return Err(Error::format(format!("unsupported PLY format `{f}`")));
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, n] => {
                if count.is_some() || *name != "vertex" {
                    return Err(Error::format(format!("unsupported element `{name}`; only `vertex` is read")));
                }
                count = Some(n.parse::<usize>().map_err(|_| Error::format(format!("bad vertex count `{n}`")))?);
            }
            ["property", "list", ..] => return Err(Error::format("list properties are not supported")),
            ["property", ty, name] => {
                if *ty != "float" && *ty != "float32" {
                    return Err(Error::format(format!("property `{name}` must be float, got `{ty}`")));
                }
                properties.push(name.to_string());
            }
            _ => return Err(Error::format(format!("unrecognized header line `{l}`"))),
        }
    }
    let count = count.ok_or_else(|| Error::format("missing `element vertex`"))?;
    Ok(Header { count, properties })
}

/// Parses a PLY written by [`write_ply`] or any tool using the same
/// property names. Extra properties are ignored.
pub fn read_ply<T: Real, R: Read>(input: R) -> Result<GaussianCloud<T>> {
    let mut r = BufReader::new(input);
    let header = read_header(&mut r)?;
    let has_rest = header.properties.iter().any(|n| n == "f_rest_0");
    let sh_degree = u8::from(has_rest);
    let stride = header.properties.len();
    let mut slots = Vec::new();
    for name in property_names(sh_degree) {
        let idx = header
            .properties
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::format(format!("missing vertex property `{name}`")))?;
        slots.push(idx);
    }
    let byte_len = header
        .count
        .checked_mul(stride * 4)
        .ok_or_else(|| Error::format("vertex count overflows"))?;
    let mut data = Vec::new();
    r.take(byte_len as u64)
        .read_to_end(&mut data)
        .map_err(|e| Error::format(format!("PLY body: {e}")))?;
    if data.len() < byte_len {
        return Err(Error::format(format!(
            "PLY body truncated: expected {byte_len} bytes, found {}",
            data.len()
        )));
    }
    let mut gaussians = Vec::with_capacity(header.count);
    let mut rec = vec![0f32; stride];
    for chunk in data.chunks_exact(stride * 4) {
        for (v, b) in rec.iter_mut().zip(chunk.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        let f = |k: usize| T::lit(f64::from(rec[slots[k]]));
        let v3 = |k: usize| Vec3::new(f(k), f(k + 1), f(k + 2));
        let mut g = Gaussian {
            position: v3(0),
            sh_dc: v3(6),
            ..Default::default()
        };
        let mut k = 9;
        if has_rest {
            for c in 0..3 {
                for b in 0..3 {
                    g.sh_rest[b][c] = f(k + 3 * c + b);
                }
            }
            k += SH_REST_COUNT;
        }
        g.opacity_logit = f(k);
        g.log_scale = v3(k + 1);
        g.rotation = Quat::new(f(k + 4), f(k + 5), f(k + 6), f(k + 7));
        gaussians.push(g);
    }
    Ok(GaussianCloud::from_gaussians(gaussians, sh_degree))
}

pub fn load_ply<T: Real>(path: &Path) -> Result<GaussianCloud<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(file)
}
