//! Sequence and tensor file I/O.
//!
//! Sequences are directories of 8-bit grayscale frames (PGM or PNG), ordered
//! by file name. Tensors round-trip losslessly through a small raw format:
//!
//! ```text
//! magic "T3F1" | u32le M | u32le N | u32le T | M*N*T f64le values
//! ```
//!
//! with values in frame-major, row-major order (the in-memory layout).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage as Gray8, ImageFormat};

use crate::error::{Error, Result};
use crate::segment::BinaryMask;
use crate::solver::{Decomposition, SolverConfig};
use crate::tensor::Tensor3;

const MAGIC: &[u8; 4] = b"T3F1";

/// Files of a sequence directory, lexicographically ordered.
fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| {
                    let e = e.to_ascii_lowercase();
                    e == "pgm" || e == "png"
                })
                .unwrap_or(false)
        })
        .collect();
    paths.sort_by_key(|p| p.file_name().map(|s| s.to_os_string()));
    Ok(paths)
}

/// Load a directory of grayscale frames into a `[0, 1]` tensor. Frame order
/// is the lexicographic file-name order; all frames must share dimensions and
/// there must be at least two of them.
pub fn load_sequence(dir: &Path) -> Result<Tensor3> {
    let paths = frame_paths(dir)?;
    if paths.len() < 2 {
        return Err(Error::Format(format!(
            "sequence at {} has {} frame(s); need at least 2",
            dir.display(),
            paths.len()
        )));
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut dims: Option<(u32, u32)> = None;
    for p in &paths {
        let img = image::open(p)?.into_luma8();
        let d = (img.height(), img.width());
        match dims {
            None => dims = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Format(format!(
                    "frame {} is {}x{} but earlier frames are {}x{}",
                    p.display(),
                    d.0,
                    d.1,
                    prev.0,
                    prev.1
                )));
            }
            _ => {}
        }
        frames.push(img);
    }
    let (rows, cols) = dims.expect("at least two frames");
    let (m, n, t) = (rows as usize, cols as usize, frames.len());
    let mut out = Tensor3::zeros(m, n, t);
    for (tt, img) in frames.iter().enumerate() {
        let dst = out.frame_mut(tt);
        for (i, px) in img.pixels().enumerate() {
            dst[i] = px.0[0] as f64 / 255.0;
        }
    }
    Ok(out)
}

/// Write a `[0, 1]` tensor as one 8-bit PGM per frame (`frame_0000.pgm`, ...).
pub fn save_sequence(x: &Tensor3, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (m, n, t) = x.dims();
    for tt in 0..t {
        let frame = x.frame(tt);
        let img = Gray8::from_fn(n as u32, m as u32, |c, r| {
            let v = frame[r as usize * n + c as usize].clamp(0.0, 1.0);
            image::Luma([(v * 255.0).round() as u8])
        });
        let path = dir.join(format!("frame_{tt:04}.pgm"));
        img.save_with_format(&path, ImageFormat::Pnm)?;
    }
    Ok(())
}

/// Write a tensor in the raw lossless format.
pub fn save_raw_tensor(x: &Tensor3, path: &Path) -> Result<()> {
    let (m, n, t) = x.dims();
    let mut buf = Vec::with_capacity(16 + 8 * x.len());
    buf.extend_from_slice(MAGIC);
    for d in [m, n, t] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in x.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Read a tensor written by [`save_raw_tensor`]. The payload length must
/// match the header dimensions exactly.
pub fn load_raw_tensor(path: &Path) -> Result<Tensor3> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "{} is not a raw tensor file",
            path.display()
        )));
    }
    let dim = |i: usize| {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize
    };
    let (m, n, t) = (dim(0), dim(1), dim(2));
    let expect = 16 + 8 * m * n * t;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "{}: payload is {} bytes, header {m}x{n}x{t} requires {expect}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let tensor = Tensor3::from_vec(m, n, t, data)?;
    if !tensor.is_all_finite() {
        return Err(Error::NonFinite { context: "raw tensor file", iteration: 0 });
    }
    Ok(tensor)
}

/// Write one binary mask as an 8-bit PGM (255 inside, 0 outside).
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let (m, n) = mask.dims();
    let img = Gray8::from_fn(n as u32, m as u32, |c, r| {
        image::Luma([if mask.get(r as usize, c as usize) { 255u8 } else { 0 }])
    });
    img.save_with_format(path, ImageFormat::Pnm)?;
    Ok(())
}

/// Load every PGM/PNG in a directory as a binary mask (luma >= 128).
pub fn load_masks(dir: &Path) -> Result<Vec<BinaryMask>> {
    let paths = frame_paths(dir)?;
    if paths.is_empty() {
        return Err(Error::Format(format!("no mask images in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let img = image::open(p)?.into_luma8();
            let (rows, cols) = (img.height() as usize, img.width() as usize);
            Ok(BinaryMask::from_fn(rows, cols, |r, c| {
                img.get_pixel(c as u32, r as u32).0[0] >= 128
            }))
        })
        .collect()
}

/// Map a layer tensor frame to display bytes with one min-max range for the
/// whole layer; a constant layer renders mid-gray.
fn layer_display_frames(x: &Tensor3) -> Vec<Gray8> {
    let (m, n, t) = x.dims();
    let lo = x.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    (0..t)
        .map(|tt| {
            let frame = x.frame(tt);
            Gray8::from_fn(n as u32, m as u32, |c, r| {
                let v = frame[r as usize * n + c as usize];
                let byte = if span > 0.0 {
                    ((v - lo) / span * 255.0).round() as u8
                } else {
                    128
                };
                image::Luma([byte])
            })
        })
        .collect()
}

/// Write every layer of a decomposition under `dir`: a lossless raw tensor
/// per layer, per-frame display images normalized per layer, and a metadata
/// file with the configuration and convergence record.
pub fn save_layers(dec: &Decomposition, config: &SolverConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let layers: [(&str, &Tensor3); 4] = [
        ("background", &dec.background),
        ("dynamic_background", &dec.dynamic_background),
        ("foreground", &dec.foreground),
        ("noise", &dec.noise),
    ];
    for (name, tensor) in layers {
        save_raw_tensor(tensor, &dir.join(format!("{name}.t3f")))?;
        let subdir = dir.join(name);
        fs::create_dir_all(&subdir)?;
        for (tt, img) in layer_display_frames(tensor).iter().enumerate() {
            img.save_with_format(subdir.join(format!("frame_{tt:04}.pgm")), ImageFormat::Pnm)?;
        }
    }

    let mut meta = String::new();
    meta.push_str(&format!("lambda1 = {}\n", config.lambda1));
    meta.push_str(&format!("lambda2 = {}\n", config.lambda2));
    meta.push_str(&format!("lambda3 = {}\n", config.lambda3));
    meta.push_str(&format!("lambda4 = {}\n", config.lambda4));
    meta.push_str(&format!("mu0 = {}\n", config.mu0));
    meta.push_str(&format!("nu0 = {}\n", config.nu0));
    meta.push_str(&format!("mu_max = {}\n", config.mu_max));
    meta.push_str(&format!("nu_max = {}\n", config.nu_max));
    meta.push_str(&format!("rho = {}\n", config.rho));
    meta.push_str(&format!("sigma_m = {}\n", config.weights.m));
    meta.push_str(&format!("sigma_n = {}\n", config.weights.n));
    meta.push_str(&format!("sigma_t = {}\n", config.weights.t));
    meta.push_str(&format!("epsilon = {}\n", config.epsilon));
    meta.push_str(&format!("imax = {}\n", config.imax));
    meta.push_str(&format!("iterations = {}\n", dec.iterations));
    meta.push_str(&format!("converged = {}\n", dec.converged));
    let history: Vec<String> = dec.residual_history.iter().map(|r| r.to_string()).collect();
    meta.push_str(&format!("residual_history = {}\n", history.join(",")));
    fs::write(dir.join("metadata.txt"), meta)?;
    Ok(())
}
