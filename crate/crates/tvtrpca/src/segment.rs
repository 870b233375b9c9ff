//! Foreground-frame segmentation into a binary tubular mask.
//!
//! The pipeline: binarize the frame at 95% of its maximum and region-grow
//! from an automatically selected seed (stage 1, the main branch), then
//! enhance the frame with an oriented Gaussian-second-derivative filter,
//! extract scan-line segment means between edge-graph crossings (the
//! Radon-like step), binarize that response, union it with the stage-1 mask
//! and region-grow once more from the same seed (stage 2). Stage 2 can only
//! add pixels, so the final mask always contains the stage-1 mask.
//!
//! Convention: a `GrayImage` handed to [`tsrg`] stores vessels bright
//! (high values). The edge-enhancement step inverts internally because the
//! second-derivative kernels are signed to respond positively to dark ridges
//! on a bright field.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Fraction of the maximum gray value used for the stage-1 binarization.
pub const STAGE1_THRESHOLD_FRACTION: f64 = 0.95;
/// Fraction of the maximum enhancement response kept as edge-graph nodes.
pub const EDGE_GRAPH_FRACTION: f64 = 0.5;
/// Fraction of the maximum scan-line response kept for the stage-2 union.
pub const RLF_MASK_FRACTION: f64 = 0.5;

/// Real `M x N` image with entries in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "image dims must be positive");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                assert!((0.0..=1.0).contains(&v), "gray value {v} outside [0,1]");
                img.data[r * cols + c] = v;
            }
        }
        img
    }

    /// Min-max normalize arbitrary finite values into `[0, 1]`. A constant
    /// input maps to all zeros.
    pub fn normalized(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{} values cannot fill a {rows}x{cols} image",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "image normalization", iteration: 0 });
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let data = if span > 0.0 {
            values.iter().map(|&v| (v - lo) / span).collect()
        } else {
            vec![0.0; values.len()]
        };
        Ok(Self { rows, cols, data })
    }

    /// Map possibly signed foreground values to the vessels-bright convention:
    /// magnitude, then min-max normalization.
    pub fn from_signed_magnitude(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        Self::normalized(rows, cols, &mags)
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(r < self.rows && c < self.cols, "pixel ({r},{c}) out of range");
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    /// Invert intensities: vessels-bright to vessels-dark and back.
    pub fn inverted(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| 1.0 - v).collect(),
        }
    }
}

/// Boolean `M x N` mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "mask dims must be positive");
        Self { rows, cols, data: vec![false; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "pixel ({r},{c}) out of range");
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        assert!(r < self.rows && c < self.cols, "pixel ({r},{c}) out of range");
        self.data[r * self.cols + c] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims(), "mask dims differ");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn is_superset_of(&self, other: &Self) -> bool {
        assert_eq!(self.dims(), other.dims(), "mask dims differ");
        self.data.iter().zip(&other.data).all(|(&a, &b)| a || !b)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }
}

/// Scan-line and enhancement parameters.
///
/// `sup` bounds the pixel length of a scan-line segment between edge nodes
/// (longer runs are averaged in `sup`-length windows; a line that meets no
/// edge at all stays whole). `or_count` is the number of interleaved
/// intercept families traced per direction. `sc` is the largest Gaussian
/// scale of the enhancement kernels; the filter runs at `{sc/4, sc/2, sc}`
/// over eight orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct RlfParams {
    pub sup: usize,
    pub or_count: usize,
    pub sc: f64,
}

impl Default for RlfParams {
    fn default() -> Self {
        Self { sup: 25, or_count: 1, sc: 10.0 }
    }
}

impl RlfParams {
    pub fn validate(&self) -> Result<()> {
        if self.sup < 3 {
            return Err(Error::InvalidParameter(format!("sup must be >= 3, got {}", self.sup)));
        }
        if self.or_count < 1 {
            return Err(Error::InvalidParameter("or must be >= 1".into()));
        }
        if !(self.sc > 0.0) {
            return Err(Error::InvalidParameter(format!("sc must be positive, got {}", self.sc)));
        }
        Ok(())
    }

    pub fn scales(&self) -> Vec<f64> {
        vec![self.sc / 4.0, self.sc / 2.0, self.sc]
    }

    pub fn orientations(&self) -> Vec<f64> {
        (0..8).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect()
    }
}

/// Oriented second-derivative-of-Gaussian kernel. Positive response to dark
/// ridges on a bright field; gamma-normalized so responses are comparable
/// across scales; zero mean so flat regions respond exactly zero.
fn gsd_kernel(sigma: f64, theta: f64) -> (usize, Vec<f64>) {
    let radius = (3.0 * sigma).ceil() as usize;
    let size = 2 * radius + 1;
    let (sin_t, cos_t) = theta.sin_cos();
    let mut k = vec![0.0; size * size];
    for dy in 0..size {
        for dx in 0..size {
            let y = dy as f64 - radius as f64;
            let x = dx as f64 - radius as f64;
            let u = x * cos_t + y * sin_t;
            let g = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            k[dy * size + dx] = (u * u - sigma * sigma) / (sigma * sigma) * g;
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    for v in &mut k {
        *v -= mean;
    }
    (radius, k)
}

/// Correlate an image with a square kernel, replicating border pixels.
fn correlate(img: &GrayImage, radius: usize, kernel: &[f64]) -> Vec<f64> {
    let (rows, cols) = img.dims();
    let size = 2 * radius + 1;
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for dy in 0..size {
                let rr = (r + dy).saturating_sub(radius).min(rows - 1);
                for dx in 0..size {
                    let cc = (c + dx).saturating_sub(radius).min(cols - 1);
                    acc += kernel[dy * size + dx] * img.get(rr, cc);
                }
            }
            out[r * cols + c] = acc;
        }
    }
    out
}

/// Edge-enhancing oriented second-derivative filter: per pixel, the largest
/// response over all `(scale, orientation)` pairs, clamped at zero and
/// min-max normalized to `[0, 1]`.
pub fn gsd_filter(img: &GrayImage, scales: &[f64], orientations: &[f64]) -> Result<GrayImage> {
    if scales.is_empty() || orientations.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one scale and one orientation".into(),
        ));
    }
    let (rows, cols) = img.dims();
    for &s in scales {
        let radius = (3.0 * s).ceil() as usize;
        if 2 * radius + 1 > rows || 2 * radius + 1 > cols {
            return Err(Error::InvalidParameter(format!(
                "kernel for scale {s} exceeds the {rows}x{cols} image"
            )));
        }
    }
    let combos: Vec<(f64, f64)> = scales
        .iter()
        .flat_map(|&s| orientations.iter().map(move |&o| (s, o)))
        .collect();
    let responses: Vec<Vec<f64>> = combos
        .par_iter()
        .map(|&(sigma, theta)| {
            let (radius, kernel) = gsd_kernel(sigma, theta);
            correlate(img, radius, &kernel)
        })
        .collect();
    let mut best = vec![f64::NEG_INFINITY; rows * cols];
    for resp in &responses {
        for (b, &v) in best.iter_mut().zip(resp) {
            *b = b.max(v);
        }
    }
    for b in &mut best {
        *b = b.max(0.0);
    }
    GrayImage::normalized(rows, cols, &best)
}

/// Pixels whose enhancement response reaches `threshold_fraction` of the
/// maximum response. An all-zero response yields an empty mask.
pub fn edge_graph(response: &GrayImage, threshold_fraction: f64) -> Result<BinaryMask> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge threshold fraction must lie in (0,1), got {threshold_fraction}"
        )));
    }
    let (rows, cols) = response.dims();
    let max = response.max_value();
    if max <= 0.0 {
        return Ok(BinaryMask::new(rows, cols));
    }
    let thr = threshold_fraction * max;
    Ok(BinaryMask::from_fn(rows, cols, |r, c| response.get(r, c) >= thr))
}

/// One family of parallel scan lines: every pixel is visited exactly once.
fn trace_family(
    rows: usize,
    cols: usize,
    theta: f64,
    offset: f64,
    mut visit: impl FnMut(&[(usize, usize)]),
) {
    let (sin_t, cos_t) = theta.sin_cos();
    let x_dominant = cos_t.abs() >= sin_t.abs();
    if x_dominant {
        // y = b + offset + slope * x, stepping x across the columns
        let slope = sin_t / cos_t;
        let reach = (slope.abs() * cols as f64).ceil() as isize + 1;
        for b in -reach..rows as isize + reach {
            let mut run: Vec<(usize, usize)> = Vec::new();
            for x in 0..cols {
                let y = (b as f64 + offset + slope * x as f64 + 0.5).floor() as isize;
                if y >= 0 && (y as usize) < rows {
                    run.push((y as usize, x));
                } else if !run.is_empty() {
                    visit(&run);
                    run.clear();
                }
            }
            if !run.is_empty() {
                visit(&run);
            }
        }
    } else {
        let slope = cos_t / sin_t;
        let reach = (slope.abs() * rows as f64).ceil() as isize + 1;
        for b in -reach..cols as isize + reach {
            let mut run: Vec<(usize, usize)> = Vec::new();
            for y in 0..rows {
                let x = (b as f64 + offset + slope * y as f64 + 0.5).floor() as isize;
                if x >= 0 && (x as usize) < cols {
                    run.push((y, x as usize));
                } else if !run.is_empty() {
                    visit(&run);
                    run.clear();
                }
            }
            if !run.is_empty() {
                visit(&run);
            }
        }
    }
}

/// Spread the mean of `g` over each chunk of `run`, where chunks are
/// delimited by edge-mask crossings (and capped at `sup` pixels). A run that
/// never meets the edge mask stays one segment.
fn fill_run(run: &[(usize, usize)], g: &GrayImage, edges: &BinaryMask, sup: usize, out: &mut [f64]) {
    let cols = g.dims().1;
    let nodes: Vec<usize> = run
        .iter()
        .enumerate()
        .filter(|(_, &(r, c))| edges.get(r, c))
        .map(|(i, _)| i)
        .collect();

    let mut spread = |lo: usize, hi: usize| {
        // half-open [lo, hi); cap at sup-length windows
        let mut start = lo;
        while start < hi {
            let end = (start + sup).min(hi);
            let sum: f64 = run[start..end].iter().map(|&(r, c)| g.get(r, c)).sum();
            let mean = sum / (end - start) as f64;
            for &(r, c) in &run[start..end] {
                out[r * cols + c] = mean;
            }
            start = end;
        }
    };

    if nodes.is_empty() {
        // degenerate segmentation: the whole run is one segment
        let sum: f64 = run.iter().map(|&(r, c)| g.get(r, c)).sum();
        let mean = sum / run.len() as f64;
        for &(r, c) in run {
            out[r * cols + c] = mean;
        }
        return;
    }
    let mut prev = 0usize;
    for &node in &nodes {
        spread(prev, node + 1);
        prev = node + 1;
    }
    spread(prev, run.len());
}

/// Radon-like scan-line filter: segment every scan line at its edge-graph
/// crossings, replace each segment by the mean of `g` along it, average over
/// all line families, then min-max normalize.
///
/// `g` is the edge-enhanced image the segment means are taken from.
pub fn rlf_filter(g: &GrayImage, edges: &BinaryMask, params: &RlfParams) -> Result<GrayImage> {
    params.validate()?;
    if g.dims() != edges.dims() {
        return Err(Error::DimMismatch(format!(
            "image {:?} vs edge mask {:?}",
            g.dims(),
            edges.dims()
        )));
    }
    let (rows, cols) = g.dims();
    let orientations = params.orientations();
    let mut acc = vec![0.0; rows * cols];
    let mut families = 0usize;
    for &theta in &orientations {
        for j in 0..params.or_count {
            let offset = j as f64 / params.or_count as f64;
            let mut family = vec![0.0; rows * cols];
            trace_family(rows, cols, theta, offset, |run| {
                fill_run(run, g, edges, params.sup, &mut family);
            });
            for (a, v) in acc.iter_mut().zip(&family) {
                *a += v;
            }
            families += 1;
        }
    }
    let inv = 1.0 / families as f64;
    for a in &mut acc {
        *a *= inv;
    }
    GrayImage::normalized(rows, cols, &acc)
}

/// Center of the disk position maximizing the minimum intensity over the
/// disk; ties break to the first center in row-major order.
pub fn select_seed(img: &GrayImage, disk_radius: usize) -> Result<(usize, usize)> {
    let (rows, cols) = img.dims();
    let d = 2 * disk_radius + 1;
    if d > rows || d > cols {
        return Err(Error::DiskTooLarge { radius: disk_radius, rows, cols });
    }
    let r2 = (disk_radius * disk_radius) as isize;
    let offsets: Vec<(isize, isize)> = (-(disk_radius as isize)..=disk_radius as isize)
        .flat_map(|dr| {
            (-(disk_radius as isize)..=disk_radius as isize)
                .filter(move |&dc| dr * dr + dc * dc <= r2)
                .map(move |dc| (dr, dc))
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_pos = (disk_radius, disk_radius);
    for r in disk_radius..rows - disk_radius {
        for c in disk_radius..cols - disk_radius {
            let mut lo = f64::INFINITY;
            for &(dr, dc) in &offsets {
                let v = img.get((r as isize + dr) as usize, (c as isize + dc) as usize);
                if v < lo {
                    lo = v;
                    if lo <= best {
                        break;
                    }
                }
            }
            if lo > best {
                best = lo;
                best_pos = (r, c);
            }
        }
    }
    Ok(best_pos)
}

/// Breadth-first 4-connected flood fill from `seed` over pixels satisfying
/// `criterion`. Returns an empty mask when the seed itself fails.
pub fn region_grow(
    img: &GrayImage,
    seed: (usize, usize),
    criterion: impl Fn(f64) -> bool,
) -> BinaryMask {
    let (rows, cols) = img.dims();
    assert!(seed.0 < rows && seed.1 < cols, "seed out of range");
    let mut mask = BinaryMask::new(rows, cols);
    if !criterion(img.get(seed.0, seed.1)) {
        return mask;
    }
    let mut queue = VecDeque::new();
    mask.set(seed.0, seed.1, true);
    queue.push_back(seed);
    while let Some((r, c)) = queue.pop_front() {
        let neighbors = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r, c + 1),
        ];
        for (nr, nc) in neighbors {
            if nr < rows && nc < cols && !mask.get(nr, nc) && criterion(img.get(nr, nc)) {
                mask.set(nr, nc, true);
                queue.push_back((nr, nc));
            }
        }
    }
    mask
}

/// Output of [`tsrg`]: the seed, the stage-1 main-branch mask and the final
/// mask (always a superset of stage 1).
#[derive(Debug, Clone)]
pub struct TsrgMasks {
    pub seed: (usize, usize),
    pub stage1: BinaryMask,
    pub final_mask: BinaryMask,
}

/// Two-stage region growth over a vessels-bright foreground frame.
pub fn tsrg(frame: &GrayImage, params: &RlfParams, disk_radius: usize) -> Result<TsrgMasks> {
    params.validate()?;
    let max = frame.max_value();
    if max <= 0.0 {
        return Err(Error::EmptyForeground);
    }

    // stage 1: global threshold at 95% of max, grow the main branch
    let threshold = STAGE1_THRESHOLD_FRACTION * max;
    let seed = select_seed(frame, disk_radius)?;
    let stage1 = region_grow(frame, seed, |v| v >= threshold);
    if stage1.is_empty() {
        return Err(Error::EmptyForeground);
    }

    // stage 2: scan-line enhancement, union, grow again from the same seed
    let enhanced = gsd_filter(&frame.inverted(), &params.scales(), &params.orientations())?;
    let edges = edge_graph(&enhanced, EDGE_GRAPH_FRACTION)?;
    let rlf = rlf_filter(&enhanced, &edges, params)?;
    let rlf_max = rlf.max_value();
    let rlf_mask = if rlf_max > 0.0 {
        BinaryMask::from_fn(frame.dims().0, frame.dims().1, |r, c| {
            rlf.get(r, c) >= RLF_MASK_FRACTION * rlf_max
        })
    } else {
        BinaryMask::new(frame.dims().0, frame.dims().1)
    };
    let combined = stage1.union(&rlf_mask);
    let final_mask = region_grow_mask(&combined, seed);

    Ok(TsrgMasks { seed, stage1, final_mask })
}

/// Flood fill over an existing binary image.
fn region_grow_mask(mask: &BinaryMask, seed: (usize, usize)) -> BinaryMask {
    let (rows, cols) = mask.dims();
    let as_gray = GrayImage {
        rows,
        cols,
        data: mask.as_slice().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    };
    region_grow(&as_gray, seed, |v| v > 0.5)
}
