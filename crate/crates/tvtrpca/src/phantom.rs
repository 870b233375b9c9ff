//! Synthetic test sequences with exact ground truth.
//!
//! A phantom is built from the same layer model the solver assumes: a
//! low-rank static background (sum of separable smooth textures), a dark
//! tube following a smoothly oscillating trajectory whose side branches
//! extend over time, a few slow-moving low-intensity blobs, and i.i.d.
//! Gaussian noise. The tube support doubles as the per-frame ground-truth
//! segmentation mask. Everything is driven by a single seeded RNG, so a
//! given spec reproduces bit-identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::segment::BinaryMask;
use crate::solver::Decomposition;
use crate::tensor::Tensor3;

/// Phantom geometry and intensity parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub m: usize,
    pub n: usize,
    pub t: usize,
    /// Slice rank of the static background texture.
    pub background_rank: usize,
    /// Full width of the main tube in pixels.
    pub tube_width: f64,
    /// Intensity subtracted along the tube (vessels are dark).
    pub tube_depth: f64,
    /// Amplitude in pixels of the tube's temporal sway.
    pub trajectory_amplitude: f64,
    /// Side branches growing out of the main tube over time.
    pub branch_count: usize,
    pub blob_count: usize,
    pub blob_intensity: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            m: 128,
            n: 128,
            t: 20,
            background_rank: 3,
            tube_width: 7.0,
            tube_depth: 0.45,
            trajectory_amplitude: 8.0,
            branch_count: 2,
            blob_count: 3,
            blob_intensity: 0.06,
            noise_sigma: 0.01,
            seed: 7,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 || self.t < 2 {
            return Err(Error::InvalidParameter(format!(
                "phantom dims must be at least 2x2x2, got {}x{}x{}",
                self.m, self.n, self.t
            )));
        }
        if self.background_rank == 0 {
            return Err(Error::InvalidParameter("background rank must be positive".into()));
        }
        if self.tube_width < 0.0 {
            return Err(Error::InvalidParameter("tube width must be nonnegative".into()));
        }
        if self.tube_width > 0.0 && (!(self.tube_depth > 0.0) || self.tube_depth > 1.0) {
            return Err(Error::InvalidParameter("tube depth must lie in (0, 1]".into()));
        }
        if self.noise_sigma < 0.0 || self.trajectory_amplitude < 0.0 {
            return Err(Error::InvalidParameter(
                "noise sigma and trajectory amplitude must be nonnegative".into(),
            ));
        }
        let margin = self.tube_width + self.trajectory_amplitude + 2.0;
        if self.tube_width > 0.0 && 4.0 * margin >= self.m.min(self.n) as f64 {
            return Err(Error::InvalidParameter(format!(
                "tube of width {} with sway {} does not fit a {}x{} frame",
                self.tube_width, self.trajectory_amplitude, self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Observation plus exact ground truth.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub observation: Tensor3,
    /// Exact tube support per frame.
    pub truth_masks: Vec<BinaryMask>,
    /// The constructed layers, packaged like a solver output.
    pub truth: Decomposition,
}

struct Branch {
    anchor_frac: f64, // position along the main tube, 0..1
    dir: (f64, f64),  // unit direction in (row, col)
    max_len: f64,
    appear_frac: f64, // fraction of the sequence after which growth starts
    width_factor: f64,
    depth_factor: f64,
}

/// Column of the main-tube centerline at row `r`, frame `tt`. The temporal
/// sway mixes incommensurate frequencies with a row-dependent phase shear,
/// mimicking cardiac motion; a single smooth oscillation would be too easy
/// to absorb into the low-rank layer.
fn centerline(spec: &PhantomSpec, r: f64, tt: usize) -> f64 {
    let m = spec.m as f64;
    let n = spec.n as f64;
    let tau = std::f64::consts::TAU;
    let phase = tau * tt as f64 / spec.t as f64;
    n / 2.0
        + 0.15 * n * (tau * (r / m) * 1.2 + 0.4).sin()
        + spec.trajectory_amplitude
            * (0.6 * (phase + 1.1 * tau * r / m).sin()
                + 0.4 * (2.61803 * phase + 0.5 + 2.3 * tau * r / m).sin())
}

fn stamp_disk(mask: &mut Vec<bool>, depth: &mut Vec<f64>, m: usize, n: usize, cr: f64, cc: f64, radius: f64, d: f64) {
    let r0 = ((cr - radius).floor().max(0.0)) as usize;
    let r1 = ((cr + radius).ceil() as usize).min(m.saturating_sub(1));
    let c0 = ((cc - radius).floor().max(0.0)) as usize;
    let c1 = ((cc + radius).ceil() as usize).min(n.saturating_sub(1));
    for r in r0..=r1 {
        for c in c0..=c1 {
            let dr = r as f64 - cr;
            let dc = c as f64 - cc;
            if dr * dr + dc * dc <= radius * radius {
                let i = r * n + c;
                mask[i] = true;
                depth[i] = depth[i].max(d);
            }
        }
    }
}

/// Build the observation, truth masks and truth layers for a spec.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let (m, n, t) = (spec.m, spec.n, spec.t);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Uniform::new(0.0f64, 1.0).expect("static bounds");

    // static background: constant plus rank-1 separable sinusoid products,
    // amplitudes bounded so no clipping occurs and the slice rank is exact
    let extra = spec.background_rank - 1;
    let mut terms = Vec::with_capacity(extra);
    let total_amp = 0.17;
    for _ in 0..extra {
        let amp = total_amp / extra.max(1) as f64 * (0.6 + 0.4 * unit.sample(&mut rng));
        let fm = rng.random_range(1..4) as f64;
        let fn_ = rng.random_range(1..4) as f64;
        let pm = unit.sample(&mut rng) * std::f64::consts::TAU;
        let pn = unit.sample(&mut rng) * std::f64::consts::TAU;
        terms.push((amp, fm, fn_, pm, pn));
    }
    let bg_frame: Vec<f64> = (0..m * n)
        .map(|i| {
            let (r, c) = (i / n, i % n);
            let mut v = 0.62;
            for &(amp, fm, fn_, pm, pn) in &terms {
                v += amp
                    * (std::f64::consts::TAU * fm * r as f64 / m as f64 + pm).sin()
                    * (std::f64::consts::TAU * fn_ * c as f64 / n as f64 + pn).sin();
            }
            v
        })
        .collect();
    let background = Tensor3::from_fn(m, n, t, |r, c, _| bg_frame[r * n + c]);

    // branch geometry drawn once, rendered per frame
    let branches: Vec<Branch> = (0..spec.branch_count)
        .map(|i| {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let angle = (35.0 + 20.0 * unit.sample(&mut rng)).to_radians();
            Branch {
                anchor_frac: 0.25 + 0.4 * unit.sample(&mut rng),
                dir: (angle.cos(), side * angle.sin()),
                max_len: 0.18 * m.min(n) as f64 * (0.8 + 0.4 * unit.sample(&mut rng)),
                appear_frac: 0.15 + 0.25 * unit.sample(&mut rng),
                width_factor: 0.75,
                depth_factor: 0.8,
            }
        })
        .collect();

    // tube layer and masks
    let has_tube = spec.tube_width > 0.0;
    let mut foreground = Tensor3::zeros(m, n, t);
    let mut truth_masks = Vec::with_capacity(t);
    let margin = spec.tube_width;
    let row_lo = margin.ceil() as usize;
    let row_hi = m.saturating_sub(margin.ceil() as usize);
    for tt in 0..t {
        let mut mask = vec![false; m * n];
        let mut depth = vec![0.0f64; m * n];
        let radius = spec.tube_width / 2.0;
        let mut r = row_lo as f64;
        while has_tube && r <= row_hi as f64 {
            let c = centerline(spec, r, tt);
            stamp_disk(&mut mask, &mut depth, m, n, r, c, radius, spec.tube_depth);
            r += 0.5;
        }
        for br in branches.iter().filter(|_| has_tube) {
            let grow = ((tt as f64 / (t - 1) as f64 - br.appear_frac) / (1.0 - br.appear_frac))
                .clamp(0.0, 1.0);
            let len = br.max_len * grow;
            if len < 1.0 {
                continue;
            }
            let anchor_r = row_lo as f64 + br.anchor_frac * (row_hi - row_lo) as f64;
            let anchor_c = centerline(spec, anchor_r, tt);
            let mut s = 0.0;
            while s <= len {
                let cr = anchor_r + s * br.dir.0;
                let cc = anchor_c + s * br.dir.1;
                if cr < 1.0 || cr >= (m - 1) as f64 || cc < 1.0 || cc >= (n - 1) as f64 {
                    break;
                }
                stamp_disk(
                    &mut mask,
                    &mut depth,
                    m,
                    n,
                    cr,
                    cc,
                    radius * br.width_factor,
                    spec.tube_depth * br.depth_factor,
                );
                s += 0.5;
            }
        }
        let frame = foreground.frame_mut(tt);
        for (i, (&is_tube, &d)) in mask.iter().zip(&depth).enumerate() {
            if is_tube {
                frame[i] = -d;
            }
        }
        truth_masks.push(BinaryMask::from_fn(m, n, |r, c| mask[r * n + c]));
    }

    // slow-moving low-intensity blobs, kept clear of the tube's column band
    let mut dynamic = Tensor3::zeros(m, n, t);
    let blob_sigma = 0.04 * m.min(n) as f64 + 2.0;
    for b in 0..spec.blob_count {
        let side = if b % 2 == 0 { 0.18 } else { 0.82 };
        let r0 = (0.2 + 0.6 * unit.sample(&mut rng)) * m as f64;
        let c0 = side * n as f64 + 4.0 * (unit.sample(&mut rng) - 0.5);
        let vr = 0.9 * (unit.sample(&mut rng) - 0.5);
        let vc = 0.9 * (unit.sample(&mut rng) - 0.5);
        for tt in 0..t {
            let cr = r0 + vr * tt as f64;
            let cc = c0 + vc * tt as f64;
            let frame = dynamic.frame_mut(tt);
            for r in 0..m {
                for c in 0..n {
                    let dr = r as f64 - cr;
                    let dc = c as f64 - cc;
                    let g = (-(dr * dr + dc * dc) / (2.0 * blob_sigma * blob_sigma)).exp();
                    if g > 0.05 {
                        frame[r * n + c] -= spec.blob_intensity * g;
                    }
                }
            }
        }
    }

    // i.i.d. Gaussian noise
    let mut noise = Tensor3::zeros(m, n, t);
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
        for v in noise.as_mut_slice() {
            *v = normal.sample(&mut rng);
        }
    }

    let mut observation = background.add(&foreground);
    observation.add_scaled(&dynamic, 1.0);
    observation.add_scaled(&noise, 1.0);
    let observation = observation.map(|v| v.clamp(0.0, 1.0));

    Ok(Phantom {
        observation,
        truth_masks,
        truth: Decomposition {
            background,
            dynamic_background: dynamic,
            foreground,
            noise,
            iterations: 0,
            converged: true,
            residual_history: Vec::new(),
        },
    })
}
