//! Contrast-to-noise ratio and recall/precision/F-measure evaluation.

use image::RgbImage;

use crate::error::{Error, Result};
use crate::segment::{BinaryMask, GrayImage};

/// Default width in pixels of the local background band around the vessel.
pub const DEFAULT_BAND_WIDTH: usize = 4;

/// CNR `|mu_v - mu_b| / sigma_b` with both background readings and the
/// components they were computed from. `sigma` is the population standard
/// deviation (divide by the count).
#[derive(Debug, Clone, PartialEq)]
pub struct CnrReport {
    pub global_cnr: f64,
    pub local_cnr: f64,
    pub mu_v: f64,
    pub mu_b_global: f64,
    pub sigma_b_global: f64,
    pub mu_b_local: f64,
    pub sigma_b_local: f64,
}

/// Pixel counts and the derived recall/precision/F-measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PrfReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
}

/// Chessboard dilation of `mask` by `width_px`, minus the mask itself: the
/// band of non-vessel pixels within `width_px` of the vessel.
pub fn local_band(mask: &BinaryMask, width_px: usize) -> BinaryMask {
    assert!(width_px >= 1, "band width must be at least 1");
    let (rows, cols) = mask.dims();
    let w = width_px as isize;
    BinaryMask::from_fn(rows, cols, |r, c| {
        if mask.get(r, c) {
            return false;
        }
        for dr in -w..=w {
            for dc in -w..=w {
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                if rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols
                    && mask.get(rr as usize, cc as usize)
                {
                    return true;
                }
            }
        }
        false
    })
}

fn mean_std(frame: &GrayImage, region: impl Iterator<Item = (usize, usize)>) -> Option<(f64, f64, usize)> {
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (r, c) in region {
        let v = frame.get(r, c);
        sum += v;
        sq += v * v;
        count += 1;
    }
    if count == 0 {
        return None;
    }
    let mean = sum / count as f64;
    let var = (sq / count as f64 - mean * mean).max(0.0);
    Some((mean, var.sqrt(), count))
}

/// Contrast-to-noise ratio of a frame against a vessel mask. The global
/// background is the whole complement of the mask; the local background is
/// the `band_width`-pixel band around it.
pub fn cnr(frame: &GrayImage, vessel_mask: &BinaryMask, band_width: usize) -> Result<CnrReport> {
    if frame.dims() != vessel_mask.dims() {
        return Err(Error::DimMismatch(format!(
            "frame {:?} vs mask {:?}",
            frame.dims(),
            vessel_mask.dims()
        )));
    }
    let (rows, cols) = frame.dims();
    let all = || (0..rows).flat_map(move |r| (0..cols).map(move |c| (r, c)));

    let (mu_v, _, _) = mean_std(frame, all().filter(|&(r, c)| vessel_mask.get(r, c)))
        .ok_or(Error::EmptyRegion { region: "vessel" })?;

    let (mu_bg, sigma_bg, _) = mean_std(frame, all().filter(|&(r, c)| !vessel_mask.get(r, c)))
        .ok_or(Error::EmptyRegion { region: "global background" })?;

    let band = local_band(vessel_mask, band_width);
    let (mu_bl, sigma_bl, _) = mean_std(frame, all().filter(|&(r, c)| band.get(r, c)))
        .ok_or(Error::EmptyRegion { region: "local background" })?;

    if sigma_bg == 0.0 || sigma_bl == 0.0 {
        return Err(Error::DegenerateBackground);
    }

    Ok(CnrReport {
        global_cnr: (mu_v - mu_bg).abs() / sigma_bg,
        local_cnr: (mu_v - mu_bl).abs() / sigma_bl,
        mu_v,
        mu_b_global: mu_bg,
        sigma_b_global: sigma_bg,
        mu_b_local: mu_bl,
        sigma_b_local: sigma_bl,
    })
}

/// Recall, precision and their harmonic mean. Degenerate ratios (`0/0`)
/// evaluate to zero, so an empty prediction against a nonempty truth scores
/// zero across the board.
pub fn prf(pred: &BinaryMask, truth: &BinaryMask) -> Result<PrfReport> {
    if pred.dims() != truth.dims() {
        return Err(Error::DimMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.dims(),
            truth.dims()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (p, t) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let recall = ratio(tp, tp + fn_);
    let precision = ratio(tp, tp + fp);
    let f_measure = if recall + precision > 0.0 {
        2.0 * recall * precision / (recall + precision)
    } else {
        0.0
    };
    Ok(PrfReport { tp, fp, fn_, recall, precision, f_measure })
}

/// Color comparison image: white = true positive, red = false positive,
/// green = false negative, black elsewhere.
pub fn diff_overlay(pred: &BinaryMask, truth: &BinaryMask) -> Result<RgbImage> {
    if pred.dims() != truth.dims() {
        return Err(Error::DimMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.dims(),
            truth.dims()
        )));
    }
    let (rows, cols) = pred.dims();
    let mut img = RgbImage::new(cols as u32, rows as u32);
    for r in 0..rows {
        for c in 0..cols {
            let px = match (pred.get(r, c), truth.get(r, c)) {
                (true, true) => [255, 255, 255],
                (true, false) => [255, 0, 0],
                (false, true) => [0, 255, 0],
                (false, false) => [0, 0, 0],
            };
            img.put_pixel(c as u32, r as u32, image::Rgb(px));
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mask(rows: usize, cols: usize, top: usize, left: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(rows, cols, |r, c| {
            (top..top + side).contains(&r) && (left..left + side).contains(&c)
        })
    }

    #[test]
    fn empty_mask_has_empty_band() {
        let m = BinaryMask::new(10, 10);
        assert!(local_band(&m, 2).is_empty());
    }

    #[test]
    fn single_pixel_band_is_its_eight_neighborhood() {
        let mut m = BinaryMask::new(9, 9);
        m.set(4, 4, true);
        let band = local_band(&m, 1);
        assert_eq!(band.count(), 8);
        assert!(!band.get(4, 4));
        assert!(band.get(3, 3) && band.get(5, 5) && band.get(4, 3));
    }

    #[test]
    fn square_band_area_by_direct_count() {
        // 10x10 square, width 4: 18^2 - 10^2 = 224
        let m = square_mask(64, 64, 20, 20, 10);
        assert_eq!(local_band(&m, 4).count(), 18 * 18 - 10 * 10);
    }

    #[test]
    fn cnr_zero_when_vessel_equals_background() {
        let frame = GrayImage::from_fn(16, 16, |r, c| if (r + c) % 2 == 0 { 0.4 } else { 0.6 });
        let mask = square_mask(16, 16, 4, 4, 4);
        // vessel and background share the same checker pattern and mean
        let rep = cnr(&frame, &mask, 2).unwrap();
        assert!(rep.global_cnr < 1e-12);
    }

    #[test]
    fn cnr_exact_value_on_constructed_frame() {
        // vessel pixels 1.0; background alternating 0.2 / 0.0 in equal
        // counts: mean 0.1, population sigma exactly 0.1, so the global CNR
        // is (1.0 - 0.1) / 0.1 = 9. Pinning sigma as the population deviation
        // makes this exact.
        let mask = square_mask(16, 16, 6, 6, 4);
        let frame = GrayImage::from_fn(16, 16, |r, c| {
            if mask.get(r, c) {
                1.0
            } else if c % 2 == 0 {
                0.2
            } else {
                0.0
            }
        });
        let rep = cnr(&frame, &mask, 4).unwrap();
        assert!((rep.mu_v - 1.0).abs() < 1e-12);
        assert!((rep.mu_b_global - 0.1).abs() < 1e-12);
        assert!((rep.sigma_b_global - 0.1).abs() < 1e-12);
        assert!((rep.global_cnr - 9.0).abs() < 1e-9);
        // report components recompute the ratio exactly
        assert_eq!(rep.global_cnr, (rep.mu_v - rep.mu_b_global).abs() / rep.sigma_b_global);
        assert_eq!(rep.local_cnr, (rep.mu_v - rep.mu_b_local).abs() / rep.sigma_b_local);
    }

    #[test]
    fn cnr_is_affine_invariant() {
        let mask = square_mask(20, 20, 3, 9, 6);
        let base = GrayImage::from_fn(20, 20, |r, c| {
            if mask.get(r, c) {
                0.9
            } else {
                0.1 + 0.02 * ((r * 7 + c * 3) % 10) as f64
            }
        });
        let mapped = GrayImage::from_fn(20, 20, |r, c| 0.5 * base.get(r, c) + 0.2);
        let a = cnr(&base, &mask, 4).unwrap();
        let b = cnr(&mapped, &mask, 4).unwrap();
        assert!((a.global_cnr - b.global_cnr).abs() < 1e-9);
        assert!((a.local_cnr - b.local_cnr).abs() < 1e-9);
    }

    #[test]
    fn cnr_rejects_degenerate_inputs() {
        let mask = square_mask(8, 8, 2, 2, 3);
        let flat = GrayImage::from_fn(8, 8, |_, _| 0.5);
        assert!(matches!(cnr(&flat, &mask, 2), Err(Error::DegenerateBackground)));

        let empty = BinaryMask::new(8, 8);
        let frame = GrayImage::from_fn(8, 8, |r, _| r as f64 / 8.0);
        assert!(matches!(cnr(&frame, &empty, 2), Err(Error::EmptyRegion { .. })));

        let full = BinaryMask::from_fn(8, 8, |_, _| true);
        assert!(matches!(cnr(&frame, &full, 2), Err(Error::EmptyRegion { .. })));
    }

    #[test]
    fn band_and_global_background_are_disjoint_from_mask() {
        let mask = square_mask(32, 32, 10, 12, 5);
        let band = local_band(&mask, 4);
        for r in 0..32 {
            for c in 0..32 {
                assert!(!(band.get(r, c) && mask.get(r, c)));
            }
        }
    }

    #[test]
    fn prf_perfect_prediction() {
        let t = square_mask(16, 16, 2, 3, 5);
        let rep = prf(&t, &t).unwrap();
        assert_eq!(rep.recall, 1.0);
        assert_eq!(rep.precision, 1.0);
        assert_eq!(rep.f_measure, 1.0);
        assert_eq!(rep.fp, 0);
        assert_eq!(rep.fn_, 0);
    }

    #[test]
    fn prf_balanced_counts() {
        // TP = 50, FP = 50, FN = 50 -> r = p = F = 0.5
        let truth = BinaryMask::from_fn(15, 10, |r, c| r * 10 + c < 100);
        let pred = BinaryMask::from_fn(15, 10, |r, c| r * 10 + c >= 50);
        let rep = prf(&pred, &truth).unwrap();
        assert_eq!((rep.tp, rep.fp, rep.fn_), (50, 50, 50));
        assert_eq!(rep.recall, 0.5);
        assert_eq!(rep.precision, 0.5);
        assert_eq!(rep.f_measure, 0.5);
    }

    #[test]
    fn prf_empty_prediction_scores_zero() {
        let truth = square_mask(8, 8, 1, 1, 3);
        let pred = BinaryMask::new(8, 8);
        let rep = prf(&pred, &truth).unwrap();
        assert_eq!(rep.recall, 0.0);
        assert_eq!(rep.precision, 0.0);
        assert_eq!(rep.f_measure, 0.0);
    }

    #[test]
    fn prf_swapping_masks_swaps_recall_and_precision() {
        let a = square_mask(12, 12, 2, 2, 5);
        let b = square_mask(12, 12, 4, 4, 5);
        let ab = prf(&a, &b).unwrap();
        let ba = prf(&b, &a).unwrap();
        assert_eq!(ab.recall, ba.precision);
        assert_eq!(ab.precision, ba.recall);
        assert!((ab.f_measure - ba.f_measure).abs() < 1e-15);
        // harmonic-mean bounds
        let lo = ab.recall.min(ab.precision);
        assert!(ab.f_measure >= lo - 1e-15);
        assert!(ab.f_measure <= (2.0 * lo).min(1.0) + 1e-15);
    }

    #[test]
    fn prf_rejects_dim_mismatch() {
        let a = BinaryMask::new(4, 4);
        let b = BinaryMask::new(4, 5);
        assert!(prf(&a, &b).is_err());
    }

    #[test]
    fn overlay_colors_per_pixel() {
        let truth = BinaryMask::from_fn(3, 3, |r, c| r == 0 && c < 2);
        let pred = BinaryMask::from_fn(3, 3, |r, c| (r == 0 && c == 0) || (r == 2 && c == 2));
        let img = diff_overlay(&pred, &truth).unwrap();
        assert_eq!(img.get_pixel(0, 0).0, [255, 255, 255]); // TP
        assert_eq!(img.get_pixel(1, 0).0, [0, 255, 0]); // FN
        assert_eq!(img.get_pixel(2, 2).0, [255, 0, 0]); // FP
        assert_eq!(img.get_pixel(1, 1).0, [0, 0, 0]);
    }

    #[test]
    fn overlay_of_identical_masks_is_white_and_black_only() {
        let m = square_mask(6, 6, 1, 1, 3);
        let img = diff_overlay(&m, &m).unwrap();
        for p in img.pixels() {
            assert!(p.0 == [255, 255, 255] || p.0 == [0, 0, 0]);
        }
    }

    #[test]
    fn overlay_of_empty_prediction_is_green_on_truth() {
        let truth = square_mask(6, 6, 2, 2, 2);
        let pred = BinaryMask::new(6, 6);
        let img = diff_overlay(&pred, &truth).unwrap();
        assert_eq!(img.get_pixel(2, 2).0, [0, 255, 0]);
        assert_eq!(img.get_pixel(0, 0).0, [0, 0, 0]);
    }
}
