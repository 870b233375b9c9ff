//! DFTs along tensor axes and the Fourier-domain t-product.
//!
//! Convention: the forward transform is unnormalized and the inverse carries
//! the full `1/len` factor. Under this convention the tensor nuclear norm
//! equals `(1/T) * ||bcirc(X)||_*` and Parseval reads
//! `||x||_F^2 = (1/T) * ||dft3(x)||_F^2`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{CTensor3, Tensor3};

/// Applies `fft` to every length-`len` pencil of `data` described by
/// `(base, stride)` pairs.
fn transform_pencils(
    data: &mut [Complex64],
    fft: &Arc<dyn Fft<f64>>,
    pencils: impl Iterator<Item = usize>,
    stride: usize,
) {
    let len = fft.len();
    let mut buf = vec![Complex64::ZERO; len];
    let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
    for base in pencils {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = data[base + i * stride];
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (i, b) in buf.iter().enumerate() {
            data[base + i * stride] = *b;
        }
    }
}

fn axis_fft(x: &mut CTensor3, axis: usize, inverse: bool) {
    let (m, n, t) = x.dims();
    let len = [m, n, t][axis];
    if len == 1 {
        return;
    }
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    let mn = m * n;
    let data = x.as_mut_slice();
    match axis {
        // pencil over m: fixed (n, t), stride N
        0 => {
            let bases = (0..t).flat_map(|tt| (0..n).map(move |nn| tt * mn + nn));
            transform_pencils(data, &fft, bases, n);
        }
        // pencil over n: fixed (m, t), stride 1
        1 => {
            let bases = (0..t).flat_map(|tt| (0..m).map(move |mm| tt * mn + mm * n));
            transform_pencils(data, &fft, bases, 1);
        }
        // pencil over t: fixed (m, n), stride M*N
        2 => {
            transform_pencils(data, &fft, 0..mn, mn);
        }
        _ => unreachable!(),
    }
    if inverse {
        let scale = 1.0 / len as f64;
        for v in x.as_mut_slice() {
            *v *= scale;
        }
    }
}

/// Unnormalized DFT along the third dimension.
pub fn dft3(x: &Tensor3) -> CTensor3 {
    let mut out = CTensor3::from_real(x);
    axis_fft(&mut out, 2, false);
    out
}

/// Inverse DFT along the third dimension (scaled by `1/T`), returning a real
/// tensor. Fails when the imaginary residue exceeds the rounding bound.
pub fn idft3(x: &CTensor3) -> Result<Tensor3> {
    idft3_complex(x).into_real()
}

/// Inverse DFT along the third dimension without the realness check; used for
/// complex factor tensors.
pub fn idft3_complex(x: &CTensor3) -> CTensor3 {
    let mut out = x.clone();
    axis_fft(&mut out, 2, true);
    out
}

/// Unnormalized DFT along all three dimensions.
pub fn fft3d(x: &Tensor3) -> CTensor3 {
    let mut out = CTensor3::from_real(x);
    axis_fft(&mut out, 1, false);
    axis_fft(&mut out, 0, false);
    axis_fft(&mut out, 2, false);
    out
}

/// Inverse of [`fft3d`] (scaled by `1/(M*N*T)`), returning a real tensor.
pub fn ifft3d(x: &CTensor3) -> Result<Tensor3> {
    let mut out = x.clone();
    axis_fft(&mut out, 1, true);
    axis_fft(&mut out, 0, true);
    axis_fft(&mut out, 2, true);
    out.into_real()
}

/// t-product `x * y` computed as slice-wise matrix products in the Fourier
/// domain; equals `fold(bcirc(x) . bstack(y))`.
pub fn t_product(x: &Tensor3, y: &Tensor3) -> Result<Tensor3> {
    let (_, nx, tx) = x.dims();
    let (my, _, ty) = y.dims();
    if nx != my || tx != ty {
        return Err(Error::DimMismatch(format!(
            "t-product of {:?} and {:?}",
            x.dims(),
            y.dims()
        )));
    }
    let xf = dft3(x);
    let yf = dft3(y);
    let (m, _, t) = x.dims();
    let (_, l, _) = y.dims();
    let mut zf = CTensor3::zeros(m, l, t);
    for tt in 0..t {
        let prod = xf.slice_matrix(tt) * yf.slice_matrix(tt);
        zf.set_slice(tt, &prod);
    }
    idft3(&zf)
}

/// Indices of the frontal slices that must be computed explicitly for a
/// conjugate-symmetric transform, with their mirror (`None` for
/// self-conjugate slices). Covers `ceil((T+1)/2)` slices.
pub(crate) fn half_spectrum(t: usize) -> impl Iterator<Item = (usize, Option<usize>)> {
    (0..=t / 2).map(move |k| {
        let mirror = (t - k) % t;
        if mirror == k {
            (k, None)
        } else {
            (k, Some(mirror))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_tensor(m: usize, n: usize, t: usize, seed: u64) -> Tensor3 {
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        Tensor3::from_fn(m, n, t, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn length_one_dft_is_identity() {
        let x = lcg_tensor(3, 2, 1, 1);
        let f = dft3(&x);
        for i in 0..3 {
            for j in 0..2 {
                let v = f.get(i, j, 0);
                assert_eq!(v.re, x.get(i, j, 0));
                assert_eq!(v.im, 0.0);
            }
        }
    }

    #[test]
    fn constant_in_t_concentrates_on_first_slice() {
        let c = 0.73;
        let x = Tensor3::from_fn(2, 2, 5, |_, _, _| c);
        let f = dft3(&x);
        for i in 0..2 {
            for j in 0..2 {
                assert!((f.get(i, j, 0) - Complex64::new(5.0 * c, 0.0)).norm() < 1e-12);
                for tt in 1..5 {
                    assert!(f.get(i, j, tt).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dft3_round_trip() {
        let x = lcg_tensor(3, 3, 4, 2);
        let back = idft3(&dft3(&x)).unwrap();
        let err = back.sub(&x).frobenius() / x.frobenius();
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn real_input_has_conjugate_symmetric_slices() {
        let x = lcg_tensor(3, 2, 6, 3);
        let f = dft3(&x);
        for tt in 1..6 {
            let mirror = 6 - tt;
            for i in 0..3 {
                for j in 0..2 {
                    let d = (f.get(i, j, tt) - f.get(i, j, mirror % 6).conj()).norm();
                    assert!(d < 1e-12);
                }
            }
        }
    }

    #[test]
    fn parseval_under_chosen_normalization() {
        let x = lcg_tensor(4, 3, 5, 4);
        let f = dft3(&x);
        let lhs = x.sq_frobenius();
        assert!((lhs - x.inner(&x)).abs() < 1e-12 * (1.0 + lhs));
        let rhs = f.sq_frobenius() / 5.0;
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn fft3d_round_trip() {
        let x = lcg_tensor(3, 4, 5, 5);
        let back = ifft3d(&fft3d(&x)).unwrap();
        let err = back.sub(&x).frobenius() / x.frobenius();
        assert!(err < 1e-12);
    }

    #[test]
    fn t_product_with_identity() {
        let x = lcg_tensor(3, 3, 4, 6);
        let id = Tensor3::identity(3, 4);
        let z = t_product(&x, &id).unwrap();
        let err = z.sub(&x).frobenius() / x.frobenius();
        assert!(err < 1e-12);
    }

    #[test]
    fn t_product_single_slice_is_matrix_product() {
        let x = lcg_tensor(3, 2, 1, 7);
        let y = lcg_tensor(2, 4, 1, 8);
        let z = t_product(&x, &y).unwrap();
        let want = x.slice_matrix(0) * y.slice_matrix(0);
        for i in 0..3 {
            for j in 0..4 {
                assert!((z.get(i, j, 0) - want[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn t_product_matches_bcirc_bstack_oracle() {
        let x = lcg_tensor(3, 2, 4, 9);
        let y = lcg_tensor(2, 3, 4, 10);
        let z = t_product(&x, &y).unwrap();
        let oracle = Tensor3::fold(&(x.bcirc() * y.bstack()), 3).unwrap();
        let err = z.sub(&oracle).frobenius() / (1.0 + oracle.frobenius());
        assert!(err < 1e-10, "t-product disagrees with bcirc oracle: {err}");
    }

    #[test]
    fn t_product_rejects_dim_mismatch() {
        let x = lcg_tensor(3, 2, 4, 11);
        let y = lcg_tensor(3, 3, 4, 12);
        assert!(t_product(&x, &y).is_err());
        let y2 = lcg_tensor(2, 3, 5, 13);
        assert!(t_product(&x, &y2).is_err());
    }

    #[test]
    fn product_conj_transpose_identity() {
        // (x * y)^* = y^* * x^*
        let x = lcg_tensor(3, 2, 4, 14);
        let y = lcg_tensor(2, 3, 4, 15);
        let lhs = t_product(&x, &y).unwrap().conj_transpose();
        let rhs = t_product(&y.conj_transpose(), &x.conj_transpose()).unwrap();
        let err = lhs.sub(&rhs).frobenius() / (1.0 + rhs.frobenius());
        assert!(err < 1e-10);
    }

    #[test]
    fn fourier_slices_of_t_product_factorize() {
        // slice-wise product of DFTs equals DFT of the t-product
        let x = lcg_tensor(3, 3, 5, 16);
        let y = lcg_tensor(3, 2, 5, 17);
        let z = t_product(&x, &y).unwrap();
        let (xf, yf, zf) = (dft3(&x), dft3(&y), dft3(&z));
        for tt in 0..5 {
            let want = xf.slice_matrix(tt) * yf.slice_matrix(tt);
            let got = zf.slice_matrix(tt);
            assert!((got - want).norm() < 1e-10);
        }
    }

    #[test]
    fn half_spectrum_covers_even_and_odd() {
        let even: Vec<_> = half_spectrum(6).collect();
        assert_eq!(even, vec![(0, None), (1, Some(5)), (2, Some(4)), (3, None)]);
        let odd: Vec<_> = half_spectrum(5).collect();
        assert_eq!(odd, vec![(0, None), (1, Some(4)), (2, Some(3))]);
        let one: Vec<_> = half_spectrum(1).collect();
        assert_eq!(one, vec![(0, None)]);
    }
}
