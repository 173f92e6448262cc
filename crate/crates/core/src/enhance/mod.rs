//! Illumination flattening and regularized low-pass filtering.
//!
//! `homomorphic_enhance` separates illumination from reflectance by
//! normalizing in the log domain. `tikhonov_filter` then suppresses the
//! high-frequency residue: with a Gaussian point-spread spectrum `P` the
//! per-frequency gain is `|P|^2 / (|P|^2 + lambda^2)`, a smooth low-pass
//! whose knee is set by the regularization weight.

mod fft2d;

use num_complex::Complex;
use rustfft::FftNum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::scalar::Real;

/// Offset added before taking logarithms; images contain exact zeros.
const LOG_EPSILON: f64 = 1e-6;

/// Gaussian point-spread model plus regularization weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TikhonovParams<T> {
    /// Regularization weight; 0 disables the filter wherever the PSF passes.
    pub lambda: T,
    /// Variance of the Gaussian point-spread function, in pixels squared.
    pub psf_variance: T,
    /// Odd kernel side length. `None` derives `6 * sqrt(variance) + 1`
    /// rounded to the nearest odd value.
    pub psf_size: Option<usize>,
}

impl<T: Real> Default for TikhonovParams<T> {
    fn default() -> Self {
        Self { lambda: T::of(0.8), psf_variance: T::of(25.0), psf_size: None }
    }
}

impl<T: Real> TikhonovParams<T> {
    pub fn new(lambda: T, psf_variance: T) -> Self {
        Self { lambda, psf_variance, psf_size: None }
    }

    pub fn kernel_size(&self) -> usize {
        match self.psf_size {
            Some(s) => s,
            None => {
                let s = 6.0 * self.psf_variance.as_f64().sqrt() + 1.0;
                let r = s.round().max(3.0) as usize;
                if r.is_multiple_of(2) {
                    r + 1
                } else {
                    r
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < T::zero() {
            return Err(Error::InvalidParameter("lambda must be >= 0".into()));
        }
        if self.psf_variance <= T::zero() {
            return Err(Error::InvalidParameter("psf_variance must be > 0".into()));
        }
        let size = self.kernel_size();
        if size < 3 || size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "psf_size must be odd and >= 3, got {size}"
            )));
        }
        Ok(())
    }
}

/// Per-frequency gains, indexed like the 2D spectrum of a `rows x cols` image.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResponse<T> {
    rows: usize,
    cols: usize,
    gains: Vec<T>,
}

impl<T: Real> FilterResponse<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gains(&self) -> &[T] {
        &self.gains
    }

    pub fn gain(&self, row: usize, col: usize) -> T {
        self.gains[row * self.cols + col]
    }
}

/// Log-normalize-exponentiate enhancement. Strictly monotone in intensity,
/// so pixel ordering (and argmin/argmax locations) is preserved. Constant
/// images map to 0.5, the degenerate value of the normalization.
pub fn homomorphic_enhance<T: Real>(img: &GrayImage<T>) -> Result<GrayImage<T>> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let eps = T::of(LOG_EPSILON);
    let logged: Vec<T> = img.pixels().iter().map(|&v| (v + eps).ln()).collect();
    let normalized = rescale_unit(&logged);
    let raised: Vec<T> = normalized.iter().map(|&v| v.exp()).collect();
    let out = rescale_unit(&raised);
    GrayImage::from_vec(img.width(), img.height(), out)
}

/// Affine rescale to [0, 1]; a flat field maps to 0.5.
fn rescale_unit<T: Real>(values: &[T]) -> Vec<T> {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi > lo {
        let span = hi - lo;
        values.iter().map(|&v| ((v - lo) / span).unit_clamp()).collect()
    } else {
        vec![T::of(0.5); values.len()]
    }
}

/// Discrete isotropic Gaussian, truncated to `size x size` and renormalized
/// to unit sum.
fn gaussian_kernel<T: Real>(size: usize, variance: T) -> Vec<T> {
    let center = (size / 2) as isize;
    let two_var = T::of(2.0) * variance;
    let mut kernel = Vec::with_capacity(size * size);
    let mut sum = T::zero();
    for i in 0..size as isize {
        for j in 0..size as isize {
            let di = T::from_isize(i - center).unwrap();
            let dj = T::from_isize(j - center).unwrap();
            let v = (-(di * di + dj * dj) / two_var).exp();
            sum += v;
            kernel.push(v);
        }
    }
    kernel.iter().map(|&v| v / sum).collect()
}

/// Spectrum magnitude-squared of the PSF zero-padded to `rows x cols` with
/// its center at the origin (zero-phase placement), turned into gains
/// `|P|^2 / (|P|^2 + lambda^2)`.
pub fn tikhonov_response<T: Real + FftNum>(
    params: &TikhonovParams<T>,
    rows: usize,
    cols: usize,
) -> Result<FilterResponse<T>> {
    params.validate()?;
    let size = params.kernel_size();
    if rows < size || cols < size {
        return Err(Error::FilterSupport { rows, cols, min: size });
    }
    let kernel = gaussian_kernel(size, params.psf_variance);
    let center = (size / 2) as isize;
    let mut padded = vec![Complex::new(T::zero(), T::zero()); rows * cols];
    for i in 0..size as isize {
        for j in 0..size as isize {
            let r = (i - center).rem_euclid(rows as isize) as usize;
            let c = (j - center).rem_euclid(cols as isize) as usize;
            padded[r * cols + c] = Complex::new(kernel[(i * size as isize + j) as usize], T::zero());
        }
    }
    fft2d::fft2d_forward(rows, cols, &mut padded);
    let lambda_sq = params.lambda * params.lambda;
    let gains = padded
        .iter()
        .map(|p| {
            let mag_sq = p.norm_sqr();
            if mag_sq == T::zero() && lambda_sq == T::zero() {
                T::zero()
            } else {
                mag_sq / (mag_sq + lambda_sq)
            }
        })
        .collect();
    Ok(FilterResponse { rows, cols, gains })
}

/// Applies a precomputed response to an image: FFT, per-frequency gain,
/// inverse FFT. The tiny imaginary residue of the real-valued output is
/// discarded and the result clamped back into `[0, 1]`.
pub fn apply_response<T: Real + FftNum>(
    img: &GrayImage<T>,
    response: &FilterResponse<T>,
) -> Result<GrayImage<T>> {
    let (rows, cols) = (img.height(), img.width());
    if rows != response.rows || cols != response.cols {
        return Err(Error::DimensionMismatch(format!(
            "image {rows}x{cols} vs response {}x{}",
            response.rows, response.cols
        )));
    }
    let mut buf: Vec<Complex<T>> =
        img.pixels().iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft2d::fft2d_forward(rows, cols, &mut buf);
    for (v, &g) in buf.iter_mut().zip(&response.gains) {
        *v *= g;
    }
    fft2d::fft2d_inverse(rows, cols, &mut buf);
    let scale = T::from_usize(rows * cols).unwrap();
    let data: Vec<T> = buf.iter().map(|v| (v.re / scale).unit_clamp()).collect();
    GrayImage::from_vec(cols, rows, data)
}

/// One-shot regularized low-pass: response for the image size, then apply.
pub fn tikhonov_filter<T: Real + FftNum>(
    img: &GrayImage<T>,
    params: &TikhonovParams<T>,
) -> Result<GrayImage<T>> {
    let response = tikhonov_response(params, img.height(), img.width())?;
    apply_response(img, &response)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Parameters whose kernel degenerates to a discrete delta, making the
    /// PSF spectrum identically one.
    fn delta_psf() -> TikhonovParams<f64> {
        TikhonovParams { lambda: 0.8, psf_variance: 1e-4, psf_size: Some(3) }
    }

    const DELTA_GAIN: f64 = 1.0 / 1.64; // 1 / (1 + 0.8^2)

    #[test]
    fn homomorphic_maps_extremes_to_extremes() {
        let img = GrayImage::from_vec(2, 1, vec![0.1, 0.9]).unwrap();
        let out = homomorphic_enhance(&img).unwrap();
        assert_eq!(out.pixels(), &[0.0, 1.0]);
    }

    #[test]
    fn homomorphic_constant_maps_to_half() {
        let img = GrayImage::<f64>::from_fn(5, 3, |_, _| 0.33);
        let out = homomorphic_enhance(&img).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn homomorphic_compresses_the_high_end() {
        let img = GrayImage::from_vec(3, 1, vec![0.1, 0.3, 0.9]).unwrap();
        let out = homomorphic_enhance(&img).unwrap();
        // direct evaluation of the stated transform as oracle
        let logs: Vec<f64> = [0.1, 0.3, 0.9].iter().map(|v| (v + LOG_EPSILON).ln()).collect();
        let norm = |v: f64| (v - logs[0]) / (logs[2] - logs[0]);
        let raised: Vec<f64> = logs.iter().map(|&v| norm(v).exp()).collect();
        let expected = (raised[1] - raised[0]) / (raised[2] - raised[0]);
        assert!((out.pixels()[1] - expected).abs() < 1e-12);
        assert!(out.pixels()[1] > 0.0 && out.pixels()[1] < 1.0);
        // concavity of the log pushes the middle above its plain rescale
        assert!(out.pixels()[1] > (0.3 - 0.1) / 0.8);
    }

    #[test]
    fn homomorphic_preserves_intensity_ordering() {
        let img = GrayImage::from_fn(16, 16, |x, y| ((x * 53 + y * 17) % 101) as f64 / 100.0);
        let out = homomorphic_enhance(&img).unwrap();
        let mut pairs: Vec<(f64, f64)> =
            img.pixels().iter().copied().zip(out.pixels().iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            if w[1].0 > w[0].0 {
                assert!(w[1].1 > w[0].1, "ordering broken: {:?} -> {:?}", w[0], w[1]);
            } else {
                assert_eq!(w[1].1, w[0].1);
            }
        }
    }

    #[test]
    fn delta_psf_response_is_uniform() {
        let resp = tikhonov_response(&delta_psf(), 16, 24).unwrap();
        for &g in resp.gains() {
            assert!((g - DELTA_GAIN).abs() < 1e-9, "gain {g}");
        }
    }

    #[test]
    fn zero_lambda_passes_everything() {
        let params = TikhonovParams { lambda: 0.0, ..TikhonovParams::default() };
        let resp = tikhonov_response(&params, 40, 40).unwrap();
        assert!(resp.gains().iter().all(|&g| g == 1.0 || g == 0.0));
        assert!(resp.gains().iter().filter(|&&g| g == 1.0).count() > resp.gains().len() / 2);
    }

    #[test]
    fn huge_lambda_blocks_everything() {
        let params = TikhonovParams { lambda: 1e6, ..TikhonovParams::default() };
        let resp = tikhonov_response(&params, 40, 40).unwrap();
        assert!(resp.gains().iter().all(|&g| g <= 1e-9));
    }

    #[test]
    fn gains_stay_in_unit_interval() {
        let resp = tikhonov_response(&TikhonovParams::default(), 64, 48).unwrap();
        assert!(resp.gains().iter().all(|&g| (0.0..=1.0).contains(&g)));
    }

    #[test]
    fn gains_decay_away_from_dc() {
        let resp = tikhonov_response(&TikhonovParams::<f64>::default(), 64, 64).unwrap();
        // truncation ripple of the kernel allows microscopic wiggles near
        // the Nyquist zeros, hence the slack
        for k in 1..=32 {
            assert!(resp.gain(0, k) <= resp.gain(0, k - 1) + 1e-5, "row axis at {k}");
            assert!(resp.gain(k, 0) <= resp.gain(k - 1, 0) + 1e-5, "col axis at {k}");
        }
    }

    #[test]
    fn constant_image_delta_psf_scales_by_gain() {
        let img = GrayImage::<f64>::from_fn(16, 16, |_, _| 0.8);
        let out = apply_response(&img, &tikhonov_response(&delta_psf(), 16, 16).unwrap()).unwrap();
        for &v in out.pixels() {
            assert!((v - 0.8 * DELTA_GAIN).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn zero_lambda_delta_psf_is_identity() {
        let params = TikhonovParams { lambda: 0.0, psf_variance: 1e-4, psf_size: Some(3) };
        let img = GrayImage::from_fn(12, 20, |x, y| ((x * 7 + y * 13) % 32) as f64 / 31.0);
        let out = tikhonov_filter(&img, &params).unwrap();
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_frequency_scales_by_its_gain() {
        let (rows, cols) = (32, 32);
        let k = 3usize;
        let params = TikhonovParams::default();
        let resp = tikhonov_response(&params, rows, cols).unwrap();
        let img = GrayImage::from_fn(cols, rows, |x, _| {
            0.5 + 0.25 * (2.0 * std::f64::consts::PI * k as f64 * x as f64 / cols as f64).cos()
        });
        let out = apply_response(&img, &resp).unwrap();
        // oracle: direct per-frequency multiplication of the two live bins
        let expected_amp = 0.25 * resp.gain(0, k);
        let dc = 0.5 * resp.gain(0, 0);
        for x in 0..cols {
            let expected = dc
                + expected_amp
                    * (2.0 * std::f64::consts::PI * k as f64 * x as f64 / cols as f64).cos();
            assert!((out.get(x, 0) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_is_linear_before_clamping() {
        let (rows, cols) = (40, 40);
        let params = TikhonovParams::default();
        let resp = tikhonov_response(&params, rows, cols).unwrap();
        let a = GrayImage::from_fn(cols, rows, |x, y| ((x * 3 + y * 11) % 24) as f64 / 50.0);
        let b = GrayImage::from_fn(cols, rows, |x, y| ((x * 13 + y * 5) % 19) as f64 / 50.0);
        let combo = GrayImage::from_fn(cols, rows, |x, y| 0.5 * a.get(x, y) + 0.5 * b.get(x, y));
        let fa = apply_response(&a, &resp).unwrap();
        let fb = apply_response(&b, &resp).unwrap();
        let fc = apply_response(&combo, &resp).unwrap();
        // inputs are small enough that no clamping occurs on either path
        for i in 0..fa.len() {
            let lhs = fc.pixels()[i];
            let rhs = 0.5 * fa.pixels()[i] + 0.5 * fb.pixels()[i];
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_images_below_kernel_support() {
        let img = GrayImage::<f64>::from_fn(8, 8, |_, _| 0.5);
        let err = tikhonov_filter(&img, &TikhonovParams::default()).unwrap_err();
        assert!(matches!(err, Error::FilterSupport { .. }));
    }

    #[test]
    fn works_at_f32_precision() {
        let img = GrayImage::<f32>::from_fn(33, 33, |x, y| ((x + y) % 7) as f32 / 6.0);
        let params = TikhonovParams::<f32>::default();
        let out = tikhonov_filter(&img, &params).unwrap();
        assert_eq!(out.len(), img.len());
        let enhanced = homomorphic_enhance(&img).unwrap();
        assert!(enhanced.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
