//! Adaptive multi-level binarization.
//!
//! A Gaussian bell is fitted to the 256-bin intensity histogram; the tip
//! supplies the middle threshold and the intersections of the bell with the
//! horizontal lines at one third and two thirds of its height supply the
//! other four. The six resulting bands partition the image; the inner four
//! carry the shapes worth describing. Because the thresholds ride on the
//! fitted mean, a global illumination shift moves them along with the pixels
//! and the extracted shapes stay put.

mod fit;
mod objects;

pub use objects::{
    label_components, select_objects, trace_boundary, SelectedObject, OBJECTS_PER_BAND,
    RETAINED_BANDS,
};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::scalar::Real;

pub const HISTOGRAM_BINS: usize = 256;
/// Width floor for the fitted bell, one histogram bin.
pub const SIGMA_FLOOR: f64 = 1.0 / 256.0;
/// Thresholds are confined to this open interval.
const THRESHOLD_LO: f64 = 0.005;
const THRESHOLD_HI: f64 = 0.995;
/// Width floor used for threshold placement when the fit collapses.
const PLACEMENT_SIGMA_FLOOR: f64 = 1e-4;

/// sqrt(2 ln 3): offset factor where the bell crosses a third of its height.
fn outer_offset<T: Real>() -> T {
    T::of((2.0 * 3.0f64.ln()).sqrt())
}

/// sqrt(2 ln 1.5): offset factor where the bell crosses two thirds.
fn inner_offset<T: Real>() -> T {
    T::of((2.0 * 1.5f64.ln()).sqrt())
}

/// Histogram with its fitted bell. `bins` holds the raw counts; the fit runs
/// on a 5-bin moving average of them.
#[derive(Debug, Clone)]
pub struct HistogramModel<T> {
    pub bins: Vec<u32>,
    pub amp: T,
    pub mean: T,
    pub sigma: T,
    /// False when the fit fell back to moment estimates.
    pub converged: bool,
    pub warning: bool,
}

/// The five strictly increasing interior thresholds; 0 and 1 bound the
/// outer bands implicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet<T> {
    t: [T; 5],
    pub warning: bool,
}

impl<T: Real> ThresholdSet<T> {
    pub fn values(&self) -> [T; 5] {
        self.t
    }

    pub fn tip(&self) -> T {
        self.t[2]
    }

    /// Band index (1..=6) of an intensity: band i covers
    /// `t[i-1] <= v < t[i]`, with the top band closed at 1.
    pub fn band_of(&self, v: T) -> u8 {
        for (i, &t) in self.t.iter().enumerate() {
            if v < t {
                return (i + 1) as u8;
            }
        }
        6
    }
}

/// One band's membership mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// 0/1 image for debug dumps.
    pub fn to_gray<T: Real>(&self) -> GrayImage<T> {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            if self.get(x, y) {
                T::one()
            } else {
                T::zero()
            }
        })
    }
}

/// The six band masks of one image; a partition of its pixels.
#[derive(Debug, Clone)]
pub struct SlicedTemplate {
    masks: Vec<BinaryMask>,
}

impl SlicedTemplate {
    /// Assembles from externally built masks (six, equal dimensions).
    pub fn from_masks(masks: Vec<BinaryMask>) -> Result<Self> {
        if masks.len() != 6 {
            return Err(Error::InvalidParameter(format!(
                "expected 6 band masks, got {}",
                masks.len()
            )));
        }
        let (w, h) = (masks[0].width(), masks[0].height());
        if masks.iter().any(|m| m.width() != w || m.height() != h) {
            return Err(Error::DimensionMismatch("band masks differ in size".into()));
        }
        Ok(Self { masks })
    }

    /// Mask of band `index` in 1..=6.
    pub fn band(&self, index: u8) -> &BinaryMask {
        assert!((1..=6).contains(&index), "band index out of range");
        &self.masks[index as usize - 1]
    }

    pub fn bands(&self) -> &[BinaryMask] {
        &self.masks
    }
}

/// Raw 256-bin histogram of a unit-interval image.
pub fn histogram<T: Real>(img: &GrayImage<T>) -> Vec<u32> {
    let mut bins = vec![0u32; HISTOGRAM_BINS];
    let scale = T::from_usize(HISTOGRAM_BINS).unwrap();
    for &v in img.pixels() {
        let idx = (v * scale).to_usize().unwrap_or(0).min(HISTOGRAM_BINS - 1);
        bins[idx] += 1;
    }
    bins
}

fn smooth_5<T: Real>(bins: &[u32]) -> Vec<T> {
    let n = bins.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            let sum: u32 = bins[lo..=hi].iter().sum();
            T::from_u32(sum).unwrap() / T::from_usize(hi - lo + 1).unwrap()
        })
        .collect()
}

/// Fits the bell to the smoothed histogram by nonlinear least squares,
/// seeded from the histogram mode and the sample standard deviation. A fit
/// that has not converged after 200 iterations (or a degenerate histogram)
/// falls back to moment estimates with the warning flag set. Multi-peak
/// histograms lock onto the dominant peak through the mode seed.
pub fn fit_gaussian<T: Real>(img: &GrayImage<T>) -> Result<HistogramModel<T>> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    if img.len() < HISTOGRAM_BINS {
        return Err(Error::InvalidParameter(format!(
            "histogram fit needs at least {HISTOGRAM_BINS} pixels, image has {}",
            img.len()
        )));
    }
    let bins = histogram(img);
    let smoothed = smooth_5::<T>(&bins);
    let xs: Vec<T> = (0..HISTOGRAM_BINS)
        .map(|k| (T::from_usize(k).unwrap() + T::of(0.5)) / T::from_usize(HISTOGRAM_BINS).unwrap())
        .collect();

    // moment estimates from the raw histogram double as seed and fallback
    let total: T = bins.iter().map(|&b| T::from_u32(b).unwrap()).sum();
    let mode_idx = smoothed
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut mean_m = T::zero();
    for (x, &b) in xs.iter().zip(&bins) {
        mean_m += *x * T::from_u32(b).unwrap();
    }
    mean_m /= total;
    let mut var_m = T::zero();
    for (x, &b) in xs.iter().zip(&bins) {
        let d = *x - mean_m;
        var_m += d * d * T::from_u32(b).unwrap();
    }
    var_m /= total;
    let sigma_floor = T::of(SIGMA_FLOOR);
    let sigma_m = var_m.sqrt().max(sigma_floor);
    let amp_m = smoothed[mode_idx].max(T::one());

    let nonzero_bins = bins.iter().filter(|&&b| b > 0).count();
    if nonzero_bins < 3 {
        // near-delta histogram (e.g. constant image): nothing to fit
        return Ok(HistogramModel {
            bins,
            amp: amp_m,
            mean: mean_m.unit_clamp(),
            sigma: sigma_m,
            converged: false,
            warning: true,
        });
    }

    let seed = (amp_m, xs[mode_idx], sigma_m);
    let out = fit::fit(&xs, &smoothed, seed, sigma_floor);
    if out.converged && out.amp > T::zero() {
        Ok(HistogramModel {
            bins,
            amp: out.amp,
            mean: out.mean.unit_clamp(),
            sigma: out.sigma,
            converged: true,
            warning: false,
        })
    } else {
        Ok(HistogramModel {
            bins,
            amp: amp_m,
            mean: mean_m.unit_clamp(),
            sigma: sigma_m,
            converged: false,
            warning: true,
        })
    }
}

/// Places the five thresholds: the tip at the fitted mean and the crossings
/// of the bell with heights A/3 and 2A/3 at `mu +- sigma sqrt(2 ln 3)` and
/// `mu +- sigma sqrt(2 ln 1.5)`. When the bell sits too close to 0 or 1 for
/// its width, the placement width is shrunk (and the mean nudged inward in
/// the extreme case) to keep every threshold inside (0.005, 0.995) with
/// strict ordering; such clamping sets the warning flag.
pub fn compute_thresholds<T: Real>(model: &HistogramModel<T>) -> ThresholdSet<T> {
    let c_outer = outer_offset::<T>();
    let c_inner = inner_offset::<T>();
    let lo = T::of(THRESHOLD_LO);
    let hi = T::of(THRESHOLD_HI);
    let sigma_min = T::of(PLACEMENT_SIGMA_FLOOR);

    let mut warning = false;
    let mut mean = model.mean;
    let margin = sigma_min * c_outer;
    if mean < lo + margin {
        mean = lo + margin;
        warning = true;
    } else if mean > hi - margin {
        mean = hi - margin;
        warning = true;
    }

    let sigma_max = ((mean - lo) / c_outer).min((hi - mean) / c_outer);
    let mut sigma = model.sigma;
    if sigma > sigma_max {
        sigma = sigma_max;
        warning = true;
    }
    if sigma < sigma_min {
        sigma = sigma_min;
        warning = true;
    }

    ThresholdSet {
        t: [
            mean - sigma * c_outer,
            mean - sigma * c_inner,
            mean,
            mean + sigma * c_inner,
            mean + sigma * c_outer,
        ],
        warning,
    }
}

/// Splits the image into the six threshold bands. Membership is half-open
/// with lower inclusion (`t[i-1] <= v < t[i]`); band 6 keeps its upper
/// endpoint so v = 1 belongs somewhere. The masks partition the pixels by
/// construction.
pub fn slice_image<T: Real>(img: &GrayImage<T>, thresholds: &ThresholdSet<T>) -> SlicedTemplate {
    let (w, h) = (img.width(), img.height());
    let mut data: Vec<Vec<bool>> = (0..6).map(|_| vec![false; w * h]).collect();
    for (i, &v) in img.pixels().iter().enumerate() {
        let band = thresholds.band_of(v) as usize - 1;
        data[band][i] = true;
    }
    SlicedTemplate {
        masks: data.into_iter().map(|d| BinaryMask::from_vec(w, h, d)).collect(),
    }
}
