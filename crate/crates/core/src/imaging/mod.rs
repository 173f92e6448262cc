//! Image ingestion, iris unwrapping and dataset manifests.

mod detect;
mod io;
mod manifest;

pub use detect::detect_circles;
pub use io::{load_gray, save_png, save_pgm};
pub use manifest::{DatasetManifest, Eye, ManifestEntry, Session};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// 2D intensity field with every pixel in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    /// Builds an image from raw samples, rejecting anything outside `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "pixel buffer holds {} samples, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(T::zero()..=T::one()).contains(v)) {
            return Err(Error::SampleRange { value: v.as_f64() });
        }
        Ok(Self { width, height, data })
    }

    /// Evaluates `f(x, y)` per pixel; results are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).unit_clamp());
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[T] {
        &self.data
    }

    pub fn min_max(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Maps every pixel through `f`, clamping results back into `[0, 1]`.
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        let data = self.data.iter().map(|&v| f(v).unit_clamp()).collect();
        Self { width: self.width, height: self.height, data }
    }

    /// Bilinear sample at real coordinates; out-of-bounds coordinates are
    /// clamped to the nearest in-bounds pixel. Returns `(value, clipped)`.
    pub fn sample_bilinear(&self, x: T, y: T) -> (T, bool) {
        let max_x = T::from_usize(self.width - 1).unwrap();
        let max_y = T::from_usize(self.height - 1).unwrap();
        let clipped = x < T::zero() || y < T::zero() || x > max_x || y > max_y;
        let x = x.max(T::zero()).min(max_x);
        let y = y.max(T::zero()).min(max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0.to_usize().unwrap();
        let y0 = y0.to_usize().unwrap();
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let one = T::one();
        let v = self.get(x0, y0) * (one - fx) * (one - fy)
            + self.get(x1, y0) * fx * (one - fy)
            + self.get(x0, y1) * (one - fx) * fy
            + self.get(x1, y1) * fx * fy;
        (v, clipped)
    }
}

/// Concentric pupil/iris circle model plus the angular span to unwrap.
///
/// `span_deg` follows the anticlockwise convention `x = cx + r cos θ`,
/// `y = cy - r sin θ`, so the default `[180, 360]` covers the lower
/// half-ring of the image. Unknown JSON keys are ignored, which leaves room
/// for a second center should the concentric model ever be relaxed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct IrisGeometry {
    pub cx: f64,
    pub cy: f64,
    pub r_pupil: f64,
    pub r_iris: f64,
    #[serde(default = "default_span")]
    pub span_deg: [f64; 2],
    /// Set when the circles came from [`detect_circles`] rather than a manifest.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub estimated: bool,
}

fn default_span() -> [f64; 2] {
    [180.0, 360.0]
}

impl IrisGeometry {
    pub fn new(cx: f64, cy: f64, r_pupil: f64, r_iris: f64) -> Self {
        Self { cx, cy, r_pupil, r_iris, span_deg: default_span(), estimated: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_pupil > 0.0 && self.r_pupil < self.r_iris) {
            return Err(Error::Geometry(format!(
                "need 0 < r_pupil < r_iris, got r_pupil={} r_iris={}",
                self.r_pupil, self.r_iris
            )));
        }
        let [a, b] = self.span_deg;
        if !(a < b && b - a <= 360.0 + 1e-9) {
            return Err(Error::Geometry(format!(
                "angular span must satisfy start < end and width <= 360, got [{a}, {b}]"
            )));
        }
        Ok(())
    }

    pub fn span_width_deg(&self) -> f64 {
        self.span_deg[1] - self.span_deg[0]
    }
}

/// Unwrapped rectangular iris region. Row 0 samples the pupil boundary,
/// the last row the iris boundary; columns advance anticlockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IrisStrip<T> {
    pixels: GrayImage<T>,
    /// True when any sample fell outside the source image and was filled
    /// with the nearest in-bounds pixel.
    clipped: bool,
}

impl<T: Real> IrisStrip<T> {
    pub fn rows(&self) -> usize {
        self.pixels.height()
    }

    pub fn cols(&self) -> usize {
        self.pixels.width()
    }

    pub fn pixels(&self) -> &GrayImage<T> {
        &self.pixels
    }

    pub fn clipped(&self) -> bool {
        self.clipped
    }
}

/// Maps the iris annulus to a `rows x cols` Cartesian strip by bilinear
/// sampling along concentric circles.
pub fn unwrap_iris<T: Real>(
    img: &GrayImage<T>,
    geom: &IrisGeometry,
    rows: usize,
    cols: usize,
) -> Result<IrisStrip<T>> {
    geom.validate()?;
    if rows < 8 || cols < 8 {
        return Err(Error::InvalidParameter(format!(
            "strip must be at least 8x8, got {rows}x{cols}"
        )));
    }
    let cx = T::of(geom.cx);
    let cy = T::of(geom.cy);
    let r0 = T::of(geom.r_pupil);
    let dr = T::of(geom.r_iris - geom.r_pupil);
    let a0 = T::of(geom.span_deg[0].to_radians());
    let da = T::of(geom.span_width_deg().to_radians());
    let rows_t = T::from_usize(rows - 1).unwrap();
    let cols_t = T::from_usize(cols).unwrap();

    let mut clipped = false;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let radius = r0 + T::from_usize(r).unwrap() / rows_t * dr;
        for c in 0..cols {
            let theta = a0 + T::from_usize(c).unwrap() / cols_t * da;
            let x = cx + radius * theta.cos();
            let y = cy - radius * theta.sin();
            let (v, clip) = img.sample_bilinear(x, y);
            clipped |= clip;
            data.push(v);
        }
    }
    Ok(IrisStrip { pixels: GrayImage::from_vec(cols, rows, data)?, clipped })
}
