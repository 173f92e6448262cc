//! Best-effort circle estimation for manifest entries without geometry.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{GrayImage, IrisGeometry};

/// Minimum dark-pixel count for a plausible pupil.
const MIN_PUPIL_PIXELS: usize = 16;
/// Minimum intensity spread before anything counts as "dark".
const MIN_CONTRAST: f64 = 0.05;

/// Estimates the pupil circle from the dark-pixel centroid and the iris
/// circle by maximizing the radial intensity step. The result is always
/// flagged `estimated`; callers needing precision should supply geometry.
pub fn detect_circles<T: Real>(img: &GrayImage<T>) -> Result<IrisGeometry> {
    let (lo, hi) = img.min_max();
    let (lo, hi) = (lo.as_f64(), hi.as_f64());
    if hi - lo < MIN_CONTRAST {
        return Err(Error::NoPupil);
    }
    let threshold = lo + 0.2 * (hi - lo);

    let mut count = 0usize;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y).as_f64() <= threshold {
                count += 1;
                sum_x += x as f64;
                sum_y += y as f64;
            }
        }
    }
    if count < MIN_PUPIL_PIXELS {
        return Err(Error::NoPupil);
    }
    let cx = sum_x / count as f64;
    let cy = sum_y / count as f64;
    let r_pupil = (count as f64 / std::f64::consts::PI).sqrt();

    // Iris boundary: strongest outward brightening of the ring mean.
    let r_max = (img.width().min(img.height()) as f64) / 2.0 - 2.0;
    let r_start = (r_pupil * 1.4).max(r_pupil + 4.0);
    if r_start + 4.0 >= r_max {
        return Err(Error::Geometry(
            "image too small around the detected pupil for an iris search".into(),
        ));
    }
    let ring_mean = |radius: f64| -> f64 {
        let samples = 256;
        let mut acc = 0.0;
        for k in 0..samples {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let x = T::of(cx + radius * theta.cos());
            let y = T::of(cy - radius * theta.sin());
            acc += img.sample_bilinear(x, y).0.as_f64();
        }
        acc / samples as f64
    };

    let mut best_r = r_start;
    let mut best_step = f64::NEG_INFINITY;
    let mut radius = r_start;
    while radius <= r_max {
        let step = ring_mean(radius + 2.0) - ring_mean(radius - 2.0);
        if step > best_step {
            best_step = step;
            best_r = radius;
        }
        radius += 1.0;
    }

    let geom = IrisGeometry {
        cx,
        cy,
        r_pupil,
        r_iris: best_r,
        span_deg: super::default_span(),
        estimated: true,
    };
    geom.validate()?;
    Ok(geom)
}
