//! Contour shape signatures: radius-vector, support and tangent-angle
//! functions, each resampled to a fixed number of samples in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DescriptorKind {
    RadiusVector,
    Support,
    TangentAngle,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 3] =
        [DescriptorKind::RadiusVector, DescriptorKind::Support, DescriptorKind::TangentAngle];

    pub fn short_name(&self) -> &'static str {
        match self {
            DescriptorKind::RadiusVector => "RVF",
            DescriptorKind::Support => "SF",
            DescriptorKind::TangentAngle => "TAF",
        }
    }
}

/// Closed boundary traversed anticlockwise (shoelace signed area > 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Contour<T> {
    points: Vec<[T; 2]>,
    perimeter: T,
    centroid: [T; 2],
}

impl<T: Real> Contour<T> {
    /// Builds a contour from a closed point cycle (last point connects back
    /// to the first). Clockwise input is reversed in place; degenerate
    /// (zero-area or too-short) cycles are rejected.
    pub fn new(mut points: Vec<[T; 2]>) -> Result<Self> {
        if points.len() < 8 {
            return Err(Error::Contour(format!(
                "need at least 8 boundary points, got {}",
                points.len()
            )));
        }
        let area = shoelace_area(&points);
        if area == T::zero() {
            return Err(Error::Contour("zero signed area".into()));
        }
        if area < T::zero() {
            points[1..].reverse();
        }
        let perimeter = perimeter(&points);
        if perimeter <= T::zero() {
            return Err(Error::Contour("zero perimeter".into()));
        }
        let centroid = polygon_centroid(&points);
        Ok(Self { points, perimeter, centroid })
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    /// Number of boundary points; a contour is never empty.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn perimeter(&self) -> T {
        self.perimeter
    }

    pub fn centroid(&self) -> [T; 2] {
        self.centroid
    }

    pub fn signed_area(&self) -> T {
        shoelace_area(&self.points)
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        let points = self.points.iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
        Self {
            points,
            perimeter: self.perimeter,
            centroid: [self.centroid[0] + dx, self.centroid[1] + dy],
        }
    }

    pub fn rotated_about_centroid(&self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let [cx, cy] = self.centroid;
        let points = self
            .points
            .iter()
            .map(|p| {
                let dx = p[0] - cx;
                let dy = p[1] - cy;
                [cx + dx * c - dy * s, cy + dx * s + dy * c]
            })
            .collect();
        Self { points, perimeter: self.perimeter, centroid: self.centroid }
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, x: T, y: T) -> bool {
        let mut inside = false;
        let n = self.points.len();
        let mut j = n - 1;
        for i in 0..n {
            let pi = self.points[i];
            let pj = self.points[j];
            if (pi[1] > y) != (pj[1] > y) {
                let x_cross = pj[0] + (y - pj[1]) / (pi[1] - pj[1]) * (pi[0] - pj[0]);
                if x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

fn shoelace_area<T: Real>(points: &[[T; 2]]) -> T {
    let n = points.len();
    let mut acc = T::zero();
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc / T::of(2.0)
}

fn perimeter<T: Real>(points: &[[T; 2]]) -> T {
    let n = points.len();
    let mut acc = T::zero();
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    }
    acc
}

/// Area-weighted polygon centroid; falls back to the vertex mean for
/// near-degenerate rings where the area formula loses precision.
fn polygon_centroid<T: Real>(points: &[[T; 2]]) -> [T; 2] {
    let area = shoelace_area(points);
    let n = points.len();
    if area.abs() > T::of(1e-9) {
        let mut cx = T::zero();
        let mut cy = T::zero();
        for i in 0..n {
            let a = points[i];
            let b = points[(i + 1) % n];
            let cross = a[0] * b[1] - b[0] * a[1];
            cx += (a[0] + b[0]) * cross;
            cy += (a[1] + b[1]) * cross;
        }
        let scale = T::of(6.0) * area;
        [cx / scale, cy / scale]
    } else {
        let inv = T::one() / T::from_usize(n).unwrap();
        let mut cx = T::zero();
        let mut cy = T::zero();
        for p in points {
            cx += p[0];
            cy += p[1];
        }
        [cx * inv, cy * inv]
    }
}

/// One resampled signature. `scale` records the pre-normalization factor
/// (curve maximum for RVF/SF, the 2-pi unwrap span for TAF); `warning` is
/// set when a fallback reference point had to be used.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCurve<T> {
    pub kind: DescriptorKind,
    pub samples: Vec<T>,
    pub scale: T,
    pub warning: bool,
}

/// The contour in coordinates relative to its first point, plus the
/// centroid of that frame. Integer pixel translations of the input change
/// nothing here, which is what makes the descriptors exactly
/// translation-invariant.
struct RelativeFrame<T> {
    points: Vec<[T; 2]>,
    centroid: [T; 2],
}

impl<T: Real> RelativeFrame<T> {
    fn of(contour: &Contour<T>) -> Self {
        let [ox, oy] = contour.points()[0];
        let points: Vec<[T; 2]> =
            contour.points().iter().map(|p| [p[0] - ox, p[1] - oy]).collect();
        let centroid = polygon_centroid(&points);
        Self { points, centroid }
    }

    fn contains_centroid(&self) -> bool {
        point_in_polygon(&self.points, self.centroid)
    }
}

fn point_in_polygon<T: Real>(points: &[[T; 2]], p: [T; 2]) -> bool {
    let [x, y] = p;
    let mut inside = false;
    let n = points.len();
    let mut j = n - 1;
    for i in 0..n {
        let pi = points[i];
        let pj = points[j];
        if (pi[1] > y) != (pj[1] > y) {
            let x_cross = pj[0] + (y - pj[1]) / (pi[1] - pj[1]) * (pi[0] - pj[0]);
            if x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from the reference point to the contour along `n` uniformly
/// spaced directions, normalized by the curve maximum. Non-star-shaped
/// contours take the farthest crossing. If the centroid falls outside the
/// contour, an interior point maximizing boundary clearance substitutes for
/// it and the warning flag is set.
pub fn radius_vector<T: Real>(contour: &Contour<T>, n: usize) -> FeatureCurve<T> {
    assert!(n >= 4, "need at least 4 samples");
    let frame = RelativeFrame::of(contour);
    let (origin, warning) = if frame.contains_centroid() {
        (frame.centroid, false)
    } else {
        (interior_fallback(&frame.points), true)
    };

    let two_pi = T::of(std::f64::consts::TAU);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let phi = two_pi * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        samples.push(farthest_crossing(&frame.points, origin, phi));
    }
    normalize_by_max(DescriptorKind::RadiusVector, samples, warning)
}

/// Maximum projection of the contour onto `n` uniformly spaced directions,
/// taken relative to the centroid so the function stays nonnegative,
/// normalized by the curve maximum.
pub fn support_function<T: Real>(contour: &Contour<T>, n: usize) -> FeatureCurve<T> {
    assert!(n >= 4, "need at least 4 samples");
    let frame = RelativeFrame::of(contour);
    let [cx, cy] = frame.centroid;
    let two_pi = T::of(std::f64::consts::TAU);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let phi = two_pi * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        let (s, c) = phi.sin_cos();
        let mut best = T::neg_infinity();
        for p in &frame.points {
            best = best.max((p[0] - cx) * c + (p[1] - cy) * s);
        }
        samples.push(best.max(T::zero()));
    }
    normalize_by_max(DescriptorKind::Support, samples, false)
}

/// Tangent orientation along the boundary: the contour is resampled to `n`
/// arclength-uniform points, tangents estimated by central differences over
/// a 5-point window, the angle unwrapped to a continuous function and then
/// affinely mapped from `[phi0, phi0 + 2 pi]` onto `[0, 1]` (clamped, since
/// concave stretches may briefly leave the band).
pub fn tangent_angle<T: Real>(contour: &Contour<T>, n: usize) -> FeatureCurve<T> {
    assert!(n >= 8, "need at least 8 samples");
    let frame = RelativeFrame::of(contour);
    let pts = resample_by_arclength(&frame.points, n);
    let raw = tangent_angles(&pts);
    let two_pi = T::of(std::f64::consts::TAU);
    let mut samples = Vec::with_capacity(n);
    let mut unwrapped = raw[0];
    samples.push(T::zero());
    for k in 1..n {
        unwrapped += wrap_to_pi(raw[k] - raw[k - 1]);
        samples.push(((unwrapped - raw[0]) / two_pi).unit_clamp());
    }
    FeatureCurve { kind: DescriptorKind::TangentAngle, samples, scale: two_pi, warning: false }
}

/// Net tangent rotation over one full traversal; +2 pi for every simple
/// anticlockwise contour.
pub fn total_turning<T: Real>(contour: &Contour<T>, n: usize) -> T {
    let frame = RelativeFrame::of(contour);
    let pts = resample_by_arclength(&frame.points, n);
    let raw = tangent_angles(&pts);
    let mut acc = T::zero();
    for k in 0..n {
        acc += wrap_to_pi(raw[(k + 1) % n] - raw[k]);
    }
    acc
}

/// Rotates the point cycle so it starts at the point farthest from the
/// centroid; near-ties (relative slack 1e-9) are broken by the smallest
/// polar angle about the centroid. Idempotent.
pub fn start_point_canonicalize<T: Real>(contour: &Contour<T>) -> Contour<T> {
    let frame = RelativeFrame::of(contour);
    let [cx, cy] = frame.centroid;
    let dist_sq = |p: &[T; 2]| (p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy);
    let best = frame.points.iter().fold(T::zero(), |acc, p| acc.max(dist_sq(p)));
    let tol = best * T::of(1e-9);
    let two_pi = T::of(std::f64::consts::TAU);
    // angles within 1e-9 of a full turn count as zero, so a point meant to
    // sit at angle 0 cannot lose the tie to rounding jitter
    let polar = |p: &[T; 2]| {
        let mut a = (p[1] - cy).atan2(p[0] - cx);
        if a < T::zero() {
            a += two_pi;
        }
        if two_pi - a < T::of(1e-9) {
            a = T::zero();
        }
        a
    };
    let mut start = 0usize;
    let mut start_angle = T::infinity();
    for (i, p) in frame.points.iter().enumerate() {
        if dist_sq(p) + tol >= best {
            let angle = polar(p);
            if angle < start_angle {
                start_angle = angle;
                start = i;
            }
        }
    }
    let mut points = Vec::with_capacity(contour.len());
    points.extend_from_slice(&contour.points()[start..]);
    points.extend_from_slice(&contour.points()[..start]);
    Contour { points, perimeter: contour.perimeter, centroid: contour.centroid }
}

fn normalize_by_max<T: Real>(
    kind: DescriptorKind,
    mut samples: Vec<T>,
    warning: bool,
) -> FeatureCurve<T> {
    let max = samples.iter().fold(T::zero(), |acc, &v| acc.max(v));
    if max > T::zero() {
        for v in &mut samples {
            *v = (*v / max).unit_clamp();
        }
    }
    FeatureCurve { kind, samples, scale: max, warning }
}

/// Farthest intersection of the ray `origin + t (cos phi, sin phi)` with the
/// polygon edges.
fn farthest_crossing<T: Real>(points: &[[T; 2]], origin: [T; 2], phi: T) -> T {
    let (s, c) = phi.sin_cos();
    let n = points.len();
    let mut best = T::zero();
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let ex = b[0] - a[0];
        let ey = b[1] - a[1];
        // origin + t (c, s) == a + u (ex, ey)
        let det = c * ey - s * ex;
        if det.abs() < T::of(1e-18) {
            continue;
        }
        let qx = a[0] - origin[0];
        let qy = a[1] - origin[1];
        let t = (qx * ey - qy * ex) / det;
        let u = (qx * s - qy * c) / (-det);
        if t >= T::zero() && u >= T::zero() && u < T::one() {
            best = best.max(t);
        }
    }
    if best == T::zero() {
        // numeric corner case: fall back to the farthest vertex projection
        for p in points {
            let proj = (p[0] - origin[0]) * c + (p[1] - origin[1]) * s;
            best = best.max(proj);
        }
    }
    best
}

/// Interior point maximizing distance to the boundary, found on a coarse
/// grid over the bounding box. Only reached for pathological contours whose
/// centroid lies outside.
fn interior_fallback<T: Real>(points: &[[T; 2]]) -> [T; 2] {
    let (mut min_x, mut min_y) = (T::infinity(), T::infinity());
    let (mut max_x, mut max_y) = (T::neg_infinity(), T::neg_infinity());
    for p in points {
        min_x = min_x.min(p[0]);
        min_y = min_y.min(p[1]);
        max_x = max_x.max(p[0]);
        max_y = max_y.max(p[1]);
    }
    let steps = 48usize;
    let mut best = points[0];
    let mut best_clearance = T::neg_infinity();
    for gy in 1..steps {
        for gx in 1..steps {
            let x = min_x
                + (max_x - min_x) * T::from_usize(gx).unwrap() / T::from_usize(steps).unwrap();
            let y = min_y
                + (max_y - min_y) * T::from_usize(gy).unwrap() / T::from_usize(steps).unwrap();
            if !point_in_polygon(points, [x, y]) {
                continue;
            }
            let mut clearance = T::infinity();
            for p in points {
                let d = (p[0] - x).powi(2) + (p[1] - y).powi(2);
                clearance = clearance.min(d);
            }
            if clearance > best_clearance {
                best_clearance = clearance;
                best = [x, y];
            }
        }
    }
    best
}

/// `n` points equally spaced by arclength, starting at the cycle's first
/// point.
fn resample_by_arclength<T: Real>(pts: &[[T; 2]], n: usize) -> Vec<[T; 2]> {
    let count = pts.len();
    let mut cumulative = Vec::with_capacity(count + 1);
    cumulative.push(T::zero());
    let mut acc = T::zero();
    for i in 0..count {
        let a = pts[i];
        let b = pts[(i + 1) % count];
        acc += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        cumulative.push(acc);
    }
    let total = acc;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let target = total * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        while seg + 1 < cumulative.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let a = pts[seg % count];
        let b = pts[(seg + 1) % count];
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let frac =
            if seg_len > T::zero() { (target - cumulative[seg]) / seg_len } else { T::zero() };
        out.push([a[0] + (b[0] - a[0]) * frac, a[1] + (b[1] - a[1]) * frac]);
    }
    out
}

/// Tangent direction at each point of a closed ring via central differences
/// two samples to either side (a 5-point window).
fn tangent_angles<T: Real>(pts: &[[T; 2]]) -> Vec<T> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let fwd = pts[(i + 2) % n];
            let back = pts[(i + n - 2) % n];
            (fwd[1] - back[1]).atan2(fwd[0] - back[0])
        })
        .collect()
}

fn wrap_to_pi<T: Real>(mut delta: T) -> T {
    let pi = T::of(std::f64::consts::PI);
    let two_pi = T::of(std::f64::consts::TAU);
    while delta > pi {
        delta -= two_pi;
    }
    while delta <= -pi {
        delta += two_pi;
    }
    delta
}
