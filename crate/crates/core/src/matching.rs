//! Product-of-sums Hamming matching and nearest-neighbor classification.
//!
//! Two codes are compared strip by strip: each strip contributes its
//! normalized bitwise Hamming distance, and the overall distance is the
//! geometric mean of the strip distances. The raw product is zero as soon
//! as a single strip matches exactly, which would let one lucky strip veto
//! all others, so each factor is floored at epsilon = 1 / (n b) — exactly
//! one bit of disagreement — before the product is taken. The floor can be
//! disabled to reproduce the literal product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Eye, Session};
use crate::shapecode::ShapeCode;

/// Circular sample shifts tried on the probe when alignment is enabled.
pub const DEFAULT_MAX_SHIFT: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Compare codes as stored.
    Off,
    /// Minimize the distance over circular sample shifts in
    /// `[-DEFAULT_MAX_SHIFT, DEFAULT_MAX_SHIFT]`, all strips shifted alike.
    ShiftSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub align: Alignment,
    /// Floor strip distances at one bit of disagreement; disabling this
    /// reproduces the literal product, which collapses to zero whenever any
    /// strip matches exactly.
    pub epsilon_floor: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { align: Alignment::Off, epsilon_floor: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchScore {
    /// Geometric-mean Hamming distance in [0, 1] (in [epsilon, 1] with the
    /// floor active).
    pub hd: f64,
    /// Unfloored per-strip distances.
    pub per_strip: Vec<f64>,
    /// Circular shift applied to the second code, 0 when alignment is off.
    pub shift: i32,
}

/// One enrolled template.
#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub subject_id: String,
    pub eye: Eye,
    pub session: Session,
    pub code: ShapeCode,
}

/// One bit of disagreement on one strip: the distance floor.
pub fn epsilon(code: &ShapeCode) -> f64 {
    1.0 / (code.samples_per_strip() as f64 * code.bits_per_sample() as f64)
}

fn check_compatible(a: &ShapeCode, b: &ShapeCode) -> Result<()> {
    if a.strip_count() != b.strip_count()
        || a.samples_per_strip() != b.samples_per_strip()
        || a.bits_per_sample() != b.bits_per_sample()
    {
        return Err(Error::DimensionMismatch(format!(
            "codes {}x{}x{} and {}x{}x{}",
            a.strip_count(),
            a.samples_per_strip(),
            a.bits_per_sample(),
            b.strip_count(),
            b.samples_per_strip(),
            b.bits_per_sample()
        )));
    }
    Ok(())
}

/// Unfloored strip distances of `a` against `b` with `b`'s samples
/// circularly shifted by `s`.
fn strip_distances(a: &ShapeCode, b: &ShapeCode, s: i32) -> Vec<f64> {
    let m = a.strip_count();
    let n = a.samples_per_strip() as i64;
    let mask = ShapeCode::sample_mask(a.bits_per_sample());
    let norm = 1.0 / (a.samples_per_strip() as f64 * a.bits_per_sample() as f64);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let sa = a.strip(i);
        let sb = b.strip(i);
        let mut bits = 0u32;
        for j in 0..n {
            let src = (j - s as i64).rem_euclid(n) as usize;
            bits += ((sa[j as usize] ^ sb[src]) & mask).count_ones();
        }
        out.push(bits as f64 * norm);
    }
    out
}

fn geometric_mean(distances: &[f64], floor: Option<f64>) -> f64 {
    let floored = |d: f64| match floor {
        Some(eps) => d.max(eps),
        None => d,
    };
    let first = floored(distances[0]);
    if distances.iter().all(|&d| floored(d) == first) {
        // uniform factors (identical or complementary codes) stay exact
        return first;
    }
    let m = distances.len() as f64;
    let mut product = 1.0;
    for &d in distances {
        product *= floored(d);
    }
    product.powf(1.0 / m)
}

/// Product-of-sums Hamming distance between two dimension-compatible codes.
pub fn pos_hamming(a: &ShapeCode, b: &ShapeCode, options: &MatchOptions) -> Result<MatchScore> {
    check_compatible(a, b)?;
    let floor = options.epsilon_floor.then(|| epsilon(a));
    let score_at = |s: i32| {
        let per_strip = strip_distances(a, b, s);
        let hd = geometric_mean(&per_strip, floor);
        MatchScore { hd, per_strip, shift: s }
    };
    match options.align {
        Alignment::Off => Ok(score_at(0)),
        Alignment::ShiftSearch => {
            let max_shift = DEFAULT_MAX_SHIFT.min(a.samples_per_strip() as i32 - 1);
            let mut best = score_at(0);
            for s in -max_shift..=max_shift {
                if s == 0 {
                    continue;
                }
                let candidate = score_at(s);
                let better = candidate.hd < best.hd
                    || (candidate.hd == best.hd && s.abs() < best.shift.abs());
                if better {
                    best = candidate;
                }
            }
            Ok(best)
        }
    }
}

/// Fuses a VL and an NIR code of the same eye by strip concatenation; the
/// matcher then runs over the doubled strip count.
pub fn fuse_codes(vl: &ShapeCode, nir: &ShapeCode) -> Result<ShapeCode> {
    vl.concatenated(nir)
}

/// Scores the probe against every gallery entry and ranks subjects by their
/// best (minimum) distance, ascending; ties order lexicographically by
/// subject id. Returns one row per distinct subject.
pub fn classify_nn(
    probe: &ShapeCode,
    gallery: &[GalleryEntry],
    options: &MatchOptions,
) -> Result<Vec<(String, MatchScore)>> {
    if gallery.is_empty() {
        return Err(Error::Eval("empty gallery".into()));
    }
    let mut best: std::collections::BTreeMap<&str, MatchScore> = std::collections::BTreeMap::new();
    for entry in gallery {
        let score = pos_hamming(probe, &entry.code, options).map_err(|e| {
            Error::DimensionMismatch(format!(
                "gallery entry {}_{}_{}: {e}",
                entry.subject_id, entry.eye, entry.session
            ))
        })?;
        match best.get(entry.subject_id.as_str()) {
            Some(current) if current.hd <= score.hd => {}
            _ => {
                best.insert(&entry.subject_id, score);
            }
        }
    }
    let mut ranked: Vec<(String, MatchScore)> =
        best.into_iter().map(|(id, score)| (id.to_string(), score)).collect();
    ranked.sort_by(|a, b| a.1.hd.total_cmp(&b.1.hd).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code_from_fn(m: u16, n: u16, b: u8, f: impl Fn(usize, usize) -> u16) -> ShapeCode {
        let mask = ShapeCode::sample_mask(b);
        let mut strips = Vec::new();
        for i in 0..m as usize {
            for j in 0..n as usize {
                strips.push(f(i, j) & mask);
            }
        }
        ShapeCode::from_parts(m, n, b, false, strips).unwrap()
    }

    fn pseudo_code(m: u16, n: u16, b: u8, seed: u64) -> ShapeCode {
        code_from_fn(m, n, b, |i, j| {
            let mut s = seed ^ ((i as u64) << 32) ^ (j as u64).wrapping_mul(0x5851F42D4C957F2D);
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s & 0xffff) as u16
        })
    }

    #[test]
    fn self_match_hits_the_floor() {
        let code = pseudo_code(24, 100, 8, 1);
        let score = pos_hamming(&code, &code, &MatchOptions::default()).unwrap();
        assert_eq!(score.hd, 1.0 / 800.0);
        assert!(score.per_strip.iter().all(|&d| d == 0.0));
        assert_eq!(score.shift, 0);
    }

    #[test]
    fn complement_match_is_one() {
        let a = pseudo_code(24, 100, 8, 2);
        let b = code_from_fn(24, 100, 8, |i, j| !a.strip(i)[j]);
        let score = pos_hamming(&a, &b, &MatchOptions::default()).unwrap();
        assert_eq!(score.hd, 1.0);
        assert!(score.per_strip.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn hand_built_distances_take_the_geometric_mean() {
        // strip 0: all eight bits differ in half the samples -> d = 0.5
        // strip 1: exactly one bit differs in every sample -> d = 0.125
        let n = 16u16;
        let a = code_from_fn(2, n, 8, |_, _| 0);
        let b = code_from_fn(2, n, 8, |i, j| match i {
            0 => {
                if j % 2 == 0 {
                    0xff
                } else {
                    0x00
                }
            }
            _ => 0x01,
        });
        let score = pos_hamming(&a, &b, &MatchOptions::default()).unwrap();
        assert_eq!(score.per_strip, vec![0.5, 0.125]);
        assert_eq!(score.hd, 0.25);
    }

    #[test]
    fn symmetry_without_alignment() {
        let a = pseudo_code(24, 100, 8, 3);
        let b = pseudo_code(24, 100, 8, 4);
        let opts = MatchOptions::default();
        let ab = pos_hamming(&a, &b, &opts).unwrap();
        let ba = pos_hamming(&b, &a, &opts).unwrap();
        assert_eq!(ab.hd, ba.hd);
        assert_eq!(ab.per_strip, ba.per_strip);
    }

    #[test]
    fn floored_distance_stays_within_range() {
        for seed in 0..8u64 {
            let a = pseudo_code(12, 50, 8, seed);
            let b = pseudo_code(12, 50, 8, seed + 100);
            let hd = pos_hamming(&a, &b, &MatchOptions::default()).unwrap().hd;
            assert!((1.0 / 400.0..=1.0).contains(&hd), "hd {hd}");
        }
    }

    #[test]
    fn unfloored_matches_literal_product_when_no_zero_strip() {
        let a = pseudo_code(24, 100, 8, 5);
        let b = pseudo_code(24, 100, 8, 6);
        let floored = pos_hamming(&a, &b, &MatchOptions::default()).unwrap();
        let raw = pos_hamming(
            &a,
            &b,
            &MatchOptions { epsilon_floor: false, ..MatchOptions::default() },
        )
        .unwrap();
        assert!(floored.per_strip.iter().all(|&d| d > 0.0));
        assert!((floored.hd - raw.hd).abs() < 1e-12);
        // literal product, computed independently
        let product: f64 = raw.per_strip.iter().product();
        assert!((raw.hd - product.powf(1.0 / 24.0)).abs() < 1e-12);
    }

    #[test]
    fn unfloored_self_match_collapses_to_zero() {
        let a = pseudo_code(24, 100, 8, 7);
        let raw = pos_hamming(
            &a,
            &a,
            &MatchOptions { epsilon_floor: false, ..MatchOptions::default() },
        )
        .unwrap();
        assert_eq!(raw.hd, 0.0);
    }

    #[test]
    fn shift_search_recovers_injected_shifts() {
        let a = pseudo_code(24, 100, 8, 8);
        let opts = MatchOptions { align: Alignment::ShiftSearch, ..MatchOptions::default() };
        for s in [-10i32, -7, -1, 0, 1, 4, 10] {
            let score = pos_hamming(&a, &a.shifted(s), &opts).unwrap();
            assert_eq!(score.shift, -s, "injected {s}");
            assert_eq!(score.hd, epsilon(&a));
        }
    }

    #[test]
    fn shift_ties_prefer_the_smallest_magnitude() {
        // constant strips are shift-invariant, so everything ties at the floor
        let a = code_from_fn(4, 20, 8, |_, _| 0xAA);
        let opts = MatchOptions { align: Alignment::ShiftSearch, ..MatchOptions::default() };
        let score = pos_hamming(&a, &a, &opts).unwrap();
        assert_eq!(score.shift, 0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = pseudo_code(24, 100, 8, 9);
        let b = pseudo_code(24, 50, 8, 9);
        assert!(pos_hamming(&a, &b, &MatchOptions::default()).is_err());
        let c = pseudo_code(24, 100, 4, 9);
        assert!(pos_hamming(&a, &c, &MatchOptions::default()).is_err());
    }

    #[test]
    fn fusing_doubles_strips_and_preserves_distances() {
        let x = pseudo_code(24, 100, 8, 10);
        let y = pseudo_code(24, 100, 8, 11);
        let fused_x = fuse_codes(&x, &x).unwrap();
        let fused_y = fuse_codes(&y, &y).unwrap();
        assert_eq!(fused_x.strip_count(), 48);
        assert_eq!(fused_x.bits(), 38_400);
        // duplicated factors leave the geometric mean unchanged
        let opts = MatchOptions::default();
        let single = pos_hamming(&x, &y, &opts).unwrap().hd;
        let doubled = pos_hamming(&fused_x, &fused_y, &opts).unwrap().hd;
        assert!((single - doubled).abs() < 1e-12);
        // fused self-match still floors
        let self_hd = pos_hamming(&fused_x, &fused_x, &opts).unwrap().hd;
        assert_eq!(self_hd, epsilon(&fused_x));
        // mismatched sample counts refuse to fuse
        assert!(fuse_codes(&x, &pseudo_code(24, 50, 8, 1)).is_err());
    }

    #[test]
    fn classify_ranks_self_first_and_breaks_ties_lexicographically() {
        let probe = pseudo_code(24, 100, 8, 20);
        let complement = code_from_fn(24, 100, 8, |i, j| !probe.strip(i)[j]);
        let gallery = vec![
            GalleryEntry {
                subject_id: "zeta".into(),
                eye: Eye::Left,
                session: Session::Vl,
                code: complement.clone(),
            },
            GalleryEntry {
                subject_id: "alpha".into(),
                eye: Eye::Left,
                session: Session::Vl,
                code: complement.clone(),
            },
            GalleryEntry {
                subject_id: "self".into(),
                eye: Eye::Left,
                session: Session::Vl,
                code: probe.clone(),
            },
        ];
        let ranked = classify_nn(&probe, &gallery, &MatchOptions::default()).unwrap();
        assert_eq!(ranked[0].0, "self");
        assert_eq!(ranked[0].1.hd, epsilon(&probe));
        assert_eq!(ranked[1].0, "alpha");
        assert_eq!(ranked[2].0, "zeta");
        assert_eq!(ranked[1].1.hd, 1.0);

        assert!(classify_nn(&probe, &[], &MatchOptions::default()).is_err());
    }

    #[test]
    fn subject_score_is_the_minimum_over_its_codes() {
        let probe = pseudo_code(24, 100, 8, 30);
        let near = probe.shifted(1);
        let far = code_from_fn(24, 100, 8, |i, j| !probe.strip(i)[j]);
        let gallery = vec![
            GalleryEntry {
                subject_id: "s".into(),
                eye: Eye::Left,
                session: Session::Vl,
                code: far,
            },
            GalleryEntry {
                subject_id: "s".into(),
                eye: Eye::Left,
                session: Session::Vl,
                code: near.clone(),
            },
        ];
        let ranked = classify_nn(&probe, &gallery, &MatchOptions::default()).unwrap();
        assert_eq!(ranked.len(), 1);
        let expected = pos_hamming(&probe, &near, &MatchOptions::default()).unwrap().hd;
        assert_eq!(ranked[0].1.hd, expected);
    }

    proptest! {
        #[test]
        fn geometric_mean_is_bracketed_by_extremes(seed in 0u64..1000) {
            let a = pseudo_code(8, 32, 8, seed);
            let b = pseudo_code(8, 32, 8, seed.wrapping_add(5000));
            let score = pos_hamming(&a, &b, &MatchOptions::default()).unwrap();
            let eps = epsilon(&a);
            let max = score.per_strip.iter().cloned().fold(0.0f64, f64::max).max(eps);
            let min = score.per_strip.iter().cloned().fold(1.0f64, f64::min).max(eps);
            prop_assert!(score.hd <= max + 1e-12);
            prop_assert!(score.hd >= min - 1e-12);
        }

        #[test]
        fn xor_symmetry_holds(seed in 0u64..300) {
            let a = pseudo_code(6, 40, 8, seed);
            let b = pseudo_code(6, 40, 8, seed.wrapping_add(77));
            let opts = MatchOptions::default();
            let ab = pos_hamming(&a, &b, &opts).unwrap().hd;
            let ba = pos_hamming(&b, &a, &opts).unwrap().hd;
            prop_assert_eq!(ab, ba);
        }
    }
}
