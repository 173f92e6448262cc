//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The desk-scale end-to-end checks run on the seeded synthetic dataset;
//! the UTIRIS-style comparison (criterion 10) is data-gated behind the
//! `UTIRIS_MANIFEST` environment variable and ignored by default.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use melaniris::binarize::{
    compute_thresholds, fit_gaussian, slice_image, trace_boundary, BinaryMask, HistogramModel,
};
use melaniris::enhance::{apply_response, tikhonov_response, TikhonovParams};
use melaniris::eval::{run_scenario, synth_dataset, write_report, Scenario, SynthParams};
use melaniris::imaging::{GrayImage, Session};
use melaniris::matching::{epsilon, pos_hamming, Alignment, MatchOptions};
use melaniris::pipeline::PipelineConfig;
use melaniris::shapecode::ShapeCode;
use melaniris::shapedesc::{
    radius_vector, support_function, tangent_angle, total_turning, Contour,
};

fn pass(id: &str, detail: String) {
    println!("ACCEPTANCE {id}: PASS ({detail})");
}

fn random_image(rng: &mut ChaCha12Rng, w: usize, h: usize) -> GrayImage<f64> {
    let data: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..=1.0)).collect();
    GrayImage::from_vec(w, h, data).unwrap()
}

fn random_code(rng: &mut ChaCha12Rng, m: u16, n: u16, b: u8) -> ShapeCode {
    let mask = ShapeCode::sample_mask(b);
    let strips: Vec<u16> =
        (0..m as usize * n as usize).map(|_| rng.random::<u16>() & mask).collect();
    ShapeCode::from_parts(m, n, b, rng.random(), strips).unwrap()
}

fn disk_mask(size: usize, r: f64) -> BinaryMask {
    let c = size as f64 / 2.0;
    let mut data = vec![false; size * size];
    for y in 0..size {
        for x in 0..size {
            data[y * size + x] = (x as f64 - c).powi(2) + (y as f64 - c).powi(2) <= r * r;
        }
    }
    BinaryMask::from_vec(size, size, data)
}

/// Criterion 1: the template size identity m x n x b, 19,200 bits for the
/// reference configuration and five more layouts.
#[test]
fn c01_code_size_identity() {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let reference = random_code(&mut rng, 24, 100, 8);
    assert_eq!(reference.bits(), 19_200);

    let configs = [(24u16, 50u16, 8u8), (24, 200, 8), (48, 100, 8), (24, 100, 4), (12, 64, 16)];
    for &(m, n, b) in &configs {
        let code = random_code(&mut rng, m, n, b);
        assert_eq!(code.bits(), m as usize * n as usize * b as usize, "{m}x{n}x{b}");
    }
    pass("c01", format!("19200-bit default plus {} layouts", configs.len()));
}

/// Criterion 2: the FFT filter path applies exactly the per-frequency gains,
/// and a delta PSF at lambda 0.8 gives the uniform gain 1/1.64.
#[test]
fn c02_tikhonov_spectral_identity() {
    let mut rng = ChaCha12Rng::seed_from_u64(202);
    let params = TikhonovParams::<f64> { lambda: 0.8, psf_variance: 4.0, psf_size: Some(13) };
    let response = tikhonov_response(&params, 32, 32).unwrap();

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let img = random_image(&mut rng, 32, 32);
        let out = apply_response(&img, &response).unwrap();

        let spectrum = |image: &GrayImage<f64>| -> Vec<Complex<f64>> {
            // independent DFT route: direct per-bin sums
            let mut bins = Vec::with_capacity(32 * 32);
            for ky in 0..32 {
                for kx in 0..32 {
                    let mut acc = Complex::new(0.0, 0.0);
                    for y in 0..32 {
                        for x in 0..32 {
                            let phase = -2.0 * std::f64::consts::PI
                                * (kx as f64 * x as f64 / 32.0 + ky as f64 * y as f64 / 32.0);
                            acc += Complex::from_polar(image.get(x, y), phase);
                        }
                    }
                    bins.push(acc);
                }
            }
            bins
        };
        let in_spec = spectrum(&img);
        let out_spec = spectrum(&out);
        for (i, (o, s)) in out_spec.iter().zip(&in_spec).enumerate() {
            let expected = s * response.gains()[i];
            worst = worst.max((o - expected).norm());
        }
    }
    assert!(worst <= 1e-9, "max spectral deviation {worst}");

    let delta = TikhonovParams::<f64> { lambda: 0.8, psf_variance: 1e-4, psf_size: Some(3) };
    let gains = tikhonov_response(&delta, 32, 32).unwrap();
    for &g in gains.gains() {
        assert!((g - 1.0 / 1.64).abs() <= 1e-9, "delta gain {g}");
    }
    pass("c02", format!("max spectral deviation {worst:.2e} over 50 images"));
}

/// Criterion 3: threshold placement matches numeric root finding of the
/// bell crossings at one and two thirds of the peak, and the symmetry
/// identities hold to 1e-12.
#[test]
fn c03_threshold_closed_form() {
    // bisection on A exp(-(x-mu)^2 / 2 sigma^2) = h, independent of the
    // closed form under test
    let cross = |mu: f64, sigma: f64, ratio: f64, upper: bool| -> f64 {
        let f = |x: f64| (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp() - ratio;
        let (mut lo, mut hi) = if upper { (mu, mu + 12.0 * sigma) } else { (mu - 12.0 * sigma, mu) };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let sign_mid = f(mid) > 0.0;
            let sign_lo = f(lo) > 0.0;
            if sign_mid == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut rng = ChaCha12Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu = rng.random_range(0.25..0.75);
        let sigma = rng.random_range(0.01..0.15);
        let model = HistogramModel::<f64> {
            bins: vec![0; 256],
            amp: rng.random_range(10.0..5000.0),
            mean: mu,
            sigma,
            converged: true,
            warning: false,
        };
        let set = compute_thresholds(&model);
        assert!(!set.warning, "no clamping expected for mu={mu} sigma={sigma}");
        let t = set.values();
        let expected = [
            cross(mu, sigma, 1.0 / 3.0, false),
            cross(mu, sigma, 2.0 / 3.0, false),
            mu,
            cross(mu, sigma, 2.0 / 3.0, true),
            cross(mu, sigma, 1.0 / 3.0, true),
        ];
        for (got, want) in t.iter().zip(&expected) {
            worst = worst.max((got - want).abs());
        }
        assert!(worst <= 1e-6, "threshold deviates by {worst}");
        assert!(((t[2] - t[0]) - (t[4] - t[2])).abs() <= 1e-12);
        assert!(((t[2] - t[1]) - (t[3] - t[2])).abs() <= 1e-12);
        for w in t.windows(2) {
            assert!(w[0] < w[1]);
        }
    }
    pass("c03", format!("max root-finding deviation {worst:.2e} over 100 draws"));
}

/// Criterion 4: the six band masks partition the pixels of 100 random
/// images with no gaps and no overlaps.
#[test]
fn c04_binarization_partition() {
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    for round in 0..100 {
        let img = random_image(&mut rng, 64, 48);
        let model = fit_gaussian(&img).unwrap();
        let sliced = slice_image(&img, &compute_thresholds(&model));
        let mut coverage = vec![0u8; img.len()];
        for band in sliced.bands() {
            for (i, &set) in band.data().iter().enumerate() {
                coverage[i] += set as u8;
            }
        }
        assert!(
            coverage.iter().all(|&c| c == 1),
            "round {round}: a pixel is covered {:?} times",
            coverage.iter().copied().collect::<std::collections::BTreeSet<u8>>()
        );
    }
    pass("c04", "exact 6-band partition on 100 random images".into());
}

/// Criterion 5: descriptor invariances on rasterized shapes.
#[test]
fn c05_descriptor_invariances() {
    let n = 100usize;

    // translation invariance is exact for pixel contours
    let base = trace_boundary::<f64>(&disk_mask(128, 40.0)).unwrap();
    let moved = base.translated(31.0, -17.0);
    assert_eq!(radius_vector(&base, n).samples, radius_vector(&moved, n).samples);
    assert_eq!(support_function(&base, n).samples, support_function(&moved, n).samples);
    assert_eq!(tangent_angle(&base, n).samples, tangent_angle(&moved, n).samples);

    // scale covariance within 2% for rasterized circles of radius >= 20:
    // the raw curves scale by lambda
    for &(r, lambda) in &[(20.0f64, 2.0f64), (25.0, 2.4), (30.0, 2.0)] {
        let small = trace_boundary::<f64>(&disk_mask(256, r)).unwrap();
        let large = trace_boundary::<f64>(&disk_mask(256, r * lambda)).unwrap();
        for (a, b) in
            [(radius_vector(&small, n), radius_vector(&large, n)),
             (support_function(&small, n), support_function(&large, n))]
        {
            let ratio = b.scale / a.scale;
            assert!(
                (ratio - lambda).abs() / lambda <= 0.02,
                "r={r} lambda={lambda}: scale ratio {ratio}"
            );
        }
        // the support function is also pointwise scale-invariant after
        // normalization; the radius function's pointwise band is set by the
        // half-pixel boundary quantization, so it gets the rasterization
        // allowance on top
        let (sa, sb) = (support_function(&small, n), support_function(&large, n));
        let (ra, rb) = (radius_vector(&small, n), radius_vector(&large, n));
        let raster = 2.0 * (0.5 / r + 0.5 / (r * lambda));
        for k in 0..n {
            assert!((sa.samples[k] - sb.samples[k]).abs() <= 0.02, "sf sample {k}");
            assert!(
                (ra.samples[k] - rb.samples[k]).abs() <= 0.02 + raster,
                "rvf sample {k} at r={r}"
            );
        }
    }

    // on exact contours the normalized curves are pointwise scale-invariant
    for &(r, lambda) in &[(20.0f64, 2.0f64), (30.0, 1.7)] {
        let circle = |radius: f64| {
            Contour::new(
                (0..720)
                    .map(|k| {
                        let a = std::f64::consts::TAU * k as f64 / 720.0;
                        [radius * a.cos(), radius * a.sin()]
                    })
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        };
        let (a, b) = (circle(r), circle(r * lambda));
        for (ca, cb) in [
            (radius_vector(&a, n), radius_vector(&b, n)),
            (support_function(&a, n), support_function(&b, n)),
        ] {
            for k in 0..n {
                assert!((ca.samples[k] - cb.samples[k]).abs() <= 0.02, "sample {k}");
            }
        }
    }

    // rotation about the centroid circularly shifts the direction-indexed
    // curves within interpolation tolerance
    let blob: Vec<[f64; 2]> = (0..720)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 720.0;
            let r = 55.0 + 8.0 * (2.0 * a).cos() + 5.0 * (3.0 * a).sin();
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let blob = Contour::new(blob).unwrap();
    let shift = 7usize;
    let rotated = blob.rotated_about_centroid(std::f64::consts::TAU * shift as f64 / n as f64);
    for (orig, rot) in [
        (radius_vector(&blob, n), radius_vector(&rotated, n)),
        (support_function(&blob, n), support_function(&rotated, n)),
    ] {
        for k in 0..n {
            let d = (orig.samples[k] - rot.samples[(k + shift) % n]).abs();
            assert!(d <= 0.02, "sample {k}: {d}");
        }
    }

    // the tangent turns through one full revolution
    for r in [20.0, 40.0, 60.0] {
        let c = trace_boundary::<f64>(&disk_mask(256, r)).unwrap();
        let turn = total_turning(&c, n);
        assert!((turn - std::f64::consts::TAU).abs() <= 0.05, "r={r}: turning {turn}");
    }

    // support function shrugs off small local distortions
    let mut rng = ChaCha12Rng::seed_from_u64(505);
    let clean = trace_boundary::<f64>(&disk_mask(256, 60.0)).unwrap();
    let reference = support_function(&clean, n);
    for _ in 0..20 {
        let mut pts = clean.points().to_vec();
        let budget = (pts.len() as f64 * 0.02) as usize;
        for _ in 0..budget {
            let idx = rng.random_range(0..pts.len());
            pts[idx][0] += rng.random_range(-2.0..=2.0);
            pts[idx][1] += rng.random_range(-2.0..=2.0);
        }
        let perturbed = support_function(&Contour::new(pts).unwrap(), n);
        for k in 0..n {
            let d = (reference.samples[k] - perturbed.samples[k]).abs();
            assert!(d <= 0.05, "sample {k} moved by {d}");
        }
    }
    pass("c05", "translation/scale/rotation/turning/distortion bounds hold".into());
}

/// Criterion 6: matching laws of the product-of-sums distance.
#[test]
fn c06_matching_laws() {
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let options = MatchOptions::default();

    // symmetry and range over random pairs
    for _ in 0..20 {
        let a = random_code(&mut rng, 24, 100, 8);
        let b = random_code(&mut rng, 24, 100, 8);
        let ab = pos_hamming(&a, &b, &options).unwrap();
        let ba = pos_hamming(&b, &a, &options).unwrap();
        assert_eq!(ab.hd, ba.hd);
        assert!(ab.hd >= epsilon(&a) && ab.hd <= 1.0);
    }

    // hand-built distances 0.5 and 0.125 combine to exactly 0.25
    let zeros = ShapeCode::from_parts(2, 16, 8, false, vec![0; 32]).unwrap();
    let mut strips = Vec::new();
    for j in 0..16 {
        strips.push(if j % 2 == 0 { 0xff } else { 0x00 });
    }
    strips.extend(std::iter::repeat_n(0x01, 16));
    let other = ShapeCode::from_parts(2, 16, 8, false, strips).unwrap();
    let score = pos_hamming(&zeros, &other, &options).unwrap();
    assert_eq!(score.per_strip, vec![0.5, 0.125]);
    assert_eq!(score.hd, 0.25);

    // shift search recovers every injected shift up to the window edge
    let base = random_code(&mut rng, 24, 100, 8);
    let search = MatchOptions { align: Alignment::ShiftSearch, ..options };
    for s in -10i32..=10 {
        let probe = base.shifted(s);
        let found = pos_hamming(&base, &probe, &search).unwrap();
        assert_eq!(found.shift, -s, "injected {s}");
        assert_eq!(found.hd, epsilon(&base));
    }

    // without the floor the distance is the literal product form
    let raw_options = MatchOptions { epsilon_floor: false, ..options };
    for _ in 0..20 {
        let a = random_code(&mut rng, 24, 100, 8);
        let b = random_code(&mut rng, 24, 100, 8);
        let raw = pos_hamming(&a, &b, &raw_options).unwrap();
        if raw.per_strip.iter().all(|&d| d > 0.0) {
            let literal: f64 =
                raw.per_strip.iter().product::<f64>().powf(1.0 / raw.per_strip.len() as f64);
            assert!((raw.hd - literal).abs() <= 1e-12);
            let floored = pos_hamming(&a, &b, &options).unwrap();
            assert!((floored.hd - literal).abs() <= 1e-12);
        }
    }
    pass("c06", "symmetry, range, exact 0.25 composite, shift recovery".into());
}

/// Criterion 7: serialization round-trips and corruption detection.
#[test]
fn c07_serialization() {
    let mut rng = ChaCha12Rng::seed_from_u64(707);
    for round in 0..1000 {
        let m = rng.random_range(1..=48u16);
        let n = rng.random_range(1..=128u16);
        let b = rng.random_range(1..=16u8);
        let code = random_code(&mut rng, m, n, b);
        let back = ShapeCode::deserialize(&code.serialize()).unwrap();
        assert_eq!(back, code, "round {round}");
    }

    // every byte-level corruption is caught as a typed error
    let code = random_code(&mut rng, 24, 100, 8);
    let clean = code.serialize();
    let mut fuzzed = 0usize;
    for _ in 0..4000 {
        let mut bytes = clean.clone();
        let pos = rng.random_range(0..bytes.len());
        let flip: u8 = rng.random_range(1..=255);
        bytes[pos] ^= flip;
        assert!(ShapeCode::deserialize(&bytes).is_err(), "corruption at {pos} missed");
        fuzzed += 1;
    }
    for cut in [0usize, 1, 15, 16, 100, clean.len() - 1] {
        assert!(ShapeCode::deserialize(&clean[..cut]).is_err());
    }
    pass("c07", format!("1000 round-trips, {fuzzed} corruptions all detected"));
}

fn desk_scale_reports() -> (f64, f64, f64, usize, usize) {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams { classes: 10, images_per_class: 5, noise_sigma: 0.01, seed: 808 };
    let manifest = synth_dataset(&params, dir.path()).unwrap();
    let scenario = Scenario { repetitions: 20, seed: 2024, ..Scenario::new(4, 5) };
    let config = PipelineConfig::default();

    let vl = run_scenario(&manifest, dir.path(), Session::Vl, &scenario, &config).unwrap();
    let nir = run_scenario(&manifest, dir.path(), Session::Nir, &scenario, &config).unwrap();
    let fused = run_scenario(&manifest, dir.path(), Session::Fused, &scenario, &config).unwrap();

    // scenario accounting identities, exact:
    // classes x (n - k) x k and classes x (n - k) x (classes - 1) x k
    #[allow(clippy::identity_op)]
    for report in [&vl, &nir, &fused] {
        assert_eq!(report.genuine_per_repetition, 10 * (5 - 4) * 4);
        assert_eq!(report.impostor_per_repetition, 10 * (5 - 4) * 9 * 4);
        assert_eq!(report.intra.scores.len(), 20 * report.genuine_per_repetition);
        assert_eq!(report.inter.scores.len(), 20 * report.impostor_per_repetition);
    }
    (
        vl.rank_accuracy[0].mean,
        nir.rank_accuracy[0].mean,
        fused.rank_accuracy[0].mean,
        fused.genuine_per_repetition,
        fused.impostor_per_repetition,
    )
}

/// Criterion 8: desk-scale recognition on the seeded synthetic set.
#[test]
fn c08_end_to_end_recognition() {
    let (vl, nir, fused, genuine, impostor) = desk_scale_reports();
    assert!(vl >= 0.9, "VL rank-1 accuracy {vl}");
    assert!(fused >= vl.max(nir) - 0.05, "fused {fused} vs singles {vl}/{nir}");
    pass(
        "c08",
        format!(
            "rank-1 VL {vl:.3} NIR {nir:.3} FUSED {fused:.3}; {genuine}/{impostor} comparisons per repetition"
        ),
    );
}

/// Criterion 9: identical seed and configuration reproduce byte-identical
/// report files.
#[test]
fn c09_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams { classes: 5, images_per_class: 3, noise_sigma: 0.01, seed: 909 };
    let manifest = synth_dataset(&params, dir.path()).unwrap();
    let scenario = Scenario { repetitions: 5, seed: 42, ..Scenario::new(2, 3) };
    let config = PipelineConfig::default();

    let mut outputs: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for run in 0..2 {
        let report =
            run_scenario(&manifest, dir.path(), Session::Vl, &scenario, &config).unwrap();
        let out = dir.path().join(format!("run{run}"));
        let (csv, json) = write_report(&report, &out).unwrap();
        outputs.push((std::fs::read(csv).unwrap(), std::fs::read(json).unwrap()));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "CSV reports differ");
    assert_eq!(outputs[0].1, outputs[1].1, "JSON reports differ");
    pass("c09", format!("{} bytes CSV, {} bytes JSON, bit-identical", outputs[0].0.len(), outputs[0].1.len()));
}

/// Criterion 10 (data-gated): run the four train/test scenarios per session
/// on a user-supplied manifest and print the comparison table. Enable with
/// `UTIRIS_MANIFEST=/path/to/manifest.json cargo test --test acceptance
/// -- --ignored --nocapture`.
#[test]
#[ignore = "requires an external dataset manifest in UTIRIS_MANIFEST"]
fn c10_external_dataset_scenarios() {
    let manifest_path = std::env::var("UTIRIS_MANIFEST")
        .expect("set UTIRIS_MANIFEST to a dataset manifest path");
    let manifest_path = std::path::PathBuf::from(manifest_path);
    let manifest = melaniris::DatasetManifest::load(&manifest_path).unwrap();
    let base = manifest_path.parent().unwrap();
    let config = PipelineConfig::default();

    let mut table: BTreeMap<usize, BTreeMap<Session, f64>> = BTreeMap::new();
    for k_train in 1..=4usize {
        for session in [Session::Vl, Session::Nir, Session::Fused] {
            let scenario = Scenario { repetitions: 20, seed: 7, ..Scenario::new(k_train, 5) };
            let report = run_scenario(&manifest, base, session, &scenario, &config).unwrap();
            table.entry(k_train).or_default().insert(session, report.rank_accuracy[0].mean);
        }
    }
    println!("k_train  VL      NIR     FUSED");
    for (k, row) in &table {
        println!(
            "{k}        {:.4}  {:.4}  {:.4}",
            row[&Session::Vl], row[&Session::Nir], row[&Session::Fused]
        );
    }
    pass("c10", "external-dataset comparison table emitted".into());
}
