//! Scenario-based evaluation: train/test splits, rank-accuracy (CMC)
//! curves, genuine/impostor distance distributions, and a synthetic dataset
//! generator for desk-scale end-to-end runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    save_pgm, DatasetManifest, Eye, GrayImage, IrisGeometry, ManifestEntry, Session,
};
use crate::matching::pos_hamming;
use crate::pipeline::{enroll_image, PipelineConfig};
use crate::shapecode::ShapeCode;

/// Histogram resolution of the distance distributions stored in reports.
pub const REPORT_HISTOGRAM_BINS: usize = 50;
/// Thresholds sampled for the FAR/FRR curve.
pub const ROC_STEPS: usize = 200;

/// One train/test protocol: `k_train` of `n_per_class` images per class are
/// enrolled, the rest probe the gallery; the whole draw repeats
/// `repetitions` times under the given seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub k_train: usize,
    pub n_per_class: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Drop degraded templates before splitting.
    #[serde(default)]
    pub exclude_degraded: bool,
}

fn default_repetitions() -> usize {
    20
}

impl Scenario {
    pub fn new(k_train: usize, n_per_class: usize) -> Self {
        Self {
            k_train,
            n_per_class,
            repetitions: default_repetitions(),
            seed: 0,
            exclude_degraded: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_train == 0 || self.k_train >= self.n_per_class {
            return Err(Error::Eval(format!(
                "need 1 <= k_train < n_per_class, got k={} n={}",
                self.k_train, self.n_per_class
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Eval("repetitions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankPoint {
    pub rank: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Pooled comparison distances with summary statistics and a unit-mass
/// histogram over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePool {
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub histogram: Vec<f64>,
}

impl ScorePool {
    fn from_scores(scores: Vec<f64>) -> Self {
        let mean = mean(&scores);
        let std = population_std(&scores, mean);
        let histogram = normalized_histogram(&scores, REPORT_HISTOGRAM_BINS);
        Self { scores, mean, std, histogram }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPerformance {
    pub class: String,
    pub rank1_accuracy: f64,
}

/// Full result of one scenario run; serializes to the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub session: Session,
    pub scenario: Scenario,
    pub config: PipelineConfig,
    pub class_count: usize,
    /// Cumulative accuracy at each rank, mean and std over repetitions.
    pub rank_accuracy: Vec<RankPoint>,
    pub intra: ScorePool,
    pub inter: ScorePool,
    /// Separation of the two pools:
    /// |mean_inter - mean_intra| / sqrt((var_intra + var_inter) / 2).
    pub decidability: f64,
    pub roc: Vec<RocPoint>,
    /// Classes ordered worst rank-1 accuracy first.
    pub per_class: Vec<ClassPerformance>,
    pub genuine_per_repetition: usize,
    pub impostor_per_repetition: usize,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn normalized_histogram(scores: &[f64], bins: usize) -> Vec<f64> {
    let mut hist = vec![0.0; bins];
    if scores.is_empty() {
        return hist;
    }
    for &s in scores {
        let idx = ((s * bins as f64) as usize).min(bins - 1);
        hist[idx] += 1.0;
    }
    let total = scores.len() as f64;
    for h in &mut hist {
        *h /= total;
    }
    hist
}

pub fn decidability(intra: &[f64], inter: &[f64]) -> f64 {
    let mi = mean(intra);
    let me = mean(inter);
    let vi = population_std(intra, mi).powi(2);
    let ve = population_std(inter, me).powi(2);
    let denom = ((vi + ve) / 2.0).sqrt();
    if denom == 0.0 {
        if (me - mi).abs() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (me - mi).abs() / denom
    }
}

/// Re-bins the report's pooled distances into two unit-mass histograms.
pub fn hd_distributions(report: &EvalReport, bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if report.intra.scores.is_empty() || report.inter.scores.is_empty() {
        return Err(Error::Eval("empty genuine or impostor score pool".into()));
    }
    if bins == 0 {
        return Err(Error::Eval("histogram needs at least one bin".into()));
    }
    Ok((
        normalized_histogram(&report.intra.scores, bins),
        normalized_histogram(&report.inter.scores, bins),
    ))
}

/// Rank curve rows `(rank, mean accuracy, std)` ready for CSV output.
pub fn rank_curve(report: &EvalReport) -> Vec<(usize, f64, f64)> {
    report.rank_accuracy.iter().map(|p| (p.rank, p.mean, p.std)).collect()
}

fn roc_points(intra: &[f64], inter: &[f64]) -> Vec<RocPoint> {
    (0..=ROC_STEPS)
        .map(|i| {
            let threshold = i as f64 / ROC_STEPS as f64;
            let far = inter.iter().filter(|&&s| s <= threshold).count() as f64
                / inter.len().max(1) as f64;
            let frr = intra.iter().filter(|&&s| s > threshold).count() as f64
                / intra.len().max(1) as f64;
            RocPoint { threshold, far, frr }
        })
        .collect()
}

/// Codes for every manifest entry the session needs, extracted in parallel
/// but collected in manifest order. Fused slots pair the i-th VL capture of
/// a class with its i-th NIR capture.
struct ClassCodes {
    /// class label -> slot codes
    slots: BTreeMap<String, Vec<ShapeCode>>,
}

fn extract_class_codes(
    manifest: &DatasetManifest,
    base_dir: &Path,
    session: Session,
    config: &PipelineConfig,
    exclude_degraded: bool,
) -> Result<ClassCodes> {
    let needed: Vec<usize> = match session {
        Session::Fused => (0..manifest.entries.len()).collect(),
        s => manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.session == s)
            .map(|(i, _)| i)
            .collect(),
    };
    if needed.is_empty() {
        return Err(Error::Eval(format!("manifest has no {session} entries")));
    }
    let codes: Vec<(usize, ShapeCode)> = needed
        .par_iter()
        .map(|&i| {
            let entry = &manifest.entries[i];
            let path = entry.resolved_path(base_dir);
            let (code, _) = enroll_image(&path, entry.geometry.as_ref(), config)
                .map_err(|e| Error::Eval(format!("{}: {e}", path.display())))?;
            Ok((i, code))
        })
        .collect::<Result<_>>()?;
    let by_index: BTreeMap<usize, ShapeCode> = codes.into_iter().collect();

    let mut slots: BTreeMap<String, Vec<ShapeCode>> = BTreeMap::new();
    match session {
        Session::Fused => {
            let vl = manifest.by_class(Session::Vl);
            let nir = manifest.by_class(Session::Nir);
            let classes: std::collections::BTreeSet<&String> =
                vl.keys().chain(nir.keys()).collect();
            for class in classes {
                let empty = Vec::new();
                let vl_ids = vl.get(class).unwrap_or(&empty);
                let nir_ids = nir.get(class).unwrap_or(&empty);
                if vl_ids.len() != nir_ids.len() {
                    return Err(Error::Eval(format!(
                        "class {class} has {} VL but {} NIR captures; fusion needs pairs",
                        vl_ids.len(),
                        nir_ids.len()
                    )));
                }
                let mut fused = Vec::with_capacity(vl_ids.len());
                for (&vi, &ni) in vl_ids.iter().zip(nir_ids) {
                    fused.push(by_index[&vi].concatenated(&by_index[&ni])?);
                }
                slots.insert(class.clone(), fused);
            }
        }
        s => {
            for (class, ids) in manifest.by_class(s) {
                let codes = ids.iter().map(|i| by_index[i].clone()).collect();
                slots.insert(class, codes);
            }
        }
    }
    if exclude_degraded {
        for codes in slots.values_mut() {
            codes.retain(|c| !c.degraded());
        }
        slots.retain(|_, v| !v.is_empty());
    }
    Ok(ClassCodes { slots })
}

/// Runs one scenario over the manifest. For every repetition the train set
/// is drawn uniformly without replacement per class (larger classes are
/// subsampled to `n_per_class` first), every held-out image probes the
/// gallery, the rank of its true class is recorded, and all probe-to-gallery
/// distances are pooled into the genuine/impostor distributions.
pub fn run_scenario(
    manifest: &DatasetManifest,
    base_dir: &Path,
    session: Session,
    scenario: &Scenario,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    scenario.validate()?;
    config.validate()?;
    let codes = extract_class_codes(manifest, base_dir, session, config, scenario.exclude_degraded)?;

    let classes: Vec<&String> = codes.slots.keys().collect();
    let class_count = classes.len();
    if class_count < 2 {
        return Err(Error::Eval(format!("need at least 2 classes, got {class_count}")));
    }
    for (class, slots) in &codes.slots {
        if slots.len() < scenario.n_per_class {
            return Err(Error::Eval(format!(
                "class {class} has {} usable captures, scenario needs {}",
                slots.len(),
                scenario.n_per_class
            )));
        }
    }

    let probes_per_class = scenario.n_per_class - scenario.k_train;
    let expected_genuine = class_count * probes_per_class * scenario.k_train;
    let expected_impostor =
        class_count * probes_per_class * (class_count - 1) * scenario.k_train;

    // one independent stream per repetition, all derived up front
    let mut master = ChaCha12Rng::seed_from_u64(scenario.seed);
    let rep_seeds: Vec<u64> = (0..scenario.repetitions).map(|_| master.random()).collect();

    let match_options = config.match_options();
    let mut intra = Vec::new();
    let mut inter = Vec::new();
    // per-rank hit counts per repetition
    let mut rep_rank_hits: Vec<Vec<usize>> = Vec::with_capacity(scenario.repetitions);
    let mut class_rank1: BTreeMap<String, usize> = BTreeMap::new();
    let mut class_probes: BTreeMap<String, usize> = BTreeMap::new();

    for &rep_seed in &rep_seeds {
        let mut rng = ChaCha12Rng::seed_from_u64(rep_seed);
        // split each class into train/test slot indices
        let mut gallery: Vec<(usize, &ShapeCode)> = Vec::new();
        let mut probes: Vec<(usize, &ShapeCode)> = Vec::new();
        for (ci, class) in classes.iter().enumerate() {
            let slots = &codes.slots[*class];
            let mut order: Vec<usize> = (0..slots.len()).collect();
            order.shuffle(&mut rng);
            order.truncate(scenario.n_per_class);
            for (pos, &slot) in order.iter().enumerate() {
                if pos < scenario.k_train {
                    gallery.push((ci, &slots[slot]));
                } else {
                    probes.push((ci, &slots[slot]));
                }
            }
        }

        // score all probes against the whole gallery
        let scored: Vec<(usize, Vec<(usize, f64)>)> = probes
            .par_iter()
            .map(|&(class_idx, probe)| {
                let row: Vec<(usize, f64)> = gallery
                    .iter()
                    .map(|&(gc, code)| {
                        let score = pos_hamming(probe, code, &match_options)
                            .expect("codes share dimensions");
                        (gc, score.hd)
                    })
                    .collect();
                (class_idx, row)
            })
            .collect();

        let mut rank_hits = vec![0usize; class_count];
        let mut genuine_count = 0usize;
        let mut impostor_count = 0usize;
        for (true_class, row) in &scored {
            let mut best: BTreeMap<usize, f64> = BTreeMap::new();
            for &(gc, hd) in row {
                if gc == *true_class {
                    intra.push(hd);
                    genuine_count += 1;
                } else {
                    inter.push(hd);
                    impostor_count += 1;
                }
                best.entry(gc)
                    .and_modify(|cur| {
                        if hd < *cur {
                            *cur = hd;
                        }
                    })
                    .or_insert(hd);
            }
            // ascending by distance, lexicographic class label on ties
            let mut ranked: Vec<(usize, f64)> = best.into_iter().collect();
            ranked.sort_by(|a, b| {
                a.1.total_cmp(&b.1).then_with(|| classes[a.0].cmp(classes[b.0]))
            });
            let rank = ranked
                .iter()
                .position(|&(c, _)| c == *true_class)
                .expect("true class is in the gallery");
            rank_hits[rank] += 1;

            let label = classes[*true_class].clone();
            *class_probes.entry(label.clone()).or_insert(0) += 1;
            if rank == 0 {
                *class_rank1.entry(label).or_insert(0) += 1;
            } else {
                class_rank1.entry(label).or_insert(0);
            }
        }
        debug_assert_eq!(genuine_count, expected_genuine);
        debug_assert_eq!(impostor_count, expected_impostor);
        rep_rank_hits.push(rank_hits);
    }

    let probes_total = class_count * probes_per_class;
    let rank_accuracy: Vec<RankPoint> = (0..class_count)
        .map(|r| {
            let per_rep: Vec<f64> = rep_rank_hits
                .iter()
                .map(|hits| {
                    hits[..=r].iter().sum::<usize>() as f64 / probes_total as f64
                })
                .collect();
            let m = mean(&per_rep);
            RankPoint { rank: r + 1, mean: m, std: sample_std(&per_rep, m) }
        })
        .collect();

    let mut per_class: Vec<ClassPerformance> = class_probes
        .iter()
        .map(|(class, &total)| ClassPerformance {
            class: class.clone(),
            rank1_accuracy: class_rank1.get(class).copied().unwrap_or(0) as f64 / total as f64,
        })
        .collect();
    per_class.sort_by(|a, b| {
        a.rank1_accuracy.total_cmp(&b.rank1_accuracy).then_with(|| a.class.cmp(&b.class))
    });

    let d = decidability(&intra, &inter);
    let roc = roc_points(&intra, &inter);
    Ok(EvalReport {
        session,
        scenario: *scenario,
        config: config.clone(),
        class_count,
        rank_accuracy,
        intra: ScorePool::from_scores(intra),
        inter: ScorePool::from_scores(inter),
        decidability: d,
        roc,
        per_class,
        genuine_per_repetition: expected_genuine,
        impostor_per_repetition: expected_impostor,
    })
}

/// Writes `{session}_{k}train.csv` (cmc and roc series) and the full JSON
/// report next to it; returns both paths. Files are written atomically.
pub fn write_report(report: &EvalReport, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let stem = format!("{}_{}train", report.session, report.scenario.k_train);

    let mut csv = String::from("series,x,y,aux\n");
    for (rank, mean, std) in rank_curve(report) {
        csv.push_str(&format!("cmc,{rank},{mean},{std}\n"));
    }
    for p in &report.roc {
        csv.push_str(&format!("roc,{},{},{}\n", p.threshold, p.far, p.frr));
    }
    let csv_path = out_dir.join(format!("{stem}.csv"));
    write_atomic(&csv_path, csv.as_bytes())?;

    let json = serde_json::to_string_pretty(report).expect("report serializes");
    let json_path = out_dir.join(format!("{stem}.json"));
    write_atomic(&json_path, json.as_bytes())?;
    Ok((csv_path, json_path))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Parameters of the synthetic eye generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub classes: usize,
    pub images_per_class: usize,
    /// Standard deviation of the per-pixel noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { classes: 10, images_per_class: 5, noise_sigma: 0.01, seed: 0 }
    }
}

const SYNTH_SIZE: usize = 200;
const SYNTH_CENTER: f64 = 100.0;
const SYNTH_R_PUPIL: f64 = 28.0;
const SYNTH_R_IRIS: f64 = 88.0;
const SYNTH_BLOBS: usize = 26;
/// Capture jitter: rotation up to 3 degrees, illumination up to 0.05.
const SYNTH_MAX_ROTATION_DEG: f64 = 3.0;
const SYNTH_MAX_ILLUMINATION: f64 = 0.05;

#[derive(Clone, Copy)]
struct Blob {
    radius: f64,
    angle: f64,
    sigma: f64,
    amp: f64,
}

fn draw_pattern(rng: &mut ChaCha12Rng) -> Vec<Blob> {
    (0..SYNTH_BLOBS)
        .map(|_| Blob {
            radius: rng.random_range(SYNTH_R_PUPIL + 8.0..SYNTH_R_IRIS - 8.0),
            angle: rng.random_range(0.0..std::f64::consts::TAU),
            sigma: rng.random_range(4.5..11.0),
            amp: rng.random_range(0.10..0.25) * if rng.random::<bool>() { 1.0 } else { -1.0 },
        })
        .collect()
}

fn render_eye(pattern: &[Blob], rotation: f64, illumination: f64, noise: &[f64]) -> GrayImage<f64> {
    let c = SYNTH_CENTER;
    GrayImage::from_fn(SYNTH_SIZE, SYNTH_SIZE, |x, y| {
        let dx = x as f64 - c;
        let dy = y as f64 - c;
        let d = (dx * dx + dy * dy).sqrt();
        let mut v = if d <= SYNTH_R_PUPIL {
            0.06
        } else if d >= SYNTH_R_IRIS {
            0.92
        } else {
            let mut acc: f64 = 0.55;
            for blob in pattern {
                let a = blob.angle + rotation;
                let bx = c + blob.radius * a.cos();
                let by = c - blob.radius * a.sin();
                let dist_sq = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                acc += blob.amp * (-dist_sq / (2.0 * blob.sigma * blob.sigma)).exp();
            }
            acc.clamp(0.08, 0.88)
        };
        v += illumination;
        v += noise[y * SYNTH_SIZE + x];
        v
    })
}

fn synth_geometry() -> IrisGeometry {
    IrisGeometry::new(SYNTH_CENTER, SYNTH_CENTER, SYNTH_R_PUPIL, SYNTH_R_IRIS)
}

/// Renders `classes x images_per_class` eyes per session (VL and NIR carry
/// independent patterns per class), writes them as PGM files plus a
/// `manifest.json` into `out_dir`, and returns the manifest.
pub fn synth_dataset(params: &SynthParams, out_dir: &Path) -> Result<DatasetManifest> {
    if params.classes < 2 {
        return Err(Error::Eval("synthetic dataset needs at least 2 classes".into()));
    }
    if params.images_per_class == 0 {
        return Err(Error::Eval("synthetic dataset needs at least 1 image per class".into()));
    }
    if !(0.0..=0.3).contains(&params.noise_sigma) {
        return Err(Error::Eval("noise_sigma must be in [0, 0.3]".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let normal = rand_distr::Normal::new(0.0, params.noise_sigma)
        .map_err(|e| Error::Eval(format!("noise distribution: {e}")))?;
    let mut master = ChaCha12Rng::seed_from_u64(params.seed);
    let mut entries = Vec::new();
    for class in 0..params.classes {
        let subject_id = format!("s{class:02}");
        for session in [Session::Vl, Session::Nir] {
            let mut pattern_rng = ChaCha12Rng::seed_from_u64(master.random());
            let pattern = draw_pattern(&mut pattern_rng);
            for index in 0..params.images_per_class {
                let mut image_rng = ChaCha12Rng::seed_from_u64(master.random());
                let rotation = image_rng
                    .random_range(-SYNTH_MAX_ROTATION_DEG..=SYNTH_MAX_ROTATION_DEG)
                    .to_radians();
                let illumination =
                    image_rng.random_range(-SYNTH_MAX_ILLUMINATION..=SYNTH_MAX_ILLUMINATION);
                let noise: Vec<f64> = (0..SYNTH_SIZE * SYNTH_SIZE)
                    .map(|_| image_rng.sample(normal))
                    .collect();
                let img = render_eye(&pattern, rotation, illumination, &noise);
                let name = format!("{subject_id}_L_{session}_{index}.pgm");
                save_pgm(&img, out_dir.join(&name))?;
                entries.push(ManifestEntry {
                    subject_id: subject_id.clone(),
                    eye: Eye::Left,
                    session,
                    path: name,
                    geometry: Some(synth_geometry()),
                });
            }
        }
    }
    let manifest = DatasetManifest { entries };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}
