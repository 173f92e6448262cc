//! End-to-end template extraction: unwrap, enhance, binarize, describe,
//! assemble.

use std::path::Path;

use rustfft::FftNum;
use serde::{Deserialize, Serialize};

use crate::binarize::{self, SelectedObject, SlicedTemplate};
use crate::enhance::{self, TikhonovParams};
use crate::error::{Error, Result};
use crate::imaging::{self, GrayImage, IrisGeometry, IrisStrip};
use crate::matching::Alignment;
use crate::scalar::Real;
use crate::shapecode::ShapeCode;

/// Strip size presets; the first is the default, the other two match common
/// capture setups (full-resolution unwrap, one column per degree of the
/// half-ring).
pub const STRIP_150X300: (usize, usize) = (150, 300);
pub const STRIP_256X512: (usize, usize) = (256, 512);
pub const STRIP_150X180: (usize, usize) = (150, 180);

fn default_rows() -> usize {
    STRIP_150X300.0
}
fn default_cols() -> usize {
    STRIP_150X300.1
}
fn default_lambda() -> f64 {
    0.8
}
fn default_psf_variance() -> f64 {
    25.0
}
fn default_samples() -> usize {
    100
}
fn default_bits() -> u8 {
    8
}
fn default_min_area() -> usize {
    30
}
fn default_align() -> Alignment {
    Alignment::Off
}
fn default_epsilon_floor() -> bool {
    true
}

/// Every knob of the extraction and matching chain, JSON-loadable. The
/// defaults are the reference configuration: 150x300 strip, lambda 0.8,
/// PSF variance 25, 100 samples at 8 bits, 30-pixel area floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub unwrap_rows: usize,
    pub unwrap_cols: usize,
    pub lambda: f64,
    pub psf_variance: f64,
    /// Odd kernel side; derived from the variance when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psf_size: Option<usize>,
    pub n_samples: usize,
    pub bits: u8,
    pub min_area: usize,
    pub align: Alignment,
    pub epsilon_floor: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            unwrap_rows: default_rows(),
            unwrap_cols: default_cols(),
            lambda: default_lambda(),
            psf_variance: default_psf_variance(),
            psf_size: None,
            n_samples: default_samples(),
            bits: default_bits(),
            min_area: default_min_area(),
            align: default_align(),
            epsilon_floor: default_epsilon_floor(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.unwrap_rows < 8 || self.unwrap_cols < 8 {
            return Err(Error::InvalidParameter("unwrap size must be at least 8x8".into()));
        }
        if self.n_samples < 8 || self.n_samples > u16::MAX as usize {
            return Err(Error::InvalidParameter("n_samples must be in 8..=65535".into()));
        }
        if self.bits == 0 || self.bits > 16 {
            return Err(Error::InvalidParameter("bits must be in 1..=16".into()));
        }
        self.tikhonov_params::<f64>().validate()
    }

    pub fn tikhonov_params<T: Real>(&self) -> TikhonovParams<T> {
        TikhonovParams {
            lambda: T::of(self.lambda),
            psf_variance: T::of(self.psf_variance),
            psf_size: self.psf_size,
        }
    }

    pub fn match_options(&self) -> crate::matching::MatchOptions {
        crate::matching::MatchOptions { align: self.align, epsilon_floor: self.epsilon_floor }
    }
}

/// Per-image conditions worth surfacing in enrollment logs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExtractionWarnings {
    /// Unwrap circles left the image; nearest pixels were used.
    pub unwrap_clipped: bool,
    /// Histogram fit fell back to moment estimates.
    pub fit_fallback: bool,
    /// Thresholds had to be clamped away from the fitted values.
    pub thresholds_clamped: bool,
    /// Some band lacked two qualifying objects; placeholders were coded.
    pub degraded: bool,
    /// Geometry was estimated by circle detection, not supplied.
    pub estimated_geometry: bool,
}

impl ExtractionWarnings {
    pub fn any(&self) -> bool {
        self.unwrap_clipped
            || self.fit_fallback
            || self.thresholds_clamped
            || self.degraded
            || self.estimated_geometry
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.unwrap_clipped {
            out.push("unwrap-clipped");
        }
        if self.fit_fallback {
            out.push("fit-fallback");
        }
        if self.thresholds_clamped {
            out.push("thresholds-clamped");
        }
        if self.degraded {
            out.push("degraded-bands");
        }
        if self.estimated_geometry {
            out.push("estimated-geometry");
        }
        out
    }
}

/// Everything the pipeline produced on the way to a code; kept for
/// inspection dumps.
pub struct StageArtifacts<T> {
    pub strip: IrisStrip<T>,
    pub enhanced: GrayImage<T>,
    pub filtered: GrayImage<T>,
    pub model: binarize::HistogramModel<T>,
    pub thresholds: binarize::ThresholdSet<T>,
    pub sliced: SlicedTemplate,
    pub objects: Vec<SelectedObject<T>>,
}

/// Runs the full chain on an eye image with known geometry.
pub fn extract_code<T: Real + FftNum>(
    img: &GrayImage<T>,
    geometry: &IrisGeometry,
    config: &PipelineConfig,
) -> Result<(ShapeCode, ExtractionWarnings)> {
    let (code, _, warnings) = run_pipeline(img, geometry, config)?;
    Ok((code, warnings))
}

/// Same as [`extract_code`] but keeps the intermediate stages.
pub fn extract_code_with_stages<T: Real + FftNum>(
    img: &GrayImage<T>,
    geometry: &IrisGeometry,
    config: &PipelineConfig,
) -> Result<(ShapeCode, StageArtifacts<T>, ExtractionWarnings)> {
    run_pipeline(img, geometry, config)
}

fn run_pipeline<T: Real + FftNum>(
    img: &GrayImage<T>,
    geometry: &IrisGeometry,
    config: &PipelineConfig,
) -> Result<(ShapeCode, StageArtifacts<T>, ExtractionWarnings)> {
    config.validate()?;
    let mut warnings = ExtractionWarnings {
        estimated_geometry: geometry.estimated,
        ..ExtractionWarnings::default()
    };

    let strip = imaging::unwrap_iris(img, geometry, config.unwrap_rows, config.unwrap_cols)?;
    warnings.unwrap_clipped = strip.clipped();

    let enhanced = enhance::homomorphic_enhance(strip.pixels())?;
    let filtered = enhance::tikhonov_filter(&enhanced, &config.tikhonov_params())?;

    let model = binarize::fit_gaussian(&filtered)?;
    warnings.fit_fallback = model.warning;
    let thresholds = binarize::compute_thresholds(&model);
    warnings.thresholds_clamped = thresholds.warning;

    let sliced = binarize::slice_image(&filtered, &thresholds);
    let (objects, degraded) = binarize::select_objects(&sliced, config.min_area);
    warnings.degraded = degraded;

    let code = ShapeCode::assemble(&objects, config.n_samples, config.bits)?;
    let artifacts =
        StageArtifacts { strip, enhanced, filtered, model, thresholds, sliced, objects };
    Ok((code, artifacts, warnings))
}

/// Loads an image and extracts its code, detecting circles when the
/// geometry is absent. This is the f64 entry point the CLI and harness use.
pub fn enroll_image(
    path: impl AsRef<Path>,
    geometry: Option<&IrisGeometry>,
    config: &PipelineConfig,
) -> Result<(ShapeCode, ExtractionWarnings)> {
    let img: GrayImage<f64> = imaging::load_gray(path)?;
    let geometry = match geometry {
        Some(g) => *g,
        None => imaging::detect_circles(&img)?,
    };
    extract_code(&img, &geometry, config)
}
