//! Visible-light iris recognition from pigment-melanin shape patterns.
//!
//! The pipeline turns an eye image into a fixed-layout biometric template:
//!
//! 1. **imaging** — grayscale ingestion, polar-to-Cartesian unwrapping of the
//!    lower iris half-ring, dataset manifests.
//! 2. **enhance** — homomorphic (log-domain) illumination flattening followed
//!    by a regularized low-pass filter applied in the frequency domain.
//! 3. **binarize** — a Gaussian is fitted to the intensity histogram; five
//!    adaptive thresholds slice the strip into six binary bands; the two
//!    largest objects of each inner band are kept.
//! 4. **shapedesc** — radius-vector, support and tangent-angle signatures of
//!    each object contour, resampled to a fixed length.
//! 5. **shapecode** — signatures quantized to B-bit gray values and packed
//!    into the 24-strip code; binary (de)serialization with checksum.
//! 6. **matching** — product-of-sums Hamming distance, VL+NIR fusion by
//!    strip concatenation, nearest-neighbor classification.
//! 7. **eval** — train/test scenario harness: rank-accuracy (CMC) curves,
//!    genuine/impostor distance distributions, synthetic dataset generator.
//!
//! Image math is generic over the scalar type via [`scalar::Real`] (f32 or
//! f64); the aliases below pin the f64 default used by the CLI and the
//! evaluation harness. Template assembly and matching operate on quantized
//! integer samples and are not scalar-generic.

pub mod binarize;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod matching;
pub mod pipeline;
pub mod scalar;
pub mod shapecode;
pub mod shapedesc;

pub use error::{CodecError, Error, Result};
pub use imaging::{DatasetManifest, Eye, IrisGeometry, ManifestEntry, Session};
pub use matching::{Alignment, GalleryEntry, MatchOptions, MatchScore};
pub use pipeline::PipelineConfig;
pub use shapecode::ShapeCode;

/// Default-precision (f64) aliases for the scalar-generic types.
pub type GrayImage = imaging::GrayImage<f64>;
pub type IrisStrip = imaging::IrisStrip<f64>;
pub type TikhonovParams = enhance::TikhonovParams<f64>;
pub type FilterResponse = enhance::FilterResponse<f64>;
pub type HistogramModel = binarize::HistogramModel<f64>;
pub type ThresholdSet = binarize::ThresholdSet<f64>;
pub type SelectedObject = binarize::SelectedObject<f64>;
pub type Contour = shapedesc::Contour<f64>;
pub type FeatureCurve = shapedesc::FeatureCurve<f64>;
