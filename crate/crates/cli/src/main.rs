//! Command-line frontend: enroll, match, evaluate, inspect, synth.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 partial failure
//! (more than 10% of enrollments skipped).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use melaniris::eval::{self, Scenario, SynthParams};
use melaniris::imaging::{self, DatasetManifest, IrisGeometry, Session};
use melaniris::matching::{classify_nn, Alignment, GalleryEntry, MatchOptions};
use melaniris::pipeline::{self, PipelineConfig};
use melaniris::shapecode::ShapeCode;
use melaniris::{Error, Eye};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "melaniris", version, about = "Visible-light iris recognition pipeline")]
struct Cli {
    /// JSON pipeline configuration; flags override file values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed echoed into all outputs and used wherever randomness appears.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignArg {
    Off,
    Shift,
}

impl From<AlignArg> for Alignment {
    fn from(value: AlignArg) -> Self {
        match value {
            AlignArg::Off => Alignment::Off,
            AlignArg::Shift => Alignment::ShiftSearch,
        }
    }
}

#[derive(Args)]
struct GeometryArgs {
    /// Shared circle center, x.
    #[arg(long)]
    cx: Option<f64>,
    /// Shared circle center, y.
    #[arg(long)]
    cy: Option<f64>,
    #[arg(long)]
    r_pupil: Option<f64>,
    #[arg(long)]
    r_iris: Option<f64>,
    /// Angular span in degrees, e.g. --span 180 360.
    #[arg(long, num_args = 2, value_names = ["START", "END"])]
    span: Option<Vec<f64>>,
}

impl GeometryArgs {
    fn build(&self) -> Result<Option<IrisGeometry>, CliError> {
        match (self.cx, self.cy, self.r_pupil, self.r_iris) {
            (None, None, None, None) => Ok(None),
            (Some(cx), Some(cy), Some(r_pupil), Some(r_iris)) => {
                let mut geometry = IrisGeometry::new(cx, cy, r_pupil, r_iris);
                if let Some(span) = &self.span {
                    geometry.span_deg = [span[0], span[1]];
                }
                geometry.validate().map_err(CliError::data)?;
                Ok(Some(geometry))
            }
            _ => Err(CliError::usage(
                "geometry flags --cx --cy --r-pupil --r-iris must be given together",
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract a shape code for every manifest entry into --out.
    Enroll {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
    },
    /// Rank a probe code against a directory of enrolled codes.
    Match {
        #[arg(long, value_name = "PATH")]
        probe: PathBuf,
        #[arg(long, value_name = "DIR")]
        gallery: PathBuf,
        #[arg(long, value_enum)]
        align: Option<AlignArg>,
    },
    /// Run a train/test scenario and write CSV + JSON reports into --out.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_session)]
        session: Session,
        #[arg(long, default_value_t = 4)]
        k_train: usize,
        /// Images per class; inferred as the smallest class size when absent.
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, value_enum)]
        align: Option<AlignArg>,
        /// Skip templates flagged degraded at extraction time.
        #[arg(long)]
        exclude_degraded: bool,
    },
    /// Dump every pipeline stage of one image into --out.
    Inspect {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
        #[command(flatten)]
        geometry: GeometryArgs,
    },
    /// Generate a synthetic two-session dataset into --out.
    Synth {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 5)]
        images: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
}

fn parse_session(s: &str) -> Result<Session, String> {
    s.parse::<Session>().map_err(|e| e.to_string())
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn data(error: impl std::fmt::Display) -> Self {
        Self { code: EXIT_DATA, message: error.to_string() }
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        CliError::data(error)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprintln!("{err}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(threads) = cli.threads {
        // a failure here only means a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn require_out(cli: &Cli) -> Result<&Path, CliError> {
    cli.out.as_deref().ok_or_else(|| CliError::usage("this command requires --out DIR"))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let mut config = load_config(&cli)?;
    match &cli.command {
        Command::Enroll { manifest } => {
            let out = require_out(&cli)?;
            cmd_enroll(manifest, out, &config)
        }
        Command::Match { probe, gallery, align } => {
            if let Some(align) = align {
                config.align = (*align).into();
            }
            cmd_match(probe, gallery, &config)
        }
        Command::Evaluate {
            manifest,
            session,
            k_train,
            n_per_class,
            reps,
            align,
            exclude_degraded,
        } => {
            if let Some(align) = align {
                config.align = (*align).into();
            }
            let out = require_out(&cli)?;
            cmd_evaluate(
                manifest,
                out,
                &config,
                *session,
                *k_train,
                *n_per_class,
                *reps,
                *exclude_degraded,
            )
        }
        Command::Inspect { image, geometry } => {
            let out = require_out(&cli)?;
            cmd_inspect(image, geometry.build()?, out, &config)
        }
        Command::Synth { classes, images, noise } => {
            let out = require_out(&cli)?;
            let params = SynthParams {
                classes: *classes,
                images_per_class: *images,
                noise_sigma: *noise,
                seed: config.seed,
            };
            eval::synth_dataset(&params, out)?;
            println!(
                "wrote {} images and manifest.json to {} (seed {})",
                classes * images * 2,
                out.display(),
                config.seed
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[derive(serde::Serialize)]
struct EnrollLogEntry {
    source: String,
    output: Option<String>,
    ok: bool,
    warnings: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(serde::Serialize)]
struct EnrollLog<'a> {
    config: &'a PipelineConfig,
    seed: u64,
    total: usize,
    failed: usize,
    entries: Vec<EnrollLogEntry>,
}

fn cmd_enroll(
    manifest_path: &Path,
    out: &Path,
    config: &PipelineConfig,
) -> Result<ExitCode, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    if manifest.is_empty() {
        return Err(CliError::data("no entries in manifest"));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;

    // per-(subject, eye, session) running index, in manifest order
    let mut counters: std::collections::BTreeMap<String, usize> =
        std::collections::BTreeMap::new();
    let names: Vec<String> = manifest
        .entries
        .iter()
        .map(|e| {
            let key = format!("{}_{}_{}", e.subject_id, e.eye, e.session);
            let idx = counters.entry(key.clone()).or_insert(0);
            let name = format!("{key}_{idx}.shpc");
            *idx += 1;
            name
        })
        .collect();

    let results: Vec<EnrollLogEntry> = manifest
        .entries
        .par_iter()
        .zip(&names)
        .map(|(entry, name)| {
            let source = entry.resolved_path(base);
            match pipeline::enroll_image(&source, entry.geometry.as_ref(), config) {
                Ok((code, warnings)) => {
                    let path = out.join(name);
                    match eval::write_atomic(&path, &code.serialize()) {
                        Ok(()) => EnrollLogEntry {
                            source: source.display().to_string(),
                            output: Some(name.clone()),
                            ok: true,
                            warnings: warnings.labels(),
                            error: None,
                        },
                        Err(e) => EnrollLogEntry {
                            source: source.display().to_string(),
                            output: None,
                            ok: false,
                            warnings: warnings.labels(),
                            error: Some(e.to_string()),
                        },
                    }
                }
                Err(e) => EnrollLogEntry {
                    source: source.display().to_string(),
                    output: None,
                    ok: false,
                    warnings: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let failed = results.iter().filter(|r| !r.ok).count();
    for r in results.iter().filter(|r| !r.ok) {
        eprintln!("skipped {}: {}", r.source, r.error.as_deref().unwrap_or("unknown"));
    }
    let log =
        EnrollLog { config, seed: config.seed, total: results.len(), failed, entries: results };
    let log_json = serde_json::to_string_pretty(&log).expect("log serializes");
    eval::write_atomic(&out.join("enroll_log.json"), log_json.as_bytes())?;
    println!("enrolled {}/{} images into {}", log.total - failed, log.total, out.display());

    if failed * 10 > log.total {
        Ok(ExitCode::from(EXIT_PARTIAL))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn read_code(path: &Path) -> Result<ShapeCode, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    ShapeCode::deserialize(&bytes)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Splits `{subject}_{eye}_{session}_{index}` from the right so subject ids
/// may themselves contain underscores.
fn gallery_entry_from_name(stem: &str, code: ShapeCode) -> GalleryEntry {
    let parts: Vec<&str> = stem.rsplitn(4, '_').collect();
    let (subject_id, eye, session) = if parts.len() == 4 {
        let eye = match parts[2] {
            "L" => Eye::Left,
            "R" => Eye::Right,
            _ => Eye::Left,
        };
        let session = parts[1].parse().unwrap_or(Session::Vl);
        (parts[3].to_string(), eye, session)
    } else {
        (stem.to_string(), Eye::Left, Session::Vl)
    };
    GalleryEntry { subject_id, eye, session, code }
}

fn cmd_match(
    probe_path: &Path,
    gallery_dir: &Path,
    config: &PipelineConfig,
) -> Result<ExitCode, CliError> {
    let probe = read_code(probe_path)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(gallery_dir)
        .map_err(|e| CliError::data(format!("{}: {e}", gallery_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "shpc"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!("no .shpc files in {}", gallery_dir.display())));
    }
    let mut gallery = Vec::with_capacity(paths.len());
    for path in &paths {
        let code = read_code(path)?;
        if code.strip_count() != probe.strip_count()
            || code.samples_per_strip() != probe.samples_per_strip()
            || code.bits_per_sample() != probe.bits_per_sample()
        {
            return Err(CliError::data(format!(
                "{} has layout {}x{}x{}, probe is {}x{}x{}",
                path.display(),
                code.strip_count(),
                code.samples_per_strip(),
                code.bits_per_sample(),
                probe.strip_count(),
                probe.samples_per_strip(),
                probe.bits_per_sample()
            )));
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("unknown");
        gallery.push(gallery_entry_from_name(stem, code));
    }

    let options = MatchOptions { align: config.align, epsilon_floor: config.epsilon_floor };
    let ranked = classify_nn(&probe, &gallery, &options)?;
    let mut table = String::from("rank\tsubject\thd\tshift\n");
    for (rank, (subject, score)) in ranked.iter().enumerate() {
        writeln!(table, "{}\t{}\t{:.6}\t{}", rank + 1, subject, score.hd, score.shift)
            .expect("string write");
    }
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    manifest_path: &Path,
    out: &Path,
    config: &PipelineConfig,
    session: Session,
    k_train: usize,
    n_per_class: Option<usize>,
    reps: usize,
    exclude_degraded: bool,
) -> Result<ExitCode, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let n_per_class = match n_per_class {
        Some(n) => n,
        None => {
            let sessions: &[Session] = match session {
                Session::Fused => &[Session::Vl, Session::Nir],
                Session::Vl => &[Session::Vl],
                Session::Nir => &[Session::Nir],
            };
            sessions
                .iter()
                .flat_map(|s| manifest.by_class(*s).into_values())
                .map(|ids| ids.len())
                .min()
                .ok_or_else(|| CliError::data("manifest has no entries for the session"))?
        }
    };

    let scenario = Scenario {
        k_train,
        n_per_class,
        repetitions: reps,
        seed: config.seed,
        exclude_degraded,
    };
    let report = eval::run_scenario(&manifest, base, session, &scenario, config)?;
    let (csv_path, json_path) = eval::write_report(&report, out)?;
    println!(
        "{} classes, rank-1 accuracy {:.4} +- {:.4}, decidability {:.3}",
        report.class_count,
        report.rank_accuracy[0].mean,
        report.rank_accuracy[0].std,
        report.decidability
    );
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(
    image_path: &Path,
    geometry: Option<IrisGeometry>,
    out: &Path,
    config: &PipelineConfig,
) -> Result<ExitCode, CliError> {
    let img: imaging::GrayImage<f64> = imaging::load_gray(image_path)?;
    let geometry = match geometry {
        Some(g) => g,
        None => imaging::detect_circles(&img)?,
    };
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;

    let (code, stages, warnings) = pipeline::extract_code_with_stages(&img, &geometry, config)?;

    imaging::save_pgm(stages.strip.pixels(), out.join("unwrapped.pgm"))?;
    imaging::save_pgm(&stages.enhanced, out.join("enhanced.pgm"))?;
    imaging::save_pgm(&stages.filtered, out.join("filtered.pgm"))?;
    for (i, mask) in stages.sliced.bands().iter().enumerate() {
        imaging::save_pgm(&mask.to_gray::<f64>(), out.join(format!("band_{}.pgm", i + 1)))?;
    }

    // selected contours in white over the dimmed strip
    let mut overlay: Vec<f64> = stages.filtered.pixels().iter().map(|v| v * 0.5).collect();
    let w = stages.filtered.width();
    for object in &stages.objects {
        for p in object.contour.points() {
            let (x, y) = (p[0].round() as usize, p[1].round() as usize);
            if x < w && y < stages.filtered.height() {
                overlay[y * w + x] = 1.0;
            }
        }
    }
    let overlay = imaging::GrayImage::from_vec(w, stages.filtered.height(), overlay)
        .expect("overlay values are clamped");
    imaging::save_pgm(&overlay, out.join("contours.pgm"))?;

    let mut curves = String::from("strip,label");
    for i in 0..code.samples_per_strip() {
        write!(curves, ",s{i}").expect("string write");
    }
    curves.push('\n');
    let labels = code.layout();
    for (i, label) in labels.iter().enumerate() {
        write!(curves, "{i},{label}").expect("string write");
        for &v in code.strip(i) {
            write!(curves, ",{v}").expect("string write");
        }
        curves.push('\n');
    }
    eval::write_atomic(&out.join("curves.csv"), curves.as_bytes())?;

    let summary = serde_json::json!({
        "geometry": geometry,
        "histogram_fit": {
            "amp": stages.model.amp,
            "mean": stages.model.mean,
            "sigma": stages.model.sigma,
            "converged": stages.model.converged,
        },
        "thresholds": stages.thresholds.values(),
        "objects": stages.objects.iter().map(|o| serde_json::json!({
            "template": o.template_index,
            "rank": o.rank,
            "area": o.area,
            "placeholder": o.placeholder,
        })).collect::<Vec<_>>(),
        "warnings": warnings.labels(),
        "code_bits": code.bits(),
        "degraded": code.degraded(),
    });
    eval::write_atomic(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
    )?;
    eval::write_atomic(&out.join("code.shpc"), &code.serialize())?;

    println!("wrote stage dumps to {}", out.display());
    Ok(ExitCode::SUCCESS)
}
