//! Subcommand implementations. Each returns a typed error whose exit code
//! partitions the failure classes; artifacts are written only after the
//! computation has fully succeeded.

use std::path::{Path, PathBuf};

use ellseg_core::ellipse::{fit_ellipse_moments, EllipseError, EllipseParams};
use ellseg_core::grid::ScalarField;
use ellseg_core::metrics::{boundary_distance, dice, BinaryMask, MetricsError};
use ellseg_core::similarity::{kmeans_init, variance_similarity, FeatureStack};
use ellseg_core::solver::{run, run_unrolled, RunResult};
use serde::Serialize;

use crate::config::{resolve, ConfigFile, Overrides, RunSettings};
use crate::error::CliError;
use crate::{imageio, overlay, rasterio, trace};

/// Artifact inventory of a segmentation run, written as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub input: String,
    pub config: Option<String>,
    pub output_dir: String,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    dice: f64,
    bd: f64,
    bdsd: f64,
}

const KMEANS_SWEEPS: usize = 25;

fn is_feature_raster(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some(ext) if ext.eq_ignore_ascii_case("raw") || ext.eq_ignore_ascii_case("f32")
    )
}

fn mask_to_field(mask: &BinaryMask) -> ScalarField {
    ScalarField::from_fn(mask.height(), mask.width(), |r, c| {
        if mask.get(r, c) {
            1.0
        } else {
            0.0
        }
    })
}

/// Features from an intensity image: K-means channel means (ordered by
/// increasing norm, so class indices are stable across runs) feeding the
/// region-variance similarity.
fn features_from_image(
    channels: &[ScalarField],
    settings: &RunSettings,
) -> Result<FeatureStack, CliError> {
    let mut means = kmeans_init(channels, settings.classes, KMEANS_SWEEPS, settings.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    means.sort_by(|a, b| {
        let na: f64 = a.iter().map(|v| v * v).sum();
        let nb: f64 = b.iter().map(|v| v * v).sum();
        na.total_cmp(&nb)
    });
    variance_similarity(channels, &means).map_err(|e| CliError::Config(e.to_string()))
}

/// Segments an image (or an injected feature raster), writing the mask,
/// overlay, trace, ellipse, and manifest into the output directory.
pub fn segment(
    input: &Path,
    config: Option<&Path>,
    output_dir: &Path,
    overrides: &Overrides,
) -> Result<(), CliError> {
    let file = match config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let settings = resolve(&file, overrides)?;

    let (features, canvas_channels) = if is_feature_raster(input) {
        let stack = rasterio::load_features(input)?;
        if let Some(expected) = overrides.classes.or(file.classes) {
            if expected != stack.classes() {
                return Err(CliError::Config(format!(
                    "raster holds {} classes, config asks for {expected}",
                    stack.classes()
                )));
            }
        }
        if settings.solver.ellipse_class >= stack.classes() {
            return Err(CliError::Config(format!(
                "ellipse_class {} out of range for {} raster classes",
                settings.solver.ellipse_class,
                stack.classes()
            )));
        }
        (stack, None)
    } else {
        let channels = imageio::load_channels(input)?;
        let stack = features_from_image(&channels, &settings)?;
        (stack, Some(channels))
    };

    let RunResult { u, ellipse, trace: records } = match settings.layers {
        Some(layers) => run_unrolled(&features, &settings.solver, layers)?,
        None => run(&features, &settings.solver)?,
    };

    std::fs::create_dir_all(output_dir).map_err(|source| CliError::Unwritable {
        path: output_dir.to_path_buf(),
        source,
    })?;
    let mask = BinaryMask::from_threshold(u.class(settings.solver.ellipse_class), 0.5);
    let mask_path = output_dir.join("mask.png");
    imageio::save_mask(&mask, &mask_path)?;

    let mut canvas = match &canvas_channels {
        Some(channels) => imageio::channels_to_rgb(channels),
        None => imageio::channels_to_rgb(&[mask_to_field(&mask)]),
    };
    overlay::draw_ellipse(&mut canvas, &ellipse);
    let overlay_path = output_dir.join("overlay.png");
    imageio::save_rgb(&canvas, &overlay_path)?;

    let trace_path = output_dir.join("trace.csv");
    trace::write_csv(&records, &trace_path)?;

    let ellipse_path = output_dir.join("ellipse.json");
    write_json(&ellipse_path, &ellipse)?;

    let manifest = RunManifest {
        input: input.display().to_string(),
        config: config.map(|p| p.display().to_string()),
        output_dir: output_dir.display().to_string(),
        artifacts: vec![
            "mask.png".into(),
            "overlay.png".into(),
            "trace.csv".into(),
            "ellipse.json".into(),
        ],
    };
    write_json(&output_dir.join("manifest.json"), &manifest)?;

    let last = records.last().expect("at least one sweep");
    println!(
        "segmented {} in {} sweeps (u_change {:.2e}, alignment residual {:.4})",
        input.display(),
        last.iter,
        last.u_change,
        last.ortho_residual
    );
    println!(
        "ellipse: center ({:.2}, {:.2}), axes ({:.2}, {:.2}), angle {:.4} rad",
        ellipse.x0, ellipse.y0, ellipse.a, ellipse.b, ellipse.theta
    );
    println!("artifacts in {}", output_dir.display());
    Ok(())
}

/// Fits an ellipse to a 0/255 mask by moments and prints it as JSON.
pub fn fit_ellipse(mask_path: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let mask = imageio::load_mask(mask_path)?;
    let ellipse = fit_ellipse_moments(&mask_to_field(&mask)).map_err(|e| match e {
        EllipseError::ZeroMass | EllipseError::DegenerateMoments => {
            CliError::EmptyMask(format!("{}: {e}", mask_path.display()))
        }
        other => CliError::BadEllipse(other.to_string()),
    })?;
    let json = serde_json::to_string_pretty(&ellipse).expect("ellipse serializes");
    println!("{json}");
    if let Some(path) = output {
        write_json(path, &ellipse)?;
    }
    Ok(())
}

/// Compares a predicted mask against a reference mask, printing
/// `{dice, bd, bdsd}`. Two empty masks score a Dice of 1 by convention.
pub fn eval(pred_path: &Path, gt_path: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let pred = imageio::load_mask(pred_path)?;
    let gt = imageio::load_mask(gt_path)?;
    let map_err = |e: MetricsError| match e {
        MetricsError::DimensionMismatch => CliError::Dimension(format!(
            "{}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )),
        MetricsError::EmptyBoundary => {
            CliError::EmptyMask("boundary distance needs nonempty masks".into())
        }
        other => CliError::Dimension(other.to_string()),
    };
    let dice_value = dice(&pred, &gt).map_err(map_err)?;
    let stats = boundary_distance(&pred, &gt).map_err(map_err)?;
    let report = MetricsReport {
        dice: dice_value,
        bd: stats.bd,
        bdsd: stats.bdsd,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    if let Some(path) = output {
        write_json(path, &report)?;
    }
    Ok(())
}

/// Evaluates the tangent field of an ellipse (read from JSON) over a grid
/// and dumps it as a two-plane raw raster with a sidecar.
pub fn tangent_field(
    ellipse_path: &Path,
    height: usize,
    width: usize,
    output: &Path,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(ellipse_path).map_err(|source| CliError::Unreadable {
        path: ellipse_path.to_path_buf(),
        source,
    })?;
    let ellipse: EllipseParams = serde_json::from_str(&text)
        .map_err(|e| CliError::BadEllipse(format!("{}: {e}", ellipse_path.display())))?;
    if height == 0 || width == 0 {
        return Err(CliError::BadEllipse(format!(
            "grid {height}x{width} has no pixels"
        )));
    }
    let field = ellipse.tangent_field(height, width);
    rasterio::save_tangent(&field, output)?;
    println!(
        "wrote {}x{width} tangent field to {}",
        height,
        output.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, json.as_bytes()).map_err(|source| CliError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}
