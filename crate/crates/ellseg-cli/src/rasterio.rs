//! Raw float rasters with JSON sidecars: the injection path for externally
//! computed features and the dump format for tangent fields.
//!
//! A raster file holds little-endian 32-bit floats, plane after plane in
//! class (or component) order, row-major within each plane. The sidecar
//! lives next to the raster with its extension replaced by `.json`.

use std::path::{Path, PathBuf};

use ellseg_core::grid::{ScalarField, VectorField2};
use ellseg_core::similarity::FeatureStack;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TangentMeta {
    pub planes: usize,
    pub height: usize,
    pub width: usize,
}

pub fn sidecar_path(raster: &Path) -> PathBuf {
    raster.with_extension("json")
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Unreadable {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

fn planes_to_bytes<'a>(planes: impl Iterator<Item = &'a [f64]>) -> Vec<u8> {
    let mut bytes = Vec::new();
    for plane in planes {
        for &v in plane {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    bytes
}

fn bytes_to_plane(bytes: &[u8], height: usize, width: usize) -> ScalarField {
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    ScalarField::new(height, width, values).expect("length checked by caller")
}

/// Writes a feature stack as raw planes plus its `{classes, height, width}`
/// sidecar.
pub fn save_features(stack: &FeatureStack, path: &Path) -> Result<(), CliError> {
    let bytes = planes_to_bytes(stack.fields().iter().map(|f| f.as_slice()));
    write_bytes(path, &bytes)?;
    let meta = FeatureMeta {
        classes: stack.classes(),
        height: stack.height(),
        width: stack.width(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write_bytes(&sidecar_path(path), json.as_bytes())
}

/// Loads a feature stack written by [`save_features`] (or any producer that
/// follows the same layout).
pub fn load_features(path: &Path) -> Result<FeatureStack, CliError> {
    let sidecar = sidecar_path(path);
    let meta_text =
        std::fs::read_to_string(&sidecar).map_err(|source| CliError::Unreadable {
            path: sidecar.clone(),
            source,
        })?;
    let meta: FeatureMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", sidecar.display())))?;
    let bytes = read_bytes(path)?;
    let expected = meta.classes * meta.height * meta.width * 4;
    if bytes.len() != expected {
        return Err(CliError::Config(format!(
            "{}: raster holds {} bytes, sidecar promises {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let plane_bytes = meta.height * meta.width * 4;
    let fields = (0..meta.classes)
        .map(|i| bytes_to_plane(&bytes[i * plane_bytes..(i + 1) * plane_bytes], meta.height, meta.width))
        .collect();
    FeatureStack::new(fields).map_err(|e| CliError::Config(e.to_string()))
}

/// Dumps a vector field as two planes (x then y) plus its sidecar.
pub fn save_tangent(field: &VectorField2, path: &Path) -> Result<(), CliError> {
    let bytes = planes_to_bytes([field.x_plane(), field.y_plane()].into_iter());
    write_bytes(path, &bytes)?;
    let meta = TangentMeta {
        planes: 2,
        height: field.height(),
        width: field.width(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write_bytes(&sidecar_path(path), json.as_bytes())
}

/// Reads back a two-plane dump written by [`save_tangent`].
pub fn load_tangent(path: &Path) -> Result<VectorField2, CliError> {
    let sidecar = sidecar_path(path);
    let meta_text =
        std::fs::read_to_string(&sidecar).map_err(|source| CliError::Unreadable {
            path: sidecar.clone(),
            source,
        })?;
    let meta: TangentMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", sidecar.display())))?;
    let bytes = read_bytes(path)?;
    let expected = 2 * meta.height * meta.width * 4;
    if bytes.len() != expected || meta.planes != 2 {
        return Err(CliError::Config(format!(
            "{}: not a two-plane raster of {}x{}",
            path.display(),
            meta.height,
            meta.width
        )));
    }
    let plane_bytes = meta.height * meta.width * 4;
    let x = bytes_to_plane(&bytes[..plane_bytes], meta.height, meta.width);
    let y = bytes_to_plane(&bytes[plane_bytes..], meta.height, meta.width);
    VectorField2::from_components(x, y).map_err(|e| CliError::Config(e.to_string()))
}
