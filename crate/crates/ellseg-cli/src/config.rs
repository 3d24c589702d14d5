//! Run configuration: JSON file keys mirror the command-line flags, and
//! explicit flags override file values.

use std::path::Path;

use ellseg_core::solver::{KernelSpec, SolverConfig};
use serde::Deserialize;

use crate::error::CliError;

/// On-disk configuration. Every key is optional; omitted keys fall back to
/// the built-in defaults.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau_q: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub kernel_radius: Option<usize>,
    pub kernel_sigma: Option<f64>,
    pub ellipse_class: Option<usize>,
    pub layers: Option<usize>,
    pub seed: Option<u64>,
    pub classes: Option<usize>,
}

/// Flag values captured from the command line; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau_q: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub kernel_radius: Option<usize>,
    pub kernel_sigma: Option<f64>,
    pub ellipse_class: Option<usize>,
    pub layers: Option<usize>,
    pub seed: Option<u64>,
    pub classes: Option<usize>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub solver: SolverConfig,
    /// Number of classes when features are estimated from an image.
    pub classes: usize,
    /// Seed for the K-means mean estimation.
    pub seed: u64,
    /// Fixed-depth unrolled mode when set.
    pub layers: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Resolves file values and flag overrides into run settings. The solver
/// hyperparameters are validated here so a bad config fails before any
/// artifact is written.
pub fn resolve(file: &ConfigFile, flags: &Overrides) -> Result<RunSettings, CliError> {
    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        lambda: flags.lambda.or(file.lambda).unwrap_or(defaults.lambda),
        epsilon: flags.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        tau_q: flags.tau_q.or(file.tau_q).unwrap_or(defaults.tau_q),
        max_iters: flags.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
        tol: flags.tol.or(file.tol).unwrap_or(defaults.tol),
        kernel: KernelSpec {
            radius: flags
                .kernel_radius
                .or(file.kernel_radius)
                .unwrap_or(defaults.kernel.radius),
            sigma: flags
                .kernel_sigma
                .or(file.kernel_sigma)
                .unwrap_or(defaults.kernel.sigma),
        },
        ellipse_class: flags
            .ellipse_class
            .or(file.ellipse_class)
            .unwrap_or(defaults.ellipse_class),
    };
    solver
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let classes = flags.classes.or(file.classes).unwrap_or(2);
    if classes < 2 {
        return Err(CliError::Config(format!("need at least 2 classes, got {classes}")));
    }
    if solver.ellipse_class >= classes {
        return Err(CliError::Config(format!(
            "ellipse_class {} out of range for {classes} classes",
            solver.ellipse_class
        )));
    }
    let layers = flags.layers.or(file.layers);
    if layers == Some(0) {
        return Err(CliError::Config("layers must be >= 1".into()));
    }
    Ok(RunSettings {
        solver,
        classes,
        seed: flags.seed.or(file.seed).unwrap_or(0),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_reference_hyperparameters() {
        let s = resolve(&ConfigFile::default(), &Overrides::default()).unwrap();
        assert_eq!(s.solver.lambda, 1.0);
        assert_eq!(s.solver.epsilon, 1.0);
        assert_eq!(s.solver.tau_q, 1.0);
        assert_eq!(s.solver.max_iters, 500);
        assert_eq!(s.solver.tol, 3e-5);
        assert_eq!((s.solver.kernel.radius, s.solver.kernel.sigma), (2, 5.0));
        assert_eq!(s.classes, 2);
        assert_eq!(s.layers, None);
    }

    #[test]
    fn flags_override_file_values() {
        let file = ConfigFile {
            lambda: Some(2.0),
            max_iters: Some(10),
            ..ConfigFile::default()
        };
        let flags = Overrides {
            lambda: Some(3.5),
            ..Overrides::default()
        };
        let s = resolve(&file, &flags).unwrap();
        assert_eq!(s.solver.lambda, 3.5);
        assert_eq!(s.solver.max_iters, 10);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let file = ConfigFile {
            epsilon: Some(0.0),
            ..ConfigFile::default()
        };
        assert!(matches!(
            resolve(&file, &Overrides::default()),
            Err(CliError::Config(_))
        ));
        let file = ConfigFile {
            ellipse_class: Some(2),
            ..ConfigFile::default()
        };
        assert!(matches!(
            resolve(&file, &Overrides::default()),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ConfigFile>(r#"{"lambda": 1.0, "lamda": 2.0}"#);
        assert!(err.is_err());
    }
}
