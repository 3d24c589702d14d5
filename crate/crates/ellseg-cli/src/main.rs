use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ellseg_cli::config::Overrides;
use ellseg_cli::{commands, CliError};

/// Variational image segmentation with an elliptical shape prior.
#[derive(Parser)]
#[command(name = "ellseg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image (PNG/PGM/PPM) or a raw feature raster (.raw/.f32
    /// with a JSON sidecar), forcing one class to an elliptical shape.
    ///
    /// Emits mask.png, overlay.png, trace.csv, ellipse.json, and
    /// manifest.json into the output directory.
    Segment {
        /// Input image or feature raster.
        input: PathBuf,
        /// JSON config; keys mirror the flags below, flags win.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the artifacts.
        #[arg(long, default_value = "ellseg-out")]
        output: PathBuf,
        /// Regularization weight.
        #[arg(long)]
        lambda: Option<f64>,
        /// Entropy weight (softmax temperature).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Dual ascent step size.
        #[arg(long)]
        tau_q: Option<f64>,
        /// Sweep limit.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Convergence threshold on the RMS change of the segmentation.
        #[arg(long)]
        tol: Option<f64>,
        /// Gaussian kernel radius in pixels (support is 2r+1 squared).
        #[arg(long)]
        kernel_radius: Option<usize>,
        /// Gaussian kernel standard deviation in pixels.
        #[arg(long)]
        kernel_sigma: Option<f64>,
        /// Index of the class constrained to an ellipse. Classes from an
        /// image are ordered by increasing mean intensity.
        #[arg(long)]
        ellipse_class: Option<usize>,
        /// Fixed-depth unrolled mode: run exactly this many sweeps with no
        /// convergence test.
        #[arg(long)]
        layers: Option<usize>,
        /// Seed for the K-means mean estimation.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of classes when estimating features from an image.
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Fit an ellipse to a binary mask image by moments; prints JSON.
    FitEllipse {
        /// 0/255 mask image.
        mask: PathBuf,
        /// Also write the JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare a predicted mask with a reference mask; prints
    /// {dice, bd, bdsd}. Dice counts two empty masks as a perfect match.
    Eval {
        /// Predicted mask image.
        pred: PathBuf,
        /// Reference mask image.
        gt: PathBuf,
        /// Also write the JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the tangent field of an ellipse over a grid and dump it as
    /// a two-plane little-endian f32 raster with a JSON sidecar.
    TangentField {
        /// Ellipse JSON ({x0, y0, a, b, theta}).
        ellipse: PathBuf,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        /// Raster output path; the sidecar lands next to it.
        #[arg(long)]
        output: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Segment {
            input,
            config,
            output,
            lambda,
            epsilon,
            tau_q,
            max_iters,
            tol,
            kernel_radius,
            kernel_sigma,
            ellipse_class,
            layers,
            seed,
            classes,
        } => {
            let overrides = Overrides {
                lambda,
                epsilon,
                tau_q,
                max_iters,
                tol,
                kernel_radius,
                kernel_sigma,
                ellipse_class,
                layers,
                seed,
                classes,
            };
            commands::segment(&input, config.as_deref(), &output, &overrides)
        }
        Command::FitEllipse { mask, output } => commands::fit_ellipse(&mask, output.as_deref()),
        Command::Eval { pred, gt, output } => commands::eval(&pred, &gt, output.as_deref()),
        Command::TangentField { ellipse, height, width, output } => {
            commands::tangent_field(&ellipse, height, width, &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
