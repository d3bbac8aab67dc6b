//! `penet`: enhance images, dump pyramid components, manage weights, run
//! gradient checks and the training demo.
//!
//! Exit codes: 0 on success, 1 when a check fails (gradcheck above
//! tolerance, training demo below the required improvement), 2 on usage,
//! file or format errors.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use penet_core::gradcheck::GRADCHECK_TOL;
use penet_core::image::{from_tensor, to_tensor, ImageBuffer};
use penet_core::model::{full_model_grad_check, penet_forward, train_demo};
use penet_core::pyramid::decompose;
use penet_core::tensor::Tensor;
use penet_core::weights::{init_params, load, save, InitScheme};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "penet", version, about = "Laplacian-pyramid image enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance a PPM image with a trained weight file.
    Enhance {
        /// Weight file produced by `penet init` or `penet train-demo`.
        #[arg(long)]
        weights: PathBuf,
        /// Input image (binary PPM, P6).
        #[arg(long)]
        input: PathBuf,
        /// Output image path.
        #[arg(long)]
        output: PathBuf,
        /// Print input/output mean brightness.
        #[arg(long)]
        verbose: bool,
    },
    /// Decompose an image and write its pyramid components as images.
    Pyramid {
        /// Input image (binary PPM, P6).
        #[arg(long)]
        input: PathBuf,
        /// Directory for L1.ppm, L2.ppm, L3.ppm and base.ppm.
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Write a freshly initialized weight file.
    Init {
        /// Seed for the deterministic initializer.
        #[arg(long)]
        seed: u64,
        /// Output weight file path.
        #[arg(long)]
        out: PathBuf,
        /// All-zero weights instead of random initialization.
        #[arg(long)]
        zero: bool,
    },
    /// Verify the full-model analytic gradient against finite differences.
    Gradcheck {
        /// Seed for parameters and probe input.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train on the synthetic brightening task and report the loss curve.
    TrainDemo {
        /// Number of SGD updates.
        #[arg(long)]
        steps: usize,
        /// Learning rate.
        #[arg(long)]
        lr: f64,
        /// Seed for initialization and data generation.
        #[arg(long)]
        seed: u64,
        /// Also write the loss history as CSV (with a header row).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn fail(err: impl Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_ERROR)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Enhance {
            weights,
            input,
            output,
            verbose,
        } => cmd_enhance(&weights, &input, &output, verbose),
        Command::Pyramid { input, outdir } => cmd_pyramid(&input, &outdir),
        Command::Init { seed, out, zero } => cmd_init(seed, &out, zero),
        Command::Gradcheck { seed } => cmd_gradcheck(seed),
        Command::TrainDemo {
            steps,
            lr,
            seed,
            csv,
        } => cmd_train_demo(steps, lr, seed, csv.as_deref()),
    }
}

fn mean_value(t: &Tensor<f32>) -> f64 {
    t.data().iter().map(|&v| v as f64).sum::<f64>() / t.len() as f64
}

fn cmd_enhance(weights: &Path, input: &Path, output: &Path, verbose: bool) -> ExitCode {
    let params = match load(weights) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let image = match ImageBuffer::read_ppm(input) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    let tensor: Tensor<f32> = to_tensor(&image);
    let enhanced = match penet_forward(&tensor, &params) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let out_image = match from_tensor(&enhanced) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    if let Err(e) = out_image.write_ppm(output) {
        return fail(e);
    }
    if verbose {
        println!(
            "mean_in={:.6} mean_out={:.6}",
            mean_value(&tensor),
            mean_value(&enhanced)
        );
    }
    ExitCode::SUCCESS
}

fn write_component(tensor: &Tensor<f32>, path: &Path) -> Result<(usize, usize), String> {
    let img = from_tensor(tensor).map_err(|e| e.to_string())?;
    img.write_ppm(path).map_err(|e| e.to_string())?;
    Ok((img.width(), img.height()))
}

fn cmd_pyramid(input: &Path, outdir: &Path) -> ExitCode {
    let image = match ImageBuffer::read_ppm(input) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    if let Err(e) = fs::create_dir_all(outdir) {
        return fail(e);
    }
    let tensor: Tensor<f32> = to_tensor(&image);
    let pyr = match decompose(&tensor) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };

    // Difference components are signed; display them around mid-gray.
    let mut outputs: Vec<(String, Tensor<f32>)> = pyr
        .diffs
        .iter()
        .enumerate()
        .map(|(i, diff)| (format!("L{}.ppm", i + 1), diff.map(|v| v + 0.5)))
        .collect();
    outputs.push(("base.ppm".to_string(), pyr.base.clone()));

    for (name, component) in &outputs {
        match write_component(component, &outdir.join(name)) {
            Ok((w, h)) => println!("{name} {w}x{h}"),
            Err(e) => return fail(e),
        }
    }
    ExitCode::SUCCESS
}

fn cmd_init(seed: u64, out: &Path, zero: bool) -> ExitCode {
    let scheme = if zero {
        InitScheme::Zero
    } else {
        InitScheme::Random
    };
    let params = init_params::<f32>(seed, scheme);
    match save(&params, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn cmd_gradcheck(seed: u64) -> ExitCode {
    match full_model_grad_check(seed) {
        Ok((report, worst)) => {
            println!("max_rel_err={:.6e}", report.max_rel_err);
            if report.max_rel_err < GRADCHECK_TOL {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "gradient check failed at {worst}: analytic {:.6e} vs numeric {:.6e}",
                    report.worst_pair.0, report.worst_pair.1
                );
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(e) => fail(e),
    }
}

fn cmd_train_demo(steps: usize, lr: f64, seed: u64, csv: Option<&Path>) -> ExitCode {
    let mut params = init_params::<f32>(seed, InitScheme::Random);
    let losses = match train_demo(&mut params, steps, lr, seed) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    for (step, loss) in losses.iter().enumerate() {
        println!("{step},{loss:.6}");
    }
    if let Some(path) = csv {
        let mut text = String::from("step,loss\n");
        for (step, loss) in losses.iter().enumerate() {
            text.push_str(&format!("{step},{loss:.6}\n"));
        }
        if let Err(e) = fs::write(path, text) {
            return fail(e);
        }
    }
    let improved = losses.len() > 1 && losses[losses.len() - 1] < 0.1 * losses[0];
    if improved {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
