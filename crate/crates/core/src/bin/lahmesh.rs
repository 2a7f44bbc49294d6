use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lahmesh::config::{CycleConfig, Method, ModelConfig, Variant};
use lahmesh::experiments::{cmd_compare, cmd_mesh_demo, cmd_run_twin, CompareAxis};

#[derive(Parser)]
#[command(name = "lahmesh", version, about = "Look-ahead adaptive meshes for ensemble data assimilation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(clap::Args)]
struct Opts {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    method: Option<MethodArg>,
    #[arg(long, global = true)]
    variant: Option<VariantArg>,
    /// Constant second viscosity in the coupled KSE system.
    #[arg(long, global = true)]
    mu2_literal: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one twin experiment.
    RunTwin,
    /// Run matched experiments along one axis.
    Compare {
        #[arg(long, value_enum)]
        axis: AxisArg,
    },
    /// Travelling-wave meshes at several times and their combination.
    MeshDemo {
        #[arg(long, value_delimiter = ',', default_value = "0,20,40")]
        times: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Flow,
    Nonflow,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Flow,
    Mesh,
    Coupling,
    Nse,
}

fn load(opts: &Opts) -> Result<CycleConfig, String> {
    let mut cfg = match &opts.config {
        Some(p) => CycleConfig::load(p).map_err(|e| e.to_string())?,
        None => CycleConfig::default(),
    };
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(m) = opts.method {
        cfg.method = match m {
            MethodArg::A => Method::A,
            MethodArg::B => Method::B,
        };
    }
    if let Some(v) = opts.variant {
        cfg.variant = match v {
            VariantArg::Flow => Variant::Flow,
            VariantArg::Nonflow => Variant::Nonflow,
        };
    }
    if opts.mu2_literal {
        match &mut cfg.model {
            ModelConfig::Kse(k) => k.mu2_literal = true,
            ModelConfig::Nagumo(_) => return Err("--mu2-literal only applies to the kse model".into()),
        }
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), String> {
    let cfg = load(&cli.opts)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.opts.threads)
        .build_global()
        .map_err(|e| e.to_string())?;
    let out = &cli.opts.out;
    match cli.command {
        Command::RunTwin => {
            let s = cmd_run_twin(&cfg, out).map_err(|e| e.to_string())?;
            println!("{s}");
        }
        Command::Compare { axis } => {
            let axis = match axis {
                AxisArg::Flow => CompareAxis::Flow,
                AxisArg::Mesh => CompareAxis::Mesh,
                AxisArg::Coupling => CompareAxis::Coupling,
                AxisArg::Nse => CompareAxis::Nse,
            };
            for (label, s) in cmd_compare(&cfg, axis, out).map_err(|e| e.to_string())? {
                println!("[{label}]\n{s}\n");
            }
        }
        Command::MeshDemo { times } => {
            let demo = cmd_mesh_demo(&cfg, &times, out).map_err(|e| e.to_string())?;
            for (t, m) in demo.times.iter().zip(&demo.snapshot_meshes) {
                println!("t = {t}: min width {:.4e}", m.min_width());
            }
            println!("combined: min width {:.4e}", demo.combined_mesh.min_width());
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
