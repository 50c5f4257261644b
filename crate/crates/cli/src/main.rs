//! `cgmy-xva`: runs the exposure and XVA experiments from a JSON config or a
//! named preset.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cgmy_xva::experiment::{
    bench_csv, bench_ratios, convergence_csv, run_bench, run_convergence, run_experiment,
    run_sweep, sweep_csv, write_atomic, EngineChoice, ExperimentConfig, SweepParam, PRESET_NAMES,
};
use cgmy_xva::fpde::TerminalData;
use cgmy_xva::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cgmy-xva", version, about = "Bermudan option exposures and XVA under the CGMY model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths, price with the selected engines and write profiles,
    /// XVA reports and a manifest.
    Run(RunArgs),
    /// Time the engines for several path counts.
    Bench(BenchArgs),
    /// Empirical convergence order of the fractional PDE solver.
    Convergence(ConvergenceArgs),
    /// EE curves while one model parameter varies.
    Sweep(SweepArgs),
    /// Named presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Print the preset names, or one preset's config as JSON.
    List {
        /// Print this preset's full config.
        name: Option<String>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Named preset (see `presets list`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// fpde, cos or both.
    #[arg(long, value_name = "ENGINE")]
    engine: Option<String>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Number of simulated paths.
    #[arg(long, value_name = "N")]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the simulated paths.
    #[arg(long)]
    emit_paths: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated path counts.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,5000,10000")]
    counts: Vec<usize>,
    /// Threads for the timed work; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of refinement levels, at least 3.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Use a smooth bump as terminal data instead of the payoff.
    #[arg(long)]
    smooth: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// C, G, M or Y.
    #[arg(long)]
    param: String,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_config_error() {
            2
        } else if e.is_numerical() {
            3
        } else {
            1
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(e: Error) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path).map_err(config_failure)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => unreachable!("clap requires --config or --preset"),
        };
        if let Some(e) = &self.engine {
            cfg.engine = e.parse::<EngineChoice>()?;
        }
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        if let Some(n) = self.paths {
            cfg.sim.n_paths = n;
        }
        if let Some(out) = &self.out {
            cfg.outputs = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    write_atomic(&path, bytes)?;
    Ok(path)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = args.config.resolve()?;
    cfg.emit_paths |= args.emit_paths;
    let (manifest, result) = run_experiment(&cfg)?;
    for (e, run) in manifest.engines.iter().zip(&result.runs) {
        let r = &run.report;
        println!(
            "{:<4} V0 {:.6}  CVA {:.4}%  FVA {:.4}%  XVA {:.4}%  exercised {:.4}  clamped {}",
            e.engine.to_string(),
            e.t0_value,
            r.cva_pct,
            r.fva_pct,
            r.xva_pct,
            e.exercised_fraction,
            e.clamped_lookups
        );
    }
    println!("wrote {}", cfg.outputs.display());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let cfg = args.config.resolve()?;
    let rows = run_bench(&cfg, &args.counts, args.threads)?;
    for r in &rows {
        println!("{:<4} {:>7} paths  {:.3}s  XVA {:.4}%", r.engine.to_string(), r.n_paths, r.seconds, r.xva_pct);
    }
    for (engine, ratio) in bench_ratios(&rows) {
        println!("{engine} time ratio largest/smallest: {ratio:.2}");
    }
    let path = write(&cfg.outputs, "bench.csv", &bench_csv(&rows)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn convergence(args: ConvergenceArgs) -> Result<(), Failure> {
    let cfg = args.config.resolve()?;
    let data = if args.smooth {
        TerminalData::SmoothBump {
            center: cfg.market.spot.ln(),
            width: 1.0,
        }
    } else {
        TerminalData::Payoff
    };
    let rows = run_convergence(&cfg, args.levels, data)?;
    for r in &rows {
        let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
        println!("N_x {:>6}  h {:.3e}  error {:.3e}  order {order}", r.grid_n, r.h, r.error);
    }
    let path = write(&cfg.outputs, "convergence.csv", &convergence_csv(&rows)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let cfg = args.config.resolve()?;
    let param: SweepParam = args.param.parse()?;
    let result = run_sweep(&cfg, param, &args.values)?;
    for (v, curve) in &result.curves {
        let peak = curve.iter().cloned().fold(f64::MIN, f64::max);
        println!("{}={v}: EE(t0) {:.6}  peak EE {:.6}", param.name(), curve[0], peak);
    }
    let name = format!("sweep_{}.csv", param.name());
    let path = write(&cfg.outputs, &name, &sweep_csv(&result)?)?;
    println!("wrote {} ({} engine)", path.display(), result.engine);
    Ok(())
}

fn presets(action: PresetAction) -> Result<(), Failure> {
    match action {
        PresetAction::List { name: None } => {
            for name in PRESET_NAMES {
                let c = ExperimentConfig::preset(name)?;
                println!(
                    "{name}  K={} T={} M={} C={}",
                    c.contract.strike, c.contract.expiry, c.contract.num_exercises, c.model.c
                );
            }
        }
        PresetAction::List { name: Some(name) } => {
            let cfg = ExperimentConfig::preset(&name)?;
            println!("{}", serde_json::to_string_pretty(&cfg).map_err(Error::from)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Convergence(a) => convergence(a),
        Command::Sweep(a) => sweep(a),
        Command::Presets { action } => presets(action),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
