//! End-to-end experiments: simulate paths, build a continuation engine,
//! evaluate exposures, aggregate profiles and compute the adjustments, then
//! write CSV/JSON artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cos::{backward_induction, CosConfig};
use crate::error::{Error, Result};
use crate::exposure::{aggregate, path_exposures, ContinuationEngine, ExposureProfile};
use crate::fpde::{convergence_study_with, solve_bermudan_grid, ConvergenceRow, TerminalData, WsgdConfig};
use crate::model::{CgmyParams, ContractSpec, ExerciseSchedule, MarketSpec, OptionKind, SpreadCurve};
use crate::simulate::{simulate_paths, PathMatrix, SimConfig};
use crate::xva::{xva_report, Engine, XvaReport};

/// PFE levels reported unless the config says otherwise.
pub const DEFAULT_PFE_LEVELS: [f64; 2] = [0.025, 0.975];

pub const PRESET_NAMES: [&str; 4] = ["example1", "example2", "example3", "example4"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Fpde,
    Cos,
    #[default]
    Both,
}

impl EngineChoice {
    pub fn engines(&self) -> Vec<Engine> {
        match self {
            EngineChoice::Fpde => vec![Engine::Fpde],
            EngineChoice::Cos => vec![Engine::Cos],
            EngineChoice::Both => vec![Engine::Fpde, Engine::Cos],
        }
    }
}

impl std::str::FromStr for EngineChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpde" => Ok(EngineChoice::Fpde),
            "cos" => Ok(EngineChoice::Cos),
            "both" => Ok(EngineChoice::Both),
            other => Err(Error::Config(format!(
                "engine must be fpde, cos or both, got {other:?}"
            ))),
        }
    }
}

/// Market inputs with spreads quoted in basis points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(default = "default_spot")]
    pub spot: f64,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_credit_bp")]
    pub credit_bp: f64,
    #[serde(default = "default_funding_bp")]
    pub funding_bp: f64,
    pub recovery_rate: f64,
}

fn default_spot() -> f64 {
    40.0
}
fn default_rate() -> f64 {
    0.05
}
fn default_credit_bp() -> f64 {
    100.0
}
fn default_funding_bp() -> f64 {
    50.0
}
fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}
fn default_pfe_levels() -> Vec<f64> {
    DEFAULT_PFE_LEVELS.to_vec()
}

impl MarketConfig {
    pub fn market_spec(&self) -> Result<MarketSpec> {
        for (field, bp) in [("credit_bp", self.credit_bp), ("funding_bp", self.funding_bp)] {
            if !(bp >= 0.0 && bp.is_finite()) {
                return Err(Error::invalid(field, format!("must be >= 0, got {bp}")));
            }
        }
        let spec = MarketSpec {
            spot: self.spot,
            rate: self.rate,
            credit_spread: SpreadCurve::flat(self.credit_bp * 1e-4),
            funding_spread: SpreadCurve::flat(self.funding_bp * 1e-4),
            recovery_rate: self.recovery_rate,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A complete experiment description, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: CgmyParams,
    pub market: MarketConfig,
    pub contract: ContractSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub fpde: WsgdConfig,
    #[serde(default)]
    pub cos: CosConfig,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default)]
    pub emit_paths: bool,
    #[serde(default = "default_pfe_levels")]
    pub pfe_levels: Vec<f64>,
}

impl ExperimentConfig {
    /// The four reference examples: Bermudan calls with
    /// `(K, T, M, C) = (50, 1, 50, 1), (40, 1, 50, 1), (50, 0.5, 30, 0.5),
    /// (40, 0.5, 30, 0.5)`, `S0 = 40`, `r = 5%`, `G = 25`, `M = 26`,
    /// `Y = 1.5`, recovery 40%, spreads 100bp / 50bp.
    pub fn preset(name: &str) -> Result<Self> {
        let (strike, expiry, num_exercises, c) = match name {
            "example1" => (50.0, 1.0, 50, 1.0),
            "example2" => (40.0, 1.0, 50, 1.0),
            "example3" => (50.0, 0.5, 30, 0.5),
            "example4" => (40.0, 0.5, 30, 0.5),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Ok(ExperimentConfig {
            model: CgmyParams {
                c,
                ..CgmyParams::reference()
            },
            market: MarketConfig {
                spot: default_spot(),
                rate: default_rate(),
                credit_bp: default_credit_bp(),
                funding_bp: default_funding_bp(),
                recovery_rate: 0.4,
            },
            contract: ContractSpec {
                strike,
                expiry,
                num_exercises,
                kind: OptionKind::Call,
            },
            sim: SimConfig::default(),
            fpde: WsgdConfig::default(),
            cos: CosConfig::default(),
            engine: EngineChoice::Both,
            outputs: default_outputs(),
            emit_paths: false,
            pfe_levels: default_pfe_levels(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn market_spec(&self) -> Result<MarketSpec> {
        self.market.market_spec()
    }

    pub fn schedule(&self) -> Result<ExerciseSchedule> {
        self.contract.schedule()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model.jump_scale().is_err() {
            return Err(Error::invalid(
                "Y",
                format!("Γ(-Y) has a pole at Y = {}", self.model.y),
            ));
        }
        let market = self.market_spec()?;
        self.contract.validate()?;
        self.sim.validate()?;
        let engines = self.engine.engines();
        if engines.contains(&Engine::Fpde) {
            self.fpde.validate(&self.model, market.spot)?;
        }
        if engines.contains(&Engine::Cos) {
            self.cos.validate()?;
        }
        if let Some(a) = self.pfe_levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::invalid("pfe_levels", format!("must lie in (0, 1), got {a}")));
        }
        Ok(())
    }
}

/// A continuation engine built for one experiment.
pub type BoxedEngine = Box<dyn ContinuationEngine + Send>;

pub fn build_engine(
    engine: Engine,
    params: &CgmyParams,
    market: &MarketSpec,
    contract: &ContractSpec,
    schedule: &ExerciseSchedule,
    fpde: &WsgdConfig,
    cos: &CosConfig,
) -> Result<BoxedEngine> {
    Ok(match engine {
        Engine::Fpde => Box::new(solve_bermudan_grid(params, market, contract, schedule, fpde)?),
        Engine::Cos => Box::new(backward_induction(params, market, contract, schedule, cos)?),
    })
}

/// Result of one engine on one path set.
#[derive(Debug, Clone)]
pub struct EngineRun {
    pub engine: Engine,
    pub profile: ExposureProfile,
    pub report: XvaReport,
    pub exercised_fraction: f64,
    pub clamped_lookups: usize,
    pub setup_secs: f64,
    pub exposure_secs: f64,
}

impl EngineRun {
    pub fn t0_value(&self) -> f64 {
        self.profile.ee[0]
    }
}

/// Engine setup, pathwise exposures, aggregation and adjustments.
pub fn run_engine(cfg: &ExperimentConfig, engine: Engine, paths: &PathMatrix) -> Result<EngineRun> {
    let market = cfg.market_spec()?;
    let schedule = cfg.schedule()?;
    let start = Instant::now();
    let built = build_engine(
        engine,
        &cfg.model,
        &market,
        &cfg.contract,
        &schedule,
        &cfg.fpde,
        &cfg.cos,
    )?;
    let setup_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let em = path_exposures(paths, built.as_ref(), &cfg.contract, &schedule)?;
    let profile = aggregate(&em, &market, paths.dates(), &cfg.pfe_levels)?;
    let report = xva_report(&profile, &market, &schedule, engine, paths.seed())?
        .with_strike_basis(cfg.contract.strike);
    let exposure_secs = start.elapsed().as_secs_f64();
    Ok(EngineRun {
        engine,
        exercised_fraction: em.exercised_fraction(),
        clamped_lookups: em.clamped,
        profile,
        report,
        setup_secs,
        exposure_secs,
    })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<PathMatrix> {
    simulate_paths(&cfg.model, &cfg.market_spec()?, &cfg.schedule()?, &cfg.sim)
}

/// In-memory result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub paths: PathMatrix,
    pub runs: Vec<EngineRun>,
    pub simulation_secs: f64,
}

impl PipelineResult {
    pub fn run(&self, engine: Engine) -> Option<&EngineRun> {
        self.runs.iter().find(|r| r.engine == engine)
    }
}

pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let start = Instant::now();
    let paths = simulate(cfg)?;
    let simulation_secs = start.elapsed().as_secs_f64();
    let runs = cfg
        .engine
        .engines()
        .into_iter()
        .map(|e| run_engine(cfg, e, &paths))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineResult {
        paths,
        runs,
        simulation_secs,
    })
}

/// Per-engine entry of the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct EngineSummary {
    pub engine: Engine,
    pub t0_value: f64,
    pub exercised_fraction: f64,
    pub clamped_lookups: usize,
    pub setup_secs: f64,
    pub exposure_secs: f64,
    pub exposure_csv: String,
    pub xva_json: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub n_paths: usize,
    pub simulation_secs: f64,
    pub paths_csv: Option<String>,
    pub engines: Vec<EngineSummary>,
    pub config: ExperimentConfig,
}

/// Writes `bytes` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv: {}", e.error())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn profile_csv(profile: &ExposureProfile) -> Result<Vec<u8>> {
    let mut header: Vec<String> = ["t", "ee", "ee_star", "epe", "ene"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(profile.pfe.iter().map(|(a, _)| format!("pfe_{a}")));
    let rows = (0..profile.dates.len()).map(|m| {
        let mut row = vec![
            fmt_f64(profile.dates[m]),
            fmt_f64(profile.ee[m]),
            fmt_f64(profile.ee_star[m]),
            fmt_f64(profile.epe[m]),
            fmt_f64(profile.ene[m]),
        ];
        row.extend(profile.pfe.iter().map(|(_, v)| fmt_f64(v[m])));
        row
    });
    csv_bytes(&header, rows)
}

pub fn paths_csv(paths: &PathMatrix) -> Result<Vec<u8>> {
    let mut header = vec!["path".to_string()];
    header.extend((0..paths.n_dates()).map(|m| format!("t{m}")));
    let rows = paths.rows().enumerate().map(|(i, row)| {
        let mut out = vec![i.to_string()];
        out.extend(row.iter().map(|&v| fmt_f64(v)));
        out
    });
    csv_bytes(&header, rows)
}

/// Runs the pipeline and writes `exposure_profile_<engine>.csv`,
/// `xva_report_<engine>.json`, optionally `paths.csv`, and
/// `manifest.json` into `cfg.outputs`. Returns the manifest together with
/// the in-memory results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Manifest, PipelineResult)> {
    let result = run_pipeline(cfg)?;
    let out = &cfg.outputs;
    let paths_csv_name = if cfg.emit_paths {
        let name = "paths.csv".to_string();
        write_atomic(&out.join(&name), &paths_csv(&result.paths)?)?;
        Some(name)
    } else {
        None
    };
    let mut engines = Vec::new();
    for run in &result.runs {
        let exposure_csv = format!("exposure_profile_{}.csv", run.engine);
        let xva_json = format!("xva_report_{}.json", run.engine);
        write_atomic(&out.join(&exposure_csv), &profile_csv(&run.profile)?)?;
        write_json(&out.join(&xva_json), &run.report)?;
        engines.push(EngineSummary {
            engine: run.engine,
            t0_value: run.t0_value(),
            exercised_fraction: run.exercised_fraction,
            clamped_lookups: run.clamped_lookups,
            setup_secs: run.setup_secs,
            exposure_secs: run.exposure_secs,
            exposure_csv,
            xva_json,
        });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.sim.seed,
        n_paths: cfg.sim.n_paths,
        simulation_secs: result.simulation_secs,
        paths_csv: paths_csv_name,
        engines,
        config: cfg.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok((manifest, result))
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub engine: Engine,
    pub n_paths: usize,
    /// Engine setup plus exposure evaluation; path simulation excluded.
    pub seconds: f64,
    pub xva_pct: f64,
}

/// `time(largest) / time(smallest)` per engine.
pub fn bench_ratios(rows: &[BenchRow]) -> Vec<(Engine, f64)> {
    let mut engines: Vec<Engine> = rows.iter().map(|r| r.engine).collect();
    engines.dedup();
    engines
        .into_iter()
        .filter_map(|e| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.engine == e).collect();
            let lo = mine.iter().min_by_key(|r| r.n_paths)?;
            let hi = mine.iter().max_by_key(|r| r.n_paths)?;
            Some((e, hi.seconds / lo.seconds))
        })
        .collect()
}

/// Times every engine on the first `n` paths of one simulated set for each
/// `n` in `path_counts`. With `threads = Some(k)` the timed work runs on a
/// dedicated pool of `k` threads.
pub fn run_bench(
    cfg: &ExperimentConfig,
    path_counts: &[usize],
    threads: Option<usize>,
) -> Result<Vec<BenchRow>> {
    if path_counts.is_empty() || path_counts.contains(&0) {
        return Err(Error::invalid("path_counts", "need at least one positive count"));
    }
    let max = *path_counts.iter().max().expect("nonempty");
    let mut sim_cfg = cfg.clone();
    sim_cfg.sim.n_paths = max;
    sim_cfg.validate()?;
    let all = simulate(&sim_cfg)?;
    let pool = match threads {
        Some(k) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let mut rows = Vec::new();
    for engine in cfg.engine.engines() {
        for &n in path_counts {
            let paths = all.truncated(n);
            let work = || run_engine(cfg, engine, &paths);
            let run = match &pool {
                Some(p) => p.install(work)?,
                None => work()?,
            };
            rows.push(BenchRow {
                engine,
                n_paths: n,
                seconds: run.setup_secs + run.exposure_secs,
                xva_pct: run.report.xva_pct,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<Vec<u8>> {
    let header: Vec<String> = ["engine", "n_paths", "seconds", "xva_pct"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    csv_bytes(
        &header,
        rows.iter().map(|r| {
            vec![
                r.engine.to_string(),
                r.n_paths.to_string(),
                fmt_f64(r.seconds),
                fmt_f64(r.xva_pct),
            ]
        }),
    )
}

/// Convergence of the European version of the configured contract, with
/// `cfg.fpde` as the coarsest level.
pub fn run_convergence(
    cfg: &ExperimentConfig,
    levels: usize,
    data: TerminalData,
) -> Result<Vec<ConvergenceRow>> {
    let market = cfg.market_spec()?;
    let european = ContractSpec {
        num_exercises: 1,
        ..cfg.contract
    };
    convergence_study_with(&cfg.model, &market, &european, &cfg.fpde, levels, data)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> Result<Vec<u8>> {
    let header: Vec<String> = ["grid_n", "h", "tau", "error", "order"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    csv_bytes(
        &header,
        rows.iter().map(|r| {
            vec![
                r.grid_n.to_string(),
                fmt_f64(r.h),
                fmt_f64(r.tau),
                fmt_f64(r.error),
                r.order.map(fmt_f64).unwrap_or_default(),
            ]
        }),
    )
}

/// CGMY parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    C,
    G,
    M,
    Y,
}

impl SweepParam {
    pub fn apply(&self, base: &CgmyParams, value: f64) -> CgmyParams {
        let mut p = *base;
        match self {
            SweepParam::C => p.c = value,
            SweepParam::G => p.g = value,
            SweepParam::M => p.m = value,
            SweepParam::Y => p.y = value,
        }
        p
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::C => "C",
            SweepParam::G => "G",
            SweepParam::M => "M",
            SweepParam::Y => "Y",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C" | "c" => Ok(SweepParam::C),
            "G" | "g" => Ok(SweepParam::G),
            "M" | "m" => Ok(SweepParam::M),
            "Y" | "y" => Ok(SweepParam::Y),
            other => Err(Error::Config(format!(
                "sweep parameter must be one of C, G, M, Y, got {other:?}"
            ))),
        }
    }
}

/// EE curves for each parameter value.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param: SweepParam,
    pub engine: Engine,
    pub dates: Vec<f64>,
    pub curves: Vec<(f64, Vec<f64>)>,
}

/// The engine a sweep uses: COS when both are configured.
pub fn sweep_engine(choice: EngineChoice) -> Engine {
    match choice {
        EngineChoice::Fpde => Engine::Fpde,
        EngineChoice::Cos | EngineChoice::Both => Engine::Cos,
    }
}

/// Re-runs the pipeline for every value with the same seed, so the curves
/// differ only through the parameter.
pub fn run_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::invalid("values", "need at least one sweep value"));
    }
    let engine = sweep_engine(cfg.engine);
    let mut curves = Vec::with_capacity(values.len());
    let mut dates = Vec::new();
    for &v in values {
        let mut point = cfg.clone();
        point.model = param.apply(&cfg.model, v);
        point.engine = match engine {
            Engine::Fpde => EngineChoice::Fpde,
            Engine::Cos => EngineChoice::Cos,
        };
        if engine == Engine::Fpde {
            point.model.validate_for_fpde()?;
        }
        let result = run_pipeline(&point)?;
        let run = &result.runs[0];
        dates = run.profile.dates.clone();
        curves.push((v, run.profile.ee.clone()));
    }
    Ok(SweepResult {
        param,
        engine,
        dates,
        curves,
    })
}

pub fn sweep_csv(sweep: &SweepResult) -> Result<Vec<u8>> {
    let mut header = vec!["t".to_string()];
    header.extend(
        sweep
            .curves
            .iter()
            .map(|(v, _)| format!("ee_{}={v}", sweep.param.name())),
    );
    let rows = (0..sweep.dates.len()).map(|m| {
        let mut row = vec![fmt_f64(sweep.dates[m])];
        row.extend(sweep.curves.iter().map(|(_, c)| fmt_f64(c[m])));
        row
    });
    csv_bytes(&header, rows)
}
