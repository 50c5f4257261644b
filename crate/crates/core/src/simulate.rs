//! Monte Carlo paths of the underlying on the exercise-date grid.
//!
//! Each increment `L_{t+Δt} - L_t` of the CGMY process is drawn from a
//! truncated series representation: jumps larger than `truncation_eps` come
//! from the inverse-tail (LePage) series of the stable part, thinned by the
//! exponential tempering `e^{-M x}` / `e^{-G|x|}`, which reproduces exactly a
//! compound Poisson process with the tempered Lévy measure restricted to
//! `|x| > ε`. Jumps below `ε` are replaced by a Gaussian with the same
//! variance, and the compensators are added back analytically so that the
//! increment has the exact CGMY mean.
//!
//! Every path owns a ChaCha stream keyed by `(seed, path index)`, so the
//! output does not depend on how the paths are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::model::{CgmyParams, ExerciseSchedule, MarketSpec};
use crate::special::gamma;

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Smallest jump size generated explicitly.
    pub truncation_eps: f64,
    /// Cap on series terms per increment (both tails together).
    pub max_jump_terms: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 10_000,
            seed: 42,
            truncation_eps: 1e-2,
            max_jump_terms: 1_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be >= 1"));
        }
        if !(self.truncation_eps > 0.0 && self.truncation_eps.is_finite()) {
            return Err(Error::invalid(
                "truncation_eps",
                format!("must be > 0, got {}", self.truncation_eps),
            ));
        }
        if self.max_jump_terms == 0 {
            return Err(Error::invalid("max_jump_terms", "must be >= 1"));
        }
        Ok(())
    }
}

/// One tail of the Lévy measure restricted to jumps above the truncation.
#[derive(Debug, Clone, Copy)]
struct Tail {
    tempering: f64,
    sign: f64,
}

/// Pre-computed constants for drawing CGMY increments over a fixed `Δt`.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    y: f64,
    /// `C Δt / Y`: rate of the unit-Poisson arrivals in the inverse-tail map.
    series_rate: f64,
    /// Arrival level beyond which generated jumps fall below `ε`.
    arrival_cutoff: f64,
    /// Exact mean minus the mean of the explicit jumps.
    drift: f64,
    /// Standard deviation of the Gaussian standing in for jumps below `ε`.
    small_jump_sd: f64,
    tails: [Tail; 2],
    max_terms: usize,
}

/// `Γ(s, x)` for `s ∈ (-1, 1) \ {0}`, `x > 0`.
fn upper_incomplete_gamma(s: f64, x: f64) -> f64 {
    if s > 0.0 {
        gamma_ur(s, x) * gamma(s)
    } else {
        // Γ(s, x) = (Γ(s + 1, x) - x^s e^{-x}) / s
        (gamma_ur(s + 1.0, x) * gamma(s + 1.0) - x.powf(s) * (-x).exp()) / s
    }
}

/// `γ(s, x)` for `s > 0`.
fn lower_incomplete_gamma(s: f64, x: f64) -> f64 {
    gamma_lr(s, x) * gamma(s)
}

impl IncrementSampler {
    pub fn new(params: &CgmyParams, dt: f64, truncation_eps: f64, max_terms: usize) -> Result<Self> {
        params.validate()?;
        let CgmyParams { c, g, m, y } = *params;
        if !(y > 0.0 && y < 2.0) || y == 1.0 {
            return Err(Error::invalid(
                "Y",
                format!("the sampler needs Y in (0, 1) or (1, 2), got {y}"),
            ));
        }
        if !(g > 0.0 && m > 0.0) {
            return Err(Error::invalid("G, M", "the sampler needs G > 0 and M > 0"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if !(truncation_eps > 0.0) {
            return Err(Error::invalid("truncation_eps", "must be > 0"));
        }
        let eps = truncation_eps;
        let mean = dt * c * gamma(1.0 - y) * (m.powf(y - 1.0) - g.powf(y - 1.0));
        // ∫_ε^∞ x^{-Y} e^{-λx} dx = λ^{Y-1} Γ(1 - Y, λε)
        let big_mean = |lambda: f64| c * lambda.powf(y - 1.0) * upper_incomplete_gamma(1.0 - y, lambda * eps);
        // ∫_0^ε x^{1-Y} e^{-λx} dx = λ^{Y-2} γ(2 - Y, λε)
        let small_var =
            |lambda: f64| c * lambda.powf(y - 2.0) * lower_incomplete_gamma(2.0 - y, lambda * eps);
        let drift = mean - dt * (big_mean(m) - big_mean(g));
        let variance = dt * (small_var(m) + small_var(g));
        let series_rate = c * dt / y;
        Ok(IncrementSampler {
            y,
            series_rate,
            arrival_cutoff: series_rate * eps.powf(-y),
            drift,
            small_jump_sd: variance.sqrt(),
            tails: [
                Tail {
                    tempering: m,
                    sign: 1.0,
                },
                Tail {
                    tempering: g,
                    sign: -1.0,
                },
            ],
            max_terms,
        })
    }

    /// Expected number of series terms per draw.
    pub fn expected_terms(&self) -> f64 {
        2.0 * self.arrival_cutoff
    }

    /// One draw of `L_{t+Δt} - L_t`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let mut x = self.drift + self.small_jump_sd * rng.sample::<f64, _>(StandardNormal);
        let mut terms = 0usize;
        let inv_y = -1.0 / self.y;
        for tail in &self.tails {
            let mut arrival = 0.0;
            loop {
                arrival += rng.sample::<f64, _>(Exp1);
                if arrival > self.arrival_cutoff {
                    break;
                }
                terms += 1;
                if terms > self.max_terms {
                    return Err(Error::NonConvergence(format!(
                        "jump series needs more than {} terms per increment; raise max_jump_terms or truncation_eps",
                        self.max_terms
                    )));
                }
                let jump = (arrival / self.series_rate).powf(inv_y);
                if rng.random::<f64>() < (-tail.tempering * jump).exp() {
                    x += tail.sign * jump;
                }
            }
        }
        Ok(x)
    }
}

/// Draw one CGMY increment over `dt`. Convenience wrapper around
/// [`IncrementSampler`]; build the sampler once when drawing many.
pub fn sample_cgmy_increment<R: Rng + ?Sized>(
    params: &CgmyParams,
    dt: f64,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<f64> {
    IncrementSampler::new(params, dt, cfg.truncation_eps, cfg.max_jump_terms)?.sample(rng)
}

/// The RNG stream of path `index`.
pub fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Simulated prices, `n_paths` rows by `M + 1` columns (`t_0 .. t_M`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    prices: Vec<f64>,
    n_paths: usize,
    n_dates: usize,
    dates: Vec<f64>,
    seed: u64,
}

impl PathMatrix {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// Number of columns, `M + 1`.
    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, path: usize) -> &[f64] {
        &self.prices[path * self.n_dates..(path + 1) * self.n_dates]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.prices.chunks_exact(self.n_dates)
    }

    pub fn price(&self, path: usize, date: usize) -> f64 {
        self.prices[path * self.n_dates + date]
    }

    /// Column `m` across all paths.
    pub fn column(&self, date: usize) -> Vec<f64> {
        self.rows().map(|r| r[date]).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.column(self.n_dates - 1)
    }

    /// The first `n` paths. Because every path has its own RNG stream this
    /// equals a fresh simulation with `n_paths = n` and the same seed.
    pub fn truncated(&self, n: usize) -> PathMatrix {
        let n = n.min(self.n_paths);
        PathMatrix {
            prices: self.prices[..n * self.n_dates].to_vec(),
            n_paths: n,
            n_dates: self.n_dates,
            dates: self.dates.clone(),
            seed: self.seed,
        }
    }

    /// Builds a matrix from explicit rows; every row needs `dates.len()` entries.
    pub fn from_rows(dates: Vec<f64>, rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let n_dates = dates.len();
        if rows.iter().any(|r| r.len() != n_dates) {
            return Err(Error::invalid("rows", "every row needs one price per date"));
        }
        Ok(PathMatrix {
            prices: rows.iter().flatten().copied().collect(),
            n_paths: rows.len(),
            n_dates,
            dates,
            seed,
        })
    }
}

/// `S_{t_m} = S_{t_{m-1}} exp((r - ν) Δt + X_m)` with i.i.d. CGMY increments.
pub fn simulate_paths(
    params: &CgmyParams,
    market: &MarketSpec,
    schedule: &ExerciseSchedule,
    cfg: &SimConfig,
) -> Result<PathMatrix> {
    cfg.validate()?;
    market.validate()?;
    let dt = schedule.dt();
    let sampler = IncrementSampler::new(params, dt, cfg.truncation_eps, cfg.max_jump_terms)?;
    let drift = (market.rate - params.convexity_adjustment()?) * dt;
    let n_dates = schedule.num_exercises() + 1;
    let mut prices = vec![0.0; cfg.n_paths * n_dates];
    prices
        .par_chunks_mut(n_dates)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let mut rng = path_rng(cfg.seed, i);
            row[0] = market.spot;
            for m in 1..n_dates {
                row[m] = row[m - 1] * (drift + sampler.sample(&mut rng)?).exp();
            }
            Ok(())
        })?;
    Ok(PathMatrix {
        prices,
        n_paths: cfg.n_paths,
        n_dates,
        dates: schedule.grid(),
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width histogram of `S_T` between its minimum and maximum.
pub fn terminal_histogram(paths: &PathMatrix, n_bins: usize) -> Result<Vec<HistogramBin>> {
    if n_bins == 0 {
        return Err(Error::invalid("n_bins", "must be >= 1"));
    }
    let values = paths.terminal();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|b| HistogramBin {
            lower: lo + b as f64 * width,
            upper: if b + 1 == n_bins { hi } else { lo + (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for v in values {
        let idx = if width > 0.0 {
            (((v - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        bins[idx].count += 1;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpreadCurve;

    fn market() -> MarketSpec {
        MarketSpec {
            spot: 40.0,
            rate: 0.05,
            credit_spread: SpreadCurve::flat(0.01),
            funding_spread: SpreadCurve::flat(0.005),
            recovery_rate: 0.4,
        }
    }

    #[test]
    fn single_path_single_date_shape() {
        let cfg = SimConfig {
            n_paths: 1,
            ..SimConfig::default()
        };
        let p = simulate_paths(
            &CgmyParams::reference(),
            &market(),
            &ExerciseSchedule::uniform(1.0, 1),
            &cfg,
        )
        .unwrap();
        assert_eq!((p.n_paths(), p.n_dates()), (1, 2));
        assert_eq!(p.price(0, 0), 40.0);
        assert!(p.price(0, 1) > 0.0);
    }

    #[test]
    fn paths_are_anchored_positive_and_reproducible() {
        let cfg = SimConfig {
            n_paths: 200,
            seed: 7,
            ..SimConfig::default()
        };
        let sched = ExerciseSchedule::uniform(1.0, 20);
        let a = simulate_paths(&CgmyParams::reference(), &market(), &sched, &cfg).unwrap();
        let b = simulate_paths(&CgmyParams::reference(), &market(), &sched, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.rows().all(|r| r[0] == 40.0 && r.iter().all(|&s| s > 0.0)));
        let c = simulate_paths(
            &CgmyParams::reference(),
            &market(),
            &sched,
            &SimConfig { seed: 8, ..cfg },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prefix_of_larger_run_equals_smaller_run() {
        let sched = ExerciseSchedule::uniform(0.5, 5);
        let big = simulate_paths(
            &CgmyParams::reference(),
            &market(),
            &sched,
            &SimConfig {
                n_paths: 50,
                ..SimConfig::default()
            },
        )
        .unwrap();
        let small = simulate_paths(
            &CgmyParams::reference(),
            &market(),
            &sched,
            &SimConfig {
                n_paths: 20,
                ..SimConfig::default()
            },
        )
        .unwrap();
        assert_eq!(big.truncated(20), small);
    }

    #[test]
    fn same_result_on_any_thread_count() {
        let sched = ExerciseSchedule::uniform(1.0, 10);
        let cfg = SimConfig {
            n_paths: 300,
            ..SimConfig::default()
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_paths(&CgmyParams::reference(), &market(), &sched, &cfg).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn series_cap_is_reported() {
        let sampler = IncrementSampler::new(&CgmyParams::reference(), 0.02, 1e-4, 10).unwrap();
        assert!(sampler.expected_terms() > 10.0);
        let err = sampler.sample(&mut path_rng(1, 0)).unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)));
    }

    #[test]
    fn sampler_rejects_unsupported_parameters() {
        let cfg = SimConfig::default();
        let mut rng = path_rng(0, 0);
        let p = CgmyParams::new(1.0, 25.0, 26.0, 1.0).unwrap();
        assert!(sample_cgmy_increment(&p, 0.02, &cfg, &mut rng).is_err());
        let p = CgmyParams::new(1.0, 0.0, 26.0, 1.5).unwrap();
        assert!(sample_cgmy_increment(&p, 0.02, &cfg, &mut rng).is_err());
        assert!(sample_cgmy_increment(&CgmyParams::reference(), 0.0, &cfg, &mut rng).is_err());
    }

    #[test]
    fn finite_variation_regime_mean() {
        // Y < 1: no compensation in the exponent, mean is still ∫ x ν(dx).
        let p = CgmyParams::new(2.0, 8.0, 12.0, 0.6).unwrap();
        let s = IncrementSampler::new(&p, 0.1, 1e-3, 1_000_000).unwrap();
        let mut rng = path_rng(3, 0);
        let n = 40_000;
        let draws: Vec<f64> = (0..n).map(|_| s.sample(&mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let k = p.cumulants(0.0, 0.1).unwrap();
        assert!((mean - k.c1).abs() < 4.0 * (var / n as f64).sqrt(), "{mean} vs {}", k.c1);
        assert!(((var - k.c2) / k.c2).abs() < 0.05, "{var} vs {}", k.c2);
    }

    #[test]
    fn histogram_of_constant_paths() {
        let rows = vec![vec![40.0, 40.0]; 3];
        let p = PathMatrix::from_rows(vec![0.0, 1.0], &rows, 0).unwrap();
        let h = terminal_histogram(&p, 1).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].count, 3);
        assert!(terminal_histogram(&p, 0).is_err());
    }

    #[test]
    fn histogram_conserves_paths() {
        let cfg = SimConfig {
            n_paths: 500,
            ..SimConfig::default()
        };
        let p = simulate_paths(
            &CgmyParams::reference(),
            &market(),
            &ExerciseSchedule::uniform(1.0, 4),
            &cfg,
        )
        .unwrap();
        let h = terminal_histogram(&p, 37).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 500);
    }
}
