//! Credit and funding value adjustments from a discounted exposure profile.
//!
//! With exercise dates `t_0 < t_1 < ... < t_M`:
//!
//! ```text
//! PD_m = exp(-s(t_{m-1}) t_{m-1} / LGD) - exp(-s(t_m) t_m / LGD)
//! CVA  = -(1 - R) Σ_m EE*(t_m) PD_m
//! FVA  = -Σ_m EE*(t_m) (exp(-s^f(t_{m-1}) t_{m-1}) - exp(-s^f(t_m) t_m))
//! XVA  = CVA + FVA
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::ExposureProfile;
use crate::model::{ExerciseSchedule, MarketSpec, SpreadCurve};

/// Continuation-value engine behind an exposure profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Fpde,
    Cos,
}

impl Engine {
    pub fn id(&self) -> &'static str {
        match self {
            Engine::Fpde => "fpde",
            Engine::Cos => "cos",
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Marginal default probabilities `PD(t_{m-1}, t_m)` for `m = 1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdCurve {
    values: Vec<f64>,
}

impl PdCurve {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Survival-style factor `exp(-s(t) t / scale)`.
fn survival(curve: &SpreadCurve, t: f64, scale: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (-curve.value_at(t) * t / scale).exp()
    }
}

fn increments(curve: &SpreadCurve, grid: &[f64], scale: f64) -> Vec<f64> {
    grid.windows(2)
        .map(|w| survival(curve, w[0], scale) - survival(curve, w[1], scale))
        .collect()
}

pub fn default_probabilities(market: &MarketSpec, schedule: &ExerciseSchedule) -> Result<PdCurve> {
    market.validate()?;
    Ok(PdCurve {
        values: increments(&market.credit_spread, &schedule.grid(), market.lgd()),
    })
}

fn check_profile(profile: &ExposureProfile, n_intervals: usize) -> Result<()> {
    if profile.ee_star.len() != n_intervals + 1 {
        return Err(Error::invalid(
            "profile",
            format!(
                "expected {} dates, got {}",
                n_intervals + 1,
                profile.ee_star.len()
            ),
        ));
    }
    Ok(())
}

/// Σ_{m>=1} EE*(t_m) w_m.
fn weighted_sum(profile: &ExposureProfile, weights: &[f64]) -> f64 {
    profile.ee_star[1..]
        .iter()
        .zip(weights)
        .map(|(e, w)| e * w)
        .sum()
}

pub fn cva(profile: &ExposureProfile, pd: &PdCurve, market: &MarketSpec) -> Result<f64> {
    check_profile(profile, pd.values.len())?;
    Ok(-(1.0 - market.recovery_rate) * weighted_sum(profile, &pd.values))
}

pub fn fva(
    profile: &ExposureProfile,
    market: &MarketSpec,
    schedule: &ExerciseSchedule,
) -> Result<f64> {
    let grid = schedule.grid();
    check_profile(profile, grid.len() - 1)?;
    let weights = increments(&market.funding_spread, &grid, 1.0);
    Ok(-weighted_sum(profile, &weights))
}

/// Adjustments in currency and in percent of the engine's `t_0` value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XvaReport {
    pub engine: Engine,
    pub seed: u64,
    pub t0_value: f64,
    pub cva_abs: f64,
    pub fva_abs: f64,
    pub xva_abs: f64,
    pub cva_pct: f64,
    pub fva_pct: f64,
    pub xva_pct: f64,
    pub recovery_rate: f64,
    pub credit_spread: Vec<(f64, f64)>,
    pub funding_spread: Vec<(f64, f64)>,
    /// The same adjustments in percent of the strike, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike_basis: Option<StrikeBasis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrikeBasis {
    pub strike: f64,
    pub cva_pct: f64,
    pub fva_pct: f64,
    pub xva_pct: f64,
}

impl XvaReport {
    /// `xva_abs / t0_value`.
    pub fn xva_fraction(&self) -> f64 {
        self.xva_abs / self.t0_value
    }

    pub fn with_strike_basis(mut self, strike: f64) -> Self {
        let pct = |v: f64| 100.0 * v / strike;
        self.strike_basis = Some(StrikeBasis {
            strike,
            cva_pct: pct(self.cva_abs),
            fva_pct: pct(self.fva_abs),
            xva_pct: pct(self.xva_abs),
        });
        self
    }
}

pub fn total_xva(
    cva: f64,
    fva: f64,
    t0_value: f64,
    market: &MarketSpec,
    engine: Engine,
    seed: u64,
) -> XvaReport {
    let pct = |v: f64| {
        if t0_value > 0.0 {
            100.0 * v / t0_value
        } else {
            f64::NAN
        }
    };
    let xva = cva + fva;
    XvaReport {
        engine,
        seed,
        t0_value,
        cva_abs: cva,
        fva_abs: fva,
        xva_abs: xva,
        cva_pct: pct(cva),
        fva_pct: pct(fva),
        xva_pct: pct(xva),
        recovery_rate: market.recovery_rate,
        credit_spread: market.credit_spread.knots().to_vec(),
        funding_spread: market.funding_spread.knots().to_vec(),
        strike_basis: None,
    }
}

/// PD curve, CVA, FVA and the report in one call.
pub fn xva_report(
    profile: &ExposureProfile,
    market: &MarketSpec,
    schedule: &ExerciseSchedule,
    engine: Engine,
    seed: u64,
) -> Result<XvaReport> {
    let pd = default_probabilities(market, schedule)?;
    let c = cva(profile, &pd, market)?;
    let f = fva(profile, market, schedule)?;
    Ok(total_xva(c, f, profile.ee[0], market, engine, seed))
}
