//! CGMY model, market and contract data, and the closed forms derived from
//! them.
//!
//! The CGMY process is the pure-jump Lévy process with Lévy density
//!
//! ```text
//! w(x) = C e^{-G|x|} / |x|^{1+Y}   for x < 0
//!        C e^{-M x}  /  x^{1+Y}    for x > 0
//! ```
//!
//! Its risk-neutral characteristic function over a horizon `t` is
//! `exp(t C Γ(-Y) [(M - iz)^Y - M^Y + (G + iz)^Y - G^Y])`, which is what the
//! simulation, the PDE generator and the Fourier-cosine pricer all consume.
//! The log-price is `ln S_t = ln S_0 + (r - ν) t + L_t` with `ν` chosen so
//! that `e^{-rt} S_t` is a martingale.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma, is_gamma_pole};

/// The four CGMY parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgmyParams {
    /// Jump intensity scale.
    pub c: f64,
    /// Tempering of the left (negative) tail.
    pub g: f64,
    /// Tempering of the right (positive) tail.
    pub m: f64,
    /// Activity index, `Y < 2`.
    pub y: f64,
}

impl CgmyParams {
    /// Validated constructor: `C > 0`, `G, M >= 0`, `Y < 2`.
    pub fn new(c: f64, g: f64, m: f64, y: f64) -> Result<Self> {
        let p = CgmyParams { c, g, m, y };
        p.validate()?;
        Ok(p)
    }

    /// The parameter set used throughout the numerical experiments:
    /// `C = 1, G = 25, M = 26, Y = 1.5`.
    pub fn reference() -> Self {
        CgmyParams {
            c: 1.0,
            g: 25.0,
            m: 26.0,
            y: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::invalid("C", format!("must be > 0, got {}", self.c)));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::invalid("G", format!("must be >= 0, got {}", self.g)));
        }
        if !(self.m.is_finite() && self.m >= 0.0) {
            return Err(Error::invalid("M", format!("must be >= 0, got {}", self.m)));
        }
        if !(self.y.is_finite() && self.y < 2.0) {
            return Err(Error::invalid("Y", format!("must be < 2, got {}", self.y)));
        }
        Ok(())
    }

    /// Extra requirement of the fractional PDE engine: `Y ∈ (1, 2)`.
    pub fn validate_for_fpde(&self) -> Result<()> {
        self.validate()?;
        if !(self.y > 1.0 && self.y < 2.0) {
            return Err(Error::invalid(
                "Y",
                format!("the fractional PDE needs Y in (1, 2), got {}", self.y),
            ));
        }
        Ok(())
    }

    /// `C Γ(-Y)`, the scale in front of the characteristic exponent and of
    /// the fractional operators.
    pub fn jump_scale(&self) -> Result<f64> {
        if is_gamma_pole(-self.y) {
            return Err(Error::Domain(format!(
                "Γ(-Y) has a pole at Y = {}",
                self.y
            )));
        }
        Ok(self.c * gamma(-self.y))
    }

    /// `(M - iz)^Y - M^Y + (G + iz)^Y - G^Y` on the principal branch.
    fn bracket(&self, z: f64) -> Complex64 {
        let y = self.y;
        let right = Complex64::new(self.m, -z).powf(y) - self.m.powf(y);
        let left = Complex64::new(self.g, z).powf(y) - self.g.powf(y);
        right + left
    }

    /// `Ψ(z) = C Γ(Y) [(M - iz)^Y - M^Y + (G + iz)^Y - G^Y]`, the exponent as
    /// it is usually quoted from the Lévy-Khintchine representation.
    ///
    /// Note the `Γ(Y)` prefactor: the risk-neutral law used everywhere else
    /// in the crate is [`characteristic_function`](Self::characteristic_function),
    /// whose prefactor is `Γ(-Y)`. The two differ by a real constant only.
    pub fn characteristic_exponent(&self, z: f64) -> Complex64 {
        self.c * gamma(self.y) * self.bracket(z)
    }

    /// `log φ(z, t) = t C Γ(-Y) [...]`.
    pub fn log_characteristic_function(&self, z: f64, t: f64) -> Result<Complex64> {
        if !(t >= 0.0) {
            return Err(Error::invalid("t", format!("must be >= 0, got {t}")));
        }
        if self.y >= 0.0 && self.y == self.y.floor() {
            return Err(Error::Domain(format!(
                "Γ(-Y) has a pole at Y = {}",
                self.y
            )));
        }
        Ok(t * self.jump_scale()? * self.bracket(z))
    }

    /// `φ(z, t) = E[e^{iz L_t}]` for the CGMY process `L`.
    pub fn characteristic_function(&self, z: f64, t: f64) -> Result<Complex64> {
        Ok(self.log_characteristic_function(z, t)?.exp())
    }

    /// Convexity adjustment `ν = log E[e^{L_1}]`
    /// `= C Γ(-Y) [(M - 1)^Y - M^Y + (G + 1)^Y - G^Y]`.
    ///
    /// Vanishes identically when `M = G + 1`. Requires `M >= 1` so that
    /// `(M - 1)^Y` is real.
    pub fn convexity_adjustment(&self) -> Result<f64> {
        if self.m < 1.0 {
            return Err(Error::Domain(format!(
                "convexity adjustment needs M >= 1, got {}",
                self.m
            )));
        }
        let y = self.y;
        // Paired so that each difference is exactly zero when M = G + 1.
        let bracket = ((self.m - 1.0).powf(y) - self.g.powf(y))
            + ((self.g + 1.0).powf(y) - self.m.powf(y));
        Ok(self.jump_scale()? * bracket)
    }

    /// First, second and fourth cumulants of `r t + L_t`, used to size the
    /// Fourier-cosine truncation range.
    pub fn cumulants(&self, rate: f64, t: f64) -> Result<Cumulants> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", format!("must be > 0, got {t}")));
        }
        let y = self.y;
        for shift in [1.0, 2.0, 4.0] {
            if is_gamma_pole(shift - y) {
                return Err(Error::Domain(format!("Γ({shift} - Y) has a pole at Y = {y}")));
            }
        }
        let ct = self.c * t;
        let c1 = rate * t
            + ct * gamma(1.0 - y) * (self.m.powf(y - 1.0) - self.g.powf(y - 1.0));
        let c2 = ct * gamma(2.0 - y) * (self.m.powf(y - 2.0) + self.g.powf(y - 2.0));
        let c4 = ct * gamma(4.0 - y) * (self.m.powf(y - 4.0) + self.g.powf(y - 4.0));
        Ok(Cumulants { c1, c2, c4 })
    }
}

/// `(ζ1, ζ2, ζ4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub c1: f64,
    pub c2: f64,
    pub c4: f64,
}

/// Piecewise-constant, right-continuous curve given by `(time, value)` knots.
///
/// Before the first knot the first value applies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadCurve {
    knots: Vec<(f64, f64)>,
}

impl SpreadCurve {
    pub fn flat(value: f64) -> Self {
        SpreadCurve {
            knots: vec![(0.0, value)],
        }
    }

    pub fn from_knots(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("spread curve", "needs at least one knot"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("spread curve", "duplicate knot times"));
        }
        if let Some(&(t, v)) = knots.iter().find(|(t, v)| !t.is_finite() || !(*v >= 0.0)) {
            return Err(Error::invalid(
                "spread curve",
                format!("knot ({t}, {v}) must have finite time and non-negative value"),
            ));
        }
        Ok(SpreadCurve { knots })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&(kt, _)| kt <= t);
        if idx == 0 {
            self.knots[0].1
        } else {
            self.knots[idx - 1].1
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }
}

/// Market data: spot, flat risk-free rate, spread curves, recovery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketSpec {
    pub spot: f64,
    pub rate: f64,
    pub credit_spread: SpreadCurve,
    pub funding_spread: SpreadCurve,
    pub recovery_rate: f64,
}

impl MarketSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::invalid("S0", format!("must be > 0, got {}", self.spot)));
        }
        if !self.rate.is_finite() {
            return Err(Error::invalid("r", "must be finite"));
        }
        if !(self.recovery_rate >= 0.0 && self.recovery_rate < 1.0) {
            return Err(Error::invalid(
                "recovery_rate",
                format!("must lie in [0, 1), got {}", self.recovery_rate),
            ));
        }
        Ok(())
    }

    /// Loss given default, `1 - R`.
    pub fn lgd(&self) -> f64 {
        1.0 - self.recovery_rate
    }

    pub fn discount(&self, t: f64) -> f64 {
        (-self.rate * t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// A Bermudan option with `num_exercises` equally spaced exercise dates
/// ending at `expiry`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSpec {
    pub strike: f64,
    pub expiry: f64,
    pub num_exercises: usize,
    pub kind: OptionKind,
}

impl ContractSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::invalid("K", format!("must be > 0, got {}", self.strike)));
        }
        if !(self.expiry.is_finite() && self.expiry > 0.0) {
            return Err(Error::invalid("T", format!("must be > 0, got {}", self.expiry)));
        }
        if self.num_exercises == 0 {
            return Err(Error::invalid("num_exercises", "must be >= 1"));
        }
        Ok(())
    }

    /// `(S - K)^+` or `(K - S)^+`.
    pub fn payoff(&self, spot: f64) -> f64 {
        match self.kind {
            OptionKind::Call => (spot - self.strike).max(0.0),
            OptionKind::Put => (self.strike - spot).max(0.0),
        }
    }

    pub fn schedule(&self) -> Result<ExerciseSchedule> {
        self.validate()?;
        Ok(ExerciseSchedule::uniform(self.expiry, self.num_exercises))
    }
}

/// Exercise dates `t_m = m T / M`, `m = 1..=M`. Index 0 refers to today.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseSchedule {
    dates: Vec<f64>,
    dt: f64,
}

impl ExerciseSchedule {
    pub fn uniform(expiry: f64, num_exercises: usize) -> Self {
        let n = num_exercises as f64;
        let mut dates: Vec<f64> = (1..=num_exercises)
            .map(|m| m as f64 * expiry / n)
            .collect();
        if let Some(last) = dates.last_mut() {
            *last = expiry;
        }
        ExerciseSchedule {
            dates,
            dt: expiry / n,
        }
    }

    /// `t_1 < ... < t_M`.
    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    /// `Δt = T / M`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_exercises(&self) -> usize {
        self.dates.len()
    }

    pub fn expiry(&self) -> f64 {
        *self.dates.last().expect("schedule has at least one date")
    }

    /// `t_m` for `m = 0..=M`, with `t_0 = 0`.
    pub fn time(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.dates[m - 1]
        }
    }

    /// `[t_0, t_1, ..., t_M]`.
    pub fn grid(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.dates.iter().copied()).collect()
    }
}
