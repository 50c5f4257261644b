//! Fourier-cosine (COS) engine for Bermudan options.
//!
//! In log-moneyness `x = ln(S/K)` the continuation value at `t_m` is a
//! truncated cosine series in `x`:
//!
//! ```text
//! V^c(x, t_m) = Σ'_k Re{ w_k e^{i u_k (x - a)} },   u_k = kπ/(b - a),
//! w_k = e^{-rΔt} φ(u_k, Δt) e^{i u_k (r - ν)Δt} H_k(t_{m+1}),
//! ```
//!
//! where `H_k(t_{m+1})` are the cosine coefficients of the option value one
//! date later on `[a, b]`. The coefficients are recovered backward in time,
//! splitting `[a, b]` at the early-exercise point `x*` found by a bracketed
//! Newton iteration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exposure::Lookup;
use crate::model::{CgmyParams, ContractSpec, ExerciseSchedule, MarketSpec, OptionKind};

const BISECTION_MAX_ITER: usize = 200;
/// Points of the coarse scan that brackets the exercise point.
const SCAN_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CosConfig {
    /// Number of cosine terms `N`.
    pub n_terms: usize,
    /// Width multiplier of the truncation range.
    pub l: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for CosConfig {
    fn default() -> Self {
        CosConfig {
            n_terms: 512,
            l: 8.0,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

impl CosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_terms < 16 || !self.n_terms.is_power_of_two() {
            return Err(Error::invalid(
                "n_terms",
                format!("must be a power of two >= 16, got {}", self.n_terms),
            ));
        }
        if !(6.0..=12.0).contains(&self.l) {
            return Err(Error::invalid("L", format!("must lie in [6, 12], got {}", self.l)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid("newton_tol", "must be > 0"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter", "must be >= 1"));
        }
        Ok(())
    }
}

/// `[a, b] = (x + ζ1) ∓ L sqrt(ζ2 + sqrt(ζ4))` for horizon `t`.
pub fn truncation_range(params: &CgmyParams, rate: f64, t: f64, x: f64, l: f64) -> Result<(f64, f64)> {
    let k = params.cumulants(rate, t)?;
    let centre = x + k.c1;
    let half = l * (k.c2 + k.c4.sqrt()).sqrt();
    Ok((centre - half, centre + half))
}

/// `χ_k(c, d) = ∫_c^d e^y cos(kπ(y - a)/(b - a)) dy`.
pub fn chi_coefficient(k: usize, c: f64, d: f64, a: f64, b: f64) -> f64 {
    let w = k as f64 * PI / (b - a);
    let (ec, ed) = (c.exp(), d.exp());
    let (sc, cc) = (w * (c - a)).sin_cos();
    let (sd, cd) = (w * (d - a)).sin_cos();
    (cd * ed - cc * ec + w * (sd * ed - sc * ec)) / (1.0 + w * w)
}

/// `∫_c^d cos(kπ(y - a)/(b - a)) dy`.
pub fn cosine_integral(k: usize, c: f64, d: f64, a: f64, b: f64) -> f64 {
    if k == 0 {
        return d - c;
    }
    let w = k as f64 * PI / (b - a);
    ((w * (d - a)).sin() - (w * (c - a)).sin()) / w
}

/// `f(x) = Σ'_k Re{w_k e^{iπk(x - a)/(b - a)}}` on `[a, b]`. The halving of
/// the first term is applied on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CosSeries {
    pub a: f64,
    pub b: f64,
    /// Weights with `w_0` already halved.
    weights: Vec<Complex64>,
}

impl CosSeries {
    /// Series with raw weights `w_k`; the first one is halved here.
    pub fn new(a: f64, b: f64, mut weights: Vec<Complex64>) -> Self {
        if let Some(w0) = weights.first_mut() {
            *w0 *= 0.5;
        }
        CosSeries { a, b, weights }
    }

    /// Weights as stored, first one halved.
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    fn unit(&self, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, PI * (x - self.a) / (self.b - self.a))
    }

    pub fn value(&self, x: f64) -> f64 {
        let z = self.unit(x);
        let mut acc = Complex64::new(0.0, 0.0);
        for w in self.weights.iter().rev() {
            acc = acc * z + w;
        }
        acc.re
    }

    /// `(f(x), f'(x))`.
    pub fn value_and_derivative(&self, x: f64) -> (f64, f64) {
        let z = self.unit(x);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut dacc = Complex64::new(0.0, 0.0);
        for (k, w) in self.weights.iter().enumerate().rev() {
            acc = acc * z + w;
            dacc = dacc * z + w * k as f64;
        }
        let scale = PI / (self.b - self.a);
        (acc.re, -dacc.im * scale)
    }
}

/// `ψ_k(c, d) = ∫_c^d f(y) cos(kπ(y - a)/(b - a)) dy` for `k < n`, computed
/// in coefficient space: each term of `f` integrates in closed form against
/// each cosine.
pub fn psi_coefficients(series: &CosSeries, c: f64, d: f64, n: usize) -> Vec<f64> {
    let (a, b) = (series.a, series.b);
    let nw = series.weights.len();
    let span = b - a;
    // E(q) = ∫_c^d e^{iπq(y - a)/(b - a)} dy for q in (-n, nw + n).
    let offset = n as isize;
    let len = nw + 2 * n;
    let mut e = vec![Complex64::new(0.0, 0.0); len];
    for (idx, slot) in e.iter_mut().enumerate() {
        let q = idx as isize - offset;
        *slot = if q == 0 {
            Complex64::new(d - c, 0.0)
        } else {
            let u = q as f64 * PI / span;
            let p = Complex64::from_polar(1.0, u * (d - a));
            let r = Complex64::from_polar(1.0, u * (c - a));
            (p - r) / Complex64::new(0.0, u)
        };
    }
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for (j, w) in series.weights.iter().enumerate() {
                let plus = e[(j + k) + n];
                let minus = e[(j as isize - k as isize + offset) as usize];
                s += (w * (plus + minus)).re;
            }
            0.5 * s
        })
        .collect()
}

fn payoff_x(kind: OptionKind, strike: f64, x: f64) -> (f64, f64) {
    let ex = x.exp();
    match kind {
        OptionKind::Call if x > 0.0 => (strike * (ex - 1.0), strike * ex),
        OptionKind::Put if x < 0.0 => (strike * (1.0 - ex), -strike * ex),
        _ => (0.0, 0.0),
    }
}

/// Early-exercise point: root of `payoff(K e^x) - V^c(x)` on `[a, b]`.
///
/// For a call the exercise region is `x >= x*`: returns `b` when the
/// payoff is below continuation at `b` (never exercise) and `a` when there
/// is no crossing at all (always exercise). Mirrored for puts.
pub fn find_exercise_point(
    series: &CosSeries,
    kind: OptionKind,
    strike: f64,
    warm_start: f64,
    cfg: &CosConfig,
) -> Result<f64> {
    let (a, b) = (series.a, series.b);
    let g = |x: f64| payoff_x(kind, strike, x).0 - series.value(x);
    // Walk from the far end of the exercise region toward the other end;
    // `hold` is the side where continuing is optimal.
    let (start, end, hold_at_end) = match kind {
        OptionKind::Call => (b, a, a),
        OptionKind::Put => (a, b, b),
    };
    if g(start) < 0.0 {
        return Ok(start);
    }
    let step = (end - start) / SCAN_POINTS as f64;
    let mut exercise_side = start;
    let mut hold_side = None;
    for i in 1..=SCAN_POINTS {
        let x = if i == SCAN_POINTS { end } else { start + i as f64 * step };
        let gx = g(x);
        if gx.is_nan() {
            return Err(Error::NonConvergence(format!("continuation value is NaN at x = {x}")));
        }
        if gx < 0.0 {
            hold_side = Some(x);
            break;
        }
        exercise_side = x;
    }
    let Some(hold) = hold_side else {
        return Ok(hold_at_end);
    };
    let (mut lo, mut hi) = if hold < exercise_side {
        (hold, exercise_side)
    } else {
        (exercise_side, hold)
    };
    // g(lo) and g(hi) have opposite signs.
    let g_lo_negative = g(lo) < 0.0;

    let mut x = if warm_start > lo && warm_start < hi {
        warm_start
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..cfg.newton_max_iter {
        let (p, dp) = payoff_x(kind, strike, x);
        let (v, dv) = series.value_and_derivative(x);
        let gx = p - v;
        if (gx < 0.0) == g_lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let slope = dp - dv;
        let next = x - gx / slope;
        if !(next.is_finite() && next > lo && next < hi) {
            break;
        }
        if (next - x).abs() <= cfg.newton_tol {
            return Ok(next);
        }
        x = next;
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= cfg.newton_tol {
            return Ok(mid);
        }
        if (g(mid) < 0.0) == g_lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= cfg.newton_tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::NonConvergence(format!(
            "exercise point not resolved to {} in [{lo}, {hi}]",
            cfg.newton_tol
        )))
    }
}

/// Everything needed to evaluate continuation values on paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CosState {
    pub a: f64,
    pub b: f64,
    /// `H_k(t_m)` for `m = 1..=M`, stored at index `m - 1`.
    pub hk: Vec<Vec<f64>>,
    /// `x*(t_m)` for `m = 1..=M`, stored at index `m - 1`; `x*(t_M) = 0`.
    pub x_star: Vec<f64>,
    /// Continuation series at `t_m`, `m = 0..M`.
    series: Vec<CosSeries>,
    contract: ContractSpec,
}

/// Coefficients of the payoff on `[c, d] ∩ [a, b]`.
fn payoff_coefficients(kind: OptionKind, strike: f64, c: f64, d: f64, a: f64, b: f64, n: usize) -> Vec<f64> {
    let (c, d) = (c.max(a), d.min(b));
    let scale = 2.0 / (b - a);
    if c >= d {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let chi = chi_coefficient(k, c, d, a, b);
            let psi0 = cosine_integral(k, c, d, a, b);
            scale
                * strike
                * match kind {
                    OptionKind::Call => chi - psi0,
                    OptionKind::Put => psi0 - chi,
                }
        })
        .collect()
}

/// Backward induction of the cosine coefficients from `t_M` to `t_0`.
pub fn backward_induction(
    params: &CgmyParams,
    market: &MarketSpec,
    contract: &ContractSpec,
    schedule: &ExerciseSchedule,
    cfg: &CosConfig,
) -> Result<CosState> {
    cfg.validate()?;
    market.validate()?;
    contract.validate()?;
    params.validate()?;
    let n = cfg.n_terms;
    let strike = contract.strike;
    let x0 = (market.spot / strike).ln();
    let (a, b) = truncation_range(params, market.rate, schedule.expiry(), x0, cfg.l)?;
    let dt = schedule.dt();
    let drift = (market.rate - params.convexity_adjustment()?) * dt;
    let disc = (-market.rate * dt).exp();
    let span = b - a;
    let transition: Vec<Complex64> = (0..n)
        .map(|k| {
            let u = k as f64 * PI / span;
            Ok(params.characteristic_function(u, dt)? * Complex64::from_polar(disc, u * drift))
        })
        .collect::<Result<_>>()?;
    let series_from = |h: &[f64]| {
        CosSeries::new(
            a,
            b,
            transition.iter().zip(h).map(|(t, &hk)| t * hk).collect(),
        )
    };

    let m_last = schedule.num_exercises();
    let mut hk = vec![Vec::new(); m_last];
    let mut x_star = vec![0.0; m_last];
    let mut series = vec![CosSeries::new(a, b, Vec::new()); m_last];
    hk[m_last - 1] = match contract.kind {
        OptionKind::Call => payoff_coefficients(OptionKind::Call, strike, 0.0, b, a, b, n),
        OptionKind::Put => payoff_coefficients(OptionKind::Put, strike, a, 0.0, a, b, n),
    };
    let mut warm = 0.0;
    for m in (0..m_last).rev() {
        // Continuation at t_m from the coefficients at t_{m+1}.
        let cont = series_from(&hk[m]);
        if m >= 1 {
            let xs = find_exercise_point(&cont, contract.kind, strike, warm, cfg)?;
            warm = xs;
            x_star[m - 1] = xs;
            let scale = 2.0 / span;
            hk[m - 1] = match contract.kind {
                OptionKind::Call => {
                    let hold = psi_coefficients(&cont, a, xs, n);
                    let ex = payoff_coefficients(OptionKind::Call, strike, xs, b, a, b, n);
                    hold.iter().zip(ex).map(|(p, e)| scale * p + e).collect()
                }
                OptionKind::Put => {
                    let hold = psi_coefficients(&cont, xs, b, n);
                    let ex = payoff_coefficients(OptionKind::Put, strike, a, xs, a, b, n);
                    hold.iter().zip(ex).map(|(p, e)| scale * p + e).collect()
                }
            };
        }
        series[m] = cont;
    }
    Ok(CosState {
        a,
        b,
        hk,
        x_star,
        series,
        contract: *contract,
    })
}

impl CosState {
    pub fn contract(&self) -> &ContractSpec {
        &self.contract
    }

    pub fn num_exercises(&self) -> usize {
        self.hk.len()
    }

    /// Continuation series at `t_m`, `m < M`.
    pub fn series(&self, m: usize) -> &CosSeries {
        &self.series[m]
    }

    /// `V^c(S, t_m)`. At `t_M` this is the payoff. Log-moneyness outside
    /// `[a, b]` is clamped to the nearest end and flagged.
    pub fn continuation_at(&self, m: usize, spot: f64) -> Lookup {
        if m == self.num_exercises() {
            return Lookup {
                value: self.contract.payoff(spot),
                clamped: false,
            };
        }
        let x = (spot / self.contract.strike).ln();
        let clamped = !(x >= self.a && x <= self.b);
        let x = if x.is_nan() { self.a } else { x.clamp(self.a, self.b) };
        Lookup {
            value: self.series[m].value(x),
            clamped,
        }
    }

    /// Option value at `t_0`.
    pub fn value_at(&self, spot: f64) -> f64 {
        self.continuation_at(0, spot).value
    }
}
