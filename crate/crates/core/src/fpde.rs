//! Tempered fractional PDE engine.
//!
//! In log-price `x = ln S` the option value solves
//!
//! ```text
//! V_t + (r - ν) V_x + C Γ(-Y) [ (D_L^{Y,G} - G^Y) V + (D_R^{Y,M} - M^Y) V ] - r V = 0
//! ```
//!
//! on `(x_L, x_R)`, with `D_L`, `D_R` the left and right tempered
//! Riemann-Liouville derivatives. Space is discretized with the tempered
//! weighted-and-shifted Grünwald (WSGD) operators, the drift with a central
//! difference and time with Crank-Nicolson. Between exercise dates the
//! equation is solved as an equality; at each exercise date the solution is
//! projected onto the payoff.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::Lookup;
use crate::model::{CgmyParams, ContractSpec, ExerciseSchedule, MarketSpec, OptionKind};

/// Largest accepted `h · λ`.
pub const MAX_H_LAMBDA: f64 = 10.0;

/// Discretization controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WsgdConfig {
    /// Free WSGD parameter; `γ3 >= -Y/2` keeps the scheme stable.
    pub gamma3: f64,
    /// Number of grid intervals `N_x`.
    pub grid_n: usize,
    /// Crank-Nicolson steps between consecutive exercise dates.
    pub time_steps_per_interval: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub far_field: FarField,
}

/// Values the nonlocal sums see outside `[x_L, x_R]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarField {
    /// Zero outside the domain.
    Zero,
    /// The Dirichlet data continued beyond each end of the domain.
    #[default]
    Asymptotic,
}

impl Default for WsgdConfig {
    fn default() -> Self {
        WsgdConfig {
            gamma3: 0.0,
            grid_n: 1024,
            time_steps_per_interval: 16,
            x_left: 0.4f64.ln(),
            x_right: 400.0f64.ln(),
            far_field: FarField::Asymptotic,
        }
    }
}

impl WsgdConfig {
    pub fn h(&self) -> f64 {
        (self.x_right - self.x_left) / self.grid_n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.grid_n)
            .map(|n| self.x_left + n as f64 * h)
            .collect()
    }

    pub fn validate(&self, params: &CgmyParams, spot: f64) -> Result<()> {
        params.validate_for_fpde()?;
        if self.grid_n < 8 {
            return Err(Error::invalid("grid_n", format!("must be >= 8, got {}", self.grid_n)));
        }
        if self.time_steps_per_interval == 0 {
            return Err(Error::invalid("time_steps_per_interval", "must be >= 1"));
        }
        if !(self.gamma3 >= -params.y / 2.0) {
            return Err(Error::invalid(
                "gamma3",
                format!("must be >= -Y/2 = {}, got {}", -params.y / 2.0, self.gamma3),
            ));
        }
        let x0 = spot.ln();
        if !(self.x_left < x0 && x0 < self.x_right) {
            return Err(Error::invalid(
                "x_left, x_right",
                format!(
                    "ln S0 = {x0} must lie inside ({}, {})",
                    self.x_left, self.x_right
                ),
            ));
        }
        let hl = self.h() * params.g.max(params.m);
        if hl > MAX_H_LAMBDA {
            return Err(Error::invalid(
                "grid_n",
                format!("h * max(G, M) = {hl} exceeds {MAX_H_LAMBDA}; refine the grid"),
            ));
        }
        Ok(())
    }
}

/// `ω_0 = 1`, `ω_l = (1 - (1 + Y)/l) ω_{l-1}` for `l = 1..=n`.
pub fn omega_weights(y: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0);
    for l in 1..=n {
        let prev = w[l - 1];
        w.push((1.0 - (1.0 + y) / l as f64) * prev);
    }
    w
}

/// `(γ1, γ2, γ3)` with `γ1 = Y/2 + γ3`, `γ2 = (2 - Y)/2 - 2γ3`.
pub fn gamma_coefficients(y: f64, gamma3: f64) -> (f64, f64, f64) {
    (y / 2.0 + gamma3, (2.0 - y) / 2.0 - 2.0 * gamma3, gamma3)
}

/// Tempered WSGD weights for one tempering rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WsgdWeights {
    /// `g_0 ..= g_n`.
    pub g: Vec<f64>,
    pub phi: f64,
    pub lambda: f64,
}

/// `g_0 = γ1 e^{hλ}`, `g_1 = γ1 ω_1 + γ2 ω_0`,
/// `g_l = (γ1 ω_l + γ2 ω_{l-1} + γ3 ω_{l-2}) e^{-(l-1)hλ}` and
/// `φ(λ) = (γ1 e^{hλ} + γ2 + γ3 e^{-hλ})(1 - e^{-hλ})^Y`.
pub fn tempered_weights(y: f64, lambda: f64, h: f64, gamma3: f64, n: usize) -> Result<WsgdWeights> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("must be > 0, got {h}")));
    }
    let hl = h * lambda;
    if hl > MAX_H_LAMBDA {
        return Err(Error::invalid(
            "h * lambda",
            format!("{hl} exceeds {MAX_H_LAMBDA}"),
        ));
    }
    let (g1, g2, g3) = gamma_coefficients(y, gamma3);
    let omega = omega_weights(y, n.max(1));
    let decay = (-hl).exp();
    let mut g = Vec::with_capacity(n + 1);
    g.push(g1 * omega[0] * hl.exp());
    if n >= 1 {
        g.push(g1 * omega[1] + g2 * omega[0]);
    }
    let mut damp = 1.0;
    for l in 2..=n {
        damp *= decay;
        g.push((g1 * omega[l] + g2 * omega[l - 1] + g3 * omega[l - 2]) * damp);
    }
    let phi = (g1 * hl.exp() + g2 + g3 * decay) * (1.0 - decay).powf(y);
    Ok(WsgdWeights { g, phi, lambda })
}

fn check_operator_input(weights: &WsgdWeights, v: &[f64]) -> usize {
    let n = v.len() - 1;
    assert!(n >= 2, "need at least one interior node");
    assert!(weights.g.len() > n, "need weights g_0..=g_N");
    n
}

/// Left operator at interior nodes `1..N`:
/// `h^{-Y} [Σ_{l=0}^{n+1} g_l v_{n-l+1} - φ v_n]`.
pub fn apply_left_operator(weights: &WsgdWeights, v: &[f64], h: f64, y: f64) -> Vec<f64> {
    let n_x = check_operator_input(weights, v);
    let scale = h.powf(-y);
    (1..n_x)
        .map(|n| {
            let s: f64 = (0..=n + 1).map(|l| weights.g[l] * v[n + 1 - l]).sum();
            scale * (s - weights.phi * v[n])
        })
        .collect()
}

/// Right operator at interior nodes `1..N`:
/// `h^{-Y} [Σ_{l=0}^{N-n+1} g_l v_{n+l-1} - φ v_n]`.
pub fn apply_right_operator(weights: &WsgdWeights, v: &[f64], h: f64, y: f64) -> Vec<f64> {
    let n_x = check_operator_input(weights, v);
    let scale = h.powf(-y);
    (1..n_x)
        .map(|n| {
            let s: f64 = (0..=n_x - n + 1).map(|l| weights.g[l] * v[n + l - 1]).sum();
            scale * (s - weights.phi * v[n])
        })
        .collect()
}

/// Spatial operator `𝒜` restricted to interior rows, over all `N_x + 1`
/// columns: `(r - ν) δ_x0 + C Γ(-Y) (𝔇_L^G + 𝔇_R^M) - r`.
fn operator_matrix(
    n_x: usize,
    h: f64,
    y: f64,
    advection: f64,
    rate: f64,
    jump_scale: f64,
    left: &WsgdWeights,
    right: &WsgdWeights,
) -> DMatrix<f64> {
    let kappa = jump_scale * h.powf(-y);
    let mut a = DMatrix::zeros(n_x - 1, n_x + 1);
    for n in 1..n_x {
        let row = n - 1;
        a[(row, n + 1)] += advection / (2.0 * h);
        a[(row, n - 1)] -= advection / (2.0 * h);
        for l in 0..=n + 1 {
            a[(row, n + 1 - l)] += kappa * left.g[l];
        }
        for l in 0..=n_x - n + 1 {
            a[(row, n + l - 1)] += kappa * right.g[l];
        }
        a[(row, n)] -= kappa * (left.phi + right.phi) + rate;
    }
    a
}

/// Crank-Nicolson system `A v^{j+1} = B v^j + b^{j}` over the interior nodes.
/// `t_j = T - jτ` runs backward in calendar time.
#[derive(Debug, Clone)]
pub struct CnSystem {
    /// `I - τ/2 𝒜_int`.
    pub lhs: DMatrix<f64>,
    /// `I + τ/2 𝒜_int`.
    pub rhs: DMatrix<f64>,
    /// `τ/2 𝒜[:, 0]`; multiplies `v_0^j + v_0^{j+1}`.
    pub left_boundary: DVector<f64>,
    /// `τ/2 𝒜[:, N_x]`; multiplies `v_N^j + v_N^{j+1}`.
    pub right_boundary: DVector<f64>,
    pub tau: f64,
}

fn cn_from_operator(op: &DMatrix<f64>, tau: f64) -> CnSystem {
    let n_int = op.nrows();
    let n_x = n_int + 1;
    let half = 0.5 * tau;
    let inner = op.columns(1, n_int);
    let eye = DMatrix::<f64>::identity(n_int, n_int);
    CnSystem {
        lhs: &eye - inner * half,
        rhs: &eye + inner * half,
        left_boundary: op.column(0) * half,
        right_boundary: op.column(n_x) * half,
        tau,
    }
}

/// `a + b e^x`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Affine {
    a: f64,
    b: f64,
}

impl Affine {
    fn at(&self, x: f64) -> f64 {
        self.a + self.b * x.exp()
    }
}

/// Solution values on either side of the domain at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct FarValues {
    left: Affine,
    right: Affine,
}

/// Weighted sums of the out-of-domain weights per interior row, already
/// scaled by `C Γ(-Y) h^{-Y}`. `*0` pairs with the constant part of the far
/// values and `*1` with the `e^x` part.
struct Tails {
    l0: DVector<f64>,
    l1: DVector<f64>,
    r0: DVector<f64>,
    r1: DVector<f64>,
}

/// Tempered weights decay like `e^{-l h λ}`; sums stop once that is below
/// `e^{-TAIL_CUTOFF}`.
const TAIL_CUTOFF: f64 = 45.0;
const MAX_TAIL_TERMS: usize = 1_000_000;

/// Suffix sums `Σ_{l >= s} g_l e^{l h growth}` for `s = 0..len`.
fn suffix_sums(g: &[f64], h: f64, growth: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.len() + 1];
    for l in (0..g.len()).rev() {
        out[l] = out[l + 1] + g[l] * (l as f64 * h * growth).exp();
    }
    out
}

fn tail_length(h: f64, decay: f64) -> usize {
    if decay > 0.0 {
        ((TAIL_CUTOFF / (h * decay)).ceil() as usize).min(MAX_TAIL_TERMS)
    } else {
        MAX_TAIL_TERMS
    }
}

impl Tails {
    fn new(params: &CgmyParams, cfg: &WsgdConfig, kappa: f64) -> Result<Self> {
        let (h, n_x) = (cfg.h(), cfg.grid_n);
        let x = cfg.nodes();
        let len_l = n_x + 2 + tail_length(h, params.g);
        let len_r = n_x + 2 + tail_length(h, params.m - 1.0);
        let wl = tempered_weights(params.y, params.g, h, cfg.gamma3, len_l)?;
        let wr = tempered_weights(params.y, params.m, h, cfg.gamma3, len_r)?;
        let (sl0, sl1) = (suffix_sums(&wl.g, h, 0.0), suffix_sums(&wl.g, h, -1.0));
        let (sr0, sr1) = (suffix_sums(&wr.g, h, 0.0), suffix_sums(&wr.g, h, 1.0));
        let rows = 1..n_x;
        // Left: Σ_{l >= n+2} g_l v(x_{n+1-l}); right: Σ_{l >= N-n+2} g_l v(x_{n+l-1}).
        Ok(Tails {
            l0: DVector::from_iterator(n_x - 1, rows.clone().map(|n| kappa * sl0[n + 2])),
            l1: DVector::from_iterator(
                n_x - 1,
                rows.clone().map(|n| kappa * x[n + 1].exp() * sl1[n + 2]),
            ),
            r0: DVector::from_iterator(n_x - 1, rows.clone().map(|n| kappa * sr0[n_x - n + 2])),
            r1: DVector::from_iterator(
                n_x - 1,
                rows.map(|n| kappa * x[n - 1].exp() * sr1[n_x - n + 2]),
            ),
        })
    }

    fn source(&self, far: &FarValues) -> DVector<f64> {
        &self.l0 * far.left.a + &self.l1 * far.left.b + &self.r0 * far.right.a + &self.r1 * far.right.b
    }
}

struct SpatialOperator {
    matrix: DMatrix<f64>,
    tails: Option<Tails>,
    x_left: f64,
    x_right: f64,
}

impl SpatialOperator {
    fn new(params: &CgmyParams, market: &MarketSpec, cfg: &WsgdConfig) -> Result<Self> {
        cfg.validate(params, market.spot)?;
        let h = cfg.h();
        let n_x = cfg.grid_n;
        let left = tempered_weights(params.y, params.g, h, cfg.gamma3, n_x + 1)?;
        let right = tempered_weights(params.y, params.m, h, cfg.gamma3, n_x + 1)?;
        let advection = market.rate - params.convexity_adjustment()?;
        let jump_scale = params.jump_scale()?;
        let tails = match cfg.far_field {
            FarField::Zero => None,
            FarField::Asymptotic => Some(Tails::new(params, cfg, jump_scale * h.powf(-params.y))?),
        };
        Ok(SpatialOperator {
            matrix: operator_matrix(
                n_x,
                h,
                params.y,
                advection,
                market.rate,
                jump_scale,
                &left,
                &right,
            ),
            tails,
            x_left: cfg.x_left,
            x_right: cfg.x_right,
        })
    }
}

/// Builds the Crank-Nicolson matrices for step `tau`.
pub fn assemble_cn_system(
    params: &CgmyParams,
    market: &MarketSpec,
    cfg: &WsgdConfig,
    tau: f64,
) -> Result<CnSystem> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("must be > 0, got {tau}")));
    }
    let op = SpatialOperator::new(params, market, cfg)?;
    Ok(cn_from_operator(&op.matrix, tau))
}

/// LU-factored stepper for one `τ`.
struct Stepper {
    sys: CnSystem,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Stepper {
    fn new(op: &DMatrix<f64>, tau: f64) -> Result<Self> {
        let sys = cn_from_operator(op, tau);
        let lu = sys.lhs.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularMatrix { dim: sys.lhs.nrows() });
        }
        Ok(Stepper { sys, lu })
    }

    /// Advances the full nodal vector `v` (boundaries included) by one step.
    /// `b_old`, `b_new` are the boundary values at the current and next
    /// level; `src` is the out-of-domain source summed over both levels.
    fn step(
        &self,
        v: &mut [f64],
        b_old: (f64, f64),
        b_new: (f64, f64),
        src: Option<&DVector<f64>>,
    ) -> Result<()> {
        let n_x = v.len() - 1;
        let inner = DVector::from_column_slice(&v[1..n_x]);
        let mut rhs = &self.sys.rhs * inner;
        rhs.axpy(b_old.0 + b_new.0, &self.sys.left_boundary, 1.0);
        rhs.axpy(b_old.1 + b_new.1, &self.sys.right_boundary, 1.0);
        if let Some(src) = src {
            rhs.axpy(0.5 * self.sys.tau, src, 1.0);
        }
        if !self.lu.solve_mut(&mut rhs) {
            return Err(Error::SingularMatrix { dim: n_x - 1 });
        }
        v[0] = b_new.0;
        v[1..n_x].copy_from_slice(rhs.as_slice());
        v[n_x] = b_new.1;
        Ok(())
    }
}

/// Contract values outside the domain: the discounted intrinsic value on
/// the in-the-money side and zero on the other.
fn contract_far_values(contract: &ContractSpec, rate: f64, t: f64) -> FarValues {
    let df = contract.strike * (-rate * (contract.expiry - t)).exp();
    let itm = match contract.kind {
        OptionKind::Call => Affine { a: -df, b: 1.0 },
        OptionKind::Put => Affine { a: df, b: -1.0 },
    };
    match contract.kind {
        OptionKind::Call => FarValues { left: Affine::default(), right: itm },
        OptionKind::Put => FarValues { left: itm, right: Affine::default() },
    }
}

/// Marches from `dates[M]` back to `dates[0]`; returns the slices before
/// and after the exercise projection at every date.
fn march(
    op: &SpatialOperator,
    dates: &[f64],
    substeps: usize,
    terminal: Vec<f64>,
    far: &dyn Fn(f64) -> FarValues,
    exercise: Option<&[f64]>,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let m_last = dates.len() - 1;
    let mut cont = vec![Vec::new(); m_last + 1];
    let mut opt = vec![Vec::new(); m_last + 1];
    cont[m_last] = terminal.clone();
    opt[m_last] = terminal.clone();
    let mut v = terminal;
    // Uniform dates share one factorization.
    let mut cache: Option<(f64, Stepper)> = None;
    for m in (1..=m_last).rev() {
        let tau = (dates[m] - dates[m - 1]) / substeps as f64;
        let reuse = matches!(&cache, Some((t, _)) if (t - tau).abs() <= 1e-14 * tau);
        if !reuse {
            cache = Some((tau, Stepper::new(&op.matrix, tau)?));
        }
        let stepper = &cache.as_ref().expect("stepper cached").1;
        let dirichlet = |f: &FarValues| (f.left.at(op.x_left), f.right.at(op.x_right));
        let mut far_old = far(dates[m]);
        for j in 0..substeps {
            let t_new = if j + 1 == substeps {
                dates[m - 1]
            } else {
                dates[m] - (j + 1) as f64 * tau
            };
            let far_new = far(t_new);
            let src = op
                .tails
                .as_ref()
                .map(|tails| tails.source(&far_old) + tails.source(&far_new));
            stepper.step(&mut v, dirichlet(&far_old), dirichlet(&far_new), src.as_ref())?;
            far_old = far_new;
        }
        cont[m - 1] = v.clone();
        if let (Some(payoff), true) = (exercise, m - 1 >= 1) {
            for (vi, &p) in v.iter_mut().zip(payoff) {
                *vi = vi.max(p);
            }
        }
        opt[m - 1] = v.clone();
    }
    Ok((cont, opt))
}

/// Grid solution of the Bermudan problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub x_grid: Vec<f64>,
    /// `t_0, ..., t_M`.
    pub dates: Vec<f64>,
    /// Continuation values before the exercise projection, one slice per date.
    pub cont_values: Vec<Vec<f64>>,
    /// Values after the projection.
    pub option_values: Vec<Vec<f64>>,
    pub contract: ContractSpec,
}

impl GridSolution {
    pub fn h(&self) -> f64 {
        self.x_grid[1] - self.x_grid[0]
    }

    /// Linear interpolation of `cont_values[m]` in `x = ln S`. Outside the
    /// grid the boundary node value is returned and `clamped` is set.
    pub fn continuation_at(&self, m: usize, spot: f64) -> Lookup {
        interpolate(&self.x_grid, &self.cont_values[m], spot.ln())
    }

    /// Same as [`continuation_at`](Self::continuation_at) on the projected slice.
    pub fn value_at(&self, m: usize, spot: f64) -> Lookup {
        interpolate(&self.x_grid, &self.option_values[m], spot.ln())
    }
}

fn interpolate(x: &[f64], v: &[f64], at: f64) -> Lookup {
    let n_x = x.len() - 1;
    let (x0, x_n) = (x[0], x[n_x]);
    if !(at >= x0) {
        return Lookup {
            value: v[0],
            clamped: true,
        };
    }
    if at > x_n {
        return Lookup {
            value: v[n_x],
            clamped: true,
        };
    }
    let h = (x_n - x0) / n_x as f64;
    let i = (((at - x0) / h) as usize).min(n_x - 1);
    let w = ((at - x[i]) / h).clamp(0.0, 1.0);
    Lookup {
        value: if w == 0.0 { v[i] } else { (1.0 - w) * v[i] + w * v[i + 1] },
        clamped: false,
    }
}

/// Solves the Bermudan problem backward from expiry.
pub fn solve_bermudan_grid(
    params: &CgmyParams,
    market: &MarketSpec,
    contract: &ContractSpec,
    schedule: &ExerciseSchedule,
    cfg: &WsgdConfig,
) -> Result<GridSolution> {
    contract.validate()?;
    let op = SpatialOperator::new(params, market, cfg)?;
    let x_grid = cfg.nodes();
    let payoff: Vec<f64> = x_grid.iter().map(|&x| contract.payoff(x.exp())).collect();
    let dates = schedule.grid();
    let far = |t: f64| contract_far_values(contract, market.rate, t);
    let (cont_values, option_values) = march(
        &op,
        &dates,
        cfg.time_steps_per_interval,
        payoff.clone(),
        &far,
        Some(&payoff),
    )?;
    Ok(GridSolution {
        x_grid,
        dates,
        cont_values,
        option_values,
        contract: *contract,
    })
}

/// Terminal data for [`convergence_study_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalData {
    /// The contract payoff with its boundary conditions.
    Payoff,
    /// `exp(-((x - center)/width)^2)` with zero boundary values.
    SmoothBump { center: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub grid_n: usize,
    pub h: f64,
    pub tau: f64,
    pub error: f64,
    /// `log2(e_{k-1} / e_k)`; absent on the first level.
    pub order: Option<f64>,
}

fn european_values(
    params: &CgmyParams,
    market: &MarketSpec,
    contract: &ContractSpec,
    cfg: &WsgdConfig,
    data: TerminalData,
) -> Result<Vec<f64>> {
    let op = SpatialOperator::new(params, market, cfg)?;
    let x = cfg.nodes();
    let dates = [0.0, contract.expiry];
    let (cont, _) = match data {
        TerminalData::Payoff => {
            let terminal = x.iter().map(|&x| contract.payoff(x.exp())).collect();
            let far = |t: f64| contract_far_values(contract, market.rate, t);
            march(&op, &dates, cfg.time_steps_per_interval, terminal, &far, None)?
        }
        TerminalData::SmoothBump { center, width } => {
            let terminal = x
                .iter()
                .map(|&x| (-((x - center) / width).powi(2)).exp())
                .collect();
            march(&op, &dates, cfg.time_steps_per_interval, terminal, &|_| FarValues::default(), None)?
        }
    };
    Ok(cont.into_iter().next().expect("t_0 slice"))
}

/// Convergence of the European solver with the contract payoff.
pub fn convergence_study(
    params: &CgmyParams,
    market: &MarketSpec,
    contract: &ContractSpec,
    cfg: &WsgdConfig,
    levels: usize,
) -> Result<Vec<ConvergenceRow>> {
    convergence_study_with(params, market, contract, cfg, levels, TerminalData::Payoff)
}

/// Runs the European solver on `levels` dyadic refinements of `cfg`
/// (`N_x` and the number of time steps both doubled, so `τ ∝ h`) and
/// measures each against a reference two levels finer than the last, in
/// the discrete norm `sqrt(h Σ e_n²)` over the coarse interior nodes.
pub fn convergence_study_with(
    params: &CgmyParams,
    market: &MarketSpec,
    contract: &ContractSpec,
    cfg: &WsgdConfig,
    levels: usize,
    data: TerminalData,
) -> Result<Vec<ConvergenceRow>> {
    if levels < 3 {
        return Err(Error::invalid("levels", format!("must be >= 3, got {levels}")));
    }
    contract.validate()?;
    let refine = |k: usize| WsgdConfig {
        grid_n: cfg.grid_n << k,
        time_steps_per_interval: cfg.time_steps_per_interval << k,
        ..*cfg
    };
    let ref_level = levels + 1;
    let reference = european_values(params, market, contract, &refine(ref_level), data)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for k in 0..levels {
        let level_cfg = refine(k);
        let v = european_values(params, market, contract, &level_cfg, data)?;
        let stride = 1usize << (ref_level - k);
        let h = level_cfg.h();
        let sq: f64 = (1..level_cfg.grid_n)
            .map(|n| (v[n] - reference[n * stride]).powi(2))
            .sum();
        let error = (h * sq).sqrt();
        let order = rows.last().map(|prev| (prev.error / error).log2());
        rows.push(ConvergenceRow {
            grid_n: level_cfg.grid_n,
            h,
            tau: contract.expiry / level_cfg.time_steps_per_interval as f64,
            error,
            order,
        });
    }
    Ok(rows)
}
