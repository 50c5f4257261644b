//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cgmy_xva::model::CgmyParams;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Asymptotic Kolmogorov critical value at the 1% level.
pub const KS_CRIT_1PCT: f64 = 1.6276;

/// `max_z |φ_emp(z) - φ(z, dt)|` over 101 points of `[-50, 50]`.
pub fn cf_max_error(params: &CgmyParams, dt: f64, draws: &[f64]) -> f64 {
    let n = draws.len() as f64;
    (0..=100)
        .map(|k| {
            let z = -50.0 + k as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for &x in draws {
                let (s, c) = (z * x).sin_cos();
                re += c;
                im += s;
            }
            let emp = Complex64::new(re / n, im / n);
            (emp - params.characteristic_function(z, dt).unwrap()).norm()
        })
        .fold(0.0, f64::max)
}

/// CDF of `L_dt` on a uniform grid of `[-half_width, half_width)`, from the
/// characteristic function by one inverse FFT and a trapezoid sum.
pub struct FourierCdf {
    x0: f64,
    dx: f64,
    cdf: Vec<f64>,
}

impl FourierCdf {
    pub fn new(params: &CgmyParams, dt: f64, half_width: f64, n: usize) -> Self {
        let dx = 2.0 * half_width / n as f64;
        let dz = 2.0 * std::f64::consts::PI / (n as f64 * dx);
        let x0 = -half_width;
        // f(x_j) = dz/2π Σ_k φ(z_k) e^{-i z_k x_j}, z_k = (k - n/2) dz, x_j = x0 + j dx
        let mut buf: Vec<Complex64> = (0..n)
            .map(|k| {
                let z = (k as f64 - (n / 2) as f64) * dz;
                params.characteristic_function(z, dt).unwrap() * Complex64::from_polar(1.0, -z * x0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let density: Vec<f64> = buf
            .iter()
            .enumerate()
            .map(|(j, v)| {
                // e^{-i (k - n/2) dz j dx} = e^{-2πi kj/n} e^{iπj}
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * v.re * dz / (2.0 * std::f64::consts::PI)
            })
            .collect();
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dx;
            cdf.push(acc);
        }
        FourierCdf { x0, dx, cdf }
    }

    pub fn total_mass(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    pub fn at(&self, x: f64) -> f64 {
        let u = (x - self.x0) / self.dx;
        if u <= 0.0 {
            return 0.0;
        }
        let i = u.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return self.total_mass();
        }
        let w = u - i as f64;
        (1.0 - w) * self.cdf[i] + w * self.cdf[i + 1]
    }
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic(draws: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = draws.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// European call by the Lewis single-integral formula
/// `C = S0 - sqrt(S0 K) e^{-rT}/π ∫_0^∞ Re[e^{iuk} φ_X(u - i/2)] / (u² + 1/4) du`
/// with `k = ln(S0/K)` and `X = ln(S_T/S0)` under the mean-corrected CGMY law.
pub fn lewis_call(params: &CgmyParams, s0: f64, strike: f64, rate: f64, t: f64) -> f64 {
    let CgmyParams { c, g, m, y } = *params;
    let scale = c * cgmy_xva::special::gamma(-y);
    let psi = |z: Complex64| {
        let i = Complex64::i();
        scale * ((m - i * z).powf(y) - m.powf(y) + (g + i * z).powf(y) - g.powf(y))
    };
    let nu = psi(Complex64::new(0.0, -1.0)).re;
    let k = (s0 / strike).ln();
    let integrand = |u: f64| {
        let z = Complex64::new(u, -0.5);
        let log_phi = Complex64::i() * z * (rate - nu) * t + t * psi(z);
        (Complex64::new(0.0, u * k) + log_phi).exp().re / (u * u + 0.25)
    };
    let (upper, panels) = (2_000.0, 400_000);
    let h = upper / panels as f64;
    let mut s = integrand(0.0) + integrand(upper);
    for j in 1..panels {
        s += integrand(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    s0 - (s0 * strike).sqrt() * (-rate * t).exp() / std::f64::consts::PI * s * h / 3.0
}
