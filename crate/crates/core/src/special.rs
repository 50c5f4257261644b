//! Gamma function on the whole real line, NaN at the poles.

/// Γ(x). Returns NaN at the poles `0, -1, -2, ...`.
pub fn gamma(x: f64) -> f64 {
    if is_gamma_pole(x) {
        return f64::NAN;
    }
    statrs::function::gamma::gamma(x)
}

/// True when `x` is a pole of Γ.
pub fn is_gamma_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}
