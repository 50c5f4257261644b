//! Pathwise exposures of a Bermudan option and their aggregation into
//! expected-exposure and potential-future-exposure profiles.

use rayon::prelude::*;

use crate::cos::CosState;
use crate::error::{Error, Result};
use crate::fpde::GridSolution;
use crate::model::{ContractSpec, ExerciseSchedule, MarketSpec};
use crate::simulate::PathMatrix;

/// A continuation value, with a flag set when the price was outside the
/// engine's domain and had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    pub clamped: bool,
}

/// Anything that can price the continuation value `V^c(S, t_m)` for
/// `m = 0..=M`.
pub trait ContinuationEngine: Sync {
    fn continuation(&self, m: usize, spot: f64) -> Lookup;
}

impl ContinuationEngine for GridSolution {
    fn continuation(&self, m: usize, spot: f64) -> Lookup {
        self.continuation_at(m, spot)
    }
}

impl ContinuationEngine for CosState {
    fn continuation(&self, m: usize, spot: f64) -> Lookup {
        self.continuation_at(m, spot)
    }
}

/// `E_i(t_m)` for every path and date.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureMatrix {
    values: Vec<f64>,
    n_paths: usize,
    n_dates: usize,
    /// First exercise date index of each path, if any.
    pub exercised_at: Vec<Option<usize>>,
    /// Number of continuation lookups that fell outside the engine domain.
    pub clamped: usize,
}

impl ExposureMatrix {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    pub fn row(&self, path: usize) -> &[f64] {
        &self.values[path * self.n_dates..(path + 1) * self.n_dates]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_dates)
    }

    pub fn column(&self, date: usize) -> Vec<f64> {
        self.rows().map(|r| r[date]).collect()
    }

    /// Fraction of paths exercised before expiry.
    pub fn exercised_fraction(&self) -> f64 {
        self.exercised_at.iter().filter(|e| e.is_some()).count() as f64 / self.n_paths as f64
    }
}

/// Walks each path forward: `E(t_0) = V^c(S_0, t_0)`; at `t_1 .. t_{M-1}`
/// the holder exercises at the first date with `payoff >= V^c` and the
/// exposure is zero from then on; otherwise the exposure is `max(V^c, 0)`.
/// `E(t_M) = 0`.
///
/// Ties count as exercise, including the out-of-the-money case where the
/// engine's continuation value has decayed to zero or below.
pub fn path_exposures<E: ContinuationEngine + ?Sized>(
    paths: &PathMatrix,
    engine: &E,
    contract: &ContractSpec,
    schedule: &ExerciseSchedule,
) -> Result<ExposureMatrix> {
    let m_last = schedule.num_exercises();
    let n_dates = m_last + 1;
    if paths.n_dates() != n_dates {
        return Err(Error::invalid(
            "paths",
            format!(
                "path matrix has {} dates, schedule needs {n_dates}",
                paths.n_dates()
            ),
        ));
    }
    let n_paths = paths.n_paths();
    let mut values = vec![0.0; n_paths * n_dates];
    let per_path: Vec<(Option<usize>, usize)> = values
        .par_chunks_mut(n_dates)
        .enumerate()
        .map(|(i, out)| {
            let row = paths.row(i);
            let mut clamped = 0;
            let first = engine.continuation(0, row[0]);
            clamped += first.clamped as usize;
            out[0] = first.value.max(0.0);
            for m in 1..m_last {
                let s = row[m];
                let look = engine.continuation(m, s);
                clamped += look.clamped as usize;
                if contract.payoff(s) >= look.value {
                    return (Some(m), clamped);
                }
                out[m] = look.value.max(0.0);
            }
            (None, clamped)
        })
        .collect();
    let clamped = per_path.iter().map(|p| p.1).sum();
    Ok(ExposureMatrix {
        values,
        n_paths,
        n_dates,
        exercised_at: per_path.into_iter().map(|p| p.0).collect(),
        clamped,
    })
}

/// Aggregated exposure profile over `t_0 .. t_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureProfile {
    pub dates: Vec<f64>,
    pub ee: Vec<f64>,
    /// `e^{-r t_m} EE(t_m)`.
    pub ee_star: Vec<f64>,
    pub epe: Vec<f64>,
    pub ene: Vec<f64>,
    /// `(α, PFE_α(t_m))` per requested level.
    pub pfe: Vec<(f64, Vec<f64>)>,
}

impl ExposureProfile {
    pub fn pfe_at(&self, alpha: f64) -> Option<&[f64]> {
        self.pfe
            .iter()
            .find(|(a, _)| (a - alpha).abs() < 1e-12)
            .map(|(_, v)| v.as_slice())
    }
}

/// 1-based rank `ceil(α n)` of the generalized inverse, at least 1.
fn quantile_rank(alpha: f64, n: usize) -> usize {
    let t = alpha * n as f64;
    let k = if (t - t.round()).abs() < 1e-9 * t.max(1.0) {
        t.round()
    } else {
        t.ceil()
    };
    (k as usize).clamp(1, n)
}

/// `PFE_α = inf{x : P(E <= x) >= α}` on the empirical distribution.
pub fn empirical_quantile(sorted: &[f64], alpha: f64) -> f64 {
    sorted[quantile_rank(alpha, sorted.len()) - 1]
}

/// Sample mean taken around the first sample, so identical samples give
/// that sample back exactly.
fn shifted_mean(xs: &[f64]) -> f64 {
    let c = xs[0];
    c + xs.iter().map(|x| x - c).sum::<f64>() / xs.len() as f64
}

/// EE, discounted EE and the requested PFE quantiles per date.
pub fn aggregate(
    em: &ExposureMatrix,
    market: &MarketSpec,
    dates: &[f64],
    alphas: &[f64],
) -> Result<ExposureProfile> {
    if dates.len() != em.n_dates() {
        return Err(Error::invalid("dates", "one date per exposure column"));
    }
    if em.n_paths() == 0 {
        return Err(Error::invalid("exposures", "need at least one path"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {a}")));
    }
    let mut ee = Vec::with_capacity(dates.len());
    let mut pfe: Vec<(f64, Vec<f64>)> = alphas.iter().map(|&a| (a, Vec::new())).collect();
    for m in 0..dates.len() {
        let mut col = em.column(m);
        ee.push(shifted_mean(&col));
        col.sort_by(f64::total_cmp);
        for (alpha, curve) in pfe.iter_mut() {
            curve.push(empirical_quantile(&col, *alpha));
        }
    }
    let ee_star = ee
        .iter()
        .zip(dates)
        .map(|(e, &t)| market.discount(t) * e)
        .collect();
    Ok(ExposureProfile {
        dates: dates.to_vec(),
        epe: ee.clone(),
        ene: vec![0.0; dates.len()],
        ee,
        ee_star,
        pfe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OptionKind, SpreadCurve};

    fn market() -> MarketSpec {
        MarketSpec {
            spot: 40.0,
            rate: 0.05,
            credit_spread: SpreadCurve::flat(0.01),
            funding_spread: SpreadCurve::flat(0.005),
            recovery_rate: 0.4,
        }
    }

    /// `V^c = S / 10` at every date.
    struct Linear;

    impl ContinuationEngine for Linear {
        fn continuation(&self, _m: usize, spot: f64) -> Lookup {
            Lookup {
                value: spot / 10.0,
                clamped: spot > 100.0,
            }
        }
    }

    fn put() -> ContractSpec {
        ContractSpec {
            strike: 40.0,
            expiry: 1.0,
            num_exercises: 4,
            kind: OptionKind::Put,
        }
    }

    #[test]
    fn exercise_on_first_date_zeroes_the_row() {
        let dates = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let rows = vec![vec![40.0, 20.0, 50.0, 60.0, 70.0]];
        let p = PathMatrix::from_rows(dates, &rows, 0).unwrap();
        let c = put();
        let em = path_exposures(&p, &Linear, &c, &c.schedule().unwrap()).unwrap();
        assert_eq!(em.row(0), &[4.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(em.exercised_at, vec![Some(1)]);
    }

    #[test]
    fn unexercised_path_follows_continuation() {
        let dates = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let rows = vec![vec![40.0, 45.0, 50.0, 120.0, 30.0]];
        let p = PathMatrix::from_rows(dates, &rows, 0).unwrap();
        let c = put();
        let em = path_exposures(&p, &Linear, &c, &c.schedule().unwrap()).unwrap();
        assert_eq!(em.row(0), &[4.0, 4.5, 5.0, 12.0, 0.0]);
        assert_eq!(em.exercised_at, vec![None]);
        assert_eq!(em.clamped, 1);
    }

    struct Flat(f64);

    impl ContinuationEngine for Flat {
        fn continuation(&self, _m: usize, _spot: f64) -> Lookup {
            Lookup {
                value: self.0,
                clamped: false,
            }
        }
    }

    #[test]
    fn tie_exercises() {
        let c = put();
        assert_eq!(c.payoff(36.0), 4.0);
        let rows = vec![vec![40.0, 36.0, 50.0, 50.0, 50.0]];
        let p = PathMatrix::from_rows(vec![0.0, 0.25, 0.5, 0.75, 1.0], &rows, 0).unwrap();
        let em = path_exposures(&p, &Flat(4.0), &c, &c.schedule().unwrap()).unwrap();
        assert_eq!(em.exercised_at, vec![Some(1)]);
    }

    #[test]
    fn worthless_continuation_exercises_at_zero_payoff() {
        let c = put();
        let rows = vec![vec![40.0, 60.0, 45.0, 30.0, 30.0]];
        let p = PathMatrix::from_rows(vec![0.0, 0.25, 0.5, 0.75, 1.0], &rows, 0).unwrap();
        let em = path_exposures(&p, &Flat(-1e-12), &c, &c.schedule().unwrap()).unwrap();
        assert_eq!(em.exercised_at, vec![Some(1)]);
        assert_eq!(em.row(0), &[0.0; 5]);
    }

    #[test]
    fn negative_continuation_is_floored() {
        let c = put();
        let rows = vec![vec![40.0, 30.0, 30.0, 30.0, 30.0]];
        let p = PathMatrix::from_rows(vec![0.0, 0.25, 0.5, 0.75, 1.0], &rows, 0).unwrap();
        let em = path_exposures(&p, &Flat(-0.5), &c, &c.schedule().unwrap()).unwrap();
        assert_eq!(em.exercised_at, vec![Some(1)]);
        assert_eq!(em.row(0)[0], 0.0);
    }

    #[test]
    fn schedule_mismatch_is_rejected() {
        let rows = vec![vec![40.0, 41.0]];
        let p = PathMatrix::from_rows(vec![0.0, 1.0], &rows, 0).unwrap();
        let c = put();
        assert!(path_exposures(&p, &Linear, &c, &c.schedule().unwrap()).is_err());
    }

    fn matrix(rows: &[Vec<f64>]) -> ExposureMatrix {
        ExposureMatrix {
            values: rows.iter().flatten().copied().collect(),
            n_paths: rows.len(),
            n_dates: rows[0].len(),
            exercised_at: vec![None; rows.len()],
            clamped: 0,
        }
    }

    #[test]
    fn constant_exposure_profile() {
        let em = matrix(&vec![vec![3.3, 3.3]; 7]);
        let prof = aggregate(&em, &market(), &[0.0, 1.0], &[0.025, 0.975]).unwrap();
        assert_eq!(prof.ee, vec![3.3, 3.3]);
        assert_eq!(prof.pfe_at(0.025).unwrap(), &[3.3, 3.3]);
        assert_eq!(prof.pfe_at(0.975).unwrap(), &[3.3, 3.3]);
        assert_eq!(prof.ene, vec![0.0, 0.0]);
        assert_eq!(prof.ee_star[1], 3.3 * (-0.05f64).exp());
    }

    #[test]
    fn two_point_quantiles() {
        let em = matrix(&[vec![0.0], vec![10.0]]);
        let prof = aggregate(&em, &market(), &[0.0], &[0.025, 0.975]).unwrap();
        assert_eq!(prof.ee, vec![5.0]);
        assert_eq!(prof.pfe_at(0.025).unwrap(), &[0.0]);
        assert_eq!(prof.pfe_at(0.975).unwrap(), &[10.0]);
    }

    #[test]
    fn quantile_rank_is_ceiling() {
        assert_eq!(quantile_rank(0.025, 10_000), 250);
        assert_eq!(quantile_rank(0.975, 10_000), 9750);
        assert_eq!(quantile_rank(0.5, 3), 2);
        assert_eq!(quantile_rank(0.01, 3), 1);
        assert_eq!(quantile_rank(0.999, 3), 3);
    }

    #[test]
    fn alpha_outside_unit_interval_is_rejected() {
        let em = matrix(&[vec![1.0]]);
        assert!(aggregate(&em, &market(), &[0.0], &[1.0]).is_err());
        assert!(aggregate(&em, &market(), &[0.0, 1.0], &[0.5]).is_err());
    }
}
