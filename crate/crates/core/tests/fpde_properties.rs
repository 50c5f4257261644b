//! Properties of the tempered WSGD weights and of the grid solver.

use cgmy_xva::fpde::{
    apply_left_operator, apply_right_operator, convergence_study_with, gamma_coefficients,
    solve_bermudan_grid, tempered_weights, TerminalData, WsgdConfig,
};
use cgmy_xva::model::{CgmyParams, ContractSpec, ExerciseSchedule, MarketSpec, OptionKind, SpreadCurve};
use proptest::prelude::*;

fn market() -> MarketSpec {
    MarketSpec {
        spot: 40.0,
        rate: 0.05,
        credit_spread: SpreadCurve::flat(0.01),
        funding_spread: SpreadCurve::flat(0.005),
        recovery_rate: 0.4,
    }
}

fn contract(strike: f64, m: usize, kind: OptionKind) -> ContractSpec {
    ContractSpec {
        strike,
        expiry: 1.0,
        num_exercises: m,
        kind,
    }
}

fn value_at_spot(c: &ContractSpec, cfg: &WsgdConfig) -> f64 {
    let sol = solve_bermudan_grid(
        &CgmyParams::reference(),
        &market(),
        c,
        &ExerciseSchedule::uniform(c.expiry, c.num_exercises),
        cfg,
    )
    .unwrap();
    sol.value_at(0, 40.0).value
}

fn coarse() -> WsgdConfig {
    WsgdConfig {
        grid_n: 256,
        time_steps_per_interval: 4,
        ..WsgdConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn phi_is_nonnegative(
        y in 1.0f64..2.0,
        s in 0.0f64..=1.0,
        hl in 0.0f64..=10.0,
    ) {
        prop_assume!(y > 1.0);
        let gamma3 = -y / 2.0 + s * (2.0 + y / 2.0);
        let w = tempered_weights(y, hl, 1.0, gamma3, 2).unwrap();
        prop_assert!(w.phi >= 0.0, "phi = {} at Y={y}, γ3={gamma3}, hλ={hl}", w.phi);
    }

    #[test]
    fn gamma_coefficients_sum_to_one(y in 1.0f64..2.0, s in 0.0f64..=1.0) {
        let gamma3 = -y / 2.0 + s * (2.0 + y / 2.0);
        let (g1, g2, g3) = gamma_coefficients(y, gamma3);
        prop_assert!((g1 + g2 + g3 - 1.0).abs() <= 4.0 * f64::EPSILON);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_are_mirror_images(
        y in 1.05f64..1.95,
        lambda in 0.0f64..30.0,
        v in prop::collection::vec(-5.0f64..5.0, 9..40),
    ) {
        let n = v.len() - 1;
        let h = 0.05;
        let w = tempered_weights(y, lambda, h, 0.0, n).unwrap();
        let left = apply_left_operator(&w, &v, h, y);
        let reversed: Vec<f64> = v.iter().rev().copied().collect();
        let mut right = apply_right_operator(&w, &reversed, h, y);
        right.reverse();
        prop_assert_eq!(left, right);
    }
}

#[test]
fn weights_are_summable_on_desk_grids() {
    let p = CgmyParams::reference();
    for grid_n in [512usize, 1024, 2048] {
        let cfg = WsgdConfig {
            grid_n,
            ..WsgdConfig::default()
        };
        for lambda in [p.g, p.m] {
            let w = tempered_weights(p.y, lambda, cfg.h(), 0.0, grid_n).unwrap();
            let mut tail: f64 = w.g.iter().map(|g| g.abs()).sum();
            let mut prev = f64::INFINITY;
            let mut below = None;
            for (l, g) in w.g.iter().enumerate() {
                assert!(tail <= prev);
                prev = tail;
                if tail < 1e-12 {
                    below = Some(l);
                    break;
                }
                tail -= g.abs();
            }
            assert!(below.is_some(), "tail of |g_l| above 1e-12 at N_x = {grid_n}");
        }
    }
}

#[test]
fn bermudan_dominates_european() {
    for kind in [OptionKind::Call, OptionKind::Put] {
        let euro = value_at_spot(&contract(40.0, 1, kind), &coarse());
        let berm = value_at_spot(&contract(40.0, 10, kind), &coarse());
        assert!(berm >= euro, "{kind:?}: {berm} < {euro}");
    }
}

#[test]
fn call_value_decreases_with_strike() {
    let v40 = value_at_spot(&contract(40.0, 10, OptionKind::Call), &coarse());
    let v50 = value_at_spot(&contract(50.0, 10, OptionKind::Call), &coarse());
    assert!(v40 >= v50 && v50 > 0.0);
}

#[test]
fn grid_solution_invariants() {
    let c = contract(50.0, 10, OptionKind::Call);
    let cfg = coarse();
    let sol = solve_bermudan_grid(
        &CgmyParams::reference(),
        &market(),
        &c,
        &ExerciseSchedule::uniform(1.0, 10),
        &cfg,
    )
    .unwrap();
    let n_x = cfg.grid_n;
    for (m, (cont, opt)) in sol.cont_values.iter().zip(&sol.option_values).enumerate() {
        let t = sol.dates[m];
        assert_eq!(cont[0], 0.0);
        let right = sol.x_grid[n_x].exp() - 50.0 * (-0.05 * (1.0 - t)).exp();
        assert!((cont[n_x] - right).abs() < 1e-9 * right, "m={m}");
        for (i, (&c_v, &o_v)) in cont.iter().zip(opt).enumerate() {
            assert!(o_v >= c_v);
            if m >= 1 {
                assert!(o_v >= c.payoff(sol.x_grid[i].exp()));
            }
        }
    }
}

#[test]
fn smooth_data_converges_at_second_order() {
    let cfg = WsgdConfig {
        grid_n: 256,
        time_steps_per_interval: 8,
        ..WsgdConfig::default()
    };
    let rows = convergence_study_with(
        &CgmyParams::reference(),
        &market(),
        &contract(40.0, 1, OptionKind::Call),
        &cfg,
        3,
        TerminalData::SmoothBump {
            center: 40f64.ln(),
            width: 1.0,
        },
    )
    .unwrap();
    let order = rows.last().unwrap().order.unwrap();
    assert!((1.8..=2.2).contains(&order), "{rows:?}");
    assert!(rows[0].error > rows[rows.len() - 1].error);
}

#[test]
fn refining_time_alone_plateaus_at_the_spatial_error() {
    let c = contract(40.0, 1, OptionKind::Call);
    let reference = value_at_spot(
        &c,
        &WsgdConfig {
            grid_n: 2048,
            time_steps_per_interval: 64,
            ..WsgdConfig::default()
        },
    );
    let errors: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&steps| {
            let cfg = WsgdConfig {
                grid_n: 512,
                time_steps_per_interval: steps,
                ..WsgdConfig::default()
            };
            (value_at_spot(&c, &cfg) - reference).abs()
        })
        .collect();
    let steps: Vec<f64> = errors.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(steps.windows(2).all(|s| s[1] < s[0]), "{errors:?}");
    let last = errors[errors.len() - 1];
    assert!(steps[steps.len() - 1] < 0.05 * last, "{errors:?}");
}
