mod common;

use std::sync::Arc;

use common::*;
use twogrid::mms::{ManufacturedCase, PolyStream};
use twogrid::stepper::{coarse_step, fine_step, init_state, FineConvection, FineMethod, Level, SchemeConfig, TimeScheme};
use twogrid::{ElementFamily, Error, Mesh, MixedSpace};

fn u0(x: f64, y: f64) -> [f64; 2] {
    PolyStream.velocity(0.0, x, y)
}

fn forcing(t: f64, x: f64, y: f64) -> [f64; 2] {
    simple_forcing(t, x, y)
}

/// Two coarse steps (backward Euler start, then BDF2) against the dense
/// Newton oracle.
fn check_coarse(family: ElementFamily, n: usize) {
    let sp = MixedSpace::new(unit_square(n), family);
    let cfg = SchemeConfig::new(TimeScheme::Bdf2, 0.2, 2).unwrap();
    let oracle = DenseOracle::new(&sp);
    let mut level = Level::new(Arc::clone(&sp));
    let mut cur = init_state(u0, &sp, None).unwrap().coarse;
    for step in 1..=2 {
        let t = cfg.time(step);
        let next = coarse_step(&mut level, &cur, &cfg, &forcing, t).unwrap();
        let (u, p) = coarse_step_oracle(&oracle, &cur, &cfg, &|x, y| forcing(t, x, y)).expect("oracle solvable");
        let du = max_diff(next.velocity.coefficients(), &u);
        let dp = max_diff(next.pressure.as_ref().unwrap().coefficients(), &p);
        assert!(du <= 1e-9 && dp <= 1e-9, "{family} n={n} step {step}: du={du:e} dp={dp:e}");
        cur = next;
    }
}

#[test]
fn coarse_steps_match_dense_newton_mini() {
    check_coarse(ElementFamily::Mini, 1);
}

#[test]
fn coarse_steps_match_dense_newton_taylor_hood() {
    check_coarse(ElementFamily::TaylorHood2, 2);
}

fn check_fine(family: ElementFamily, coarse_n: usize, method: FineMethod, convection: FineConvection) {
    let chain = Mesh::refined_chain(coarse_n, 1).unwrap();
    let coarse = MixedSpace::new(Arc::clone(&chain[0]), family);
    let fine = MixedSpace::new(Arc::clone(&chain[1]), family);
    let cfg = SchemeConfig::new(TimeScheme::Bdf2, 0.2, 2)
        .unwrap()
        .with_fine_convection(convection);
    let oracle = DenseOracle::new(&fine);
    let mut cl = Level::new(Arc::clone(&coarse));
    let mut fl = Level::new(Arc::clone(&fine));
    let state = init_state(u0, &coarse, Some(&fine)).unwrap();
    let (mut c, mut f) = (state.coarse, state.fine.unwrap());
    for step in 1..=2 {
        let t = cfg.time(step);
        let c_next = coarse_step(&mut cl, &c, &cfg, &forcing, t).unwrap();
        let f_next = fine_step(method, &mut fl, &f, &c_next.velocity, &cfg, &forcing, t).unwrap();
        let (u, p) = fine_step_oracle(&oracle, method, &f, &c_next.velocity, &cfg, &|x, y| forcing(t, x, y))
            .expect("oracle solvable");
        let du = max_diff(f_next.velocity.coefficients(), &u);
        let dp = max_diff(f_next.pressure.as_ref().unwrap().coefficients(), &p);
        assert!(du <= 1e-10 && dp <= 1e-10, "{family} {method:?} step {step}: du={du:e} dp={dp:e}");
        c = c_next;
        f = f_next;
    }
}

#[test]
fn fine_oseen_matches_dense_solve() {
    for conv in [FineConvection::Plain, FineConvection::Skew] {
        check_fine(ElementFamily::Mini, 1, FineMethod::Oseen, conv);
        check_fine(ElementFamily::TaylorHood2, 2, FineMethod::Oseen, conv);
    }
}

#[test]
fn fine_newton_matches_dense_solve() {
    check_fine(ElementFamily::Mini, 1, FineMethod::Newton, FineConvection::Plain);
    check_fine(ElementFamily::TaylorHood2, 2, FineMethod::Newton, FineConvection::Plain);
}

#[test]
fn fine_dpp_matches_dense_solve() {
    check_fine(ElementFamily::Mini, 1, FineMethod::Dpp, FineConvection::Plain);
    check_fine(ElementFamily::TaylorHood2, 2, FineMethod::Dpp, FineConvection::Plain);
}

#[test]
fn single_cell_taylor_hood_is_pressure_singular() {
    let sp = MixedSpace::new(unit_square(1), ElementFamily::TaylorHood2);
    assert_eq!(sp.free_velocity_dofs(), 2);
    let oracle = DenseOracle::new(&sp);
    let identity: Dense = (0..sp.velocity_dofs())
        .map(|i| (0..sp.velocity_dofs()).map(|j| f64::from(i == j)).collect())
        .collect();
    assert!(oracle.linear_saddle(&identity, &vec![0.0; sp.velocity_dofs()]).is_none());

    let cfg = SchemeConfig::new(TimeScheme::BackwardEuler, 0.1, 1).unwrap();
    let mut level = Level::new(Arc::clone(&sp));
    let cur = init_state(u0, &sp, None);
    let err = match cur {
        Err(e) => e,
        Ok(s) => coarse_step(&mut level, &s.coarse, &cfg, &forcing, 0.1).unwrap_err(),
    };
    assert!(matches!(err, Error::SingularBlock { block: "pressure" }), "{err}");
}
