use std::sync::Arc;

use proptest::prelude::*;
use twogrid::assembly::{assemble_operators, mass_norm, trilinear_b, Assembler};
use twogrid::harness::estimate_rate;
use twogrid::{ElementFamily, FeFunction, FieldKind, Mesh, MixedSpace};

fn family(i: usize) -> ElementFamily {
    [ElementFamily::Mini, ElementFamily::TaylorHood2][i]
}

fn masked(sp: &Arc<MixedSpace>, raw: &[f64]) -> FeFunction {
    let mut c: Vec<f64> = (0..sp.velocity_dofs()).map(|i| raw[i % raw.len()] * (1.0 + (i % 7) as f64)).collect();
    sp.apply_mask(&mut c);
    FeFunction::from_coefficients(Arc::clone(sp), FieldKind::Velocity, c).unwrap()
}

fn h1(sp: &Arc<MixedSpace>, u: &FeFunction) -> f64 {
    let ops = assemble_operators(sp);
    let c = u.coefficients();
    (mass_norm(&ops.mass, c).powi(2) + mass_norm(&ops.stiffness, c).powi(2)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trilinear_form_is_skew(
        fam in 0usize..2,
        level in 1usize..3,
        a in prop::collection::vec(-1.0f64..1.0, 11),
        b in prop::collection::vec(-1.0f64..1.0, 13),
        c in prop::collection::vec(-1.0f64..1.0, 17),
    ) {
        let sp = MixedSpace::new(Mesh::unit_square(1 << level).unwrap(), family(fam));
        let (u, v, w) = (masked(&sp, &a), masked(&sp, &b), masked(&sp, &c));
        let s = trilinear_b(&u, &v, &w).unwrap() + trilinear_b(&u, &w, &v).unwrap();
        let bound = 1e-12 * (1.0 + h1(&sp, &u) * h1(&sp, &v) * h1(&sp, &w));
        prop_assert!(s.abs() <= bound, "{} > {}", s.abs(), bound);
        prop_assert!(trilinear_b(&u, &v, &v).unwrap().abs() <= bound);
    }

    #[test]
    fn convection_matrix_reproduces_trilinear_form(
        fam in 0usize..2,
        a in prop::collection::vec(-1.0f64..1.0, 5),
        b in prop::collection::vec(-1.0f64..1.0, 7),
        c in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let sp = MixedSpace::new(Mesh::unit_square(3).unwrap(), family(fam));
        let (u, v, w) = (masked(&sp, &a), masked(&sp, &b), masked(&sp, &c));
        let asm = Assembler::new(Arc::clone(&sp));
        let n = asm.advection(&u.sample_on(&sp).unwrap(), 0.5);
        let via_matrix = n.bilinear(w.coefficients(), v.coefficients());
        let direct = trilinear_b(&u, &v, &w).unwrap();
        prop_assert!((via_matrix - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn operators_are_symmetric_and_positive(fam in 0usize..2, n in 1usize..6, x in prop::collection::vec(-1.0f64..1.0, 9)) {
        let sp = MixedSpace::new(Mesh::unit_square(n).unwrap(), family(fam));
        let ops = assemble_operators(&sp);
        prop_assert_eq!(ops.mass.asymmetry(), 0.0);
        prop_assert_eq!(ops.stiffness.asymmetry(), 0.0);
        prop_assert_eq!(ops.pressure_mass.asymmetry(), 0.0);
        let u = masked(&sp, &x);
        if u.coefficients().iter().any(|&v| v != 0.0) {
            prop_assert!(ops.mass.bilinear(u.coefficients(), u.coefficients()) > 0.0);
            prop_assert!(ops.stiffness.bilinear(u.coefficients(), u.coefficients()) > 0.0);
        }
        let total: f64 = ops.pressure_mass.values().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_of_exact_power_law(p in 0.25f64..4.0, c in 1e-6f64..1e3) {
        let h = [0.5f64, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|x| c * x.powf(p)).collect();
        prop_assert!((estimate_rate(&e, &h).unwrap() - p).abs() < 1e-10);
    }
}

#[test]
fn stiffness_rows_annihilate_constants_before_masking() {
    // Rows of free dofs not coupled to the boundary see only free columns.
    let sp = MixedSpace::new(Mesh::unit_square(6).unwrap(), ElementFamily::TaylorHood2);
    let ops = assemble_operators(&sp);
    let mask = sp.dirichlet_mask();
    for r in 0..sp.velocity_dofs() {
        if mask[r] || ops.stiffness.row(r).any(|(c, _)| mask[c]) {
            continue;
        }
        let s: f64 = ops.stiffness.row(r).filter(|(c, _)| c % 2 == r % 2).map(|(_, v)| v).sum();
        assert!(s.abs() < 1e-12, "row {r}: {s:e}");
    }
}

#[test]
fn divergence_of_discrete_gradient_free_field() {
    // (q, div u) = -(grad q, u) for masked u; both sides assembled independently
    let sp = MixedSpace::new(Mesh::unit_square(4).unwrap(), ElementFamily::Mini);
    let ops = assemble_operators(&sp);
    let u = masked(&sp, &[0.3, -0.7, 1.1, 0.2]);
    let q = FeFunction::interpolate_pressure(Arc::clone(&sp), |x, y| x * x - y);
    let lhs = ops.divergence.bilinear(q.coefficients(), u.coefficients());
    let rule = sp.rule();
    let fu = u.sample_on(&sp).unwrap();
    let fq = q.sample_on(&sp).unwrap();
    let mut rhs = 0.0;
    for t in 0..sp.num_elements() {
        let area = sp.mesh().geometry()[t].area;
        for (k, w) in rule.weights().iter().enumerate() {
            let (a, b) = (fu.at(t, k), fq.at(t, k));
            rhs -= w * area * (b.gradient[0][0] * a.value[0] + b.gradient[0][1] * a.value[1]);
        }
    }
    assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
}
