mod common;

use std::collections::BTreeMap;

use bciphs::brackets::{co_energy, driving_forces, BracketConvention};
use bciphs::discretization::{evaluate_rhs, BoundaryFluxes, DiffOperator, Stencil};
use bciphs::models::{self, ReactionClosure, ReactionParams, MODEL_NAMES};
use bciphs::ports::{self, build_ports, evaluate_ports, random_xi, BoundaryTrace};
use bciphs::structure::{validate_structure, Grid, StructureMatrices};
use bciphs::Matrix;
use common::*;
use nalgebra::DVector;
use proptest::prelude::*;

fn model(i: usize) -> models::ModelDefinition {
    models::build(MODEL_NAMES[i % MODEL_NAMES.len()], &BTreeMap::new()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_production_is_nonnegative(which in 0usize..4, seed in any::<u64>(), n in 5usize..40) {
        let m = model(which);
        let grid = Grid::new(0.0, 1.0, n).unwrap();
        let st = random_state(&m, &grid, &mut rng(seed), false);
        let d = DiffOperator::new(&grid, Stencil::default());
        let f = driving_forces(&st, m.closure.as_ref(), &m.sm, &d).unwrap();
        for s in f.sigma_total(m.sm.gs) {
            prop_assert!(s >= -1e-14, "sigma {s}");
        }
    }

    #[test]
    fn power_pairing_holds_for_any_parametrization(which in 0usize..4, seed in any::<u64>(), tseed in any::<u64>()) {
        let m = model(which);
        let pe = m.pe();
        let r = m.port_dim();
        let (xi1, xi2) = random_xi(r, seed);
        let pp = build_ports(&m.basis, &pe, &xi1, &xi2).unwrap();
        let k = pe.nrows();
        let mut g = rng(tseed);
        let tr = BoundaryTrace {
            e_b: (0..k).map(|_| unit(&mut g)).collect(),
            e_a: (0..k).map(|_| unit(&mut g)).collect(),
        };
        let (v, y) = evaluate_ports(&pp, &tr).unwrap();
        let pairing: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
        let flow = ports::boundary_energy_flow(&pe, &tr);
        prop_assert!((pairing - flow).abs() < 1e-12 * (1.0 + flow.abs()), "{pairing} vs {flow}");
    }

    #[test]
    fn pseudo_inverse_reproduces_basis(which in 0usize..4) {
        let m = model(which);
        let pp = m.ports().unwrap();
        let back = &pp.m * &pp.mp * &pp.m;
        prop_assert!((back - &pp.m).amax() < 1e-12);
    }

    #[test]
    fn reaction_rate_has_the_sign_of_affinity(
        ca in 0.05f64..5.0,
        cb in 0.05f64..5.0,
        t in 250.0f64..400.0,
        du in -2000.0f64..2000.0,
        keq in 0.1f64..10.0,
    ) {
        let tc = ReactionClosure::new(ReactionParams { delta_u: du, keq_ref: keq, ..Default::default() }).unwrap();
        let c = [ca, cb];
        prop_assert!(tc.rate(&c, t) * tc.affinity(&c, t) >= 0.0);
    }

    #[test]
    fn heat_rhs_matches_direct_formula(seed in any::<u64>(), n in 5usize..60, lambda in 0.2f64..3.0) {
        let mut o = BTreeMap::new();
        o.insert("lambda".to_string(), lambda);
        let m = models::build("heat_conduction", &o).unwrap();
        let grid = Grid::new(0.0, 1.0, n).unwrap();
        let st = random_state(&m, &grid, &mut rng(seed), false);
        let d = DiffOperator::new(&grid, Stencil::Sbp21);
        let eval = evaluate_rhs(&st, &m.sm, m.closure.as_ref(), &d, BracketConvention::Physical, &BoundaryFluxes::free(0)).unwrap();
        // ds/dt = D(lambda/T DT) + lambda/T^2 (DT)^2 with the boundary-closed stencil
        let dz = grid.dz();
        let diff = |f: &[f64]| -> Vec<f64> {
            (0..n).map(|k| match k {
                0 => (f[1] - f[0]) / dz,
                k if k == n - 1 => (f[n - 1] - f[n - 2]) / dz,
                k => (f[k + 1] - f[k - 1]) / (2.0 * dz),
            }).collect()
        };
        let t: Vec<f64> = st.s.iter().map(|s| 300.0 * s.exp()).collect();
        let dt = diff(&t);
        let flux: Vec<f64> = (0..n).map(|k| lambda / t[k] * dt[k]).collect();
        let dflux = diff(&flux);
        let want: Vec<f64> = (0..n).map(|k| dflux[k] + lambda / (t[k] * t[k]) * dt[k] * dt[k]).collect();
        let scale = max_abs(&want).max(max_abs(&dflux));
        prop_assert!(max_abs_diff(&eval.ds_dt, &want) <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn brackets_conventions_differ_only_in_sign(which in 0usize..4, seed in any::<u64>()) {
        let m = model(which);
        let grid = Grid::new(0.0, 1.0, 12).unwrap();
        let st = random_state(&m, &grid, &mut rng(seed), false);
        let d = DiffOperator::new(&grid, Stencil::default());
        let ce = co_energy(&st, m.closure.as_ref()).unwrap();
        for l in 0..m.sm.m {
            let g: Vec<f64> = (0..m.sm.n).map(|i| m.sm.g1[(i, l)]).collect();
            let p = bciphs::brackets::bracket_one(&ce, &g, &d, BracketConvention::Physical).unwrap();
            let q = bciphs::brackets::bracket_one(&ce, &g, &d, BracketConvention::Literal).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn skew_part_is_detected(vals in proptest::collection::vec(-1.0f64..1.0, 9), i in 0usize..3) {
        let mut sm = StructureMatrices::zeros(3, 0);
        sm.p0 = Matrix::from_row_slice(3, 3, &vals);
        sm.p0 = &sm.p0 - sm.p0.transpose();
        prop_assert!(validate_structure(&sm).is_clean());
        sm.p0[(i, i)] = 0.5;
        prop_assert!(!validate_structure(&sm).is_clean());
    }

    #[test]
    fn closed_entropy_never_decreases_in_one_step(which in 0usize..4, seed in any::<u64>()) {
        let m = model(which);
        let grid = Grid::new(0.0, 1.0, 21).unwrap();
        let st = random_state(&m, &grid, &mut rng(seed), true);
        let sim = bciphs::simulator::Simulator::new(&m, grid, Default::default()).unwrap();
        let dt = 0.5 * sim.max_stable_dt(&st);
        let dt = if dt.is_finite() { dt } else { 1e-3 };
        let next = sim.step(&st, dt, &bciphs::simulator::Signal::Closed, 0.0).unwrap();
        let ds = trapezoid(&next.s, grid.dz()) - trapezoid(&st.s, grid.dz());
        prop_assert!(ds >= -1e-10 * trapezoid(&st.s, grid.dz()).abs().max(1.0), "dS {ds}");
    }
}

#[test]
fn weighted_reversible_operator_is_skew_in_the_interior() {
    // with trapezoid weights the reversible operator is skew up to boundary terms
    let m = model(1);
    let grid = Grid::new(0.0, 1.0, 10).unwrap();
    let st = random_state(&m, &grid, &mut rng(3), false);
    let d = DiffOperator::new(&grid, Stencil::default());
    let a = bciphs::discretization::dense_operator(&st, &m.sm, m.closure.as_ref(), &d).unwrap();
    let w = DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|i| {
            let k = i % grid.len();
            if k == 0 || k == grid.len() - 1 {
                0.5
            } else {
                1.0
            }
        }),
    );
    let q = Matrix::from_diagonal(&w) * &a;
    let sym = &q + q.transpose();
    // only boundary rows and columns survive
    for i in 0..sym.nrows() {
        for j in 0..sym.ncols() {
            let (ki, kj) = (i % grid.len(), j % grid.len());
            let interior = ki != 0 && ki != grid.len() - 1 && kj != 0 && kj != grid.len() - 1;
            if interior {
                assert!(sym[(i, j)].abs() < 1e-12, "({i}, {j}) = {}", sym[(i, j)]);
            }
        }
    }
}
