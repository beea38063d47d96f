//! Invariants checked on randomized inputs.

use indexforms_core::base_forms::{BaseGrid, FormField, Mat, MultiIndex, OperatorForm, C64};
use indexforms_core::boundary_family::*;
use indexforms_core::cylinder_aps::*;
use indexforms_core::superconnection::{divided_difference_1, divided_difference_2};
use indexforms_core::zeta_traces::hurwitz_zeta;
use proptest::prelude::*;

fn reference(n: usize) -> GrassmannSection {
    let f = assemble_boundary_family(BaseGrid::point(), n, Potential::Constant(0.25)).unwrap();
    spectral_projection(&f, GAP_TOL).unwrap()
}

fn is_projection(p: &Mat) -> bool {
    (p * p - p).norm() < 1e-10 && (p - p.adjoint()).norm() < 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hurwitz_shift_identity(s in -3.0f64..3.0, q in 0.05f64..3.0) {
        prop_assume!((s - 1.0).abs() > 1e-3);
        let z = |q: f64| hurwitz_zeta(C64::new(s, 0.0), q).unwrap().re;
        let lhs = z(q) - z(q + 1.0);
        let rhs = q.powf(-s);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn perturbed_sections_are_projections(seed in any::<u64>(), m in 0usize..4, scale in 0.0f64..3.0) {
        let p = perturb_section(&reference(6), m, scale, seed).unwrap();
        prop_assert!(is_projection(&p.projections()[0]));
        // modes beyond the perturbation are untouched
        prop_assert!(check_relatively_smoothing(&p, &reference(6), 6).is_ok());
    }

    #[test]
    fn relative_eta_is_additive_and_antisymmetric(seeds in prop::array::uniform3(any::<u64>())) {
        let pi = reference(12);
        let p: Vec<GrassmannSection> = seeds.iter().map(|s| perturb_section(&pi, 2, 1.0, *s).unwrap()).collect();
        let e = |a: usize, b: usize| relative_eta_pointwise(&p[a], &p[b]).unwrap().value(MultiIndex::EMPTY, 0).re;
        prop_assert!((e(0, 1) + e(1, 2) - e(0, 2)).abs() < 1e-12);
        prop_assert!((e(0, 1) + e(1, 0)).abs() < 1e-12);
        // η̂ is twice an integer
        prop_assert!((e(0, 1) / 2.0 - (e(0, 1) / 2.0).round()).abs() < 1e-10);
    }

    #[test]
    fn trace_and_svd_indices_agree(seed in any::<u64>(), scale in 0.0f64..4.0) {
        let pi = reference(8);
        let q = perturb_section(&pi, 2, scale, seed).unwrap();
        let trace = relative_index(&pi, &q, IndexMethod::Trace).unwrap();
        let svd = relative_index(&pi, &q, IndexMethod::Svd).unwrap();
        prop_assert_eq!(&trace, &svd);
        let back = relative_index(&q, &pi, IndexMethod::Svd).unwrap();
        prop_assert_eq!(trace[0], -back[0]);
    }

    #[test]
    fn rotation_preserves_rank(seed in any::<u64>(), amplitude in 0.0f64..2.0) {
        let g = BaseGrid::new(2, 8).unwrap();
        let f = assemble_boundary_family(g, 2, Potential::Constant(0.25)).unwrap();
        let pi = spectral_projection(&f, GAP_TOL).unwrap();
        let r = rotated_section(&pi, 1, amplitude, seed).unwrap();
        for (x, p) in r.projections().iter().enumerate() {
            prop_assert!(is_projection(p));
            prop_assert!((p.trace().re - pi.projections()[x].trace().re).abs() < 1e-10);
        }
    }

    #[test]
    fn exterior_derivative_squares_to_zero(c in prop::array::uniform4(-2.0f64..2.0), k in 1i32..4) {
        let g = BaseGrid::new(2, 16).unwrap();
        let f = FormField::from_fn(g, MultiIndex::EMPTY, |z| {
            C64::new(c[0] * (k as f64 * z[0]).sin() + c[1] * (z[0] + z[1]).cos(), c[2] * (k as f64 * z[1]).cos() + c[3])
        });
        prop_assert!(f.exterior_derivative().exterior_derivative().sup_norm() < 1e-11);
    }

    #[test]
    fn one_forms_anticommute(c in prop::array::uniform4(-2.0f64..2.0)) {
        let g = BaseGrid::new(2, 8).unwrap();
        let scalar = |v: f64| vec![Mat::from_element(1, 1, C64::new(v, 0.0)); g.len()];
        let mut a = OperatorForm::zero(g, (1, 0));
        a.insert(MultiIndex::axis(0), scalar(c[0]));
        a.insert(MultiIndex::axis(1), scalar(c[1]));
        let mut b = OperatorForm::zero(g, (1, 0));
        b.insert(MultiIndex::axis(0), scalar(c[2]));
        b.insert(MultiIndex::axis(1), scalar(c[3]));
        let ab = a.wedge_multiply(&b).unwrap();
        let ba = b.wedge_multiply(&a).unwrap();
        prop_assert!(ab.add(&ba).unwrap().sup_norm() < 1e-14);
        let expected = c[0] * c[3] - c[1] * c[2];
        prop_assert!((ab.at(MultiIndex(3), 0)[(0, 0)].re - expected).abs() < 1e-14);
    }

    #[test]
    fn divided_differences_are_symmetric(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0) {
        prop_assert!((divided_difference_1(a, b) - divided_difference_1(b, a)).abs() < 1e-14);
        let d = divided_difference_2(a, b, c);
        for perm in [(b, a, c), (c, b, a), (a, c, b)] {
            prop_assert!((d - divided_difference_2(perm.0, perm.1, perm.2)).abs() < 1e-12);
        }
        // the second divided difference of e^{−x} is half its second derivative somewhere in the hull
        let lo = a.min(b).min(c);
        prop_assert!(d > 0.0 && d <= 0.5 * (-lo).exp() + 1e-15);
    }

    #[test]
    fn calderon_trace_counts_solutions(seed in any::<u64>(), negative in any::<bool>()) {
        let f = assemble_boundary_family(BaseGrid::point(), 5, Potential::Constant(0.25)).unwrap();
        let p = CylinderProblem::new(f, if negative { -1.0 } else { 1.0 }).unwrap();
        let (s, _) = random_mode_flips(&p, 2, seed).unwrap();
        let b = BoundaryValueProblem::new(p.clone(), s).unwrap();
        let index = aps_index(&b).unwrap()[0];
        prop_assert!((calderon_trace(&b).unwrap()[0] - index as f64).abs() < 1e-9);
        let reference = BoundaryValueProblem::new(p.clone(), aps_section(&p).unwrap()).unwrap();
        prop_assert!(relative_index_identity(&b, &reference).unwrap().holds());
    }

    #[test]
    fn adjoint_section_is_an_involution(seed in any::<u64>()) {
        let f = assemble_boundary_family(BaseGrid::point(), 3, Potential::Constant(0.25)).unwrap();
        let p = CylinderProblem::new(f, 1.0).unwrap();
        let (s, _) = random_mode_flips(&p, 2, seed).unwrap();
        let back = adjoint_section(&adjoint_section(&s).unwrap()).unwrap();
        prop_assert!((&back.projections()[0] - &s.projections()[0]).norm() < 1e-14);
    }
}
