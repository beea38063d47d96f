//! Library results against independently derived values.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use indexforms_core::base_forms::{BaseGrid, ConnectionData, MultiIndex, C64};
use indexforms_core::boundary_family::*;
use indexforms_core::cylinder_aps::*;
use indexforms_core::superconnection::*;
use indexforms_core::zeta_traces::*;

fn zeta(s: f64, q: f64) -> f64 {
    hurwitz_zeta(C64::new(s, 0.0), q).unwrap().re
}

#[test]
fn hurwitz_matches_bernoulli_values_and_direct_sums() {
    for q in [0.1, 0.25, 0.5, 0.9, 1.7] {
        // ζ(−n, q) = −B_{n+1}(q)/(n+1)
        assert_relative_eq!(zeta(0.0, q), 0.5 - q, epsilon = 1e-13);
        assert_relative_eq!(
            zeta(-1.0, q),
            -(q * q - q + 1.0 / 6.0) / 2.0,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            zeta(-2.0, q),
            -(q * q * q - 1.5 * q * q + 0.5 * q) / 3.0,
            epsilon = 1e-12
        );
        // direct sum with an integral tail for s = 3
        let n = 200_000;
        let direct: f64 =
            (0..n).map(|k| (k as f64 + q).powi(-3)).sum::<f64>() + 0.5 * (n as f64 + q).powi(-2);
        assert_relative_eq!(zeta(3.0, q), direct, max_relative = 1e-10);
    }
    assert_relative_eq!(zeta(2.0, 1.0), PI * PI / 6.0, max_relative = 1e-13);
}

#[test]
fn eta_is_odd_and_periodic_in_the_shift() {
    for a in [0.1, 0.3, 0.45] {
        let eta = |a: f64| {
            let f = assemble_boundary_family(BaseGrid::point(), 8, Potential::Constant(a)).unwrap();
            eta_invariant(&f, EtaMethod::ClosedForm)
                .unwrap()
                .value(MultiIndex::EMPTY, 0)
                .re
        };
        assert_relative_eq!(eta(a), 1.0 - 2.0 * a, epsilon = 1e-12);
        assert_relative_eq!(eta(a), -eta(1.0 - a), epsilon = 1e-12);
        assert_relative_eq!(eta(a), eta(a + 2.0), epsilon = 1e-12);
    }
}

#[test]
fn eta_rejects_kernel() {
    let f = assemble_boundary_family(BaseGrid::point(), 8, Potential::Constant(0.0)).unwrap();
    assert!(matches!(
        eta_invariant(&f, EtaMethod::HeatFit),
        Err(indexforms_core::Error::KernelGap { .. })
    ));
}

#[test]
fn heat_fit_eta_for_a_cosine_potential_depends_only_on_the_mean() {
    let f = assemble_boundary_family(
        BaseGrid::point(),
        24,
        Potential::Cosine {
            offset: 0.3,
            amplitude: 0.2,
        },
    )
    .unwrap();
    let v = eta_invariant(&f, EtaMethod::HeatFit)
        .unwrap()
        .value(MultiIndex::EMPTY, 0)
        .re;
    assert!((v - 0.4).abs() < 1e-4, "{v}");
}

/// Index of a mode-flipped APS problem by counting: removing a mode from
/// the section raises the index by `Υ`, adding one lowers it.
fn flip_count(p: &CylinderProblem, chosen: &[(usize, i64)]) -> i64 {
    let md = &mode_decompose(p)[0];
    let n = p.cutoff();
    chosen
        .iter()
        .map(|(c, k)| {
            let l = md.lambda(*k, n);
            let in_aps = (*c == 0) == (l > 0.0);
            p.upsilon() as i64 * if in_aps { 1 } else { -1 }
        })
        .sum()
}

#[test]
fn boundary_index_matches_flip_count() {
    for upsilon in [1.0, -1.0] {
        let f = assemble_boundary_family(BaseGrid::point(), 6, Potential::Constant(0.25)).unwrap();
        let p = CylinderProblem::new(f, upsilon).unwrap();
        for seed in 0..12 {
            let (s, chosen) = random_mode_flips(&p, 2, seed).unwrap();
            let b = BoundaryValueProblem::new(p.clone(), s).unwrap();
            let expected = flip_count(&p, &chosen);
            assert_eq!(aps_index(&b).unwrap()[0], expected, "seed {seed}");
            assert!((calderon_trace(&b).unwrap()[0] - expected as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn free_mode_laplacian_spectrum() {
    // No condition on a λ > 0 mode: D⁺f satisfies Robin data at both ends,
    // giving {0} ∪ {λ² + n²π²}; the D⁻ partner is Dirichlet, {λ² + n²π²}.
    let f = assemble_boundary_family(BaseGrid::point(), 3, Potential::Constant(0.25)).unwrap();
    let p = CylinderProblem::new(f, 1.0).unwrap();
    let s = flip_boundary_mode(&aps_section(&p).unwrap(), 0, 1).unwrap();
    let b = BoundaryValueProblem::new(p, s).unwrap();
    let l2 = 1.25f64 * 1.25;
    let plus = laplacian_eigenvalues(&b, 0, 1, Chirality::Plus, 4).unwrap();
    let minus = laplacian_eigenvalues(&b, 0, 1, Chirality::Minus, 3).unwrap();
    assert!(plus[0].abs() < 1e-9, "{plus:?}");
    for n in 1..=3 {
        let mu = l2 + (n as f64 * PI).powi(2);
        assert_relative_eq!(plus[n], mu, max_relative = 1e-9);
        assert_relative_eq!(minus[n - 1], mu, max_relative = 1e-9);
    }
}

#[test]
fn relative_heat_trace_is_time_independent() {
    let f = assemble_boundary_family(BaseGrid::point(), 4, Potential::Constant(0.25)).unwrap();
    let p = CylinderProblem::new(f, 1.0).unwrap();
    let (s1, c1) = random_mode_flips(&p, 2, 11).unwrap();
    let (s2, c2) = random_mode_flips(&p, 2, 12).unwrap();
    let b1 = BoundaryValueProblem::new(p.clone(), s1).unwrap();
    let b2 = BoundaryValueProblem::new(p.clone(), s2).unwrap();
    let expected = (flip_count(&p, &c1) - flip_count(&p, &c2)) as f64;
    let h = RelativeHeatTrace::new(&b1, &b2, 1e-3).unwrap();
    for t in [1e-3, 1e-2, 0.3, 5.0] {
        assert_relative_eq!(h.at(t).unwrap()[0], expected, epsilon = 1e-7);
    }
    assert_relative_eq!(
        relative_pseudo_trace(&b1, &b2).unwrap()[0].value,
        expected,
        epsilon = 1e-6
    );
}

#[test]
fn lattice_chern_number_follows_the_mass_phase_diagram() {
    let c = lattice_chern_number(16, 1.0);
    assert_relative_eq!(c.abs(), 1.0, epsilon = 1e-9);
    assert_relative_eq!(lattice_chern_number(16, -1.0), -c, epsilon = 1e-9);
    assert!(lattice_chern_number(16, 3.0).abs() < 1e-9);
}

fn integrated_chern(points: usize, mass: f64) -> f64 {
    let g = BaseGrid::new(2, points).unwrap();
    let p2 = bloch_twisted_section(g, 2, 0.25, mass).unwrap();
    let p1 = bloch_reference_section(g, 2, 0.25).unwrap();
    let c = ConnectionData::flat(g, (p1.dim(), 0));
    let eta = relative_eta_form(&p2, &p1, &c).unwrap();
    (eta.degree_part(2).integrate_over_base().unwrap() / C64::new(0.0, 2.0 * PI)).re
}

#[test]
fn integrated_eta_form_tracks_the_lattice_invariant() {
    // the orientation factor is −1 in both phases
    for mass in [1.0, -1.0] {
        let v = integrated_chern(24, mass);
        assert!(
            (v + lattice_chern_number(24, mass)).abs() < 0.05,
            "{mass}: {v}"
        );
    }
    assert!(integrated_chern(16, 3.0).abs() < 0.05);
}

#[test]
fn equal_sections_give_vanishing_relative_forms() {
    let g = BaseGrid::new(2, 12).unwrap();
    let f = assemble_boundary_family(g, 2, Potential::Constant(0.25)).unwrap();
    let p = rotated_section(&spectral_projection(&f, GAP_TOL).unwrap(), 1, 0.3, 1).unwrap();
    let c = ConnectionData::flat(g, (p.dim(), 0));
    let a = PairSuperconnection::new(&p, &p, &c).unwrap();
    for t in [1e-2, 1.0, 100.0] {
        assert_eq!(relative_chern_form(&a, &a, t).unwrap().sup_norm(), 0.0);
        assert_eq!(
            relative_transgression_form(&a, &a, t).unwrap().sup_norm(),
            0.0
        );
    }
    assert!(relative_eta_form(&p, &p, &c).unwrap().sup_norm() == 0.0);
}

#[test]
fn degree_zero_chern_form_is_the_rank_difference_at_all_times() {
    let g = BaseGrid::new(2, 8).unwrap();
    let f = assemble_boundary_family(g, 2, Potential::Constant(0.25)).unwrap();
    let p1 = spectral_projection(&f, GAP_TOL).unwrap();
    let p2 = rotated_section(&p1, 1, 0.4, 3).unwrap();
    let p3 = flip_section(&p1, &mode_vector(2, 1), false).unwrap();
    let c = ConnectionData::flat(g, (p1.dim(), 0));
    let a = PairSuperconnection::new(&p1, &p2, &c).unwrap();
    let b = PairSuperconnection::new(&p3, &p2, &c).unwrap();
    for t in [1e-3, 0.5, 40.0] {
        let ch = relative_chern_form(&a, &b, t).unwrap();
        for x in [0, 17, 63] {
            assert_relative_eq!(ch.value(MultiIndex::EMPTY, x).re, 1.0, epsilon = 1e-10);
        }
    }
    // kernel bundle of the second pair: the cokernel line
    assert_eq!(b.kernel_bundle(1e-8).unwrap().rank(), (0, 1));
    assert_eq!(a.kernel_bundle(1e-8).unwrap().rank(), (0, 0));
}

#[test]
fn shift_has_index_minus_one() {
    let f = assemble_boundary_family(BaseGrid::point(), 5, Potential::Constant(0.25)).unwrap();
    let pi = spectral_projection(&f, GAP_TOL).unwrap();
    let s = shift_section(&pi).unwrap();
    assert_eq!(relative_index(&s, &pi, IndexMethod::Svd).unwrap(), vec![-1]);
    let c = ConnectionData::flat(BaseGrid::point(), (pi.dim(), 0));
    let ch = schatten_relative_chern(&s, &pi, &c).unwrap();
    assert_relative_eq!(ch.value(MultiIndex::EMPTY, 0).re, -1.0, epsilon = 1e-12);
}

#[test]
fn pseudo_traces_of_powers_match_hurwitz_values() {
    // Tr(|D|^p Δ^{−s}) at s = 0 is ζ(−p, q) + ζ(−p, 1 − q)
    let delta = ModelRegulator { a: 0.3, order: 1.0 };
    for p in [1.0, 2.0, 0.5] {
        let r = pseudo_trace(
            &ModelOperator::abs_power(p),
            &delta,
            TraceMethod::ClosedForm,
        )
        .unwrap();
        assert_relative_eq!(r.value, zeta(-p, 0.3) + zeta(-p, 0.7), epsilon = 1e-12);
    }
    // the pole term: constant term of ζ(1+ε, q) is −ψ(q)
    let r = pseudo_trace(
        &ModelOperator::abs_power(-1.0),
        &delta,
        TraceMethod::ClosedForm,
    )
    .unwrap();
    let psi = |q: f64| digamma_oracle(q);
    assert_relative_eq!(r.value, -psi(0.3) - psi(0.7), epsilon = 1e-10);
}

/// ψ(q) by recurrence and the asymptotic series, written out here so the
/// oracle does not share code with the library.
fn digamma_oracle(mut q: f64) -> f64 {
    let mut acc = 0.0;
    while q < 10.0 {
        acc -= 1.0 / q;
        q += 1.0;
    }
    let q2 = 1.0 / (q * q);
    acc + q.ln()
        - 0.5 / q
        - q2 * (1.0 / 12.0 - q2 * (1.0 / 120.0 - q2 * (1.0 / 252.0 - q2 / 240.0)))
}

#[test]
fn heat_fit_recovers_a_known_expansion() {
    let samples: Vec<(f64, f64)> = geometric_grid(1e-3, 1.0, 30)
        .into_iter()
        .map(|t| (t, 2.0 / t.sqrt() - 0.75 + 0.5 * t.ln() + 3.0 * t))
        .collect();
    let fit = heat_trace_expansion_fit(&samples, &[-0.5, 0.0, 1.0, 2.0], &[0.0], 1e-8).unwrap();
    assert_relative_eq!(fit.coefficient(-0.5), 2.0, epsilon = 1e-9);
    assert_relative_eq!(fit.coefficient(0.0), -0.75, epsilon = 1e-9);
    assert_relative_eq!(fit.log_coefficient(0.0), 0.5, epsilon = 1e-9);
}

#[test]
fn transgression_identity_holds_on_a_coarse_grid() {
    let g = BaseGrid::new(2, 24).unwrap();
    let f = assemble_boundary_family(g, 2, Potential::Constant(0.25)).unwrap();
    let p1 = spectral_projection(&f, GAP_TOL).unwrap();
    let p2 = rotated_section(&p1, 1, 0.3, 5).unwrap();
    let c = ConnectionData::flat(g, (p1.dim(), 0));
    let a = PairSuperconnection::new(&p1, &p2, &c).unwrap();
    let t = 0.5;
    let e = 1e-4;
    let dch = a
        .chern_form(t * (1.0 + e))
        .unwrap()
        .sub(&a.chern_form(t * (1.0 - e)).unwrap())
        .scale(C64::new(1.0 / (2.0 * e * t), 0.0));
    let dtau = a.transgression_form(t).unwrap().exterior_derivative();
    // the defect is the discretization error of the derivative, O(h⁴)
    assert!(
        dch.add(&dtau).sup_norm() <= 1e-2 * dch.sup_norm(),
        "{}",
        dch.add(&dtau).sup_norm()
    );
}
