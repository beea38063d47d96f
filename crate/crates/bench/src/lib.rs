//! Fixtures shared by the benchmarks.

use indexforms_core::base_forms::{BaseGrid, ConnectionData};
use indexforms_core::boundary_family::{
    assemble_boundary_family, bloch_reference_section, bloch_twisted_section, spectral_projection,
    GrassmannSection, Potential, GAP_TOL,
};
use indexforms_core::cylinder_aps::{
    aps_section, random_mode_flips, BoundaryValueProblem, CylinderProblem,
};
use indexforms_core::superconnection::PairSuperconnection;

/// Spectral section of the constant-potential family on a single point.
pub fn point_reference(cutoff: usize) -> GrassmannSection {
    let f = assemble_boundary_family(BaseGrid::point(), cutoff, Potential::Constant(0.25))
        .expect("family");
    spectral_projection(&f, GAP_TOL).expect("gap")
}

/// Twisted and reference sections on a `points × points` torus with a flat connection.
pub fn torus_pair(
    points: usize,
    cutoff: usize,
) -> (GrassmannSection, GrassmannSection, ConnectionData) {
    let g = BaseGrid::new(2, points).expect("grid");
    let twisted = bloch_twisted_section(g, cutoff, 0.25, 1.0).expect("twisted");
    let reference = bloch_reference_section(g, cutoff, 0.25).expect("reference");
    let c = ConnectionData::flat(g, (twisted.dim(), 0));
    (twisted, reference, c)
}

pub fn torus_superconnection(points: usize, cutoff: usize) -> PairSuperconnection {
    let (twisted, reference, c) = torus_pair(points, cutoff);
    PairSuperconnection::new(&twisted, &reference, &c).expect("pair")
}

/// A boundary problem with `flips` random mode flips against the APS section.
pub fn flipped_problem(
    cutoff: usize,
    flips: usize,
    seed: u64,
) -> (BoundaryValueProblem, BoundaryValueProblem) {
    let f = assemble_boundary_family(BaseGrid::point(), cutoff, Potential::Constant(0.25))
        .expect("family");
    let p = CylinderProblem::new(f, 1.0).expect("problem");
    let (s, _) = random_mode_flips(&p, flips, seed).expect("flips");
    let aps = aps_section(&p).expect("aps");
    (
        BoundaryValueProblem::new(p.clone(), s).expect("flipped"),
        BoundaryValueProblem::new(p, aps).expect("aps problem"),
    )
}
