//! Families of first-order self-adjoint operators `−i d/dθ + a(z,θ)` on the
//! circle in a truncated Fourier basis, their spectral projections, Grassmann
//! sections, eta invariants, relative eta forms and Toeplitz indices.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{SymmetricEigen, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::base_forms::{
    hermitian_defect, BaseGrid, ConnectionData, FormField, Mat, MultiIndex, OperatorForm, C64,
};
use crate::error::{Error, Result};
use crate::superconnection::{chern_weil_form, PairSuperconnection};

/// Default tolerance separating the spectrum from zero.
pub const GAP_TOL: f64 = 1e-6;
/// Threshold for matrix entries outside the low-mode window.
pub const DECAY_TOL: f64 = 1e-8;
/// Numerical rank threshold for singular values.
pub const RANK_TOL: f64 = 1e-8;

type FourierFn = dyn Fn([f64; 2]) -> BTreeMap<i64, C64> + Send + Sync;

/// The potential `a(z, θ)`.
#[derive(Clone)]
pub enum Potential {
    Constant(f64),
    /// `a = offset + amplitude·cos θ`.
    Cosine {
        offset: f64,
        amplitude: f64,
    },
    /// `a = offset + amplitude·sin z₀`, constant in θ.
    BaseShift {
        offset: f64,
        amplitude: f64,
    },
    /// Fourier coefficients `â_k(z)`; must satisfy `â_{−k} = conj(â_k)`.
    Custom(Arc<FourierFn>),
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::Constant(a) => write!(f, "Constant({a})"),
            Potential::Cosine { offset, amplitude } => write!(f, "Cosine({offset}, {amplitude})"),
            Potential::BaseShift { offset, amplitude } => {
                write!(f, "BaseShift({offset}, {amplitude})")
            }
            Potential::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Potential {
    pub fn fourier(&self, z: [f64; 2]) -> BTreeMap<i64, C64> {
        let mut m = BTreeMap::new();
        match self {
            Potential::Constant(a) => {
                m.insert(0, C64::new(*a, 0.0));
            }
            Potential::Cosine { offset, amplitude } => {
                m.insert(0, C64::new(*offset, 0.0));
                m.insert(1, C64::new(0.5 * amplitude, 0.0));
                m.insert(-1, C64::new(0.5 * amplitude, 0.0));
            }
            Potential::BaseShift { offset, amplitude } => {
                m.insert(0, C64::new(offset + amplitude * z[0].sin(), 0.0));
            }
            Potential::Custom(f) => m = f(z),
        }
        m
    }

    /// Whether the potential is independent of θ at every base point.
    pub fn is_theta_constant(&self) -> bool {
        matches!(self, Potential::Constant(_) | Potential::BaseShift { .. })
    }
}

/// Mode number of basis index `i` for cutoff `n` (indices may span several
/// stacked copies of the Fourier space).
pub fn mode_of(i: usize, n: usize) -> i64 {
    (i % (2 * n + 1)) as i64 - n as i64
}

/// Basis index of mode `k` in a single copy of the Fourier space.
pub fn index_of(k: i64, n: usize) -> usize {
    (k + n as i64) as usize
}

/// Eigenvalues (ascending) and unitary eigenvectors at each base point.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<Vec<f64>>,
    pub eigenvectors: Vec<Mat>,
    pub gap: f64,
}

/// `∂_z = −i d/dθ + a(z,·)` on modes `−N..N` at every base point.
#[derive(Clone, Debug)]
pub struct BoundaryOperatorFamily {
    grid: BaseGrid,
    cutoff: usize,
    potential: Potential,
    matrices: Vec<Mat>,
}

/// Build the truncated boundary family. Entries are `n δ_{nm} + â_{n−m}`.
pub fn assemble_boundary_family(
    grid: BaseGrid,
    n: usize,
    potential: Potential,
) -> Result<BoundaryOperatorFamily> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "Fourier cutoff must be positive".into(),
        ));
    }
    let dim = 2 * n + 1;
    let matrices: Vec<Mat> = (0..grid.len())
        .map(|x| {
            let coeff = potential.fourier(grid.coords(x));
            Mat::from_fn(dim, dim, |i, j| {
                let (ki, kj) = (mode_of(i, n), mode_of(j, n));
                let diag = if i == j {
                    C64::new(ki as f64, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                diag + coeff.get(&(ki - kj)).copied().unwrap_or_default()
            })
        })
        .collect();
    for m in &matrices {
        let d = hermitian_defect(m);
        if d > 1e-12 {
            return Err(Error::NotHermitian(d));
        }
    }
    Ok(BoundaryOperatorFamily {
        grid,
        cutoff: n,
        potential,
        matrices,
    })
}

impl BoundaryOperatorFamily {
    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.matrices
    }

    /// Mean of the potential over θ at base point `x`.
    pub fn mean_potential(&self, x: usize) -> f64 {
        self.potential
            .fourier(self.grid.coords(x))
            .get(&0)
            .map_or(0.0, |c| c.re)
    }

    pub fn spectral_decomposition(&self) -> SpectralDecomposition {
        let pairs: Vec<(Vec<f64>, Mat)> = self.matrices.par_iter().map(sorted_eigen).collect();
        let gap = pairs
            .iter()
            .flat_map(|(v, _)| v.iter())
            .fold(f64::INFINITY, |m, l| m.min(l.abs()));
        let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
        SpectralDecomposition {
            eigenvalues,
            eigenvectors,
            gap,
        }
    }
}

/// Hermitian eigen-decomposition, ascending, with each eigenvector's largest
/// component made real and positive.
pub fn sorted_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite")
    });
    let mut vecs = Mat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        let mut best = 0;
        for i in 0..n {
            if v[i].norm() > v[best].norm() + 1e-12 {
                best = i;
            }
        }
        let phase = v[best].conj() / v[best].norm();
        vecs.set_column(col, &(v * phase));
    }
    (vals, vecs)
}

/// A field of orthogonal projections on `C^dim` over the base, acting on one
/// or more stacked copies of the Fourier space with cutoff `fourier_cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannSection {
    grid: BaseGrid,
    dim: usize,
    cutoff: usize,
    projections: Vec<Mat>,
    /// Rank of the perturbation relative to the reference, when known.
    pub perturbation_rank: Option<usize>,
}

impl GrassmannSection {
    /// Validates `P² = P` and `P* = P` to 1e-10.
    pub fn new(grid: BaseGrid, cutoff: usize, projections: Vec<Mat>) -> Result<Self> {
        if projections.len() != grid.len() {
            return Err(Error::Dimension(
                "one projection per grid point required".into(),
            ));
        }
        let dim = projections[0].nrows();
        for (x, p) in projections.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(Error::Dimension("projections differ in size".into()));
            }
            let defect =
                hermitian_defect(p).max((p * p - p).iter().fold(0.0, |m, z| m.max(z.norm())));
            if defect > 1e-10 {
                return Err(Error::NotAProjection { point: x, defect });
            }
        }
        Ok(Self {
            grid,
            dim,
            cutoff,
            projections,
            perturbation_rank: None,
        })
    }

    pub fn constant(grid: BaseGrid, cutoff: usize, p: Mat) -> Result<Self> {
        Self::new(grid, cutoff, vec![p; grid.len()])
    }

    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fourier_cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn projections(&self) -> &[Mat] {
        &self.projections
    }

    pub fn traces(&self) -> Vec<f64> {
        self.projections.iter().map(|p| p.trace().re).collect()
    }

    /// Apply a map to every projection and revalidate.
    pub fn map(&self, f: impl Fn(usize, &Mat) -> Mat + Sync) -> Result<Self> {
        let projections = self
            .projections
            .par_iter()
            .enumerate()
            .map(|(x, p)| f(x, p))
            .collect();
        Self::new(self.grid, self.cutoff, projections)
    }
}

/// Positive spectral projection `Π_>` of the family.
pub fn spectral_projection(f: &BoundaryOperatorFamily, gap_tol: f64) -> Result<GrassmannSection> {
    let n = f.dim();
    let projections: Vec<Mat> = f
        .matrices
        .par_iter()
        .enumerate()
        .map(|(x, m)| {
            let (vals, vecs) = sorted_eigen(m);
            let mut p = Mat::zeros(n, n);
            for (k, l) in vals.iter().enumerate() {
                if l.abs() <= gap_tol {
                    return Err(Error::KernelGap {
                        point: x,
                        gap: l.abs(),
                        tol: gap_tol,
                    });
                }
                if *l > 0.0 {
                    let v = vecs.column(k);
                    p += v * v.adjoint();
                }
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;
    GrassmannSection::new(f.grid, f.cutoff, projections)
}

/// Decay test: entries of `P₁ − P₂` in rows or columns of modes `|k| > N/2`
/// must be below [`DECAY_TOL`].
pub fn check_relatively_smoothing(
    p1: &GrassmannSection,
    p2: &GrassmannSection,
    cutoff: usize,
) -> Result<()> {
    if p1.grid != p2.grid || p1.dim != p2.dim {
        return Err(Error::Dimension("sections differ in shape".into()));
    }
    let half = (cutoff / 2) as i64;
    for x in 0..p1.grid.len() {
        let d = &p1.projections[x] - &p2.projections[x];
        let mut tail: f64 = 0.0;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if mode_of(i, cutoff).abs() > half || mode_of(j, cutoff).abs() > half {
                    tail = tail.max(d[(i, j)].norm());
                }
            }
        }
        if tail > DECAY_TOL {
            return Err(Error::NotRelativelySmoothing { point: x, tail });
        }
    }
    Ok(())
}

/// How to evaluate the eta invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaMethod {
    ClosedForm,
    HeatFit,
}

/// Eta invariant of `∂_z` at every base point, as a degree-0 form.
pub fn eta_invariant(f: &BoundaryOperatorFamily, method: EtaMethod) -> Result<FormField> {
    let dec = f.spectral_decomposition();
    if dec.gap <= GAP_TOL {
        let (point, _) = dec
            .eigenvalues
            .iter()
            .enumerate()
            .find(|(_, v)| v.iter().any(|l| l.abs() <= GAP_TOL))
            .expect("gap attained");
        return Err(Error::KernelGap {
            point,
            gap: dec.gap,
            tol: GAP_TOL,
        });
    }
    let values: Vec<C64> = match method {
        ClosedForm => {
            if !f.potential.is_theta_constant() {
                return Err(Error::Unsupported(
                    "closed form needs a θ-constant potential".into(),
                ));
            }
            (0..f.grid.len())
                .map(|x| {
                    let a = f.mean_potential(x);
                    let q = a - a.floor();
                    let z0 = crate::zeta_traces::hurwitz_zeta(C64::new(0.0, 0.0), q)?.re;
                    let z1 = crate::zeta_traces::hurwitz_zeta(C64::new(0.0, 0.0), 1.0 - q)?.re;
                    Ok(C64::new(z0 - z1, 0.0))
                })
                .collect::<Result<_>>()?
        }
        HeatFit => (0..f.grid.len())
            .into_par_iter()
            .map(|x| {
                let eta = crate::zeta_traces::eta_by_heat_fit(
                    &dec.eigenvalues[x],
                    f.cutoff,
                    f.mean_potential(x),
                )?;
                Ok(C64::new(eta, 0.0))
            })
            .collect::<Result<_>>()?,
    };
    Ok(FormField::from_component(f.grid, MultiIndex::EMPTY, values))
}
use EtaMethod::*;

/// `η̂(P₁,P₂) = Tr((P₁ − P₁^⊥) − (P₂ − P₂^⊥)) = 2 Tr(P₁ − P₂)` pointwise.
pub fn relative_eta_pointwise(p1: &GrassmannSection, p2: &GrassmannSection) -> Result<FormField> {
    if p1.grid != p2.grid || p1.dim != p2.dim {
        return Err(Error::Dimension("sections differ in shape".into()));
    }
    let v = (0..p1.grid.len())
        .map(|x| (&p1.projections[x] - &p2.projections[x]).trace() * 2.0)
        .collect();
    Ok(FormField::from_component(p1.grid, MultiIndex::EMPTY, v))
}

/// How to evaluate a relative index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexMethod {
    Trace,
    Svd,
}

fn range_basis(p: &Mat) -> Mat {
    let (vals, vecs) = sorted_eigen(p);
    let cols: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 0.5).collect();
    Mat::from_fn(p.nrows(), cols.len(), |i, j| vecs[(i, cols[j])])
}

/// Index of `P₂P₁ : ran P₁ → ran P₂` from the singular values of `U₂*U₁`.
pub fn svd_index(p1: &Mat, p2: &Mat) -> i64 {
    let u1 = range_basis(p1);
    let u2 = range_basis(p2);
    let (r1, r2) = (u1.ncols() as i64, u2.ncols() as i64);
    if r1 == 0 || r2 == 0 {
        return r1 - r2;
    }
    let b = u2.adjoint() * u1;
    let svd = SVD::new(b, false, false);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > RANK_TOL)
        .count() as i64;
    (r1 - rank) - (r2 - rank)
}

/// Index of `P₂∘P₁ : ran P₁ → ran P₂` at every base point. Both methods are
/// always evaluated; they must agree and the trace must be integral to 1e-6.
pub fn relative_index(
    p1: &GrassmannSection,
    p2: &GrassmannSection,
    method: IndexMethod,
) -> Result<Vec<i64>> {
    if p1.grid != p2.grid || p1.dim != p2.dim {
        return Err(Error::Dimension("sections differ in shape".into()));
    }
    (0..p1.grid.len())
        .map(|x| {
            let trace = (&p1.projections[x] - &p2.projections[x]).trace().re;
            let svd = svd_index(&p1.projections[x], &p2.projections[x]);
            if (trace - trace.round()).abs() > 1e-6 || trace.round() as i64 != svd {
                return Err(Error::MethodsDisagree {
                    point: x,
                    trace,
                    svd,
                });
            }
            Ok(match method {
                IndexMethod::Trace => trace.round() as i64,
                IndexMethod::Svd => svd,
            })
        })
        .collect()
}

/// The connection `P∇P` on the range of a section with its curvature.
#[derive(Clone, Debug)]
pub struct InducedConnection {
    pub ambient: ConnectionData,
    pub projector: Vec<Mat>,
}

/// Returns the induced connection and its curvature `P(Ω + ∇P∧∇P)P`.
pub fn induced_connection_and_curvature(
    p: &GrassmannSection,
    c: &ConnectionData,
) -> Result<(InducedConnection, OperatorForm)> {
    let r = crate::base_forms::induced_curvature(c, &p.projections)?;
    Ok((
        InducedConnection {
            ambient: c.clone(),
            projector: p.projections.clone(),
        },
        r,
    ))
}

/// `η(P₁,P₂) = Tr(P₁−P₂) + Σ_{k≥1} ((−1)^k/k!) Tr(R₁^k − R₂^k)`.
pub fn relative_eta_form(
    p1: &GrassmannSection,
    p2: &GrassmannSection,
    c: &ConnectionData,
) -> Result<FormField> {
    check_relatively_smoothing(p1, p2, p1.cutoff)?;
    Ok(chern_weil_form(c, &p1.projections)?.sub(&chern_weil_form(c, &p2.projections)?))
}

/// A pair of sections defining the Toeplitz family `P₂P₁ : ran P₁ → ran P₂`.
#[derive(Clone, Debug)]
pub struct ToeplitzFamily {
    pub source: GrassmannSection,
    pub target: GrassmannSection,
}

/// Chern form of the kernel superbundle of the pair operator `L_{1,2}`.
pub fn kernel_bundle_chern(t: &ToeplitzFamily, c: &ConnectionData) -> Result<FormField> {
    let pair = PairSuperconnection::new(&t.source, &t.target, c)?;
    pair.kernel_bundle(RANK_TOL)?.chern_form()
}

/// Seeded Gaussian Hermitian matrix supported on modes `|k| ≤ m`, with
/// entries of standard deviation `scale`.
pub fn random_low_mode_hermitian(cutoff: usize, m: usize, scale: f64, rng: &mut ChaCha8Rng) -> Mat {
    let n = 2 * cutoff + 1;
    let mut h = Mat::zeros(n, n);
    let lo = index_of(-(m.min(cutoff) as i64), cutoff);
    let hi = index_of(m.min(cutoff) as i64, cutoff);
    for i in lo..=hi {
        for j in i..=hi {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if i == j {
                0.0
            } else {
                StandardNormal.sample(rng)
            };
            let z = C64::new(re, im) * scale;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Positive eigenspace of `2Π − I + H` at every base point, with `H` a seeded
/// Hermitian perturbation on modes `|k| ≤ m`.
pub fn perturb_section(
    reference: &GrassmannSection,
    m: usize,
    scale: f64,
    seed: u64,
) -> Result<GrassmannSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_low_mode_hermitian(reference.cutoff, m, scale, &mut rng);
    let mut out = reference.map(|_, p| {
        positive_part(&(p * C64::new(2.0, 0.0) - Mat::identity(p.nrows(), p.nrows()) + &h))
    })?;
    out.perturbation_rank = Some(2 * m + 1);
    Ok(out)
}

/// Smoothly varying perturbation `H(z) = H₀ + Σ_a (H_{a,c} cos z_a + H_{a,s} sin z_a)`
/// normalized so that `‖H(z)‖ ≤ scale < 1`; the rank of the section is preserved.
pub fn smooth_perturbation(
    reference: &GrassmannSection,
    m: usize,
    scale: f64,
    seed: u64,
) -> Result<GrassmannSection> {
    if !(0.0..1.0).contains(&scale) {
        return Err(Error::InvalidParameter(
            "smooth perturbation scale must lie in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = reference.grid;
    let terms: Vec<Mat> = (0..1 + 2 * grid.dim())
        .map(|_| random_low_mode_hermitian(reference.cutoff, m, 1.0, &mut rng))
        .collect();
    let bound: f64 = terms.iter().map(|h| h.norm()).sum();
    let s = if bound > 0.0 { scale / bound } else { 0.0 };
    let mut out = reference.map(|x, p| {
        let z = grid.coords(x);
        let mut h = terms[0].clone();
        for a in 0..grid.dim() {
            h += &terms[1 + 2 * a] * C64::new(z[a].cos(), 0.0);
            h += &terms[2 + 2 * a] * C64::new(z[a].sin(), 0.0);
        }
        positive_part(
            &(p * C64::new(2.0, 0.0) - Mat::identity(p.nrows(), p.nrows()) + h * C64::new(s, 0.0)),
        )
    })?;
    out.perturbation_rank = Some(2 * m + 1);
    Ok(out)
}

/// `U(z)ΠU(z)*` with `U = exp(i·amplitude·(cos z₀ A + sin z₁ B))` for seeded
/// Hermitian `A`, `B` of unit norm supported on modes `|k| ≤ m`. On a
/// one-dimensional base only the `A` term is present.
pub fn rotated_section(
    reference: &GrassmannSection,
    m: usize,
    amplitude: f64,
    seed: u64,
) -> Result<GrassmannSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || {
        let h = random_low_mode_hermitian(reference.cutoff, m, 1.0, &mut rng);
        let n = h.norm();
        h / C64::new(n, 0.0)
    };
    let (a, b) = (unit(), unit());
    let grid = reference.grid;
    let mut out = reference.map(|x, p| {
        let z = grid.coords(x);
        let mut h = &a * C64::new(z[0].cos(), 0.0);
        if grid.dim() >= 2 {
            h += &b * C64::new(z[1].sin(), 0.0);
        }
        let u = unitary_exp(&(h * C64::new(amplitude, 0.0)));
        &u * p * u.adjoint()
    })?;
    out.perturbation_rank = Some(2 * m + 1);
    Ok(out)
}

/// `exp(iH)` for Hermitian `H`.
pub fn unitary_exp(h: &Mat) -> Mat {
    let (vals, vecs) = sorted_eigen(h);
    let d =
        nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|l| C64::new(0.0, *l).exp()));
    &vecs * Mat::from_diagonal(&d) * vecs.adjoint()
}

/// Projection onto the eigenvectors with positive eigenvalue.
pub fn positive_part(m: &Mat) -> Mat {
    let (vals, vecs) = sorted_eigen(m);
    let mut p = Mat::zeros(m.nrows(), m.nrows());
    for (k, l) in vals.iter().enumerate() {
        if *l > 0.0 {
            let v = vecs.column(k);
            p += v * v.adjoint();
        }
    }
    p
}

/// `P ± vv*` for a unit vector `v` orthogonal to (for `+`) or inside (for `−`)
/// the range of `P` at every point.
pub fn flip_section(p: &GrassmannSection, v: &[C64], add: bool) -> Result<GrassmannSection> {
    let v = nalgebra::DVector::from_column_slice(v);
    let rank1 = &v * v.adjoint() / C64::new(v.norm_squared(), 0.0);
    let sign = if add { 1.0 } else { -1.0 };
    let mut out = p.map(|_, m| m + &rank1 * C64::new(sign, 0.0))?;
    out.perturbation_rank = Some(1);
    Ok(out)
}

/// Unit basis vector of mode `k`.
pub fn mode_vector(cutoff: usize, k: i64) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); 2 * cutoff + 1];
    v[index_of(k, cutoff)] = C64::new(1.0, 0.0);
    v
}

/// One-step Fourier shift `e_k ↦ e_{k+1}`, truncated at the top mode.
pub fn shift_operator(cutoff: usize) -> Mat {
    let n = 2 * cutoff + 1;
    Mat::from_fn(n, n, |i, j| {
        if i == j + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `SPS*` at every base point.
pub fn shift_section(p: &GrassmannSection) -> Result<GrassmannSection> {
    let s = shift_operator(p.cutoff);
    p.map(|_, m| &s * m * s.adjoint())
}

/// Lower-band projector of the two-band lattice model
/// `h = sin s σx + sin t σy + (mass + cos s + cos t) σz`.
pub fn bloch_projector(z: [f64; 2], mass: f64) -> Mat {
    let (s, t) = (z[0], z[1]);
    let (hx, hy, hz) = (s.sin(), t.sin(), mass + s.cos() + t.cos());
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    // P = (I − ĥ·σ)/2
    let half = C64::new(0.5, 0.0);
    Mat::from_row_slice(
        2,
        2,
        &[
            half * (1.0 - hz / r),
            -half * C64::new(hx / r, -hy / r),
            -half * C64::new(hx / r, hy / r),
            half * (1.0 + hz / r),
        ],
    )
}

/// `Π_>` of the constant family with the 2×2 block on modes {−1, 0} replaced
/// by the lattice-model projector. Requires `0 < a < 1` so that mode 0 is
/// positive and mode −1 negative.
pub fn bloch_twisted_section(
    grid: BaseGrid,
    cutoff: usize,
    a: f64,
    mass: f64,
) -> Result<GrassmannSection> {
    if grid.dim() != 2 || !(0.0 < a && a < 1.0) {
        return Err(Error::InvalidParameter(
            "needs a T² base and 0 < a < 1".into(),
        ));
    }
    let fam = assemble_boundary_family(grid, cutoff, Potential::Constant(a))?;
    let pi = spectral_projection(&fam, GAP_TOL)?;
    let (lo, _) = (index_of(-1, cutoff), index_of(0, cutoff));
    pi.map(|x, m| {
        let mut out = m.clone();
        out.view_mut((lo, lo), (2, 2))
            .copy_from(&bloch_projector(grid.coords(x), mass));
        out
    })
}

/// The reference for [`bloch_twisted_section`]: `Π_>` with the {−1,0} block zeroed.
pub fn bloch_reference_section(grid: BaseGrid, cutoff: usize, a: f64) -> Result<GrassmannSection> {
    let fam = assemble_boundary_family(grid, cutoff, Potential::Constant(a))?;
    let pi = spectral_projection(&fam, GAP_TOL)?;
    let lo = index_of(-1, cutoff);
    pi.map(|_, m| {
        let mut out = m.clone();
        out.view_mut((lo, lo), (2, 2)).fill(C64::new(0.0, 0.0));
        out
    })
}

/// Fukui–Hatsugai–Suzuki lattice Chern number of the lower band of the
/// two-band model on an `n × n` grid.
pub fn lattice_chern_number(n: usize, mass: f64) -> f64 {
    let h = 2.0 * PI / n as f64;
    let state = |i: usize, j: usize| -> nalgebra::DVector<C64> {
        let p = bloch_projector([(i % n) as f64 * h, (j % n) as f64 * h], mass);
        let (_, vecs) = sorted_eigen(&p);
        vecs.column(1).into_owned()
    };
    let states: Vec<Vec<nalgebra::DVector<C64>>> = (0..n)
        .map(|i| (0..n).map(|j| state(i, j)).collect())
        .collect();
    let link = |a: &nalgebra::DVector<C64>, b: &nalgebra::DVector<C64>| {
        let z = a.dotc(b);
        z / z.norm()
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (i1, j1) = ((i + 1) % n, (j + 1) % n);
            let u1 = link(&states[i][j], &states[i1][j]);
            let u2 = link(&states[i1][j], &states[i1][j1]);
            let u3 = link(&states[i][j1], &states[i1][j1]);
            let u4 = link(&states[i][j], &states[i][j1]);
            total += (u1 * u2 / (u3 * u4)).arg();
        }
    }
    total / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt() -> BaseGrid {
        BaseGrid::point()
    }

    #[test]
    fn constant_potential_spectrum() {
        let f = assemble_boundary_family(pt(), 2, Potential::Constant(0.25)).unwrap();
        let d = f.spectral_decomposition();
        let expect = [-1.75, -0.75, 0.25, 1.25, 2.25];
        for (a, b) in d.eigenvalues[0].iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        let p = spectral_projection(&f, GAP_TOL).unwrap();
        assert_relative_eq!(p.traces()[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_mode_is_a_gap_error() {
        let f = assemble_boundary_family(pt(), 4, Potential::Constant(0.0)).unwrap();
        assert!(matches!(
            spectral_projection(&f, GAP_TOL),
            Err(Error::KernelGap { .. })
        ));
        assert!(matches!(
            eta_invariant(&f, EtaMethod::ClosedForm),
            Err(Error::KernelGap { .. })
        ));
    }

    #[test]
    fn cosine_potential_is_tridiagonal_hermitian() {
        let f = assemble_boundary_family(
            pt(),
            6,
            Potential::Cosine {
                offset: 0.3,
                amplitude: 1.0,
            },
        )
        .unwrap();
        let m = &f.matrices()[0];
        assert!(hermitian_defect(m) < 1e-14);
        assert_eq!(m[(0, 2)], C64::new(0.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(0.5, 0.0));
    }

    #[test]
    fn positive_definite_family_projects_to_identity() {
        let f = assemble_boundary_family(pt(), 4, Potential::Constant(4.5)).unwrap();
        let p = spectral_projection(&f, GAP_TOL).unwrap();
        assert!((&p.projections()[0] - Mat::identity(9, 9)).norm() < 1e-12);
    }

    #[test]
    fn eta_closed_form_values() {
        for (a, e) in [(0.25, 0.5), (0.5, 0.0), (0.75, -0.5)] {
            let f = assemble_boundary_family(pt(), 4, Potential::Constant(a)).unwrap();
            let v = eta_invariant(&f, EtaMethod::ClosedForm)
                .unwrap()
                .value(MultiIndex::EMPTY, 0)
                .re;
            assert_relative_eq!(v, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn relative_eta_of_removed_eigenprojection() {
        let f = assemble_boundary_family(pt(), 4, Potential::Constant(0.25)).unwrap();
        let p = spectral_projection(&f, GAP_TOL).unwrap();
        let q = flip_section(&p, &mode_vector(4, 0), false).unwrap();
        let e = relative_eta_pointwise(&p, &q)
            .unwrap()
            .value(MultiIndex::EMPTY, 0)
            .re;
        assert_relative_eq!(e, 2.0, epsilon = 1e-12);
        assert_eq!(relative_index(&p, &q, IndexMethod::Svd).unwrap(), vec![1]);
    }

    #[test]
    fn shift_section_has_index_minus_one() {
        let f = assemble_boundary_family(pt(), 4, Potential::Constant(0.25)).unwrap();
        let p = spectral_projection(&f, GAP_TOL).unwrap();
        let s = shift_section(&p).unwrap();
        assert_eq!(
            relative_index(&s, &p, IndexMethod::Trace).unwrap(),
            vec![-1]
        );
        assert_eq!(relative_index(&s, &p, IndexMethod::Svd).unwrap(), vec![-1]);
    }

    #[test]
    fn decay_test_detects_high_mode_difference() {
        let f = assemble_boundary_family(pt(), 8, Potential::Constant(0.25)).unwrap();
        let p = spectral_projection(&f, GAP_TOL).unwrap();
        let low = flip_section(&p, &mode_vector(8, 1), false).unwrap();
        assert!(check_relatively_smoothing(&p, &low, 8).is_ok());
        let high = flip_section(&p, &mode_vector(8, 7), false).unwrap();
        assert!(check_relatively_smoothing(&p, &high, 8).is_err());
    }

    #[test]
    fn perturbation_keeps_projection_and_low_modes() {
        let f = assemble_boundary_family(pt(), 16, Potential::Constant(0.25)).unwrap();
        let p = spectral_projection(&f, GAP_TOL).unwrap();
        let q = perturb_section(&p, 2, 0.8, 11).unwrap();
        check_relatively_smoothing(&p, &q, 16).unwrap();
        let r = relative_index(&p, &q, IndexMethod::Trace).unwrap();
        assert_eq!(r, relative_index(&p, &q, IndexMethod::Svd).unwrap());
    }

    #[test]
    fn lattice_chern_number_is_integral() {
        let c = lattice_chern_number(12, 1.0);
        assert!((c.abs() - 1.0).abs() < 1e-10, "{c}");
        assert!(lattice_chern_number(12, 3.0).abs() < 1e-10);
    }
}
