//! The model cylinder `[0,1] × S¹` over the base with `D = Υ(∂_u + ∂_z)`:
//! mode data, Calderon projectors, indices of global boundary problems by
//! solution counting, Laplacian spectra, domain projections built from a
//! cut-off Poisson extension, and the boundary defect of trace commutators.
//!
//! Boundary data live in `C^{2M}`, `M = 2N + 1`, ordered as the `u = 0` copy
//! of the Fourier modes followed by the `u = 1` copy. The boundary operator at
//! `u = 1` is `−∂`, so the spectral (APS-type) section is `Π_> ⊕ Π_<`.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, SVD};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_forms::{
    induced_curvature, BaseGrid, ConnectionData, FormField, Mat, OperatorForm, C64,
};
use crate::boundary_family::{
    check_relatively_smoothing, index_of, relative_index, sorted_eigen, BoundaryOperatorFamily,
    GrassmannSection, IndexMethod,
};
use crate::error::{Error, Result};

/// Singular values below this are zero.
pub const ZERO_SV: f64 = 1e-10;
/// Singular values between [`ZERO_SV`] and this make the problem degenerate.
pub const DEGENERATE_SV: f64 = 1e-6;

/// The boundary family together with the chirality sign `Υ = ±1`.
#[derive(Clone, Debug)]
pub struct CylinderProblem {
    family: BoundaryOperatorFamily,
    upsilon: f64,
}

impl CylinderProblem {
    pub fn new(family: BoundaryOperatorFamily, upsilon: f64) -> Result<Self> {
        if upsilon != 1.0 && upsilon != -1.0 {
            return Err(Error::InvalidParameter("chirality must be +1 or -1".into()));
        }
        Ok(Self { family, upsilon })
    }

    pub fn family(&self) -> &BoundaryOperatorFamily {
        &self.family
    }

    pub fn grid(&self) -> &BaseGrid {
        self.family.grid()
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    /// Number of circle modes `M`.
    pub fn modes(&self) -> usize {
        self.family.dim()
    }

    pub fn cutoff(&self) -> usize {
        self.family.cutoff()
    }
}

/// Eigenvalues `λ_k(z)` (ascending) and eigenvectors of the boundary family at
/// one base point. Mode `k` is the eigenvalue at sorted position `k + N`.
#[derive(Clone, Debug)]
pub struct ModeData {
    pub eigenvalues: Vec<f64>,
    pub basis: Mat,
}

impl ModeData {
    pub fn lambda(&self, k: i64, cutoff: usize) -> f64 {
        self.eigenvalues[index_of(k, cutoff)]
    }
}

pub fn mode_decompose(p: &CylinderProblem) -> Vec<ModeData> {
    p.family
        .matrices()
        .par_iter()
        .map(|m| {
            let (eigenvalues, basis) = sorted_eigen(m);
            ModeData { eigenvalues, basis }
        })
        .collect()
}

fn check_gap(modes: &[ModeData]) -> Result<()> {
    for (x, m) in modes.iter().enumerate() {
        let gap = m
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, l| a.min(l.abs()));
        if gap <= crate::boundary_family::GAP_TOL {
            return Err(Error::KernelGap {
                point: x,
                gap,
                tol: crate::boundary_family::GAP_TOL,
            });
        }
    }
    Ok(())
}

/// Normalized direction of `(1, e^{−sλ})`.
pub fn cauchy_direction(lambda: f64, s: f64) -> [f64; 2] {
    let e = -s * lambda;
    if e <= 0.0 {
        let b = e.exp();
        let n = (1.0 + b * b).sqrt();
        [1.0 / n, b / n]
    } else {
        let a = (-e).exp();
        let n = (1.0 + a * a).sqrt();
        [a / n, 1.0 / n]
    }
}

/// Per-mode rank-one Calderon blocks and the assembled projection onto the
/// boundary values of solutions of `(∂_u + ∂)f = 0`.
#[derive(Clone, Debug)]
pub struct CalderonData {
    pub blocks: Vec<Vec<Matrix2<f64>>>,
    pub projection: GrassmannSection,
}

/// Embed per-mode 2×2 blocks (in the eigenbasis) into `C^{2M}` Fourier coordinates.
fn assemble(modes: &ModeData, blocks: &[Matrix2<f64>]) -> Mat {
    let m = modes.eigenvalues.len();
    let mut out = Mat::zeros(2 * m, 2 * m);
    for (k, b) in blocks.iter().enumerate() {
        let v = modes.basis.column(k);
        let vv = v * v.adjoint();
        for r in 0..2 {
            for c in 0..2 {
                if b[(r, c)] != 0.0 {
                    let mut view = out.view_mut((r * m, c * m), (m, m));
                    view += &vv * C64::new(b[(r, c)], 0.0);
                }
            }
        }
    }
    out
}

pub fn calderon_projector(p: &CylinderProblem) -> Result<CalderonData> {
    let modes = mode_decompose(p);
    check_gap(&modes)?;
    let blocks: Vec<Vec<Matrix2<f64>>> = modes
        .iter()
        .map(|md| {
            md.eigenvalues
                .iter()
                .map(|l| {
                    let v = cauchy_direction(*l, 1.0);
                    Matrix2::new(v[0] * v[0], v[0] * v[1], v[1] * v[0], v[1] * v[1])
                })
                .collect()
        })
        .collect();
    let mats = modes
        .par_iter()
        .zip(&blocks)
        .map(|(md, b)| assemble(md, b))
        .collect();
    let projection = GrassmannSection::new(*p.grid(), p.cutoff(), mats)?;
    Ok(CalderonData { blocks, projection })
}

/// Limit block of the Calderon block: `diag(1,0)` for `λ > 0`, `diag(0,1)` for `λ < 0`.
pub fn aps_block(lambda: f64) -> Matrix2<f64> {
    if lambda > 0.0 {
        Matrix2::new(1.0, 0.0, 0.0, 0.0)
    } else {
        Matrix2::new(0.0, 0.0, 0.0, 1.0)
    }
}

/// The spectral section `Π_>(∂) ⊕ Π_>(−∂)`.
pub fn aps_section(p: &CylinderProblem) -> Result<GrassmannSection> {
    let modes = mode_decompose(p);
    check_gap(&modes)?;
    let mats = modes
        .par_iter()
        .map(|md| {
            let blocks: Vec<Matrix2<f64>> = md.eigenvalues.iter().map(|l| aps_block(*l)).collect();
            assemble(md, &blocks)
        })
        .collect();
    GrassmannSection::new(*p.grid(), p.cutoff(), mats)
}

/// `J = diag(−1, +1)` on the two boundary components; `⟨D⁺f, g⟩ − ⟨f, D⁻g⟩ = ⟨γf, Jγg⟩`.
pub fn boundary_orientation(m: usize) -> Mat {
    Mat::from_diagonal(&DVector::from_fn(2 * m, |i, _| {
        C64::new(if i < m { -1.0 } else { 1.0 }, 0.0)
    }))
}

/// Section defining the adjoint boundary condition, `J𝒫^⊥J`.
pub fn adjoint_section(s: &GrassmannSection) -> Result<GrassmannSection> {
    let n = s.dim();
    let j = boundary_orientation(n / 2);
    s.map(|_, p| &j * (Mat::identity(n, n) - p) * &j)
}

/// A global boundary problem `D⁺` with domain `𝒫γf = 0`.
#[derive(Clone, Debug)]
pub struct BoundaryValueProblem {
    pub problem: CylinderProblem,
    pub section: GrassmannSection,
}

impl BoundaryValueProblem {
    pub fn new(problem: CylinderProblem, section: GrassmannSection) -> Result<Self> {
        if section.grid() != problem.grid() || section.dim() != 2 * problem.modes() {
            return Err(Error::Dimension(
                "section does not match the cylinder boundary".into(),
            ));
        }
        Ok(Self { problem, section })
    }
}

/// `dim ker(𝒫 G)` where the columns of `G` are the normalized boundary values
/// of the mode solutions `e^{−sλu}`.
fn solution_count(p: &Mat, md: &ModeData, s: f64, point: usize, cutoff: usize) -> Result<usize> {
    let m = md.eigenvalues.len();
    let mut g = Mat::zeros(2 * m, m);
    for (k, l) in md.eigenvalues.iter().enumerate() {
        let d = cauchy_direction(*l, s);
        let v = md.basis.column(k);
        g.view_mut((0, k), (m, 1))
            .copy_from(&(v * C64::new(d[0], 0.0)));
        g.view_mut((m, k), (m, 1))
            .copy_from(&(v * C64::new(d[1], 0.0)));
    }
    let svd = SVD::new(p * g, false, false);
    let mut zero = 0;
    for (k, sv) in svd.singular_values.iter().enumerate() {
        if *sv < ZERO_SV {
            zero += 1;
        } else if *sv < DEGENERATE_SV {
            let _ = point;
            return Err(Error::DegenerateBC {
                mode: k as i64 - cutoff as i64,
                defect: *sv,
            });
        }
    }
    Ok(zero + m.saturating_sub(svd.singular_values.len()))
}

/// Kernel and cokernel dimensions of `D⁺_𝒫` at each base point.
pub fn kernel_cokernel(b: &BoundaryValueProblem) -> Result<Vec<(usize, usize)>> {
    let modes = mode_decompose(&b.problem);
    check_gap(&modes)?;
    let adj = adjoint_section(&b.section)?;
    let n = b.problem.cutoff();
    (0..modes.len())
        .into_par_iter()
        .map(|x| {
            let ker = solution_count(&b.section.projections()[x], &modes[x], 1.0, x, n)?;
            let coker = solution_count(&adj.projections()[x], &modes[x], -1.0, x, n)?;
            Ok((ker, coker))
        })
        .collect()
}

/// Index of `D_𝒫` by solution counting; `Υ = −1` exchanges the chiral halves.
pub fn aps_index(b: &BoundaryValueProblem) -> Result<Vec<i64>> {
    Ok(kernel_cokernel(b)?
        .into_iter()
        .map(|(k, c)| b.problem.upsilon as i64 * (k as i64 - c as i64))
        .collect())
}

/// `Υ·Tr(P(𝖣) − 𝒫)` at each base point.
pub fn calderon_trace(b: &BoundaryValueProblem) -> Result<Vec<f64>> {
    let cal = calderon_projector(&b.problem)?;
    Ok((0..b.section.grid().len())
        .map(|x| {
            b.problem.upsilon
                * (&cal.projection.projections()[x] - &b.section.projections()[x])
                    .trace()
                    .re
        })
        .collect())
}

/// Both sides of `ind(D_{𝒫₁}) − ind(D_{𝒫₂}) = ind(𝒫₂, 𝒫₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexIdentity {
    pub lhs: Vec<i64>,
    pub rhs: Vec<i64>,
}

impl IndexIdentity {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn relative_index_identity(
    b1: &BoundaryValueProblem,
    b2: &BoundaryValueProblem,
) -> Result<IndexIdentity> {
    let i1 = aps_index(b1)?;
    let i2 = aps_index(b2)?;
    let lhs = i1.iter().zip(&i2).map(|(a, b)| a - b).collect();
    let u = b1.problem.upsilon as i64;
    let rhs = relative_index(&b2.section, &b1.section, IndexMethod::Trace)?
        .into_iter()
        .map(|r| u * r)
        .collect();
    Ok(IndexIdentity { lhs, rhs })
}

/// Toggle Fourier mode `k` on boundary component `component` (0 for `u = 0`)
/// at every base point. Requires `e_k` to be an eigenvector of the section.
pub fn flip_boundary_mode(
    s: &GrassmannSection,
    component: usize,
    k: i64,
) -> Result<GrassmannSection> {
    let n = s.fourier_cutoff();
    let m = 2 * n + 1;
    let i = component * m + index_of(k, n);
    s.map(|_, p| {
        let mut q = p.clone();
        let inside = p[(i, i)].re > 0.5;
        q[(i, i)] = C64::new(if inside { 0.0 } else { 1.0 }, 0.0);
        q
    })
}

/// The spectral section with a seeded random set of toggled modes `|k| ≤ m`
/// on both boundary components. At least one mode is toggled.
pub fn random_mode_flips(
    p: &CylinderProblem,
    m: usize,
    seed: u64,
) -> Result<(GrassmannSection, Vec<(usize, i64)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<(usize, i64)> = (0..2)
        .flat_map(|c| (-(m as i64)..=m as i64).map(move |k| (c, k)))
        .collect();
    candidates.shuffle(&mut rng);
    let count = rng.gen_range(1..=candidates.len().min(4));
    let chosen: Vec<(usize, i64)> = candidates.into_iter().take(count).collect();
    let mut s = aps_section(p)?;
    for (c, k) in &chosen {
        s = flip_boundary_mode(&s, *c, *k)?;
    }
    Ok((s, chosen))
}

/// `cosh κ`, `sinh κ / κ` and `κ sinh κ` as entire functions of `x = κ²`.
fn mode_basis(x: f64) -> (f64, f64, f64) {
    if x.abs() < 1e-8 {
        (1.0 + x / 2.0, 1.0 + x / 6.0, x * (1.0 + x / 6.0))
    } else if x > 0.0 {
        let k = x.sqrt();
        (k.cosh(), k.sinh() / k, k * k.sinh())
    } else {
        let w = (-x).sqrt();
        (w.cos(), w.sin() / w, -w * w.sin())
    }
}

/// Which chiral Laplacian: `D⁻D⁺` (`Plus`) or `D⁺D⁻` (`Minus`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chirality {
    Plus,
    Minus,
}

/// Real 2×2 boundary block of a section on one mode (eigenbasis coordinates).
fn mode_block(section: &Mat, md: &ModeData, k: usize) -> Result<Matrix2<f64>> {
    let m = md.eigenvalues.len();
    let mut w = Mat::zeros(2 * m, 2);
    let v = md.basis.column(k);
    w.view_mut((0, 0), (m, 1)).copy_from(&v);
    w.view_mut((m, 1), (m, 1)).copy_from(&v);
    let b = w.adjoint() * section * &w;
    // the block must be invariant: 𝒫W = W·b
    let leak = (section * &w - &w * &b).norm();
    let imag = b.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if leak > 1e-10 || imag > 1e-12 {
        return Err(Error::Unsupported(format!(
            "Laplacian spectra need real mode-diagonal sections (leak {leak:e}, imaginary part {imag:e})"
        )));
    }
    Ok(Matrix2::new(
        b[(0, 0)].re,
        b[(0, 1)].re,
        b[(1, 0)].re,
        b[(1, 1)].re,
    ))
}

fn range_rows(b: &Matrix2<f64>) -> Vec<[f64; 2]> {
    let eig = SymmetricEigen::new(*b);
    (0..2)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| [eig.eigenvectors[(0, i)], eig.eigenvectors[(1, i)]])
        .collect()
}

/// Characteristic determinant of one chiral Laplacian on a single mode.
struct ModeLaplacian {
    lambda: f64,
    chirality: Chirality,
    value_rows: Vec<[f64; 2]>,
    derivative_rows: Vec<[f64; 2]>,
}

impl ModeLaplacian {
    fn new(block: &Matrix2<f64>, lambda: f64, chirality: Chirality) -> Self {
        let j = Matrix2::new(-1.0, 0.0, 0.0, 1.0);
        let adjoint = j * (Matrix2::identity() - block) * j;
        let (vb, db) = match chirality {
            Chirality::Plus => (*block, adjoint),
            Chirality::Minus => (adjoint, *block),
        };
        Self {
            lambda,
            chirality,
            value_rows: range_rows(&vb),
            derivative_rows: range_rows(&db),
        }
    }

    fn determinant(&self, mu: f64) -> f64 {
        let l = self.lambda;
        let (c1, s1, ks1) = mode_basis(l * l - mu);
        // boundary values of f = A·c + B·s and of the first-order operator applied to f
        let va = [1.0, c1];
        let vb = [0.0, s1];
        let (da, db) = match self.chirality {
            Chirality::Plus => ([l, ks1 + l * c1], [1.0, c1 + l * s1]),
            Chirality::Minus => ([l, -ks1 + l * c1], [-1.0, -c1 + l * s1]),
        };
        let dot = |r: &[f64; 2], v: &[f64; 2]| r[0] * v[0] + r[1] * v[1];
        let mut rows: Vec<[f64; 2]> = Vec::with_capacity(2);
        for r in &self.value_rows {
            rows.push([dot(r, &va), dot(r, &vb)]);
        }
        for r in &self.derivative_rows {
            rows.push([dot(r, &da), dot(r, &db)]);
        }
        debug_assert_eq!(rows.len(), 2);
        rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    }

    fn kernel_dim(&self) -> usize {
        // zero modes are the first-order solutions e^{∓λu}
        let s = if self.chirality == Chirality::Plus {
            1.0
        } else {
            -1.0
        };
        let d = cauchy_direction(self.lambda, s);
        let annihilated = self
            .value_rows
            .iter()
            .all(|r| (r[0] * d[0] + r[1] * d[1]).abs() < ZERO_SV);
        usize::from(annihilated)
    }

    /// All eigenvalues `≤ cap`, zero modes included, ascending.
    fn eigenvalues_below(&self, cap: f64, mode: i64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.kernel_dim()];
        let l2 = self.lambda * self.lambda;
        // bound-state window (0, λ²] sampled in μ, then oscillatory window in ω = √(μ − λ²)
        let mut grid: Vec<f64> = Vec::new();
        let start = 1e-7 * (1.0 + l2);
        if l2 > start {
            let steps = 512;
            for i in 0..=steps {
                grid.push(start + (l2 - start) * i as f64 / steps as f64);
            }
        } else {
            grid.push(start);
        }
        let wmax = (cap - l2).max(0.0).sqrt();
        let dw = std::f64::consts::PI / 64.0;
        let mut w = dw;
        while w <= wmax + dw {
            grid.push(l2 + w * w);
            w += dw;
        }
        let mut prev = (grid[0], self.determinant(grid[0]));
        for &mu in &grid[1..] {
            let cur = (mu, self.determinant(mu));
            if prev.1 == 0.0 {
                out.push(prev.0);
            } else if prev.1.signum() != cur.1.signum() && cur.1 != 0.0 {
                out.push(self.bisect(prev, cur, mode)?);
            }
            prev = cur;
        }
        out.retain(|mu| *mu <= cap);
        Ok(out)
    }

    fn bisect(&self, mut a: (f64, f64), mut b: (f64, f64), mode: i64) -> Result<f64> {
        for _ in 0..200 {
            let mid = 0.5 * (a.0 + b.0);
            if (b.0 - a.0) <= 1e-14 * mid.abs().max(1.0) {
                return Ok(mid);
            }
            let f = self.determinant(mid);
            if !f.is_finite() {
                return Err(Error::RootFinderStall { mode, near: mid });
            }
            if f == 0.0 {
                return Ok(mid);
            }
            if f.signum() == a.1.signum() {
                a = (mid, f);
            } else {
                b = (mid, f);
            }
        }
        Err(Error::RootFinderStall {
            mode,
            near: 0.5 * (a.0 + b.0),
        })
    }
}

/// First `count` eigenvalues of the chiral Laplacian of `b` on mode `k` at a
/// base point, found by bracketing sign changes of the characteristic
/// determinant and bisection.
pub fn laplacian_eigenvalues(
    b: &BoundaryValueProblem,
    point: usize,
    k: i64,
    chirality: Chirality,
    count: usize,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let modes = mode_decompose(&b.problem);
    let md = &modes[point];
    let idx = index_of(k, b.problem.cutoff());
    let block = mode_block(&b.section.projections()[point], md, idx)?;
    let op = ModeLaplacian::new(&block, md.eigenvalues[idx], chirality);
    let l2 = md.eigenvalues[idx].powi(2);
    let mut cap = l2 + (std::f64::consts::PI * (count as f64 + 2.0)).powi(2);
    loop {
        let ev = op.eigenvalues_below(cap, k)?;
        if ev.len() >= count {
            return Ok(ev[..count].to_vec());
        }
        cap *= 2.0;
    }
}

/// Chiral Laplacian spectra below a cutoff on a set of modes at one point.
#[derive(Clone, Debug)]
pub struct ModeSpectra {
    pub cutoff: f64,
    pub modes: Vec<i64>,
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
    lambdas: Vec<f64>,
}

impl ModeSpectra {
    /// `Σ_k Σ e^{−tμ⁺} − Σ e^{−tμ⁻}` with the Gaussian tail bound checked.
    pub fn supertrace(&self, t: f64) -> Result<f64> {
        let mut total = 0.0;
        for (i, l) in self.lambdas.iter().enumerate() {
            let w0 = (self.cutoff - l * l).max(0.0).sqrt();
            let bound = (-t * l * l).exp() * statrs::function::erf::erfc(w0 * t.sqrt())
                / (std::f64::consts::PI * t).sqrt()
                + (-t * self.cutoff).exp();
            if bound > 1e-10 {
                return Err(Error::Cutoff {
                    cutoff: self.cutoff,
                    t,
                    bound,
                });
            }
            let p: f64 = self.plus[i].iter().map(|m| (-t * m).exp()).sum();
            let q: f64 = self.minus[i].iter().map(|m| (-t * m).exp()).sum();
            total += p - q;
        }
        Ok(total)
    }

    /// Nonzero eigenvalues of both chiral Laplacians agree pairwise.
    pub fn pairing_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, m) in self.plus.iter().zip(&self.minus) {
            let p: Vec<f64> = p.iter().copied().filter(|x| *x > 0.0).collect();
            let m: Vec<f64> = m.iter().copied().filter(|x| *x > 0.0).collect();
            let n = p.len().min(m.len());
            // the last eigenvalue below the cutoff may be missing on one side
            if p.len().abs_diff(m.len()) > 1 {
                return f64::INFINITY;
            }
            for i in 0..n {
                worst = worst.max((p[i] - m[i]).abs() / (1.0 + p[i]));
            }
        }
        worst
    }
}

/// Spectra of both chiral Laplacians on the listed modes, up to the cutoff
/// `Λ` needed for `e^{−t_min Λ} ≤ 1e-12`.
pub fn mode_spectra(
    b: &BoundaryValueProblem,
    point: usize,
    modes: &[i64],
    t_min: f64,
) -> Result<ModeSpectra> {
    let cutoff = 12.0 * std::f64::consts::LN_10 / t_min;
    let md = &mode_decompose(&b.problem)[point];
    let n = b.problem.cutoff();
    let results: Vec<(f64, Vec<f64>, Vec<f64>)> = modes
        .par_iter()
        .map(|&k| {
            let idx = index_of(k, n);
            let l = md.eigenvalues[idx];
            let block = mode_block(&b.section.projections()[point], md, idx)?;
            let plus = ModeLaplacian::new(&block, l, Chirality::Plus)
                .eigenvalues_below(cutoff + l * l, k)?;
            let minus = ModeLaplacian::new(&block, l, Chirality::Minus)
                .eigenvalues_below(cutoff + l * l, k)?;
            Ok((l, plus, minus))
        })
        .collect::<Result<_>>()?;
    let u = b.problem.upsilon;
    let mut out = ModeSpectra {
        cutoff,
        modes: modes.to_vec(),
        plus: vec![],
        minus: vec![],
        lambdas: vec![],
    };
    for (l, p, m) in results {
        out.lambdas.push(l);
        if u > 0.0 {
            out.plus.push(p);
            out.minus.push(m);
        } else {
            out.plus.push(m);
            out.minus.push(p);
        }
    }
    Ok(out)
}

/// Modes whose boundary blocks differ between two sections at a point.
pub fn differing_modes(
    b1: &BoundaryValueProblem,
    b2: &BoundaryValueProblem,
    point: usize,
) -> Result<Vec<i64>> {
    let md = &mode_decompose(&b1.problem)[point];
    let n = b1.problem.cutoff();
    let mut out = Vec::new();
    for idx in 0..md.eigenvalues.len() {
        let a = mode_block(&b1.section.projections()[point], md, idx)?;
        let b = mode_block(&b2.section.projections()[point], md, idx)?;
        if (a - b).norm() > 1e-12 {
            out.push(idx as i64 - n as i64);
        }
    }
    Ok(out)
}

/// Relative heat supertraces `Str e^{−tΔ₁} − Str e^{−tΔ₂}` over the base.
/// Modes where both sections agree cancel exactly and are skipped.
#[derive(Clone, Debug)]
pub struct RelativeHeatTrace {
    first: Vec<ModeSpectra>,
    second: Vec<ModeSpectra>,
    pub t_min: f64,
}

impl RelativeHeatTrace {
    pub fn new(b1: &BoundaryValueProblem, b2: &BoundaryValueProblem, t_min: f64) -> Result<Self> {
        if b1.section.grid() != b2.section.grid() || b1.section.dim() != b2.section.dim() {
            return Err(Error::Dimension("problems differ in shape".into()));
        }
        check_relatively_smoothing(&b1.section, &b2.section, b1.problem.cutoff())?;
        let mut first = Vec::new();
        let mut second = Vec::new();
        for x in 0..b1.section.grid().len() {
            let modes = differing_modes(b1, b2, x)?;
            first.push(mode_spectra(b1, x, &modes, t_min)?);
            second.push(mode_spectra(b2, x, &modes, t_min)?);
        }
        Ok(Self {
            first,
            second,
            t_min,
        })
    }

    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        if t < self.t_min {
            return Err(Error::Cutoff {
                cutoff: self.first.first().map_or(0.0, |s| s.cutoff),
                t,
                bound: f64::NAN,
            });
        }
        self.first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| Ok(a.supertrace(t)? - b.supertrace(t)?))
            .collect()
    }

    pub fn pairing_defect(&self) -> f64 {
        self.first
            .iter()
            .chain(&self.second)
            .map(|s| s.pairing_defect())
            .fold(0.0, f64::max)
    }
}

pub fn relative_heat_trace(
    b1: &BoundaryValueProblem,
    b2: &BoundaryValueProblem,
    t: f64,
) -> Result<Vec<f64>> {
    RelativeHeatTrace::new(b1, b2, t)?.at(t)
}

/// Smoothstep cut-off: 1 on `[0, ¼]`, 0 on `[¾, 1]`.
pub fn cutoff_function(u: f64) -> f64 {
    let s = ((u - 0.25) / 0.5).clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// `𝖯 = I − K𝒫γ` for a section and for its adjoint section, on a uniform
/// u-grid times a window of active modes, at every base point.
#[derive(Clone, Debug)]
pub struct DomainProjection {
    pub u_grid: Vec<f64>,
    pub modes: Vec<i64>,
    /// Block-diagonal `𝖯(𝒫) ⊕ 𝖯(J𝒫^⊥J)` on the graded space.
    pub projections: Vec<Mat>,
    pub window_sections: Vec<Mat>,
    grid: BaseGrid,
}

impl DomainProjection {
    /// Size of one chiral half (`u`-points × active modes).
    pub fn half_size(&self) -> usize {
        self.u_grid.len() * self.modes.len()
    }

    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    /// Flat graded connection matching this representation.
    pub fn flat_connection(&self) -> ConnectionData {
        ConnectionData::flat(self.grid, (self.half_size(), self.half_size()))
    }

    /// Lift a connection on the active-mode bundle to the cylinder: `ω ⊗ I_u`
    /// on both chiral halves.
    pub fn lift_connection(&self, c: &ConnectionData) -> Result<ConnectionData> {
        let w = self.modes.len();
        if c.dims() != (w, 0) || c.grid() != &self.grid {
            return Err(Error::Dimension(
                "connection must act on the active modes".into(),
            ));
        }
        let nu = self.u_grid.len();
        let mut omega = OperatorForm::zero(self.grid, (nu * w, 0));
        for (idx, mats) in c.one_form().components() {
            let lifted = mats.iter().map(|m| kron_identity(nu, m)).collect();
            omega.insert(*idx, lifted);
        }
        let half = ConnectionData::new(omega)?;
        half.direct_sum(&half)
    }

    /// Function on the grid (index `j·w + i`) given by boundary data `φ ∈ C^{2w}`.
    pub fn poisson_matrix(&self, heat: &dyn Fn(f64) -> Mat) -> Mat {
        let w = self.modes.len();
        let nu = self.u_grid.len();
        let mut k = Mat::zeros(nu * w, 2 * w);
        for (j, &u) in self.u_grid.iter().enumerate() {
            let (a, b) = (cutoff_function(u), cutoff_function(1.0 - u));
            if a != 0.0 {
                k.view_mut((j * w, 0), (w, w))
                    .copy_from(&(heat(u) * C64::new(a, 0.0)));
            }
            if b != 0.0 {
                k.view_mut((j * w, w), (w, w))
                    .copy_from(&(heat(1.0 - u) * C64::new(b, 0.0)));
            }
        }
        k
    }
}

fn kron_identity(n: usize, m: &Mat) -> Mat {
    let w = m.nrows();
    let mut out = Mat::zeros(n * w, n * w);
    for j in 0..n {
        out.view_mut((j * w, j * w), (w, w)).copy_from(m);
    }
    out
}

/// Boundary evaluation `γ`: values at `u = 0` and `u = 1`.
fn trace_matrix(nu: usize, w: usize) -> Mat {
    let mut g = Mat::zeros(2 * w, nu * w);
    for i in 0..w {
        g[(i, i)] = C64::new(1.0, 0.0);
        g[(w + i, (nu - 1) * w + i)] = C64::new(1.0, 0.0);
    }
    g
}

/// Build `𝖯 = I − K𝒫γ` with the Poisson operator `K = χ(u)e^{−u∂²}` (and its
/// mirror at `u = 1`) on modes `|k| ≤ window`. The section and the boundary
/// family must not couple the window to the remaining modes.
pub fn domain_projection(
    s: &GrassmannSection,
    p: &CylinderProblem,
    window: usize,
    u_points: usize,
) -> Result<DomainProjection> {
    if u_points < 64 {
        return Err(Error::InvalidParameter(
            "u-grid needs at least 64 points".into(),
        ));
    }
    let n = p.cutoff();
    let m = p.modes();
    let window = window.min(n);
    let modes: Vec<i64> = (-(window as i64)..=window as i64).collect();
    let w = modes.len();
    let idx: Vec<usize> = modes.iter().map(|k| index_of(*k, n)).collect();
    let bidx: Vec<usize> = idx
        .iter()
        .copied()
        .chain(idx.iter().map(|i| i + m))
        .collect();
    let u_grid: Vec<f64> = (0..u_points)
        .map(|j| j as f64 / (u_points - 1) as f64)
        .collect();
    let adj = adjoint_section(s)?;
    let grid = *p.grid();
    let gamma = trace_matrix(u_points, w);
    let mut window_sections = Vec::with_capacity(grid.len());
    let projections: Vec<Mat> = (0..grid.len())
        .map(|x| {
            let f = &p.family().matrices()[x];
            let sec = &s.projections()[x];
            for i in 0..m {
                let inside = idx.contains(&i);
                for &j in &idx {
                    if !inside && f[(i, j)].norm() > 1e-14 {
                        return Err(Error::Unsupported(
                            "boundary family couples the mode window to other modes".into(),
                        ));
                    }
                }
            }
            for i in 0..2 * m {
                if bidx.contains(&i) {
                    continue;
                }
                for &j in &bidx {
                    if sec[(i, j)].norm() > 1e-12 || sec[(j, i)].norm() > 1e-12 {
                        return Err(Error::Unsupported(
                            "section couples the mode window to other modes".into(),
                        ));
                    }
                }
            }
            let fw = Mat::from_fn(w, w, |a, b| f[(idx[a], idx[b])]);
            let (vals, vecs) = sorted_eigen(&fw);
            let heat = |u: f64| {
                let d = DVector::from_iterator(
                    w,
                    vals.iter().map(|l| C64::new((-u * l * l).exp(), 0.0)),
                );
                &vecs * Mat::from_diagonal(&d) * vecs.adjoint()
            };
            let dp = DomainProjection {
                u_grid: u_grid.clone(),
                modes: modes.clone(),
                projections: vec![],
                window_sections: vec![],
                grid,
            };
            let k = dp.poisson_matrix(&heat);
            let restrict = |q: &Mat| Mat::from_fn(2 * w, 2 * w, |a, b| q[(bidx[a], bidx[b])]);
            let (qp, qm) = (restrict(sec), restrict(&adj.projections()[x]));
            let size = u_points * w;
            let id = Mat::identity(size, size);
            let pp = &id - &k * &qp * &gamma;
            let pm = &id - &k * &qm * &gamma;
            let mut out = Mat::zeros(2 * size, 2 * size);
            out.view_mut((0, 0), (size, size)).copy_from(&pp);
            out.view_mut((size, size), (size, size)).copy_from(&pm);
            window_sections.push(qp);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(DomainProjection {
        u_grid,
        modes,
        projections,
        window_sections,
        grid,
    })
}

/// Curvature `𝖯(Ω + ∇𝖯∧∇𝖯)𝖯` of the connection `𝖯∇𝖯`, graded by chirality.
pub fn interior_curvature(d: &DomainProjection, c: &ConnectionData) -> Result<OperatorForm> {
    induced_curvature(c, &d.projections)
}

/// `Σ_{k≥1} ((−1)^k/k!) Str(𝖱₁^k − 𝖱₂^k)`; the series stops at `2k ≤ dim B`.
pub fn relative_interior_eta_form(
    d1: &DomainProjection,
    d2: &DomainProjection,
    s1: &GrassmannSection,
    s2: &GrassmannSection,
    c: &ConnectionData,
) -> Result<FormField> {
    check_relatively_smoothing(s1, s2, s1.fourier_cutoff())?;
    let grid = *c.grid();
    let coeff: Vec<f64> = (0..=grid.dim() / 2)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (-1f64).powi(k as i32) / crate::superconnection::factorial(k)
            }
        })
        .collect();
    let r1 = crate::base_forms::form_polynomial(&interior_curvature(d1, c)?, &coeff)?;
    let r2 = crate::base_forms::form_polynomial(&interior_curvature(d2, c)?, &coeff)?;
    Ok(r1.supertrace().sub(&r2.supertrace()))
}

/// Chebyshev–Lobatto nodes on `[0, 1]` (ascending), Clenshaw–Curtis weights
/// and the differentiation matrix.
pub fn chebyshev_lobatto(n: usize) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
    use std::f64::consts::PI;
    let n1 = n - 1;
    let x: Vec<f64> = (0..n).map(|j| -(PI * j as f64 / n1 as f64).cos()).collect();
    let c = |j: usize| if j == 0 || j == n1 { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (x[i] - x[j]);
            }
        }
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    // Clenshaw–Curtis weights on [−1, 1]
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = PI * j as f64 / n1 as f64;
        let mut s = 0.0;
        for k in 1..=n1 / 2 {
            let b = if 2 * k == n1 { 1.0 } else { 2.0 };
            s += b / (4.0 * (k * k) as f64 - 1.0) * (2.0 * k as f64 * theta).cos();
        }
        *wj = if j == 0 || j == n1 { 1.0 } else { 2.0 } * (1.0 - s) / n1 as f64;
    }
    // map to [0, 1]
    let u = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let w = w.iter().map(|v| 0.5 * v).collect();
    (u, w, d * 2.0)
}

/// `Υ = [[0, −1], [1, 0]]` on the two spinor components.
pub fn spinor_upsilon() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// `Tr(DK) − Tr(KD)` for `D = Υ(∂_u + B)`, `B = diag(λ, −λ)`, and an integral
/// operator with smooth kernel `k(u, w)`, computed two ways: by spectral
/// quadrature of the diagonal of the commutator kernel, and from the Green
/// boundary term `tr(Υk(1,1)) − tr(Υk(0,0))`.
pub fn commutator_trace_defect(
    lambda: f64,
    kernel: &dyn Fn(f64, f64) -> Matrix2<f64>,
    nodes: usize,
) -> (f64, f64) {
    let (u, w, d) = chebyshev_lobatto(nodes);
    let n = u.len();
    let ups = spinor_upsilon();
    let b = Matrix2::new(lambda, 0.0, 0.0, -lambda);
    let k: Vec<Vec<Matrix2<f64>>> = (0..n)
        .map(|i| (0..n).map(|j| kernel(u[i], u[j])).collect())
        .collect();
    let mut direct = 0.0;
    for i in 0..n {
        let mut du = Matrix2::zeros();
        let mut dw = Matrix2::zeros();
        for l in 0..n {
            du += k[l][i] * d[(i, l)];
            dw += k[i][l] * d[(i, l)];
        }
        let ub = ups * b;
        let f = (ups * (du + dw)).trace() + (ub * k[i][i] - k[i][i] * ub).trace();
        direct += w[i] * f;
    }
    let boundary = (ups * kernel(1.0, 1.0)).trace() - (ups * kernel(0.0, 0.0)).trace();
    (direct, boundary)
}

/// Eigenpairs of the self-adjoint realization of `Υ(∂_u + diag(λ, −λ))` with
/// `φ(0) ∈ span(v0)`, `φ(1) ∈ span(v1)` for real `v0, v1`, with `|ν| ≤ nu_max`.
pub fn local_eigenpairs(
    lambda: f64,
    v0: [f64; 2],
    v1: [f64; 2],
    nu_max: f64,
) -> Result<Vec<(f64, [f64; 2])>> {
    let transfer = |nu: f64| -> Matrix2<f64> {
        let (c, s, _) = mode_basis(lambda * lambda - nu * nu);
        Matrix2::identity() * c + Matrix2::new(-lambda, nu, -nu, lambda) * s
    };
    let n0 = (v0[0] * v0[0] + v0[1] * v0[1]).sqrt();
    let v0 = nalgebra::Vector2::new(v0[0] / n0, v0[1] / n0);
    let det = |nu: f64| {
        let e = transfer(nu) * v0;
        e[0] * v1[1] - e[1] * v1[0]
    };
    let steps = (2.0 * nu_max * 64.0).ceil() as usize;
    let mut out = Vec::new();
    let mut prev = (-nu_max, det(-nu_max));
    for i in 1..=steps {
        let nu = -nu_max + 2.0 * nu_max * i as f64 / steps as f64;
        let cur = (nu, det(nu));
        if prev.1.signum() != cur.1.signum() {
            let (mut a, mut b) = (prev, cur);
            for _ in 0..200 {
                let mid = 0.5 * (a.0 + b.0);
                let f = det(mid);
                if f.signum() == a.1.signum() {
                    a = (mid, f);
                } else {
                    b = (mid, f);
                }
            }
            out.push(0.5 * (a.0 + b.0));
        }
        prev = cur;
    }
    let (uq, wq, _) = chebyshev_lobatto(96);
    Ok(out
        .into_iter()
        .map(|nu| {
            let norm2: f64 = uq
                .iter()
                .zip(&wq)
                .map(|(u, w)| {
                    let (c, s, _) = mode_basis((lambda * lambda - nu * nu) * u * u);
                    let a = Matrix2::new(-lambda, nu, -nu, lambda);
                    let phi = (Matrix2::identity() * c + a * (s * u)) * v0;
                    w * phi.norm_squared()
                })
                .sum();
            let r = norm2.sqrt();
            (nu, [v0[0] / r, v0[1] / r])
        })
        .collect())
}

/// Kernel `Σ_j e^{−ν_j²} φ_j(u) φ_j(w)ᵀ` of a function of the self-adjoint
/// realization with local boundary lines `v0`, `v1`.
pub fn spectral_kernel(
    lambda: f64,
    v0: [f64; 2],
    v1: [f64; 2],
) -> Result<impl Fn(f64, f64) -> Matrix2<f64>> {
    let pairs = local_eigenpairs(lambda, v0, v1, 8.0 + lambda.abs())?;
    Ok(move |u: f64, w: f64| {
        let mut k = Matrix2::zeros();
        for (nu, p0) in &pairs {
            let a = Matrix2::new(-lambda, *nu, -*nu, lambda);
            let eval = |x: f64| {
                let (c, s, _) = mode_basis((lambda * lambda - nu * nu) * x * x);
                (Matrix2::identity() * c + a * (s * x)) * nalgebra::Vector2::new(p0[0], p0[1])
            };
            k += eval(u) * eval(w).transpose() * (-nu * nu).exp();
        }
        k
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_family::{assemble_boundary_family, Potential};
    use approx::assert_relative_eq;

    fn problem(n: usize, a: f64) -> CylinderProblem {
        let f = assemble_boundary_family(BaseGrid::point(), n, Potential::Constant(a)).unwrap();
        CylinderProblem::new(f, 1.0).unwrap()
    }

    #[test]
    fn calderon_block_closed_form() {
        let p = problem(3, 0.25);
        let cal = calderon_projector(&p).unwrap();
        let b = cal.blocks[0][index_of(0, 3)];
        let e = (-0.25f64).exp();
        let z = 1.0 / (1.0 + e * e);
        assert_relative_eq!(b[(0, 0)], z, epsilon = 1e-15);
        assert_relative_eq!(b[(0, 1)], z * e, epsilon = 1e-15);
        assert_relative_eq!(b[(1, 1)], z * e * e, epsilon = 1e-15);
    }

    #[test]
    fn calderon_decays_to_aps_blocks() {
        let p = problem(12, 0.25);
        let cal = calderon_projector(&p).unwrap();
        let md = &mode_decompose(&p)[0];
        for (k, l) in md.eigenvalues.iter().enumerate() {
            if l.abs() >= 5.0 {
                let diff = SymmetricEigen::new(cal.blocks[0][k] - aps_block(*l));
                let op_norm = diff.eigenvalues.amax();
                assert!(op_norm <= (-l.abs()).exp(), "{l} {op_norm}");
            }
        }
    }

    #[test]
    fn aps_problem_has_index_zero_and_flip_adds_kernel() {
        let p = problem(4, 0.25);
        let s = aps_section(&p).unwrap();
        let b = BoundaryValueProblem::new(p.clone(), s.clone()).unwrap();
        assert_eq!(kernel_cokernel(&b).unwrap(), vec![(0, 0)]);
        let f = flip_boundary_mode(&s, 0, 0).unwrap();
        let bf = BoundaryValueProblem::new(p.clone(), f).unwrap();
        assert_eq!(kernel_cokernel(&bf).unwrap(), vec![(1, 0)]);
        assert_eq!(aps_index(&bf).unwrap(), vec![1]);
        assert_relative_eq!(calderon_trace(&bf).unwrap()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn calderon_condition_is_invertible() {
        let p = problem(4, 0.25);
        let cal = calderon_projector(&p).unwrap();
        let b = BoundaryValueProblem::new(p, cal.projection).unwrap();
        assert_eq!(kernel_cokernel(&b).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn chirality_flip_negates_index() {
        let f = assemble_boundary_family(BaseGrid::point(), 4, Potential::Constant(0.25)).unwrap();
        let p = CylinderProblem::new(f, -1.0).unwrap();
        let s = flip_boundary_mode(&aps_section(&p).unwrap(), 0, 0).unwrap();
        assert_eq!(
            aps_index(&BoundaryValueProblem::new(p, s).unwrap()).unwrap(),
            vec![-1]
        );
    }

    #[test]
    fn laplacian_spectrum_of_aps_mode() {
        // Δ⁺ on a λ > 0 mode with APS data: f(0) = 0, (f′ + λf)(1) = 0
        let p = problem(3, 0.25);
        let b = BoundaryValueProblem::new(p.clone(), aps_section(&p).unwrap()).unwrap();
        let ev = laplacian_eigenvalues(&b, 0, 2, Chirality::Plus, 4).unwrap();
        let l = 2.25f64;
        for mu in &ev {
            assert!(*mu >= l * l);
            let w = (mu - l * l).sqrt();
            assert!((w * w.cos() + l * w.sin()).abs() < 1e-8);
        }
        assert!(laplacian_eigenvalues(&b, 0, 2, Chirality::Plus, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn flip_pairs_spectra_and_heat_trace_is_index() {
        let p = problem(3, 0.25);
        let s = aps_section(&p).unwrap();
        let b1 =
            BoundaryValueProblem::new(p.clone(), flip_boundary_mode(&s, 0, 0).unwrap()).unwrap();
        let b2 = BoundaryValueProblem::new(p, s).unwrap();
        let h = RelativeHeatTrace::new(&b1, &b2, 1e-3).unwrap();
        assert!(h.pairing_defect() < 1e-9);
        for t in [1e-3, 0.1, 10.0] {
            assert_relative_eq!(h.at(t).unwrap()[0], 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn domain_projection_identities() {
        let p = problem(2, 0.25);
        let s = flip_boundary_mode(&aps_section(&p).unwrap(), 1, 0).unwrap();
        let d = domain_projection(&s, &p, 1, 64).unwrap();
        let pr = &d.projections[0];
        assert!((pr * pr - pr).norm() < 1e-8);
        let w = d.modes.len();
        let half = d.half_size();
        let gamma = trace_matrix(64, w);
        let top = pr.view((0, 0), (half, half)).into_owned();
        assert!((&d.window_sections[0] * &gamma * &top).norm() < 1e-8);
    }

    #[test]
    fn zero_section_gives_identity_domain_projection() {
        let p = problem(2, 0.25);
        let zero = GrassmannSection::constant(BaseGrid::point(), 2, Mat::zeros(10, 10)).unwrap();
        let d = domain_projection(&zero, &p, 1, 64).unwrap();
        let half = d.half_size();
        let top = d.projections[0].view((0, 0), (half, half)).into_owned();
        assert!((top - Mat::identity(half, half)).norm() < 1e-14);
    }

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        let (u, w, d) = chebyshev_lobatto(17);
        let s: f64 = u.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert_relative_eq!(s, 1.0 / 7.0, epsilon = 1e-14);
        let deriv = &d * DVector::from_iterator(17, u.iter().map(|x| x.powi(3)));
        for (i, x) in u.iter().enumerate() {
            assert!((deriv[i] - 3.0 * x * x).abs() < 1e-11);
        }
    }

    #[test]
    fn interior_kernel_has_no_defect() {
        let k = |u: f64, w: f64| {
            Matrix2::new(1.0, 0.3, -0.7, 0.5)
                * (-((u - 0.5).powi(2) + (w - 0.5).powi(2)) / 0.0025).exp()
        };
        let (direct, boundary) = commutator_trace_defect(0.25, &k, 64);
        assert!(direct.abs() < 1e-10 && boundary.abs() < 1e-10);
    }
}
