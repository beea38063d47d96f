//! Scaled superconnections, their curvature and heat exponentials, Chern and
//! transgression forms, and the t→0 / t→∞ limits for pairs of Grassmann
//! sections.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::base_forms::{
    covariant_derivative, grading_conjugate, hermitian_defect, induced_curvature, BaseGrid,
    ConnectionData, FormField, Mat, MultiIndex, OperatorForm, C64,
};
use crate::boundary_family::GrassmannSection;
use crate::error::{Error, Result};

const SERIES_SWITCH: f64 = 1e-4;

/// First divided difference of `e^{−x}`.
pub fn divided_difference_1(a: f64, b: f64) -> f64 {
    let h = b - a;
    if h.abs() < SERIES_SWITCH {
        let m = 0.5 * (a + b);
        -(-m).exp() * (1.0 + h * h / 24.0 + h.powi(4) / 1920.0)
    } else {
        ((-a).exp() - (-b).exp()) / (a - b)
    }
}

/// Second divided difference of `e^{−x}`.
pub fn divided_difference_2(a: f64, b: f64, c: f64) -> f64 {
    let mut x = [a, b, c];
    x.sort_by(|p, q| p.partial_cmp(q).expect("finite eigenvalues"));
    let spread = x[2] - x[0];
    if spread < SERIES_SWITCH {
        let m = (x[0] + x[1] + x[2]) / 3.0;
        let y = [x[0] - m, x[1] - m, x[2] - m];
        let mut h2 = 0.0;
        let mut h3 = 0.0;
        for i in 0..3 {
            for j in i..3 {
                h2 += y[i] * y[j];
                for k in j..3 {
                    h3 += y[i] * y[j] * y[k];
                }
            }
        }
        (-m).exp() * (0.5 + h2 / 24.0 - h3 / 120.0)
    } else {
        (divided_difference_1(x[0], x[1]) - divided_difference_1(x[1], x[2])) / (x[0] - x[2])
    }
}

/// Eigen-decomposition of an even Hermitian matrix, diagonalized block by
/// block so that the eigenbasis commutes with the grading.
fn graded_eigen(f0: &Mat, p: usize) -> Result<(Vec<f64>, Mat)> {
    let n = f0.nrows();
    let defect = hermitian_defect(f0);
    if defect > 1e-9 * (1.0 + f0.norm()) {
        return Err(Error::NotHermitian(defect));
    }
    let mut vals = vec![0.0; n];
    let mut vecs = Mat::zeros(n, n);
    for (start, len) in [(0, p), (p, n - p)] {
        if len == 0 {
            continue;
        }
        let block = f0.view((start, start), (len, len)).into_owned();
        let block = (&block + block.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(block);
        for i in 0..len {
            vals[start + i] = eig.eigenvalues[i];
        }
        vecs.view_mut((start, start), (len, len))
            .copy_from(&eig.eigenvectors);
    }
    Ok((vals, vecs))
}

fn heat_at_point(
    comps: &[(MultiIndex, Mat)],
    dims: (usize, usize),
    base_dim: usize,
) -> Result<Vec<(MultiIndex, Mat)>> {
    let n = dims.0 + dims.1;
    let p = dims.0;
    let zero = Mat::zeros(n, n);
    let f0 = comps
        .iter()
        .find(|(k, _)| *k == MultiIndex::EMPTY)
        .map_or(&zero, |(_, m)| m);
    let odd_part = (f0 - grading_conjugate(f0, p))
        .iter()
        .fold(0.0f64, |a, x| a.max(x.norm()));
    if odd_part > 1e-12 * (1.0 + f0.norm()) {
        return Err(Error::Dimension(
            "degree-0 curvature block must be even".into(),
        ));
    }
    let (lam, v) = graded_eigen(f0, p)?;
    let vt = v.adjoint();
    let nil: Vec<(MultiIndex, Mat)> = comps
        .iter()
        .filter(|(k, _)| *k != MultiIndex::EMPTY)
        .map(|(k, m)| (*k, &vt * m * &v))
        .collect();

    let mut out: Vec<(MultiIndex, Mat)> = Vec::new();
    let mut add = |k: MultiIndex, m: Mat| {
        if let Some(e) = out.iter_mut().find(|(kk, _)| *kk == k) {
            e.1 += m;
        } else {
            out.push((k, m));
        }
    };
    add(
        MultiIndex::EMPTY,
        Mat::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            lam.iter().map(|l| C64::new((-l).exp(), 0.0)),
        )),
    );
    for (k, m) in &nil {
        let t = Mat::from_fn(n, n, |a, b| {
            m[(a, b)] * divided_difference_1(lam[a], lam[b])
        });
        add(*k, t);
    }
    if base_dim >= 2 {
        for (i, a) in &nil {
            for (j, b) in &nil {
                let Some((k, sign)) = i.wedge(*j) else {
                    continue;
                };
                if k.degree() > base_dim {
                    continue;
                }
                let left = if j.degree() % 2 == 1 {
                    grading_conjugate(a, p)
                } else {
                    a.clone()
                };
                let t = Mat::from_fn(n, n, |x, z| {
                    let mut s = C64::new(0.0, 0.0);
                    for y in 0..n {
                        s +=
                            left[(x, y)] * b[(y, z)] * divided_difference_2(lam[x], lam[y], lam[z]);
                    }
                    s * sign
                });
                add(k, t);
            }
        }
    }
    Ok(out.into_iter().map(|(k, m)| (k, &v * m * &vt)).collect())
}

/// `e^{−F}` for an even form-valued operator whose degree-0 block is Hermitian.
/// The Duhamel series is finite because higher-degree parts are nilpotent; its
/// simplex integrals are divided differences of the exponential in the
/// eigenbasis of the degree-0 block.
pub fn heat_exponential(f: &OperatorForm) -> Result<OperatorForm> {
    let grid = *f.grid();
    if grid.dim() > 2 {
        return Err(Error::Unsupported("base dimension above 2".into()));
    }
    let dims = f.dims();
    let keys: Vec<MultiIndex> = f.components().map(|(k, _)| *k).collect();
    let per_point: Vec<Vec<(MultiIndex, Mat)>> = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let comps: Vec<(MultiIndex, Mat)> = keys.iter().map(|k| (*k, f.at(*k, x))).collect();
            heat_at_point(&comps, dims, grid.dim())
        })
        .collect::<Result<_>>()?;
    let mut out = OperatorForm::zero(grid, dims);
    let mut all_keys: Vec<MultiIndex> = per_point[0].iter().map(|(k, _)| *k).collect();
    all_keys.sort();
    for k in all_keys {
        let mats = per_point
            .iter()
            .map(|pt| {
                pt.iter()
                    .find(|(kk, _)| *kk == k)
                    .expect("uniform keys")
                    .1
                    .clone()
            })
            .collect();
        out.insert(k, mats);
    }
    Ok(out)
}

/// A superconnection `∇ + L + H` on a graded bundle, optionally restricted to
/// the range of a projector field `Q` (then `∇` means `Q∇Q`).
#[derive(Clone, Debug)]
pub struct Superconnection {
    /// Odd Hermitian degree-0 part.
    pub l: OperatorForm,
    pub connection: ConnectionData,
    /// Odd terms of form degree ≥ 2.
    pub higher: Option<OperatorForm>,
    pub projector: Option<Vec<Mat>>,
    pub scale: f64,
}

impl Superconnection {
    pub fn new(
        l: OperatorForm,
        connection: ConnectionData,
        projector: Option<Vec<Mat>>,
    ) -> Result<Self> {
        if l.grid() != connection.grid() || l.dims() != connection.dims() {
            return Err(Error::Dimension("L and connection differ in shape".into()));
        }
        Ok(Self {
            l,
            connection,
            higher: None,
            projector,
            scale: 1.0,
        })
    }

    fn grid(&self) -> BaseGrid {
        *self.l.grid()
    }

    fn projector_or_identity(&self) -> Vec<Mat> {
        self.projector.clone().unwrap_or_else(|| {
            let n = self.l.size();
            vec![Mat::identity(n, n); self.grid().len()]
        })
    }

    /// The odd endomorphism part `L + H` as one operator form.
    pub fn endomorphism_part(&self) -> OperatorForm {
        match &self.higher {
            Some(h) => self.l.add(h).expect("same shape"),
            None => self.l.clone(),
        }
    }
}

/// `𝔸_t = t^{1/2}δ_t(𝔸)`: the degree-i part is multiplied by `t^{(1−i)/2}`.
pub fn scale_superconnection(a: &Superconnection, t: f64) -> Result<Superconnection> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale t = {t} must be positive"
        )));
    }
    let mut out = a.clone();
    out.l = a.l.scale_real(t.sqrt());
    out.higher = a.higher.as_ref().map(|h| {
        let mut scaled = OperatorForm::zero(*h.grid(), h.dims());
        for (k, mats) in h.components() {
            let f = t.powf((1.0 - k.degree() as f64) / 2.0);
            scaled.insert(*k, mats.iter().map(|m| m * C64::new(f, 0.0)).collect());
        }
        scaled
    });
    out.scale = a.scale * t;
    Ok(out)
}

/// Curvature `𝔸² = R_Q + ∇(L+H) + (L+H)∧(L+H)`, restricted to the range of `Q`.
pub fn curvature(a: &Superconnection) -> Result<OperatorForm> {
    let q = a.projector_or_identity();
    let r = induced_curvature(&a.connection, &q)?;
    let e = a.endomorphism_part();
    let de = covariant_derivative(&a.connection, &e)?.sandwich(&q);
    let ee = e.wedge_multiply(&e)?.sandwich(&q);
    r.add(&de)?.add(&ee)
}

/// `Str(Q e^{−𝔸²} Q)`.
pub fn chern_form(a: &Superconnection) -> Result<FormField> {
    let f = curvature(a)?;
    let q = a.projector_or_identity();
    Ok(heat_exponential(&f)?.sandwich(&q).supertrace())
}

/// Chern–Weil form `Σ_k (1/k!) Str((−R)^k)` of the projected connection.
pub fn chern_weil_form(c: &ConnectionData, projector: &[Mat]) -> Result<FormField> {
    let r = induced_curvature(c, projector)?;
    let grid = *c.grid();
    let coeff: Vec<f64> = (0..=grid.dim() / 2)
        .map(|k| (-1f64).powi(k as i32) / factorial(k))
        .collect();
    let poly = crate::base_forms::form_polynomial(&r, &coeff)?;
    Ok(poly.sandwich(projector).supertrace())
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, b| a * b as f64)
}

/// The superconnection of a pair of Grassmann sections: graded space
/// `C^n ⊕ C^n`, projector `P_i ⊕ P_j`, connection `ω ⊕ ω` and odd part
/// `L_{ij} = [[0, P_iP_j], [P_jP_i, 0]]`.
#[derive(Clone, Debug)]
pub struct PairSuperconnection {
    pub superconnection: Superconnection,
}

impl PairSuperconnection {
    pub fn new(pi: &GrassmannSection, pj: &GrassmannSection, c: &ConnectionData) -> Result<Self> {
        let grid = *pi.grid();
        if pj.grid() != &grid || pi.dim() != pj.dim() || c.dims() != (pi.dim(), 0) {
            return Err(Error::Dimension(
                "pair sections and connection differ in shape".into(),
            ));
        }
        let n = pi.dim();
        let q: Vec<Mat> = (0..grid.len())
            .map(|x| block_diag(&pi.projections()[x], &pj.projections()[x]))
            .collect();
        let l: Vec<Mat> = (0..grid.len())
            .map(|x| {
                let (a, b) = (&pi.projections()[x], &pj.projections()[x]);
                let mut m = Mat::zeros(2 * n, 2 * n);
                m.view_mut((0, n), (n, n)).copy_from(&(a * b));
                m.view_mut((n, 0), (n, n)).copy_from(&(b * a));
                m
            })
            .collect();
        let l = OperatorForm::from_matrices(grid, (n, n), MultiIndex::EMPTY, l)?;
        let conn = c.direct_sum(c)?;
        Ok(Self {
            superconnection: Superconnection::new(l, conn, Some(q))?,
        })
    }

    pub fn at_time(&self, t: f64) -> Result<Superconnection> {
        scale_superconnection(&self.superconnection, t)
    }

    /// `ch_t = Str(Q e^{−𝔽_t} Q)`.
    pub fn chern_form(&self, t: f64) -> Result<FormField> {
        chern_form(&self.at_time(t)?)
    }

    /// `Str(½ t^{−1/2} L Q e^{−𝔽_t} Q)`.
    pub fn transgression_form(&self, t: f64) -> Result<FormField> {
        let a = self.at_time(t)?;
        let f = curvature(&a)?;
        let q = a.projector_or_identity();
        let heat = heat_exponential(&f)?.sandwich(&q);
        let ldot = self.superconnection.l.scale_real(0.5 / t.sqrt());
        Ok(ldot.wedge_multiply(&heat)?.supertrace())
    }

    /// The kernel superbundle of `L` inside the range of `Q`.
    pub fn kernel_bundle(&self, threshold: f64) -> Result<KernelBundleData> {
        let sc = &self.superconnection;
        let grid = *sc.l.grid();
        let q = sc.projector_or_identity();
        let n = sc.l.size();
        let p = sc.l.dims().0;
        let projections: Vec<Mat> = (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let l = sc.l.at(MultiIndex::EMPTY, x);
                let shifted = &l + (Mat::identity(n, n) - &q[x]) * C64::new(3.0, 0.0);
                let shifted = (&shifted + shifted.adjoint()) * C64::new(0.5, 0.0);
                let eig = SymmetricEigen::new(shifted);
                let mut pi0 = Mat::zeros(n, n);
                for k in 0..n {
                    if eig.eigenvalues[k].abs() < threshold {
                        let v = eig.eigenvectors.column(k);
                        pi0 += v * v.adjoint();
                    }
                }
                pi0
            })
            .collect();
        let ranks: Vec<usize> = projections
            .iter()
            .map(|m| m.trace().re.round() as usize)
            .collect();
        let mut distinct = ranks.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() > 1 {
            return Err(Error::RankJump(distinct));
        }
        let even: Vec<Mat> = projections
            .iter()
            .map(|m| {
                let mut e = m.clone();
                for i in 0..n {
                    for j in 0..n {
                        if (i < p) != (j < p) {
                            e[(i, j)] = C64::new(0.0, 0.0);
                        }
                    }
                }
                e
            })
            .collect();
        let curvature = induced_curvature(&sc.connection, &even)?;
        Ok(KernelBundleData {
            projections: even,
            curvature,
            connection: sc.connection.clone(),
        })
    }
}

/// Projector onto `ker L` inside the range of `Q`, and the curvature of the
/// connection `Π⁰∇Π⁰`.
#[derive(Clone, Debug)]
pub struct KernelBundleData {
    pub projections: Vec<Mat>,
    pub curvature: OperatorForm,
    connection: ConnectionData,
}

impl KernelBundleData {
    pub fn rank(&self) -> (usize, usize) {
        let p = self.curvature.dims().0;
        let m = &self.projections[0];
        let plus: f64 = (0..p).map(|i| m[(i, i)].re).sum();
        let minus: f64 = (p..m.nrows()).map(|i| m[(i, i)].re).sum();
        (plus.round() as usize, minus.round() as usize)
    }

    /// `Str(Π⁰ e^{−R⁰} Π⁰)`.
    pub fn chern_form(&self) -> Result<FormField> {
        chern_weil_form(&self.connection, &self.projections)
    }
}

fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = Mat::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// `ch^{a}_t − ch^{b}_t` for two pair superconnections. With pairs built as
/// (P₁,P₂) and (P₃,P₂) the degree-0 part is `Tr(P₁ − P₃)`.
pub fn relative_chern_form(
    a: &PairSuperconnection,
    b: &PairSuperconnection,
    t: f64,
) -> Result<FormField> {
    Ok(a.chern_form(t)?.sub(&b.chern_form(t)?))
}

/// Transgression form of the relative Chern form.
pub fn relative_transgression_form(
    a: &PairSuperconnection,
    b: &PairSuperconnection,
    t: f64,
) -> Result<FormField> {
    Ok(a.transgression_form(t)?.sub(&b.transgression_form(t)?))
}

/// Geometric ladder of `count` points from `t_min` to `t_max`.
pub fn geometric_ladder(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![t_min];
    }
    let r = (t_max / t_min).ln() / (count - 1) as f64;
    (0..count).map(|k| t_min * (r * k as f64).exp()).collect()
}

/// Outcome of a limit probe: the extrapolated form and the fitted rate.
#[derive(Clone, Debug)]
pub struct LimitProbe {
    pub limit: FormField,
    /// Observed exponent of the residual `|ch_t − limit|` in `t`.
    pub observed_rate: f64,
    pub ladder: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Richardson extrapolation to `t → 0` of a form computed at `t, t/2, t/4, …`
/// assuming an expansion in integer powers of `t`.
pub fn richardson_to_zero(values: &[FormField]) -> FormField {
    let mut table: Vec<FormField> = values.to_vec();
    let mut factor = 2.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| {
                w[1].scale(C64::new(factor / (factor - 1.0), 0.0))
                    .sub(&w[0].scale(C64::new(1.0 / (factor - 1.0), 0.0)))
            })
            .collect();
        factor *= 2.0;
    }
    table.pop().expect("at least one value")
}

/// Least-squares slope of `log y` against `log t`.
pub fn log_log_slope(t: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, y)| **y > 0.0 && y.is_finite())
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Which end of the time axis to probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeDirection {
    Zero,
    Infinity,
}

/// Evaluate the relative Chern form along a ladder and extract its limit.
///
/// `Zero`: Richardson extrapolation from `t_start, t_start/2, …` (`levels`
/// points). `Infinity`: the limit is the kernel-bundle Chern difference and
/// the rate is the fitted exponent of the residual along the ladder; it is
/// compared against `expected_rate` and an `Extrapolation` error is raised on
/// a deviation above 25%.
pub fn time_limit_probe(
    a: &PairSuperconnection,
    b: &PairSuperconnection,
    direction: TimeDirection,
    ladder: &[f64],
    expected_rate: Option<f64>,
) -> Result<LimitProbe> {
    match direction {
        TimeDirection::Zero => {
            let values: Vec<FormField> = ladder
                .iter()
                .map(|t| relative_chern_form(a, b, *t))
                .collect::<Result<_>>()?;
            let limit = richardson_to_zero(&values);
            let residuals: Vec<f64> = values.iter().map(|v| v.sub(&limit).sup_norm()).collect();
            let observed_rate = log_log_slope(ladder, &residuals);
            Ok(LimitProbe {
                limit,
                observed_rate,
                ladder: ladder.to_vec(),
                residuals,
            })
        }
        TimeDirection::Infinity => {
            let ka = a.kernel_bundle(1e-8)?;
            let kb = b.kernel_bundle(1e-8)?;
            let limit = ka.chern_form()?.sub(&kb.chern_form()?);
            let residuals: Vec<f64> = ladder
                .iter()
                .map(|t| Ok(relative_chern_form(a, b, *t)?.sub(&limit).sup_norm()))
                .collect::<Result<_>>()?;
            let observed_rate = log_log_slope(ladder, &residuals);
            if let Some(expected) = expected_rate {
                let deviation = ((observed_rate - expected) / expected).abs();
                if !(deviation <= 0.25) {
                    return Err(Error::Extrapolation(format!(
                        "observed rate {observed_rate} against expected {expected}"
                    )));
                }
            }
            Ok(LimitProbe {
                limit,
                observed_rate,
                ladder: ladder.to_vec(),
                residuals,
            })
        }
    }
}

/// Relative Chern character of a section against a constant reference in the
/// single-Grassmannian model: `Tr(P e^{−R} P − Π₊)`, whose degree-0 part is
/// `Tr(P − Π₊)` and whose degree-2k part is `((−1)^k/k!) Tr(P dP^{2k})` for a
/// flat connection.
pub fn schatten_relative_chern(
    p: &GrassmannSection,
    reference: &GrassmannSection,
    c: &ConnectionData,
) -> Result<FormField> {
    crate::boundary_family::check_relatively_smoothing(p, reference, p.fourier_cutoff())?;
    let ch = chern_weil_form(c, p.projections())?;
    let traces: Vec<C64> = reference.projections().iter().map(|m| m.trace()).collect();
    Ok(ch.sub(&FormField::from_component(
        *p.grid(),
        MultiIndex::EMPTY,
        traces,
    )))
}
