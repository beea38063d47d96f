//! Discrete exterior calculus on periodic base tori and the algebra of
//! parity-graded, form-valued matrix fields.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// A periodic grid on the torus `T^dim` with `points_per_axis` samples per
/// circle of length 2π. `dim = 0` is a single point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseGrid {
    dim: usize,
    points_per_axis: usize,
}

impl BaseGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim > 2 {
            return Err(Error::InvalidParameter(format!("base dimension {dim} > 2")));
        }
        if dim == 0 {
            return Ok(Self::point());
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidParameter(format!(
                "points_per_axis {points_per_axis} < 8"
            )));
        }
        Ok(Self {
            dim,
            points_per_axis,
        })
    }

    pub fn point() -> Self {
        Self {
            dim: 0,
            points_per_axis: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.points_per_axis as f64
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates of point `idx`; unused axes are zero. Index is `i + n*j`.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let n = self.points_per_axis;
        let h = self.spacing();
        match self.dim {
            0 => [0.0, 0.0],
            1 => [idx as f64 * h, 0.0],
            _ => [(idx % n) as f64 * h, (idx / n) as f64 * h],
        }
    }

    /// Periodic neighbour of `idx` shifted by `step` along `axis`.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> usize {
        let n = self.points_per_axis as isize;
        let (i, j) = ((idx as isize) % n, (idx as isize) / n);
        let wrap = |x: isize| ((x % n) + n) % n;
        match axis {
            0 => (wrap(i + step) + n * j) as usize,
            _ => (i + n * wrap(j + step)) as usize,
        }
    }

    /// All multi-indices of the given degree.
    pub fn multi_indices(&self, degree: usize) -> Vec<MultiIndex> {
        (0u8..(1 << self.dim))
            .map(MultiIndex)
            .filter(|m| m.degree() == degree)
            .collect()
    }
}

/// Strictly increasing tuple of axes, stored as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub u8);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    pub fn axis(a: usize) -> Self {
        MultiIndex(1 << a)
    }

    pub fn from_axes(axes: &[usize]) -> Self {
        MultiIndex(axes.iter().fold(0, |m, a| m | (1 << a)))
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, a: usize) -> bool {
        self.0 & (1 << a) != 0
    }

    pub fn axes(self) -> Vec<usize> {
        (0..8).filter(|&a| self.contains(a)).collect()
    }

    /// `dz^I ∧ dz^J = sign · dz^K`, or `None` when an axis repeats.
    pub fn wedge(self, other: MultiIndex) -> Option<(MultiIndex, f64)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut inversions = 0;
        for a in self.axes() {
            for b in other.axes() {
                if a > b {
                    inversions += 1;
                }
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        Some((MultiIndex(self.0 | other.0), sign))
    }
}

fn centered_difference<T, F>(grid: &BaseGrid, axis: usize, get: F) -> Vec<T>
where
    T: Send
        + std::ops::Sub<Output = T>
        + std::ops::Add<Output = T>
        + std::ops::Mul<C64, Output = T>,
    F: Fn(usize) -> T + Sync,
{
    // fourth-order centered stencil (−f₂ + 8f₁ − 8f₋₁ + f₋₂)/12h
    let h = grid.spacing();
    let near = C64::new(8.0 / (12.0 * h), 0.0);
    let far = C64::new(1.0 / (12.0 * h), 0.0);
    (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let n = |s| get(grid.neighbor(x, axis, s));
            (n(1) - n(-1)) * near + (n(-2) - n(2)) * far
        })
        .collect()
}

/// A differential form with complex scalar coefficients on a base grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    grid: BaseGrid,
    comps: BTreeMap<MultiIndex, Vec<C64>>,
}

impl FormField {
    pub fn zero(grid: BaseGrid) -> Self {
        Self {
            grid,
            comps: BTreeMap::new(),
        }
    }

    pub fn constant(grid: BaseGrid, c: C64) -> Self {
        Self::from_component(grid, MultiIndex::EMPTY, vec![c; grid.len()])
    }

    pub fn from_component(grid: BaseGrid, idx: MultiIndex, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.len());
        let mut f = Self::zero(grid);
        f.comps.insert(idx, values);
        f
    }

    pub fn from_fn(grid: BaseGrid, idx: MultiIndex, f: impl Fn([f64; 2]) -> C64) -> Self {
        let values = (0..grid.len()).map(|x| f(grid.coords(x))).collect();
        Self::from_component(grid, idx, values)
    }

    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    pub fn components(&self) -> impl Iterator<Item = (&MultiIndex, &Vec<C64>)> {
        self.comps.iter()
    }

    pub fn component(&self, idx: MultiIndex) -> Option<&[C64]> {
        self.comps.get(&idx).map(|v| v.as_slice())
    }

    /// Component values, zeros when not stored.
    pub fn component_or_zero(&self, idx: MultiIndex) -> Vec<C64> {
        self.comps
            .get(&idx)
            .cloned()
            .unwrap_or_else(|| vec![C64::new(0.0, 0.0); self.grid.len()])
    }

    pub fn value(&self, idx: MultiIndex, point: usize) -> C64 {
        self.comps
            .get(&idx)
            .map_or(C64::new(0.0, 0.0), |v| v[point])
    }

    pub fn accumulate(&mut self, idx: MultiIndex, values: &[C64], scale: C64) {
        let entry = self
            .comps
            .entry(idx)
            .or_insert_with(|| vec![C64::new(0.0, 0.0); values.len()]);
        for (e, v) in entry.iter_mut().zip(values) {
            *e += scale * v;
        }
    }

    pub fn add(&self, other: &FormField) -> FormField {
        let mut out = self.clone();
        for (idx, v) in &other.comps {
            out.accumulate(*idx, v, C64::new(1.0, 0.0));
        }
        out
    }

    pub fn sub(&self, other: &FormField) -> FormField {
        let mut out = self.clone();
        for (idx, v) in &other.comps {
            out.accumulate(*idx, v, C64::new(-1.0, 0.0));
        }
        out
    }

    pub fn scale(&self, c: C64) -> FormField {
        let comps = self
            .comps
            .iter()
            .map(|(k, v)| (*k, v.iter().map(|x| x * c).collect()))
            .collect();
        FormField {
            grid: self.grid,
            comps,
        }
    }

    /// Keep only the components of the given degree.
    pub fn degree_part(&self, degree: usize) -> FormField {
        let comps = self
            .comps
            .iter()
            .filter(|(k, _)| k.degree() == degree)
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        FormField {
            grid: self.grid,
            comps,
        }
    }

    /// Centered-difference exterior derivative. Top-degree parts map to zero.
    pub fn exterior_derivative(&self) -> FormField {
        let mut out = FormField::zero(self.grid);
        for (idx, values) in &self.comps {
            for a in 0..self.grid.dim() {
                let Some((k, sign)) = MultiIndex::axis(a).wedge(*idx) else {
                    continue;
                };
                let da = centered_difference(&self.grid, a, |x| values[x]);
                out.accumulate(k, &da, C64::new(sign, 0.0));
            }
        }
        out
    }

    /// Largest modulus over all components and points.
    pub fn sup_norm(&self) -> f64 {
        self.comps
            .values()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, x| m.max(x.norm()))
    }

    /// Midpoint-rule integral of the top-degree component.
    pub fn integrate_over_base(&self) -> Result<C64> {
        let top = MultiIndex((1u8 << self.grid.dim()) - 1);
        if let Some((k, _)) = self
            .comps
            .iter()
            .find(|(k, v)| **k != top && v.iter().any(|x| x.norm() > 0.0))
        {
            return Err(Error::Dimension(format!(
                "integrand has a component of degree {} on a {}-dimensional base",
                k.degree(),
                self.grid.dim()
            )));
        }
        let sum = self
            .comps
            .get(&top)
            .map_or(C64::new(0.0, 0.0), |v| v.iter().sum::<C64>());
        Ok(sum * self.grid.cell_volume())
    }
}

/// Grading operator diag(1,…,1,−1,…,−1) for dims `(p, m)`.
pub fn grading(dims: (usize, usize)) -> Mat {
    let n = dims.0 + dims.1;
    Mat::from_fn(n, n, |i, j| {
        if i != j {
            C64::new(0.0, 0.0)
        } else if i < dims.0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(-1.0, 0.0)
        }
    })
}

/// `ΓAΓ`: negates the off-diagonal blocks.
pub fn grading_conjugate(a: &Mat, p: usize) -> Mat {
    let mut out = a.clone();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if (i < p) != (j < p) {
                out[(i, j)] = -out[(i, j)];
            }
        }
    }
    out
}

/// `tr(ΓA)`.
pub fn matrix_supertrace(a: &Mat, p: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        if i < p {
            s += a[(i, i)];
        } else {
            s -= a[(i, i)];
        }
    }
    s
}

/// Parity of a homogeneous matrix with respect to the grading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// A form-valued field of graded matrices over a base grid. Products use the
/// Koszul rule `(dz^I⊗A)(dz^J⊗B) = dz^I∧dz^J ⊗ Γ^{|J|}AΓ^{|J|}B`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorForm {
    grid: BaseGrid,
    dims: (usize, usize),
    comps: BTreeMap<MultiIndex, Vec<Mat>>,
}

impl OperatorForm {
    pub fn zero(grid: BaseGrid, dims: (usize, usize)) -> Self {
        Self {
            grid,
            dims,
            comps: BTreeMap::new(),
        }
    }

    pub fn identity(grid: BaseGrid, dims: (usize, usize)) -> Self {
        let n = dims.0 + dims.1;
        Self::from_matrices(
            grid,
            dims,
            MultiIndex::EMPTY,
            vec![Mat::identity(n, n); grid.len()],
        )
        .expect("identity has consistent dims")
    }

    pub fn from_matrices(
        grid: BaseGrid,
        dims: (usize, usize),
        idx: MultiIndex,
        mats: Vec<Mat>,
    ) -> Result<Self> {
        let n = dims.0 + dims.1;
        if mats.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} matrices for {} grid points",
                mats.len(),
                grid.len()
            )));
        }
        if idx.degree() > grid.dim() {
            return Err(Error::Dimension(format!(
                "degree {} exceeds base dimension {}",
                idx.degree(),
                grid.dim()
            )));
        }
        if let Some(m) = mats.iter().find(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Dimension(format!(
                "block {}x{} does not match graded dims {:?}",
                m.nrows(),
                m.ncols(),
                dims
            )));
        }
        let mut comps = BTreeMap::new();
        comps.insert(idx, mats);
        Ok(Self { grid, dims, comps })
    }

    pub fn from_fn(
        grid: BaseGrid,
        dims: (usize, usize),
        idx: MultiIndex,
        f: impl Fn(usize) -> Mat + Sync + Send,
    ) -> Result<Self> {
        let mats = (0..grid.len()).into_par_iter().map(f).collect();
        Self::from_matrices(grid, dims, idx, mats)
    }

    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn size(&self) -> usize {
        self.dims.0 + self.dims.1
    }

    pub fn components(&self) -> impl Iterator<Item = (&MultiIndex, &Vec<Mat>)> {
        self.comps.iter()
    }

    pub fn component(&self, idx: MultiIndex) -> Option<&[Mat]> {
        self.comps.get(&idx).map(|v| v.as_slice())
    }

    /// Block at one point, zero when the component is absent.
    pub fn at(&self, idx: MultiIndex, point: usize) -> Mat {
        self.comps.get(&idx).map_or_else(
            || Mat::zeros(self.size(), self.size()),
            |v| v[point].clone(),
        )
    }

    pub fn insert(&mut self, idx: MultiIndex, mats: Vec<Mat>) {
        assert_eq!(mats.len(), self.grid.len());
        self.comps.insert(idx, mats);
    }

    fn check_compatible(&self, other: &OperatorForm) -> Result<()> {
        if self.grid != other.grid || self.dims != other.dims {
            return Err(Error::Dimension(format!(
                "operator forms on {:?}/{:?} and {:?}/{:?}",
                self.grid, self.dims, other.grid, other.dims
            )));
        }
        Ok(())
    }

    fn accumulate(&mut self, idx: MultiIndex, mats: Vec<Mat>, scale: C64) {
        match self.comps.get_mut(&idx) {
            Some(existing) => {
                existing
                    .par_iter_mut()
                    .zip(mats.par_iter())
                    .for_each(|(e, m)| *e += m * scale);
            }
            None => {
                let mats = if scale == C64::new(1.0, 0.0) {
                    mats
                } else {
                    mats.into_par_iter().map(|m| m * scale).collect()
                };
                self.comps.insert(idx, mats);
            }
        }
    }

    pub fn add(&self, other: &OperatorForm) -> Result<OperatorForm> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (idx, m) in &other.comps {
            out.accumulate(*idx, m.clone(), C64::new(1.0, 0.0));
        }
        Ok(out)
    }

    pub fn sub(&self, other: &OperatorForm) -> Result<OperatorForm> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (idx, m) in &other.comps {
            out.accumulate(*idx, m.clone(), C64::new(-1.0, 0.0));
        }
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> OperatorForm {
        let comps = self
            .comps
            .iter()
            .map(|(k, v)| (*k, v.par_iter().map(|m| m * c).collect()))
            .collect();
        OperatorForm {
            grid: self.grid,
            dims: self.dims,
            comps,
        }
    }

    pub fn scale_real(&self, c: f64) -> OperatorForm {
        self.scale(C64::new(c, 0.0))
    }

    /// Graded (Koszul) product.
    pub fn wedge_multiply(&self, other: &OperatorForm) -> Result<OperatorForm> {
        self.check_compatible(other)?;
        let p = self.dims.0;
        let mut out = OperatorForm::zero(self.grid, self.dims);
        for (i, a) in &self.comps {
            for (j, b) in &other.comps {
                let Some((k, sign)) = i.wedge(*j) else {
                    continue;
                };
                if k.degree() > self.grid.dim() {
                    continue;
                }
                let odd = j.degree() % 2 == 1;
                let prod: Vec<Mat> = a
                    .par_iter()
                    .zip(b.par_iter())
                    .map(|(x, y)| {
                        if odd {
                            grading_conjugate(x, p) * y
                        } else {
                            x * y
                        }
                    })
                    .collect();
                out.accumulate(k, prod, C64::new(sign, 0.0));
            }
        }
        Ok(out)
    }

    /// Pointwise `tr(Γ·block)` per multi-index.
    pub fn supertrace(&self) -> FormField {
        let p = self.dims.0;
        let mut out = FormField::zero(self.grid);
        for (idx, mats) in &self.comps {
            let v: Vec<C64> = mats.iter().map(|m| matrix_supertrace(m, p)).collect();
            out.accumulate(*idx, &v, C64::new(1.0, 0.0));
        }
        out
    }

    /// Blockwise centered-difference exterior derivative.
    pub fn exterior_derivative(&self) -> OperatorForm {
        let mut out = OperatorForm::zero(self.grid, self.dims);
        for (idx, mats) in &self.comps {
            for a in 0..self.grid.dim() {
                let Some((k, sign)) = MultiIndex::axis(a).wedge(*idx) else {
                    continue;
                };
                let da = centered_difference(&self.grid, a, |x| mats[x].clone());
                out.accumulate(k, da, C64::new(sign, 0.0));
            }
        }
        out
    }

    /// `Q X Q` pointwise for a degree-0 projector field.
    pub fn sandwich(&self, q: &[Mat]) -> OperatorForm {
        let comps = self
            .comps
            .iter()
            .map(|(k, v)| {
                (
                    *k,
                    v.par_iter()
                        .zip(q.par_iter())
                        .map(|(m, q)| q * m * q)
                        .collect(),
                )
            })
            .collect();
        OperatorForm {
            grid: self.grid,
            dims: self.dims,
            comps,
        }
    }

    pub fn degree_part(&self, degree: usize) -> OperatorForm {
        let comps = self
            .comps
            .iter()
            .filter(|(k, _)| k.degree() == degree)
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        OperatorForm {
            grid: self.grid,
            dims: self.dims,
            comps,
        }
    }

    /// Split into parts of even and odd total parity (form degree plus matrix parity).
    pub fn split_total_parity(&self) -> (OperatorForm, OperatorForm) {
        let p = self.dims.0;
        let mut even = OperatorForm::zero(self.grid, self.dims);
        let mut odd = OperatorForm::zero(self.grid, self.dims);
        for (idx, mats) in &self.comps {
            let mut me = Vec::with_capacity(mats.len());
            let mut mo = Vec::with_capacity(mats.len());
            for m in mats {
                let g = grading_conjugate(m, p);
                me.push((m + &g) * C64::new(0.5, 0.0));
                mo.push((m - &g) * C64::new(0.5, 0.0));
            }
            let (even_matrix_target, odd_matrix_target) = if idx.degree() % 2 == 0 {
                (&mut even, &mut odd)
            } else {
                (&mut odd, &mut even)
            };
            even_matrix_target.accumulate(*idx, me, C64::new(1.0, 0.0));
            odd_matrix_target.accumulate(*idx, mo, C64::new(1.0, 0.0));
        }
        (even, odd)
    }

    /// Parity of the matrix blocks if homogeneous within `tol`.
    pub fn matrix_parity(&self, tol: f64) -> Option<Parity> {
        let p = self.dims.0;
        let mut even_norm: f64 = 0.0;
        let mut odd_norm: f64 = 0.0;
        for m in self.comps.values().flatten() {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if (i < p) == (j < p) {
                        even_norm = even_norm.max(m[(i, j)].norm());
                    } else {
                        odd_norm = odd_norm.max(m[(i, j)].norm());
                    }
                }
            }
        }
        match (even_norm > tol, odd_norm > tol) {
            (false, true) => Some(Parity::Odd),
            (_, false) => Some(Parity::Even),
            (true, true) => None,
        }
    }

    /// Largest entry modulus.
    pub fn sup_norm(&self) -> f64 {
        self.comps
            .values()
            .flatten()
            .fold(0.0, |m, a| a.iter().fold(m, |m, x| m.max(x.norm())))
    }
}

/// A connection one-form on a trivialized graded bundle over the base.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionData {
    omega: OperatorForm,
}

impl ConnectionData {
    pub fn new(omega: OperatorForm) -> Result<Self> {
        for (idx, mats) in omega.components() {
            if idx.degree() != 1 {
                return Err(Error::Dimension(format!(
                    "connection form has a degree-{} component",
                    idx.degree()
                )));
            }
            for m in mats {
                let defect = (m + m.adjoint())
                    .iter()
                    .fold(0.0f64, |a, x| a.max(x.norm()));
                if defect > HERMITIAN_TOL {
                    return Err(Error::NotHermitian(defect));
                }
            }
        }
        Ok(Self { omega })
    }

    pub fn flat(grid: BaseGrid, dims: (usize, usize)) -> Self {
        Self {
            omega: OperatorForm::zero(grid, dims),
        }
    }

    pub fn one_form(&self) -> &OperatorForm {
        &self.omega
    }

    pub fn grid(&self) -> &BaseGrid {
        self.omega.grid()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.omega.dims()
    }

    /// Direct sum with a second connection on a bundle of the same grid; the
    /// result is graded with `self` as the even part and `other` as the odd part.
    /// Both inputs must be ungraded (`dims.1 == 0`).
    pub fn direct_sum(&self, other: &ConnectionData) -> Result<ConnectionData> {
        let (a, b) = (self.dims(), other.dims());
        if a.1 != 0 || b.1 != 0 || self.grid() != other.grid() {
            return Err(Error::Dimension(
                "direct sum needs ungraded inputs on one grid".into(),
            ));
        }
        let grid = *self.grid();
        let mut omega = OperatorForm::zero(grid, (a.0, b.0));
        for axis in 0..grid.dim() {
            let idx = MultiIndex::axis(axis);
            if self.omega.component(idx).is_none() && other.omega.component(idx).is_none() {
                continue;
            }
            let mats = (0..grid.len())
                .map(|x| {
                    let mut m = Mat::zeros(a.0 + b.0, a.0 + b.0);
                    m.view_mut((0, 0), (a.0, a.0))
                        .copy_from(&self.omega.at(idx, x));
                    m.view_mut((a.0, a.0), (b.0, b.0))
                        .copy_from(&other.omega.at(idx, x));
                    m
                })
                .collect();
            omega.insert(idx, mats);
        }
        Ok(ConnectionData { omega })
    }

    /// Curvature `dω + ω∧ω` of the ambient connection.
    pub fn curvature(&self) -> OperatorForm {
        self.omega
            .exterior_derivative()
            .add(&self.omega.wedge_multiply(&self.omega).expect("same dims"))
            .expect("same dims")
    }
}

/// `∇x = dx + [ω, x]` with the graded commutator.
pub fn covariant_derivative(c: &ConnectionData, x: &OperatorForm) -> Result<OperatorForm> {
    let omega = c.one_form();
    if omega.grid() != x.grid() || omega.dims() != x.dims() {
        return Err(Error::Dimension(
            "connection and operator form differ in shape".into(),
        ));
    }
    let mut out = x.exterior_derivative();
    if omega.components().next().is_none() {
        return Ok(out);
    }
    let (even, odd) = x.split_total_parity();
    out = out
        .add(&omega.wedge_multiply(&even)?)?
        .sub(&even.wedge_multiply(omega)?)?
        .add(&omega.wedge_multiply(&odd)?)?
        .add(&odd.wedge_multiply(omega)?)?;
    Ok(out)
}

/// Projected covariant derivative `Q(∇x)Q`.
pub fn projected_covariant_derivative(
    c: &ConnectionData,
    q: &[Mat],
    x: &OperatorForm,
) -> Result<OperatorForm> {
    Ok(covariant_derivative(c, x)?.sandwich(q))
}

/// Curvature of the connection `P∇P` induced on the range of a projector
/// field: `P(Ω + ∇P∧∇P)P`. The second term is the second fundamental form
/// contribution, which vanishes when `P` is parallel.
pub fn induced_curvature(c: &ConnectionData, p: &[Mat]) -> Result<OperatorForm> {
    let grid = *c.grid();
    let dims = c.dims();
    let pf = OperatorForm::from_matrices(grid, dims, MultiIndex::EMPTY, p.to_vec())?;
    let dp = covariant_derivative(c, &pf)?;
    let omega_curv = c.curvature();
    Ok(omega_curv.add(&dp.wedge_multiply(&dp)?)?.sandwich(p))
}

/// Sum `Σ_k coeff[k] · x^k` of Koszul powers, starting at `x^0 = identity`.
pub fn form_polynomial(x: &OperatorForm, coeff: &[f64]) -> Result<OperatorForm> {
    let mut out = OperatorForm::zero(*x.grid(), x.dims());
    let mut power = OperatorForm::identity(*x.grid(), x.dims());
    for (k, c) in coeff.iter().enumerate() {
        if k > 0 {
            power = power.wedge_multiply(x)?;
        }
        if *c != 0.0 {
            out = out.add(&power.scale_real(*c))?;
        }
    }
    Ok(out)
}

/// Hermitian defect `max |A − A*|`.
pub fn hermitian_defect(a: &Mat) -> f64 {
    (a - a.adjoint()).iter().fold(0.0, |m, x| m.max(x.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn t2(n: usize) -> BaseGrid {
        BaseGrid::new(2, n).unwrap()
    }

    #[test]
    fn constant_zero_form_has_zero_derivative() {
        let g = t2(12);
        let f = FormField::constant(g, c(3.0));
        assert_eq!(f.exterior_derivative().sup_norm(), 0.0);
    }

    #[test]
    fn closed_one_form_in_first_axis() {
        let g = t2(16);
        let f = FormField::from_fn(g, MultiIndex::axis(0), |z| c(z[0].sin()));
        assert!(f.exterior_derivative().sup_norm() < 1e-14);
    }

    #[test]
    fn derivative_is_fourth_order_accurate() {
        let g = t2(32);
        let f = FormField::from_fn(g, MultiIndex::axis(1), |z| c(z[0].sin()));
        let df = f.exterior_derivative();
        let exact = FormField::from_fn(g, MultiIndex(3), |z| c(z[0].cos()));
        let err = df.sub(&exact).sup_norm();
        assert!(err <= g.spacing().powi(4) / 20.0, "{err}");
    }

    #[test]
    fn wedge_signs() {
        let (k, s) = MultiIndex::axis(1).wedge(MultiIndex::axis(0)).unwrap();
        assert_eq!((k, s), (MultiIndex(3), -1.0));
        assert!(MultiIndex::axis(0).wedge(MultiIndex(3)).is_none());
    }

    #[test]
    fn integrate_constant_and_cosine() {
        let g = t2(24);
        let f = FormField::constant(g, c(2.0));
        let top =
            FormField::from_component(g, MultiIndex(3), f.component_or_zero(MultiIndex::EMPTY));
        let v = top.integrate_over_base().unwrap();
        assert!((v.re - 2.0 * 4.0 * PI * PI).abs() < 1e-10);
        let cs = FormField::from_fn(g, MultiIndex(3), |z| c(z[0].cos()));
        assert!(cs.integrate_over_base().unwrap().norm() < 1e-12);
        assert!(f.integrate_over_base().is_err());
    }

    #[test]
    fn identity_supertrace_is_dimension_difference() {
        let g = BaseGrid::new(1, 8).unwrap();
        let id = OperatorForm::identity(g, (2, 1));
        let s = id.supertrace();
        assert!(s
            .component_or_zero(MultiIndex::EMPTY)
            .iter()
            .all(|x| *x == c(1.0)));
    }

    #[test]
    fn scalar_one_form_squares_to_zero() {
        let g = t2(8);
        let mut a = OperatorForm::zero(g, (1, 0));
        a.insert(
            MultiIndex::axis(0),
            vec![Mat::from_element(1, 1, c(2.0)); g.len()],
        );
        a.insert(
            MultiIndex::axis(1),
            vec![Mat::from_element(1, 1, c(-1.5)); g.len()],
        );
        assert!(a.wedge_multiply(&a).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn covariant_derivative_of_identity_vanishes() {
        let g = t2(8);
        let mut omega = OperatorForm::zero(g, (2, 1));
        let w = Mat::from_fn(3, 3, |i, j| C64::new(0.0, (i + j) as f64));
        let w = (&w - w.adjoint()) * c(0.5);
        omega.insert(MultiIndex::axis(0), vec![w; g.len()]);
        let conn = ConnectionData::new(omega).unwrap();
        let id = OperatorForm::identity(g, (2, 1));
        assert!(covariant_derivative(&conn, &id).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn rejects_non_antihermitian_connection() {
        let g = t2(8);
        let mut omega = OperatorForm::zero(g, (1, 0));
        omega.insert(
            MultiIndex::axis(0),
            vec![Mat::from_element(1, 1, c(1.0)); g.len()],
        );
        assert!(ConnectionData::new(omega).is_err());
    }
}
