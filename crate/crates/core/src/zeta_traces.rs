//! Regularized traces: Hurwitz zeta, heat-trace expansion fits, zeta
//! pseudo-traces and residues of mode-diagonal model operators, and the
//! eta invariant by the heat route.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::digamma;

use crate::base_forms::C64;
use crate::error::{Error, Result};

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Absolute residual allowed in expansion fits.
pub const FIT_TOL: f64 = 1e-8;
/// Largest admissible condition number of a (column-scaled) fit matrix.
pub const MAX_CONDITION: f64 = 1e12;

// B_{2k} for k = 1..=15
const BERNOULLI: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

/// Hurwitz zeta `ζ(s, q) = Σ_{n≥0} (n+q)^{−s}` for `q > 0`, continued
/// to all `s ≠ 1` by Euler–Maclaurin summation. The number of direct terms is
/// doubled until the first omitted correction is below 1e-14 in modulus.
pub fn hurwitz_zeta(s: C64, q: f64) -> Result<C64> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Hurwitz parameter q = {q} must be positive"
        )));
    }
    if (s - 1.0).norm() < 1e-15 {
        return Err(Error::Pole);
    }
    // few direct terms keep the cancellation against the integral term small for Re s < 0
    let mut n = 8usize;
    loop {
        let (value, remainder) = hurwitz_em(s, q, n);
        if remainder <= 1e-14 * (1.0 + value.norm()) || n > 1 << 14 {
            return Ok(value);
        }
        n *= 2;
    }
}

fn hurwitz_em(s: C64, q: f64, n: usize) -> (C64, f64) {
    let pow = |x: f64, e: C64| (-e * x.ln()).exp();
    let mut sum = C64::new(0.0, 0.0);
    for k in 0..n {
        sum += pow(k as f64 + q, s);
    }
    let x = n as f64 + q;
    sum += pow(x, s - 1.0) / (s - 1.0);
    sum += pow(x, s) * 0.5;
    // rising factorial s(s+1)…(s+2k−2) / (2k)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut last = 0.0;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let k = k + 1;
        let term = rising * (*b / fact) * pow(x, s + (2 * k - 1) as f64);
        sum += term;
        last = term.norm();
        rising *= (s + (2 * k - 1) as f64) * (s + (2 * k) as f64);
        fact *= ((2 * k + 1) * (2 * k + 2)) as f64;
    }
    (sum, last)
}

/// Least-squares fit of samples `(t, f(t))` in powers `t^α` and `t^β log t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeatExpansionFit {
    pub t: Vec<f64>,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub log_exponents: Vec<f64>,
    pub log_coefficients: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

impl HeatExpansionFit {
    /// Coefficient of `t^α`; zero when `α` is not in the menu.
    pub fn coefficient(&self, alpha: f64) -> f64 {
        lookup(&self.exponents, &self.coefficients, alpha)
    }

    /// Coefficient of `t^β log t`; zero when `β` is not in the menu.
    pub fn log_coefficient(&self, beta: f64) -> f64 {
        lookup(&self.log_exponents, &self.log_coefficients, beta)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let a: f64 = self
            .exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(e, c)| c * t.powf(*e))
            .sum();
        let b: f64 = self
            .log_exponents
            .iter()
            .zip(&self.log_coefficients)
            .map(|(e, c)| c * t.powf(*e) * t.ln())
            .sum();
        a + b
    }
}

fn lookup(keys: &[f64], vals: &[f64], k: f64) -> f64 {
    keys.iter()
        .position(|e| (e - k).abs() < 1e-12)
        .map_or(0.0, |i| vals[i])
}

/// Fit `samples` in the given exponent menus. Requires at least twice as
/// many samples as unknowns; fails when the residual exceeds `fit_tol` or
/// the column-scaled design matrix has condition number above 1e12.
pub fn heat_trace_expansion_fit(
    samples: &[(f64, f64)],
    exponents: &[f64],
    log_exponents: &[f64],
    fit_tol: f64,
) -> Result<HeatExpansionFit> {
    let cols = exponents.len() + log_exponents.len();
    if cols == 0 || samples.len() < 2 * cols {
        return Err(Error::InvalidParameter(format!(
            "{} samples for {cols} unknowns",
            samples.len()
        )));
    }
    let rows = samples.len();
    let mut a = DMatrix::from_fn(rows, cols, |i, j| {
        let t = samples[i].0;
        if j < exponents.len() {
            t.powf(exponents[j])
        } else {
            t.powf(log_exponents[j - exponents.len()]) * t.ln()
        }
    });
    let scales: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_iterator(rows, samples.iter().map(|s| s.1));
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InvalidParameter(format!("least squares: {e}")))?;
    let residual = (&a * &x - &b).amax();
    if condition > MAX_CONDITION || !(residual <= fit_tol) {
        return Err(Error::FitDivergence {
            residual,
            condition,
        });
    }
    let coef: Vec<f64> = (0..cols).map(|j| x[j] / scales[j]).collect();
    Ok(HeatExpansionFit {
        t: samples.iter().map(|s| s.0).collect(),
        exponents: exponents.to_vec(),
        coefficients: coef[..exponents.len()].to_vec(),
        log_exponents: log_exponents.to_vec(),
        log_coefficients: coef[exponents.len()..].to_vec(),
        residual,
        condition,
    })
}

/// Geometric grid of `count` points on `[t_min, t_max]`.
pub fn geometric_grid(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    crate::superconnection::geometric_ladder(t_min, t_max, count)
}

/// Eta invariant of a self-adjoint operator on the circle from its low
/// eigenvalues.
///
/// `η = Σ sign(λ) erfc(|λ|√t₀) + π^{−1/2} ∫₀^{t₀} t^{−1/2} Tr(∂e^{−t∂²}) dt`.
/// Eigenvalues within `cutoff/2` modes of the mean potential are taken from
/// `eigenvalues`; outside that window the spectrum `n + mean` of the
/// gauge-equivalent constant operator is summed to convergence. The small-`t`
/// integral uses a fit of the heat trace on a 24-point grid over `[1e-4, t₀]`.
pub fn eta_by_heat_fit(eigenvalues: &[f64], cutoff: usize, mean: f64) -> Result<f64> {
    const T0: f64 = 0.25;
    let half = (cutoff / 2) as i64;
    let lo = mean - half as f64 - 0.5;
    let hi = mean + half as f64 + 0.5;
    let mut spectrum: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|l| *l > lo && *l < hi)
        .collect();
    let reach = (60.0f64 / 1e-4).sqrt() as i64 + 1;
    for n in (half + 1)..=(half + reach) {
        spectrum.push(n as f64 + mean);
        spectrum.push(-(n as f64) + mean);
    }
    let trace = |t: f64| -> f64 { spectrum.iter().map(|l| l * (-t * l * l).exp()).sum() };
    let large: f64 = spectrum
        .iter()
        .map(|l| l.signum() * erfc(l.abs() * T0.sqrt()))
        .sum();
    // h(t) = t^{−1/2} Tr(∂e^{−t∂²}) / √π
    let samples: Vec<(f64, f64)> = geometric_grid(1e-4, T0, 24)
        .into_iter()
        .map(|t| (t, trace(t) / (PI * t).sqrt()))
        .collect();
    let menu = [-0.5, 0.0, 0.5, 1.0, 1.5];
    let fit = heat_trace_expansion_fit(&samples, &menu, &[], 1e-6)?;
    let small: f64 = fit
        .exponents
        .iter()
        .zip(&fit.coefficients)
        .map(|(e, c)| c * T0.powf(e + 1.0) / (e + 1.0))
        .sum();
    Ok(large + small)
}

/// A mode-diagonal operator on the circle,
/// `F = c₊|∂_a|^p Π_> + c₋|∂_a|^p Π_< + S` with `S` of finite rank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOperator {
    pub plus: f64,
    pub minus: f64,
    pub power: f64,
    /// Trace of the finite-rank part `S`.
    pub finite_trace: f64,
}

impl ModelOperator {
    pub fn identity() -> Self {
        Self {
            plus: 1.0,
            minus: 1.0,
            power: 0.0,
            finite_trace: 0.0,
        }
    }

    pub fn sign() -> Self {
        Self {
            plus: 1.0,
            minus: -1.0,
            power: 0.0,
            finite_trace: 0.0,
        }
    }

    pub fn abs_power(p: f64) -> Self {
        Self {
            plus: 1.0,
            minus: 1.0,
            power: p,
            finite_trace: 0.0,
        }
    }

    pub fn finite_rank(trace: f64) -> Self {
        Self {
            plus: 0.0,
            minus: 0.0,
            power: 0.0,
            finite_trace: trace,
        }
    }
}

/// Regulator `Δ = |∂_a|^order`, `∂_a = −i d/dθ + a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRegulator {
    pub a: f64,
    pub order: f64,
}

impl ModelRegulator {
    /// Positive and negative branches `q + n`, `(1 − q) + n` of `|λ|`.
    fn branches(&self) -> Result<(f64, f64)> {
        let q = self.a - self.a.floor();
        if q < 1e-12 || 1.0 - q < 1e-12 {
            return Err(Error::KernelGap {
                point: 0,
                gap: q.min(1.0 - q),
                tol: 1e-12,
            });
        }
        if !(self.order > 0.0) {
            return Err(Error::InvalidParameter(
                "regulator order must be positive".into(),
            ));
        }
        Ok((q, 1.0 - q))
    }

    pub fn describe(&self) -> String {
        format!("|d_a|^{} with a = {}", self.order, self.a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    ClosedForm,
    HeatFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoTraceResult {
    pub value: f64,
    pub method: TraceMethod,
    pub regulator: String,
    /// Residue `ord(Δ)·Res_{s=0} Tr(FΔ^{−s})`.
    pub residue: f64,
}

/// Constant term at `s = 0` of `Tr(F Δ^{−s})`.
///
/// Closed form: `c₊ζ(ord·s − p, q) + c₋ζ(ord·s − p, 1−q) + Tr S`; at the pole
/// `p = −1` the constant term of `ζ(1 + ε, q)` is `−ψ(q)`. Heat fit: the
/// constant term of `Tr(Fe^{−tΔ})` minus `γ` times its `log t` coefficient.
pub fn pseudo_trace(
    f: &ModelOperator,
    delta: &ModelRegulator,
    method: TraceMethod,
) -> Result<PseudoTraceResult> {
    let (qp, qm) = delta.branches()?;
    let (value, residue) = match method {
        TraceMethod::ClosedForm => {
            let p = f.power;
            if (p + 1.0).abs() < 1e-12 {
                let v = -f.plus * digamma(qp) - f.minus * digamma(qm);
                (v + f.finite_trace, f.plus + f.minus)
            } else {
                let s = C64::new(-p, 0.0);
                let v = f.plus * hurwitz_zeta(s, qp)?.re + f.minus * hurwitz_zeta(s, qm)?.re;
                (v + f.finite_trace, 0.0)
            }
        }
        TraceMethod::HeatFit => {
            let fit = model_heat_fit(f, delta)?;
            let c0 = fit.coefficient(0.0);
            let clog = fit.log_coefficient(0.0);
            (c0 - EULER_GAMMA * clog, -delta.order * clog)
        }
    };
    Ok(PseudoTraceResult {
        value,
        method,
        regulator: delta.describe(),
        residue,
    })
}

/// `Tr(F e^{−tΔ})` for the model operator, summed until terms drop below 1e-18.
pub fn model_heat_trace(f: &ModelOperator, delta: &ModelRegulator, t: f64) -> Result<f64> {
    let (qp, qm) = delta.branches()?;
    let branch = |q: f64, c: f64| -> f64 {
        if c == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        let mut n = 0usize;
        loop {
            let x = q + n as f64;
            let e = (-t * x.powf(delta.order)).exp();
            let term = c * x.powf(f.power) * e;
            s += term;
            if e < 1e-18 && n > 2 {
                break;
            }
            n += 1;
        }
        s
    };
    // finite rank S: its contribution Tr(S e^{−tΔ}) → Tr S as t → 0; taken as
    // supported on the kernel-free low modes with unit eigenvalue weight
    Ok(branch(qp, f.plus)
        + branch(qm, f.minus)
        + f.finite_trace * (-t * qp.min(qm).powf(delta.order)).exp())
}

/// Expansion fit of the model heat trace on 24 geometric points in
/// `[1e-4, 1]` with the exponent menu `t^{(j − 1 − p)/ord}` plus `log t`.
pub fn model_heat_fit(f: &ModelOperator, delta: &ModelRegulator) -> Result<HeatExpansionFit> {
    let samples: Vec<(f64, f64)> = geometric_grid(1e-4, 1.0, 24)
        .into_iter()
        .map(|t| Ok((t, model_heat_trace(f, delta, t)?)))
        .collect::<Result<_>>()?;
    let lead = -(1.0 + f.power) / delta.order;
    let mut menu: Vec<f64> = Vec::new();
    let mut e = lead;
    while e < -1e-12 {
        menu.push(e);
        e += 1.0;
    }
    for k in 0..8 {
        menu.push(k as f64);
    }
    menu.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    menu.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    heat_trace_expansion_fit(&samples, &menu, &[0.0], FIT_TOL)
}

/// Residue trace of a model operator, from the Hurwitz pole (closed form) or
/// the `log t` heat coefficient (heat fit).
pub fn wodzicki_residue(
    f: &ModelOperator,
    delta: &ModelRegulator,
    method: TraceMethod,
) -> Result<f64> {
    Ok(pseudo_trace(f, delta, method)?.residue)
}

/// Constant term of a relative heat trace `t ↦ Str(F(e^{−tΔ₁} − e^{−tΔ₂}))`
/// sampled on a 24-point grid over `[1e-4, 1]`, fitted in integer powers of `t`.
pub fn relative_constant_term(trace: impl Fn(f64) -> Result<f64>) -> Result<HeatExpansionFit> {
    let samples: Vec<(f64, f64)> = geometric_grid(1e-4, 1.0, 24)
        .into_iter()
        .map(|t| Ok((t, trace(t)?)))
        .collect::<Result<_>>()?;
    heat_trace_expansion_fit(&samples, &[0.0, 1.0, 2.0, 3.0], &[0.0], 1e-6)
}

/// `τ_{Δ₁,Δ₂}(I)` at every base point: the constant term of the relative heat
/// supertrace of two cylinder boundary problems.
pub fn relative_pseudo_trace(
    b1: &crate::cylinder_aps::BoundaryValueProblem,
    b2: &crate::cylinder_aps::BoundaryValueProblem,
) -> Result<Vec<PseudoTraceResult>> {
    let heat = crate::cylinder_aps::RelativeHeatTrace::new(b1, b2, 1e-4)?;
    let tables: Vec<Vec<(f64, f64)>> = {
        let grid = geometric_grid(1e-4, 1.0, 24);
        let rows: Vec<Vec<f64>> = grid.iter().map(|t| heat.at(*t)).collect::<Result<_>>()?;
        let points = rows.first().map_or(0, |r| r.len());
        (0..points)
            .map(|x| grid.iter().zip(&rows).map(|(t, r)| (*t, r[x])).collect())
            .collect()
    };
    tables
        .iter()
        .map(|samples| {
            let fit = heat_trace_expansion_fit(samples, &[0.0, 1.0, 2.0, 3.0], &[0.0], 1e-6)?;
            Ok(PseudoTraceResult {
                value: fit.coefficient(0.0) - EULER_GAMMA * fit.log_coefficient(0.0),
                method: TraceMethod::HeatFit,
                regulator: "relative cylinder Laplacians".into(),
                residue: -2.0 * fit.log_coefficient(0.0),
            })
        })
        .collect()
}

/// `η^{[M]}(𝖯₁,𝖯₂) + Σ_{2k ≤ dim B} ((k+1)/k!) τ_{Δ₁,Δ₂}(𝖱^k)`. The `k ≥ 1`
/// pseudo-traces of curvature coefficients need eigenfunction expansions on
/// the cylinder and are only available when they vanish identically, i.e.
/// on bases of dimension at most one.
pub fn predicted_heat_form_limit(
    b1: &crate::cylinder_aps::BoundaryValueProblem,
    b2: &crate::cylinder_aps::BoundaryValueProblem,
    d1: &crate::cylinder_aps::DomainProjection,
    d2: &crate::cylinder_aps::DomainProjection,
    c: &crate::base_forms::ConnectionData,
) -> Result<crate::base_forms::FormField> {
    use crate::base_forms::{FormField, MultiIndex};
    let grid = *b1.section.grid();
    if grid.dim() >= 2 {
        return Err(Error::Unsupported(
            "pseudo-traces of curvature coefficients on a two-dimensional base".into(),
        ));
    }
    let eta = crate::cylinder_aps::relative_interior_eta_form(d1, d2, &b1.section, &b2.section, c)?;
    let tau: Vec<C64> = relative_pseudo_trace(b1, b2)?
        .into_iter()
        .map(|r| C64::new(r.value, 0.0))
        .collect();
    Ok(eta.add(&FormField::from_component(grid, MultiIndex::EMPTY, tau)))
}

/// `lim_{t→0}` of the relative heat supertrace form of two cylinder problems,
/// by Richardson extrapolation from `t_start, t_start/2, …` (`levels` values).
pub fn relative_heat_form_limit(
    b1: &crate::cylinder_aps::BoundaryValueProblem,
    b2: &crate::cylinder_aps::BoundaryValueProblem,
    t_start: f64,
    levels: usize,
) -> Result<crate::base_forms::FormField> {
    use crate::base_forms::{FormField, MultiIndex};
    let grid = *b1.section.grid();
    if grid.dim() >= 2 {
        return Err(Error::Unsupported(
            "relative heat forms of positive degree on a two-dimensional base".into(),
        ));
    }
    let t_min = t_start / 2f64.powi(levels as i32 - 1);
    let heat = crate::cylinder_aps::RelativeHeatTrace::new(b1, b2, t_min)?;
    let values: Vec<FormField> = (0..levels)
        .map(|j| {
            let v = heat.at(t_start / 2f64.powi(j as i32))?;
            Ok(FormField::from_component(
                grid,
                MultiIndex::EMPTY,
                v.into_iter().map(|x| C64::new(x, 0.0)).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(crate::superconnection::richardson_to_zero(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn re(s: f64, q: f64) -> f64 {
        hurwitz_zeta(C64::new(s, 0.0), q).unwrap().re
    }

    #[test]
    fn hurwitz_classical_values() {
        assert_relative_eq!(re(0.0, 0.25), 0.25, epsilon = 1e-13);
        assert_relative_eq!(re(2.0, 1.0), PI * PI / 6.0, epsilon = 1e-12);
        assert_relative_eq!(re(-1.0, 1.0), -1.0 / 12.0, epsilon = 1e-12);
        assert!(matches!(
            hurwitz_zeta(C64::new(1.0, 0.0), 0.5),
            Err(Error::Pole)
        ));
    }

    #[test]
    fn hurwitz_shift_identity() {
        for &(s, q) in &[(0.5, 0.3), (-2.5, 0.7), (3.0, 0.1), (-0.5, 0.25)] {
            let lhs = re(s, q) - re(s, q + 1.0);
            assert_relative_eq!(lhs, q.powf(-s), epsilon = 1e-12);
        }
    }

    #[test]
    fn polynomial_input_is_recovered_exactly() {
        let samples: Vec<(f64, f64)> = geometric_grid(1e-4, 1.0, 24)
            .into_iter()
            .map(|t| (t, 2.0 - 3.0 * t + 0.5 * t * t))
            .collect();
        let fit = heat_trace_expansion_fit(&samples, &[0.0, 1.0, 2.0], &[], 1e-12).unwrap();
        assert_relative_eq!(fit.coefficient(0.0), 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficient(1.0), -3.0, epsilon = 1e-10);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let samples = vec![(0.1, 1.0), (0.2, 1.0), (0.3, 1.0)];
        assert!(heat_trace_expansion_fit(&samples, &[0.0, 1.0], &[], 1e-8).is_err());
    }

    #[test]
    fn pseudo_trace_examples() {
        let d1 = ModelRegulator {
            a: 0.25,
            order: 1.0,
        };
        let d2 = ModelRegulator {
            a: 0.25,
            order: 2.0,
        };
        for m in [TraceMethod::ClosedForm, TraceMethod::HeatFit] {
            let eta = pseudo_trace(&ModelOperator::sign(), &d1, m).unwrap().value;
            assert!((eta - 0.5).abs() < 1e-5, "{m:?} {eta}");
            let id = pseudo_trace(&ModelOperator::identity(), &d2, m)
                .unwrap()
                .value;
            assert!(id.abs() < 1e-5, "{m:?} {id}");
            let s = pseudo_trace(&ModelOperator::finite_rank(3.0), &d2, m)
                .unwrap()
                .value;
            assert!((s - 3.0).abs() < 1e-5, "{m:?} {s}");
        }
    }

    #[test]
    fn residues() {
        let d = ModelRegulator {
            a: 0.25,
            order: 1.0,
        };
        for m in [TraceMethod::ClosedForm, TraceMethod::HeatFit] {
            let r = wodzicki_residue(&ModelOperator::abs_power(-1.0), &d, m).unwrap();
            assert!((r - 2.0).abs() < 1e-6, "{m:?} {r}");
            assert!(
                wodzicki_residue(&ModelOperator::identity(), &d, m)
                    .unwrap()
                    .abs()
                    < 1e-6
            );
        }
    }

    #[test]
    fn theta_leading_coefficient() {
        let f = ModelOperator::identity();
        let d = ModelRegulator {
            a: 0.25,
            order: 2.0,
        };
        let fit = model_heat_fit(&f, &d).unwrap();
        assert_relative_eq!(fit.coefficient(-0.5), PI.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn eta_heat_fit_matches_closed_form() {
        for a in [0.1, 0.25, 0.7] {
            let n = 16usize;
            let eig: Vec<f64> = (-(n as i64)..=n as i64).map(|k| k as f64 + a).collect();
            let eta = eta_by_heat_fit(&eig, n, a).unwrap();
            assert!((eta - (1.0 - 2.0 * a)).abs() < 1e-6, "{a} {eta}");
        }
    }
}
