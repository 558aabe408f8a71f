//! Propagators of `∂S/∂t = −iεV(t)S`, computed as ordered product integrals
//! and, independently, as Dyson series of successive approximations.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{
    expm, identity, operator_norm, unitary_defect, ComplexMatrix, HermitianOperator,
    UnitaryOperator,
};
use crate::quadrature::{integrate, AdaptiveOptions, QuadResult, SpectralPanel};

/// Breakpoints every family carries unless told otherwise.
pub const DEFAULT_BREAKPOINTS: [f64; 2] = [-1.0, 1.0];
/// Step budget of a single product integral.
pub const DEFAULT_MAX_STEPS: usize = 500_000;
/// Largest unitarity defect a [`Propagator`] may carry.
pub const PROPAGATOR_UNITARITY_TOL: f64 = 1e-9;

type Evaluator = dyn Fn(f64) -> ComplexMatrix + Send + Sync;

/// A matrix-valued function of time with declared points of discontinuity.
///
/// Used both for self-adjoint perturbations `V(t)` and for general generators
/// `F(t)` of product integrals.
#[derive(Clone)]
pub struct OperatorFamily {
    dim: usize,
    breakpoints: Vec<f64>,
    evaluator: Arc<Evaluator>,
}

impl fmt::Debug for OperatorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorFamily")
            .field("dim", &self.dim)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

impl OperatorFamily {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    {
        Self::with_breakpoints(dim, DEFAULT_BREAKPOINTS.to_vec(), f)
    }

    pub fn with_breakpoints<F>(dim: usize, mut breakpoints: Vec<f64>, f: F) -> Self
    where
        F: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    {
        breakpoints.retain(|b| b.is_finite());
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        OperatorFamily {
            dim,
            breakpoints,
            evaluator: Arc::new(f),
        }
    }

    pub fn constant(m: ComplexMatrix) -> Self {
        let dim = m.nrows();
        Self::with_breakpoints(dim, Vec::new(), move |_| m.clone())
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(ComplexMatrix::zeros(dim, dim))
    }

    /// Scalar family `t ↦ f(t)` as a 1×1 operator.
    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(1, move |t| {
            ComplexMatrix::from_element(1, 1, Complex64::new(f(t), 0.0))
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn eval(&self, t: f64) -> ComplexMatrix {
        (self.evaluator)(t)
    }

    /// Value at `t`, validated as Hermitian.
    pub fn hermitian_at(&self, t: f64) -> Result<HermitianOperator> {
        HermitianOperator::new(self.eval(t))
    }

    /// `t ↦ c·F(t)`, keeping breakpoints.
    pub fn scaled(&self, c: Complex64) -> OperatorFamily {
        let inner = Arc::clone(&self.evaluator);
        OperatorFamily {
            dim: self.dim,
            breakpoints: self.breakpoints.clone(),
            evaluator: Arc::new(move |t| inner(t) * c),
        }
    }

    /// Generator `−iεV(t)` of the propagator equation.
    pub fn generator(&self, epsilon: f64) -> OperatorFamily {
        self.scaled(Complex64::new(0.0, -epsilon))
    }

    /// Largest `‖F(t+δ) − F(t)‖` over `samples` points of `[a, b]` that do not
    /// straddle a breakpoint.
    pub fn continuity_defect(&self, a: f64, b: f64, samples: usize, delta: f64) -> f64 {
        let n = samples.max(2);
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let t = a + (b - a) * k as f64 / (n - 1) as f64;
            let s = t + delta;
            if self.breakpoints.iter().any(|&bp| t < bp && bp <= s || t == bp) {
                continue;
            }
            worst = worst.max(operator_norm(&(self.eval(s) - self.eval(t))));
        }
        worst
    }

    pub(crate) fn panel_edges(&self, tau: f64, t: f64) -> Vec<f64> {
        let mut edges = vec![tau];
        edges.extend(self.breakpoints.iter().copied().filter(|&b| b > tau && b < t));
        edges.push(t);
        edges
    }
}

fn check_interval(tau: f64, t: f64) -> Result<()> {
    if !(tau.is_finite() && t.is_finite()) {
        return Err(Error::Invalid(format!("times must be finite: tau={tau}, t={t}")));
    }
    if t < tau {
        return Err(Error::Invalid(format!("expected t >= tau, got t={t}, tau={tau}")));
    }
    Ok(())
}

/// Result of an ordered product integral.
#[derive(Debug, Clone)]
pub struct ProductIntegral {
    pub value: ComplexMatrix,
    pub steps: usize,
    /// Sum of accepted step-halving differences.
    pub error_estimate: f64,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Step differences below this multiple of the step norm are treated as rounding.
const ROUNDING_FLOOR: f64 = 64.0 * f64::EPSILON;

/// One commutator-free fourth-order step: two exponentials of linear
/// combinations of the generator at the two Gauss points.
fn cf4_step(f: &OperatorFamily, s: f64, h: f64) -> Result<ComplexMatrix> {
    let c1 = 0.5 - SQRT3 / 6.0;
    let c2 = 0.5 + SQRT3 / 6.0;
    let a1 = f.eval(s + c1 * h) * Complex64::new(h, 0.0);
    let a2 = f.eval(s + c2 * h) * Complex64::new(h, 0.0);
    let small = (3.0 - 2.0 * SQRT3) / 12.0;
    let large = (3.0 + 2.0 * SQRT3) / 12.0;
    let late = &a1 * Complex64::new(small, 0.0) + &a2 * Complex64::new(large, 0.0);
    let early = &a1 * Complex64::new(large, 0.0) + &a2 * Complex64::new(small, 0.0);
    Ok(expm(&late)? * expm(&early)?)
}

/// Left-ordered product integral of `F` over `[tau, t]`, i.e. the solution of
/// `Y' = F(s)Y`, `Y(tau) = I`, evaluated at `t`.
pub fn prod_integral(f: &OperatorFamily, tau: f64, t: f64, tol: f64) -> Result<ProductIntegral> {
    prod_integral_with_budget(f, tau, t, tol, DEFAULT_MAX_STEPS)
}

pub fn prod_integral_with_budget(
    f: &OperatorFamily,
    tau: f64,
    t: f64,
    tol: f64,
    max_steps: usize,
) -> Result<ProductIntegral> {
    check_interval(tau, t)?;
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let n = f.dim();
    let mut y = identity(n);
    if t == tau {
        return Ok(ProductIntegral {
            value: y,
            steps: 0,
            error_estimate: 0.0,
        });
    }
    let span = t - tau;
    let mut steps = 0usize;
    let mut error_estimate = 0.0;
    let mut h_guess = span;
    for w in f.panel_edges(tau, t).windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut s = a;
        let mut h = h_guess.min(b - a);
        while s < b {
            if b - s <= h * (1.0 + 1e-12) {
                h = b - s;
            }
            if steps >= max_steps {
                return Err(Error::Convergence {
                    what: format!("product integral on [{tau}, {t}] (step budget {max_steps})"),
                    achieved: error_estimate,
                    target: tol,
                });
            }
            let full = cf4_step(f, s, h)?;
            let half = cf4_step(f, s + 0.5 * h, 0.5 * h)? * cf4_step(f, s, 0.5 * h)?;
            let err = (&half - &full).norm();
            let allowed = (tol * h / span).max(ROUNDING_FLOOR * full.norm());
            steps += 1;
            if err <= allowed {
                y = half * y;
                error_estimate += err;
                s = if h == b - s { b } else { s + h };
                let grow = if err == 0.0 {
                    4.0
                } else {
                    (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 4.0)
                };
                h *= grow;
            } else {
                h *= (0.9 * (allowed / err).powf(0.25)).clamp(0.1, 0.9);
                if h <= 1e-14 * s.abs().max(1.0) {
                    return Err(Error::Convergence {
                        what: format!("product integral step size collapsed at s={s}"),
                        achieved: err,
                        target: allowed,
                    });
                }
            }
        }
        h_guess = h;
    }
    Ok(ProductIntegral {
        value: y,
        steps,
        error_estimate,
    })
}

/// A computed `S(t, τ, ε)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub value: UnitaryOperator,
    pub t: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub steps_used: usize,
    pub error_estimate: f64,
    pub unitarity_defect: f64,
}

/// Solves `∂S/∂t = −iεV(t)S`, `S(τ,τ) = I` on `[τ, t]`.
pub fn propagate(v: &OperatorFamily, tau: f64, t: f64, epsilon: f64, tol: f64) -> Result<Propagator> {
    check_interval(tau, t)?;
    if t == tau || epsilon == 0.0 {
        return Ok(Propagator {
            value: UnitaryOperator::identity(v.dim()),
            t,
            tau,
            epsilon,
            steps_used: 0,
            error_estimate: 0.0,
            unitarity_defect: 0.0,
        });
    }
    let pi = prod_integral(&v.generator(epsilon), tau, t, tol)?;
    let defect = unitary_defect(&pi.value);
    let value = UnitaryOperator::with_tol(pi.value, PROPAGATOR_UNITARITY_TOL)?;
    Ok(Propagator {
        value,
        t,
        tau,
        epsilon,
        steps_used: pi.steps,
        error_estimate: pi.error_estimate,
        unitarity_defect: defect,
    })
}

/// Terms `S_0 … S_P` of the Dyson series.
#[derive(Debug, Clone)]
pub struct DysonExpansion {
    pub terms: Vec<ComplexMatrix>,
    pub t: f64,
    pub tau: f64,
    pub order: usize,
    /// Sampled `sup ‖V‖` on `[τ, t]`.
    pub sup_norm: f64,
    /// Conservative convergence radius `1 / (2 sup‖V‖ (t − τ))`.
    pub radius_estimate: f64,
    /// Largest difference between the left- and right-sided recursions.
    pub sided_discrepancy: f64,
    /// Largest change of any term between two panel resolutions.
    pub quadrature_error: f64,
}

const DYSON_NODES_COARSE: usize = 16;
const DYSON_NODES_FINE: usize = 24;

/// Panels on which the Dyson recursion is run: an adaptive Gauss–Kronrod
/// partition for `∫V`, refined until `sup‖V‖·width ≤ 1/2` on each panel.
fn dyson_partition(v: &OperatorFamily, tau: f64, t: f64) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut sup: f64 = 0.0;
    let quad = integrate(
        |s| {
            let m = v.eval(s);
            sup = sup.max(operator_norm(&m));
            Ok(m)
        },
        tau,
        t,
        v.breakpoints(),
        AdaptiveOptions::default(),
    )
    .map_err(|e| match e {
        Error::Convergence { achieved, target, .. } => Error::Convergence {
            what: "Dyson term quadrature".into(),
            achieved,
            target,
        },
        other => other,
    })?;
    sup = sup.max(operator_norm(&v.eval(tau))).max(operator_norm(&v.eval(t)));
    let mut panels = Vec::new();
    for (a, b) in quad.partition {
        let pieces = if sup > 0.0 {
            ((b - a) * sup / 0.5).ceil().max(1.0) as usize
        } else {
            1
        };
        for k in 0..pieces {
            let lo = a + (b - a) * k as f64 / pieces as f64;
            let hi = if k + 1 == pieces { b } else { a + (b - a) * (k + 1) as f64 / pieces as f64 };
            panels.push((lo, hi));
        }
    }
    Ok((panels, sup))
}

fn minus_i() -> Complex64 {
    Complex64::new(0.0, -1.0)
}

/// Left-sided recursion `S_{p+1}(x) = −i ∫_τ^x V S_p`, evaluated at `t`.
fn dyson_left(
    v: &OperatorFamily,
    panels: &[(f64, f64)],
    order: usize,
    rule: &SpectralPanel,
) -> Vec<ComplexMatrix> {
    let n = v.dim();
    let m = rule.len();
    let mut start: Vec<ComplexMatrix> = (0..=order)
        .map(|p| if p == 0 { identity(n) } else { ComplexMatrix::zeros(n, n) })
        .collect();
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let xs: Vec<f64> = rule.nodes.iter().map(|x| a + half * (x + 1.0)).collect();
        let vs: Vec<ComplexMatrix> = xs.iter().map(|&x| v.eval(x)).collect();
        let mut level: Vec<ComplexMatrix> = vec![identity(n); m];
        let mut end = start.clone();
        for p in 0..order {
            let g: Vec<ComplexMatrix> = (0..m).map(|k| &vs[k] * &level[k] * minus_i()).collect();
            let mut next = Vec::with_capacity(m);
            for j in 0..m {
                let mut acc = start[p + 1].clone();
                for k in 0..m {
                    acc += &g[k] * Complex64::new(half * rule.integration[j][k], 0.0);
                }
                next.push(acc);
            }
            let mut total = start[p + 1].clone();
            for k in 0..m {
                total += &g[k] * Complex64::new(half * rule.weights[k], 0.0);
            }
            end[p + 1] = total;
            level = next;
        }
        start = end;
    }
    start
}

/// Right-sided recursion `S_{p+1}(t, y) = −i ∫_y^t S_p(t, s) V(s) ds`, evaluated at `y = τ`.
fn dyson_right(
    v: &OperatorFamily,
    panels: &[(f64, f64)],
    order: usize,
    rule: &SpectralPanel,
) -> Vec<ComplexMatrix> {
    let n = v.dim();
    let m = rule.len();
    let mut start: Vec<ComplexMatrix> = (0..=order)
        .map(|p| if p == 0 { identity(n) } else { ComplexMatrix::zeros(n, n) })
        .collect();
    for &(a, b) in panels.iter().rev() {
        let half = 0.5 * (b - a);
        let xs: Vec<f64> = rule.nodes.iter().map(|x| a + half * (x + 1.0)).collect();
        let vs: Vec<ComplexMatrix> = xs.iter().map(|&x| v.eval(x)).collect();
        let mut level: Vec<ComplexMatrix> = vec![identity(n); m];
        let mut end = start.clone();
        for p in 0..order {
            let g: Vec<ComplexMatrix> = (0..m).map(|k| &level[k] * &vs[k] * minus_i()).collect();
            let mut next = Vec::with_capacity(m);
            for j in 0..m {
                let mut acc = start[p + 1].clone();
                for k in 0..m {
                    let w = rule.weights[k] - rule.integration[j][k];
                    acc += &g[k] * Complex64::new(half * w, 0.0);
                }
                next.push(acc);
            }
            let mut total = start[p + 1].clone();
            for k in 0..m {
                total += &g[k] * Complex64::new(half * rule.weights[k], 0.0);
            }
            end[p + 1] = total;
            level = next;
        }
        start = end;
    }
    start
}

/// Dyson terms `S_p(t, τ)`, `p = 0..=order`.
pub fn dyson_terms(v: &OperatorFamily, tau: f64, t: f64, order: usize) -> Result<DysonExpansion> {
    check_interval(tau, t)?;
    let n = v.dim();
    if t == tau {
        let mut terms = vec![ComplexMatrix::zeros(n, n); order + 1];
        terms[0] = identity(n);
        return Ok(DysonExpansion {
            terms,
            t,
            tau,
            order,
            sup_norm: operator_norm(&v.eval(t)),
            radius_estimate: f64::INFINITY,
            sided_discrepancy: 0.0,
            quadrature_error: 0.0,
        });
    }
    let (panels, sup) = dyson_partition(v, tau, t)?;
    let fine = SpectralPanel::new(DYSON_NODES_FINE);
    let coarse = SpectralPanel::new(DYSON_NODES_COARSE);
    let mut terms = dyson_left(v, &panels, order, &fine);
    terms[0] = identity(n);
    let coarse_terms = dyson_left(v, &panels, order, &coarse);
    let right = dyson_right(v, &panels, order, &fine);
    let quadrature_error = terms
        .iter()
        .zip(&coarse_terms)
        .map(|(a, b)| operator_norm(&(a - b)))
        .fold(0.0, f64::max);
    let sided_discrepancy = terms
        .iter()
        .zip(&right)
        .map(|(a, b)| operator_norm(&(a - b)))
        .fold(0.0, f64::max);
    let radius_estimate = if sup > 0.0 {
        1.0 / (2.0 * sup * (t - tau))
    } else {
        f64::INFINITY
    };
    Ok(DysonExpansion {
        terms,
        t,
        tau,
        order,
        sup_norm: sup,
        radius_estimate,
        sided_discrepancy,
        quadrature_error,
    })
}

/// `Σ_{p>order} x^p / p!` for `x ≥ 0`.
pub fn exp_tail(x: f64, order: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for p in 1..=order {
        term *= x / p as f64;
    }
    let mut sum = 0.0;
    let mut p = order + 1;
    loop {
        term *= x / p as f64;
        sum += term;
        if term <= sum * 1e-17 || p > order + 10_000 {
            break;
        }
        p += 1;
    }
    sum
}

#[derive(Debug, Clone)]
pub struct DysonSum {
    pub value: ComplexMatrix,
    /// `Σ_{p>P} (|ε| sup‖V‖ (t−τ))^p / p!`.
    pub remainder_bound: f64,
    pub expansion: DysonExpansion,
}

/// Truncated Dyson series `Σ_{p≤P} S_p ε^p` with its analytic remainder bound.
pub fn dyson_sum(v: &OperatorFamily, tau: f64, t: f64, epsilon: f64, order: usize) -> Result<DysonSum> {
    let expansion = dyson_terms(v, tau, t, order)?;
    let n = v.dim();
    let mut value = ComplexMatrix::zeros(n, n);
    let mut power = 1.0;
    for term in &expansion.terms {
        value += term * Complex64::new(power, 0.0);
        power *= epsilon;
    }
    let x = epsilon.abs() * expansion.sup_norm * (t - tau);
    Ok(DysonSum {
        value,
        remainder_bound: exp_tail(x, order),
        expansion,
    })
}

/// First approximation `S_1(t, τ) = −i ∫_τ^t V`.
pub fn first_approx(v: &OperatorFamily, tau: f64, t: f64) -> Result<QuadResult<ComplexMatrix>> {
    let mut q = integrate(|s| Ok(v.eval(s)), tau, t, v.breakpoints(), AdaptiveOptions::default())?;
    q.value *= minus_i();
    Ok(q)
}

/// Default finite-difference step for [`recover_perturbation`].
pub fn default_fd_step(t: f64) -> f64 {
    1e-4 * t.abs().max(1.0)
}

#[derive(Debug, Clone)]
pub struct RecoveredPerturbation {
    pub operator: HermitianOperator,
    pub hermitian_defect: f64,
}

/// Recovers `V(t) = i ∂S_1/∂t` by a central difference with step `h`.
pub fn recover_perturbation<F>(s1: F, t: f64, h: f64) -> Result<RecoveredPerturbation>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    recover_perturbation_with_tol(s1, t, h, 1e-6)
}

/// As [`recover_perturbation`], rejecting a Hermitian defect above `rtol · max(1, ‖V‖)`.
pub fn recover_perturbation_with_tol<F>(s1: F, t: f64, h: f64, rtol: f64) -> Result<RecoveredPerturbation>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let forward = s1(t + h)?;
    let backward = s1(t - h)?;
    let derivative = (forward - backward) * Complex64::new(0.0, 1.0 / (2.0 * h));
    let defect = crate::operator::hermitian_defect(&derivative);
    let tol = rtol * operator_norm(&derivative).max(1.0);
    let operator = HermitianOperator::with_tol(derivative, tol).map_err(|_| {
        Error::Invalid(format!(
            "recovered perturbation is not self-adjoint (defect {defect:.3e} > {tol:.3e}); the first approximation is inconsistent"
        ))
    })?;
    Ok(RecoveredPerturbation {
        operator,
        hermitian_defect: defect,
    })
}

/// `exp(∫_τ^t ‖F(s)‖ ds)`, an upper bound for the norm of the product integral.
pub fn norm_certificate(f: &OperatorFamily, tau: f64, t: f64) -> Result<f64> {
    check_interval(tau, t)?;
    let q = integrate(
        |s| Ok(operator_norm(&f.eval(s))),
        tau,
        t,
        f.breakpoints(),
        AdaptiveOptions::default(),
    )?;
    Ok((q.value + q.error).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{matexp_skew, pauli, real_matrix};
    use std::f64::consts::E;

    fn scalar(m: &ComplexMatrix) -> Complex64 {
        m[(0, 0)]
    }

    #[test]
    fn zero_generator_gives_identity() {
        let r = prod_integral(&OperatorFamily::zero(3), 0.0, 2.0, 1e-10).unwrap();
        assert!((r.value - identity(3)).norm() < 1e-15);
    }

    #[test]
    fn constant_generator_matches_exponential() {
        let (sx, _, sz) = pauli();
        let v = HermitianOperator::new(sx + sz * Complex64::new(0.5, 0.0)).unwrap();
        let f = OperatorFamily::constant(v.matrix() * minus_i());
        let r = prod_integral(&f, 0.0, 1.0, 1e-12).unwrap();
        let exact = matexp_skew(&v, -1.0).unwrap();
        assert!((r.value - exact.matrix()).norm() < 1e-13);
    }

    #[test]
    fn commuting_family_matches_closed_form() {
        let c = HermitianOperator::from_real_diag(&[1.0, -0.5]);
        let b = HermitianOperator::from_real_diag(&[0.3, 2.0]);
        let (cm, bm) = (c.matrix().clone(), b.matrix().clone());
        let f = OperatorFamily::new(2, move |s| (&cm + &bm * Complex64::new(1.0 / s, 0.0)) * minus_i());
        let r = prod_integral(&f, 1.0, E, 1e-12).unwrap();
        let gen = HermitianOperator::new(c.matrix() * Complex64::new(E - 1.0, 0.0) + b.matrix()).unwrap();
        let exact = matexp_skew(&gen, -1.0).unwrap();
        assert!((r.value - exact.matrix()).norm() < 1e-11);
    }

    #[test]
    fn propagate_examples() {
        let v = OperatorFamily::scalar(|_| 2.0);
        let same = propagate(&v, 0.4, 0.4, 1.0, 1e-10).unwrap();
        assert_eq!(same.value.matrix(), &identity(1));
        let p = propagate(&v, 0.0, 1.0, 0.1, 1e-12).unwrap();
        assert!((scalar(p.value.matrix()) - Complex64::cis(-0.2)).norm() < 1e-13);
        assert!(propagate(&v, 1.0, 0.0, 0.1, 1e-12).is_err());
    }

    #[test]
    fn noncommuting_propagator_matches_dyson() {
        let (sx, _, sz) = pauli();
        let v = OperatorFamily::new(2, move |t| &sx + &sz * Complex64::new(t, 0.0));
        let p = propagate(&v, 0.0, 1.0, 0.3, 1e-12).unwrap();
        let d = dyson_sum(&v, 0.0, 1.0, 0.3, 12).unwrap();
        let diff = operator_norm(&(p.value.matrix() - &d.value));
        assert!(diff <= 1e-8, "diff {diff}");
    }

    #[test]
    fn dyson_examples() {
        let v = OperatorFamily::scalar(|_| 2.0);
        let d = dyson_terms(&v, 0.0, 1.0, 0).unwrap();
        assert_eq!(d.terms, vec![identity(1)]);

        let d = dyson_terms(&v, 0.0, 1.0, 4).unwrap();
        assert!((scalar(&d.terms[2]) - Complex64::new(-2.0, 0.0)).norm() < 1e-13);
        // S_3 = (-2i)^3 / 6 = 8i/6
        assert!((scalar(&d.terms[3]) - Complex64::new(0.0, 8.0 / 6.0)).norm() < 1e-13);
        assert!((d.radius_estimate - 0.25).abs() < 1e-15);

        let v = OperatorFamily::scalar(|t| 1.0 + 1.0 / t);
        let d = dyson_terms(&v, 1.0, E, 1).unwrap();
        assert!((scalar(&d.terms[1]) - Complex64::new(0.0, -E)).norm() < 1e-12);
    }

    #[test]
    fn dyson_sum_scalar_oracle() {
        let v = OperatorFamily::scalar(|_| 2.0);
        let zero = dyson_sum(&v, 0.0, 1.0, 0.0, 5).unwrap();
        assert!((zero.value - identity(1)).norm() == 0.0);
        let d = dyson_sum(&v, 0.0, 1.0, 0.1, 10).unwrap();
        assert!((scalar(&d.value) - Complex64::cis(-0.2)).norm() < 1e-12);
        // 0.2^11/11! · (1 + 0.2/12 + …) ≈ 5.22e-16
        assert!((d.remainder_bound - 5.2167e-16).abs() < 1e-19);
    }

    #[test]
    fn exp_tail_matches_direct_difference() {
        let x: f64 = 0.7;
        let partial: f64 = (0..=3).map(|p| x.powi(p) / (1..=p).product::<i32>().max(1) as f64).sum();
        assert!((exp_tail(x, 3) - (x.exp() - partial)).abs() < 1e-15);
    }

    #[test]
    fn first_approx_examples() {
        let zero = first_approx(&OperatorFamily::zero(2), 0.0, 3.0).unwrap();
        assert_eq!(zero.value, ComplexMatrix::zeros(2, 2));

        let v = OperatorFamily::scalar(|t| 1.0 + 1.0 / t);
        let s1 = first_approx(&v, 1.0, E).unwrap();
        assert!((scalar(&s1.value) - Complex64::new(0.0, -E)).norm() < 1e-13);

        // negative branch: i(C(τ−t) + B ln(τ/t)) with C=1, B=2, τ=−e, t=−1
        let v = OperatorFamily::scalar(|t| 1.0 + 2.0 / t);
        let s1 = first_approx(&v, -E, -1.0).unwrap();
        let brute: f64 = {
            let n = 200_000;
            let h = (E - 1.0) / n as f64;
            (0..n).map(|k| {
                let s = -E + (k as f64 + 0.5) * h;
                (1.0 + 2.0 / s) * h
            }).sum()
        };
        assert!((scalar(&s1.value) - Complex64::new(0.0, -brute)).norm() < 1e-9);
        let closed = Complex64::new(0.0, (-E + 1.0) + 2.0 * (E.ln()));
        assert!((scalar(&s1.value) - closed).norm() < 1e-13);
    }

    #[test]
    fn recover_examples() {
        let v = OperatorFamily::scalar(|t| 1.0 + 1.0 / t);
        let s1 = |t: f64| first_approx(&v, 1.0, t).map(|q| q.value);
        let r = recover_perturbation(s1, 2.0, 1e-4).unwrap();
        assert!((r.operator.matrix()[(0, 0)].re - 1.5).abs() < 1e-7);

        let c = real_matrix(2, &[1.0, 0.5, 0.5, -1.0]);
        let cc = c.clone();
        let lin = move |t: f64| Ok(&cc * Complex64::new(0.0, -t));
        let r = recover_perturbation(lin, 0.3, default_fd_step(0.3)).unwrap();
        assert!((r.operator.matrix() - &c).norm() < 1e-10);
    }

    #[test]
    fn recover_rejects_non_hermitian() {
        let bad = |t: f64| Ok(real_matrix(2, &[0.0, t, 0.0, 0.0]));
        assert!(recover_perturbation(bad, 1.0, 1e-3).is_err());
        assert!(recover_perturbation(bad, 1.0, 0.0).is_err());
    }

    #[test]
    fn norm_certificate_examples() {
        assert_eq!(norm_certificate(&OperatorFamily::zero(2), 0.0, 1.0).unwrap(), 1.0);
        let f = OperatorFamily::constant(ComplexMatrix::from_element(1, 1, Complex64::new(0.0, -2.0)));
        let c = norm_certificate(&f, 0.0, 1.0).unwrap();
        assert!((c - 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn continuity_defect_ignores_declared_jumps() {
        let v = OperatorFamily::scalar(|t| if t > 1.0 { 5.0 } else { 0.0 });
        assert_eq!(v.continuity_defect(0.0, 2.0, 101, 1e-6), 0.0);
    }
}
