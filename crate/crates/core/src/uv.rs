//! Ultraviolet example with linear divergence: the radial flow in the cutoff
//! `L` of a four-dimensional spherical integral, its decomposition
//! `V(L,q) = C₊ + B₊(q)/L + u(L,q)`, and the regularized scattering function.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate, loglog_slope, pairwise_sum, AdaptiveOptions};

pub const MIN_ANGULAR_ORDER: usize = 8;
pub const DEFAULT_ANGULAR_ORDERS: [usize; 3] = [32, 32, 32];
/// First rung of the cutoff ladder.
pub const LADDER_START: f64 = 2.0;
pub const LADDER_CAP: f64 = 1.099_511_627_776e12; // 2^40

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);

    pub fn dot(&self, other: &FourVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
    pub fn scaled(&self, s: f64) -> FourVector {
        FourVector(self.0.map(|x| x * s))
    }
}

impl fmt::Display for FourVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a}, {b}, {c}, {d})")
    }
}

/// `p = r(cosφ₁, sinφ₁cosφ₂, sinφ₁sinφ₂cosφ₃, sinφ₁sinφ₂sinφ₃)`.
pub fn spherical_map(r: f64, phi1: f64, phi2: f64, phi3: f64) -> Result<FourVector> {
    let ok = r >= 0.0
        && (0.0..=PI).contains(&phi1)
        && (0.0..=PI).contains(&phi2)
        && (0.0..=2.0 * PI).contains(&phi3);
    if !ok {
        return Err(Error::Invalid(format!(
            "spherical coordinates out of range: r={r}, phi=({phi1}, {phi2}, {phi3})"
        )));
    }
    Ok(FourVector(unit_direction(phi1, phi2, phi3)).scaled(r))
}

fn unit_direction(phi1: f64, phi2: f64, phi3: f64) -> [f64; 4] {
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    let (s3, c3) = phi3.sin_cos();
    [c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `|p_μ| / (p² − 2pq + ℓ(q))²`.
    Linear,
    /// `p_μ / (p² − 2pq + ℓ(q))²`.
    Superficial,
}

impl Kernel {
    fn apply(&self, component: f64) -> f64 {
        match self {
            Kernel::Linear => component.abs(),
            Kernel::Superficial => component,
        }
    }
}

/// The function `ℓ(q)`.
#[derive(Clone)]
pub enum Ell {
    /// `q² + shift`.
    ShiftedSquare { shift: f64 },
    Constant { value: f64 },
    Custom(Arc<dyn Fn(&FourVector) -> f64 + Send + Sync>),
}

impl Ell {
    pub fn eval(&self, q: &FourVector) -> f64 {
        match self {
            Ell::ShiftedSquare { shift } => q.norm_sq() + shift,
            Ell::Constant { value } => *value,
            Ell::Custom(f) => f(q),
        }
    }
}

impl Default for Ell {
    fn default() -> Self {
        Ell::ShiftedSquare { shift: 1.0 }
    }
}

impl fmt::Debug for Ell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ell::ShiftedSquare { shift } => write!(f, "ShiftedSquare({shift})"),
            Ell::Constant { value } => write!(f, "Constant({value})"),
            Ell::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

/// Plain parameters of a [`UVScenario`].
#[derive(Debug, Clone)]
pub struct UVParams {
    pub ell: Ell,
    pub m_bound: f64,
    pub mu: usize,
    pub kernel: Kernel,
    pub angular_orders: [usize; 3],
    pub epsilon: f64,
}

impl Default for UVParams {
    fn default() -> Self {
        UVParams {
            ell: Ell::default(),
            m_bound: 1.0,
            mu: 1,
            kernel: Kernel::Linear,
            angular_orders: DEFAULT_ANGULAR_ORDERS,
            epsilon: 0.1,
        }
    }
}

/// Angular panel edges, split where the kernel has a kink.
fn angular_splits(mu: usize, kernel: Kernel) -> [Vec<f64>; 3] {
    let mut s = [vec![0.0, PI], vec![0.0, PI], vec![0.0, 2.0 * PI]];
    if kernel == Kernel::Linear {
        match mu {
            1 => s[0] = vec![0.0, PI / 2.0, PI],
            2 => s[1] = vec![0.0, PI / 2.0, PI],
            3 => s[2] = vec![0.0, PI / 2.0, 1.5 * PI, 2.0 * PI],
            _ => s[2] = vec![0.0, PI, 2.0 * PI],
        }
    }
    s
}

fn composite_rule(edges: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(order * (edges.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for e in edges.windows(2) {
        let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(c + h * xi);
            weights.push(h * wi);
        }
    }
    (nodes, weights)
}

/// Calls `f(weight, angles, û)` for every node of the tensor rule, where the
/// weight already contains `sin²φ₁ sinφ₂`.
fn visit_nodes<F>(orders: [usize; 3], splits: &[Vec<f64>; 3], mut f: F)
where
    F: FnMut(f64, [f64; 3], [f64; 4]),
{
    let r1 = composite_rule(&splits[0], orders[0]);
    let r2 = composite_rule(&splits[1], orders[1]);
    let r3 = composite_rule(&splits[2], orders[2]);
    for (&p1, &w1) in r1.0.iter().zip(&r1.1) {
        let s1 = p1.sin();
        for (&p2, &w2) in r2.0.iter().zip(&r2.1) {
            let w12 = w1 * w2 * s1 * s1 * p2.sin();
            for (&p3, &w3) in r3.0.iter().zip(&r3.1) {
                f(w12 * w3, [p1, p2, p3], unit_direction(p1, p2, p3));
            }
        }
    }
}

/// Tensor rule with `weight·g(û)` precomputed per node.
#[derive(Debug)]
struct AngularRule {
    weighted_kernel: Vec<f64>,
    directions: Vec<[f64; 4]>,
    /// `Σ weight·g(û)`.
    mass: f64,
    /// `Σ weight·|g(û)|`.
    abs_mass: f64,
}

impl AngularRule {
    fn new(orders: [usize; 3], splits: &[Vec<f64>; 3], mu: usize, kernel: Kernel) -> Self {
        let mut weighted_kernel = Vec::new();
        let mut directions = Vec::new();
        visit_nodes(orders, splits, |w, _, u| {
            weighted_kernel.push(w * kernel.apply(u[mu - 1]));
            directions.push(u);
        });
        let abs: Vec<f64> = weighted_kernel.iter().map(|v| v.abs()).collect();
        AngularRule {
            mass: pairwise_sum(&weighted_kernel).unwrap_or(0.0),
            abs_mass: pairwise_sum(&abs).unwrap_or(0.0),
            weighted_kernel,
            directions,
        }
    }

    fn sum<F: Fn(f64, &[f64; 4]) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .weighted_kernel
            .iter()
            .zip(&self.directions)
            .map(|(wg, u)| f(*wg, u))
            .collect();
        pairwise_sum(&terms).unwrap_or(0.0)
    }
}

#[derive(Clone)]
pub struct UVScenario {
    params: UVParams,
    splits: Arc<[Vec<f64>; 3]>,
    rule: Arc<AngularRule>,
}

impl fmt::Debug for UVScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UVScenario")
            .field("params", &self.params)
            .field("nodes", &self.rule.directions.len())
            .finish()
    }
}

impl UVScenario {
    pub fn new(params: UVParams) -> Result<Self> {
        if !(1..=4).contains(&params.mu) {
            return Err(Error::Invalid(format!("mu must be in 1..=4, got {}", params.mu)));
        }
        if params.angular_orders.iter().any(|&o| o < MIN_ANGULAR_ORDER) {
            return Err(Error::Invalid(format!(
                "angular orders must each be at least {MIN_ANGULAR_ORDER}, got {:?}",
                params.angular_orders
            )));
        }
        if !(params.m_bound.is_finite() && params.m_bound > 0.0) {
            return Err(Error::Invalid(format!("q bound M must be positive, got {}", params.m_bound)));
        }
        if !params.epsilon.is_finite() {
            return Err(Error::Invalid(format!("coupling must be finite, got {}", params.epsilon)));
        }
        if let Ell::ShiftedSquare { shift } = params.ell {
            if !(shift.is_finite() && shift > 0.0) {
                return Err(Error::Invalid(format!(
                    "l(q) = q^2 + {shift} must exceed q^2, so the shift must be positive"
                )));
            }
        }
        let splits = angular_splits(params.mu, params.kernel);
        let rule = AngularRule::new(params.angular_orders, &splits, params.mu, params.kernel);
        Ok(UVScenario {
            params,
            splits: Arc::new(splits),
            rule: Arc::new(rule),
        })
    }

    pub fn params(&self) -> &UVParams {
        &self.params
    }
    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::Invalid(format!("coupling must be finite, got {epsilon}")));
        }
        let mut sc = self.clone();
        sc.params.epsilon = epsilon;
        Ok(sc)
    }

    pub fn ell(&self, q: &FourVector) -> f64 {
        self.params.ell.eval(q)
    }

    /// Checks `|q| ≤ M` and `ℓ(q) > q²`.
    pub fn check_q(&self, q: &FourVector) -> Result<()> {
        if q.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("q = {q} has non-finite components")));
        }
        let n = q.norm();
        if n > self.params.m_bound * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "|q| = {n} exceeds the domain bound M = {}",
                self.params.m_bound
            )));
        }
        let ell = self.ell(q);
        if !(ell > q.norm_sq()) {
            return Err(Error::Invalid(format!(
                "l(q) = {ell} must exceed q^2 = {} at q = {q}",
                q.norm_sq()
            )));
        }
        Ok(())
    }

    fn prepare(&self, q: &FourVector) -> Result<Prepared> {
        self.check_q(q)?;
        let mut prep = Prepared {
            x: self.rule.directions.iter().map(|u| FourVector(*u).dot(q)).collect(),
            ell: self.ell(q),
            q_norm: q.norm(),
            b_plus: 0.0,
        };
        prep.b_plus = 4.0 * prep.sum(&self.rule, |wg, x| wg * x);
        Ok(prep)
    }
}

/// `û·q` at every node together with `ℓ(q)`.
struct Prepared {
    x: Vec<f64>,
    ell: f64,
    q_norm: f64,
    /// `B₊(q)` from this rule.
    b_plus: f64,
}

impl Prepared {
    fn sum<F: Fn(f64, f64) -> f64>(&self, rule: &AngularRule, f: F) -> f64 {
        let terms: Vec<f64> = rule
            .weighted_kernel
            .iter()
            .zip(&self.x)
            .map(|(wg, x)| f(*wg, *x))
            .collect();
        pairwise_sum(&terms).unwrap_or(0.0)
    }

    /// `Σ w g r⁴/D²`, `D = r² − 2r x + ℓ`.
    fn potential(&self, rule: &AngularRule, r: f64) -> f64 {
        let r4 = r.powi(4);
        self.sum(rule, |wg, x| {
            let d = r * r - 2.0 * r * x + self.ell;
            wg * r4 / (d * d)
        })
    }

    /// `Σ w g (r⁴/D² − 1 − 4x/r)` in cancellation-free form.
    fn remainder_core(&self, rule: &AngularRule, r: f64) -> f64 {
        self.sum(rule, |wg, x| wg * expansion_defect(r, x, self.ell))
    }
}

/// `r⁴/D² − 1 − 4x/r` with `D = r² − 2rx + ℓ`, expanded so the leading terms cancel exactly.
fn expansion_defect(r: f64, x: f64, ell: f64) -> f64 {
    let a = 2.0 * r * x - ell;
    let d = r * r - a;
    let num = -2.0 * ell * r.powi(3) - a * a * r + 8.0 * x * a * r * r - 4.0 * x * a * a;
    num / (r * d * d)
}

/// `F(p, q)` for the scenario's kernel and index μ.
pub fn kernel_f(p: &FourVector, q: &FourVector, sc: &UVScenario) -> Result<f64> {
    let den = p.norm_sq() - 2.0 * p.dot(q) + sc.ell(q);
    if !(den > 0.0) {
        return Err(Error::Invalid(format!(
            "kernel denominator p^2 - 2pq + l(q) = {den} is not positive at p = {p}, q = {q}"
        )));
    }
    Ok(sc.params.kernel.apply(p.0[sc.params.mu - 1]) / (den * den))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularIntegral {
    pub value: f64,
    /// `|I(orders) − I(2·orders)|`.
    pub error: f64,
}

fn tensor_integral<G: Fn([f64; 3]) -> f64>(g: &G, orders: [usize; 3], splits: &[Vec<f64>; 3]) -> Result<f64> {
    let mut terms = Vec::new();
    let mut bad = None;
    visit_nodes(orders, splits, |w, angles, _| {
        let v = g(angles);
        if !v.is_finite() && bad.is_none() {
            bad = Some(angles);
        }
        terms.push(w * v);
    });
    if let Some(a) = bad {
        return Err(Error::Numerical(format!("non-finite angular integrand at {a:?}")));
    }
    Ok(pairwise_sum(&terms).unwrap_or(0.0))
}

/// `∫ g sin²φ₁ sinφ₂ dφ₁dφ₂dφ₃` over `[0,π]×[0,π]×[0,2π]`.
pub fn angular_integral<G: Fn([f64; 3]) -> f64>(g: G, sc: &UVScenario) -> Result<AngularIntegral> {
    let orders = sc.params.angular_orders;
    let value = tensor_integral(&g, orders, &sc.splits)?;
    let fine = tensor_integral(&g, orders.map(|o| 2 * o), &sc.splits)?;
    Ok(AngularIntegral {
        value,
        error: (value - fine).abs(),
    })
}

/// `V(L, q)`: the angular integral of `F(P, q) L³` with `|P| = L`.
pub fn potential_v(l: f64, q: &FourVector, sc: &UVScenario) -> Result<f64> {
    check_radius(l)?;
    Ok(sc.prepare(q)?.potential(&sc.rule, l))
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Invalid(format!("radius must be finite and at least 1, got {r}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct UVCoefficients {
    pub c_plus: f64,
    /// `B₊(q) = 4 q·m` with `m = ∫ g(û) û`.
    pub moment: [f64; 4],
    pub b_plus: Vec<(FourVector, f64)>,
    /// Order-doubling differences of `C₊` and `B₊`, combined.
    pub quadrature_error: f64,
    /// Largest `|B₊(q)|` difference between the radii 1 and 7.
    pub radius_dependence: f64,
}

impl UVCoefficients {
    pub fn b_plus_at(&self, q: &FourVector) -> f64 {
        4.0 * FourVector(self.moment).dot(q)
    }
}

fn coefficient_moments(orders: [usize; 3], splits: &[Vec<f64>; 3], mu: usize, kernel: Kernel) -> (f64, [f64; 4]) {
    let mut c = Vec::new();
    let mut m: [Vec<f64>; 4] = Default::default();
    visit_nodes(orders, splits, |w, _, u| {
        let wg = w * kernel.apply(u[mu - 1]);
        c.push(wg);
        for k in 0..4 {
            m[k].push(wg * u[k]);
        }
    });
    let sum = |v: &[f64]| pairwise_sum(v).unwrap_or(0.0);
    (sum(&c), [sum(&m[0]), sum(&m[1]), sum(&m[2]), sum(&m[3])])
}

/// `C₊` and `B₊(q)` on `q_grid`.
pub fn coefficients(sc: &UVScenario, q_grid: &[FourVector]) -> Result<UVCoefficients> {
    for q in q_grid {
        sc.check_q(q)?;
    }
    let p = &sc.params;
    let c_plus = sc.rule.sum(|wg, _| wg);
    let moment = [0, 1, 2, 3].map(|k| sc.rule.sum(|wg, u| wg * u[k]));
    let (c_fine, m_fine) = coefficient_moments(p.angular_orders.map(|o| 2 * o), &sc.splits, p.mu, p.kernel);

    // p·q/r evaluated with p on spheres of two different radii
    let moment_at = |r: f64| -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let g = |a: [f64; 3]| -> f64 {
                let pv = FourVector(unit_direction(a[0], a[1], a[2])).scaled(r);
                p.kernel.apply(pv.0[p.mu - 1] / r) * pv.0[k] / r
            };
            *slot = tensor_integral(&g, p.angular_orders, &sc.splits)?;
        }
        Ok(out)
    };
    let (m1, m7) = (moment_at(1.0)?, moment_at(7.0)?);

    let mut b_plus = Vec::with_capacity(q_grid.len());
    let mut b_err: f64 = 0.0;
    let mut radius_dependence: f64 = 0.0;
    for q in q_grid {
        let b = 4.0 * FourVector(moment).dot(q);
        b_err = b_err.max((b - 4.0 * FourVector(m_fine).dot(q)).abs());
        radius_dependence =
            radius_dependence.max((4.0 * FourVector(m1).dot(q) - 4.0 * FourVector(m7).dot(q)).abs());
        b_plus.push((*q, b));
    }
    Ok(UVCoefficients {
        c_plus,
        moment,
        b_plus,
        quadrature_error: (c_plus - c_fine).abs() + b_err,
        radius_dependence,
    })
}

/// `u(r, q) = V(r, q) − C₊ − B₊(q)/r`.
pub fn remainder_u(r: f64, q: &FourVector, sc: &UVScenario, coeffs: &UVCoefficients) -> Result<f64> {
    check_radius(r)?;
    let prep = sc.prepare(q)?;
    Ok(remainder_prepared(&prep, r, q, sc, coeffs))
}

fn remainder_prepared(prep: &Prepared, r: f64, q: &FourVector, sc: &UVScenario, coeffs: &UVCoefficients) -> f64 {
    // the rule's own C₊ and B₊ cancel the core expansion; the corrections absorb
    // coefficients computed elsewhere
    prep.remainder_core(&sc.rule, r) + (sc.rule.mass - coeffs.c_plus) + (prep.b_plus - coeffs.b_plus_at(q)) / r
}

/// `max over nodes |r⁴/(p² − 2pq + ℓ)² − 1 − 4pq/r²|`.
pub fn expansion_residual(r: f64, q: &FourVector, sc: &UVScenario) -> Result<f64> {
    check_radius(r)?;
    let prep = sc.prepare(q)?;
    Ok(prep
        .x
        .iter()
        .map(|&x| expansion_defect(r, x, prep.ell).abs())
        .fold(0.0, f64::max))
}

fn radial_breakpoints(a: f64, b: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = 2.0;
    while x < b {
        if x > a {
            v.push(x);
        }
        x *= 2.0;
    }
    v
}

fn radial_integral<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<(f64, f64)> {
    let r = integrate(|x| Ok(f(x)), a, b, &radial_breakpoints(a, b), opts)?;
    Ok((r.value, r.error))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstApproximation {
    /// `−i ∫₁^L V(r, q) dr`.
    pub value: Complex64,
    /// `−i (C₊(L−1) + B₊(q) ln L + ∫₁^L u(r, q) dr)`.
    pub decomposed: Complex64,
    pub discrepancy: f64,
    pub quadrature_error: f64,
}

/// `a₁(L, q)` by radial quadrature of `V`, with the split form alongside.
pub fn first_approx_a1(l: f64, q: &FourVector, sc: &UVScenario) -> Result<FirstApproximation> {
    check_radius(l)?;
    let prep = sc.prepare(q)?;
    let opts = AdaptiveOptions::default();
    let (iv, ev) = radial_integral(|r| prep.potential(&sc.rule, r), 1.0, l, opts)?;
    let (iu, eu) = radial_integral(|r| prep.remainder_core(&sc.rule, r), 1.0, l, opts)?;
    let split = sc.rule.mass * (l - 1.0) + prep.b_plus * l.ln() + iu;
    Ok(FirstApproximation {
        value: Complex64::new(0.0, -iv),
        decomposed: Complex64::new(0.0, -split),
        discrepancy: (iv - split).abs(),
        quadrature_error: ev + eu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UVRegularized {
    /// `exp(−iε ∫₁^L u dr)`.
    pub value: Complex64,
    /// `W₀(L, q, ε) S(L, q, ε)`.
    pub conjugated: Complex64,
    pub discrepancy: f64,
}

/// `S^R(L, q, ε)` from the deviation factor times `S`, checked against the
/// multiplicative integral of the dressed remainder.
pub fn uv_regularized(l: f64, q: &FourVector, sc: &UVScenario, tol: f64) -> Result<UVRegularized> {
    check_radius(l)?;
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let eps = sc.epsilon();
    let prep = sc.prepare(q)?;
    if eps == 0.0 || l == 1.0 {
        let one = Complex64::new(1.0, 0.0);
        return Ok(UVRegularized {
            value: one,
            conjugated: one,
            discrepancy: 0.0,
        });
    }
    let opts = AdaptiveOptions::abs(tol / (8.0 * eps.abs()));
    let (iv, _) = radial_integral(|r| prep.potential(&sc.rule, r), 1.0, l, opts)?;
    let (iu, _) = radial_integral(|r| prep.remainder_core(&sc.rule, r), 1.0, l, opts)?;
    let w0 = Complex64::cis(eps * (sc.rule.mass * (l - 1.0) + prep.b_plus * l.ln()));
    let s = Complex64::cis(-eps * iv);
    let conjugated = w0 * s;
    let value = Complex64::cis(-eps * iu);
    let discrepancy = (conjugated - value).norm();
    if discrepancy > tol {
        return Err(Error::Consistency {
            what: "deviation factor times S vs multiplicative integral".into(),
            discrepancy,
            threshold: tol,
        });
    }
    Ok(UVRegularized {
        value,
        conjugated,
        discrepancy,
    })
}

/// Constant `K` with `|r⁴/D² − 1 − 4x/r| ≤ K/r²` for `r ≥ L` and all `|x| ≤ |q|`.
fn envelope_constant(prep: &Prepared, l: f64) -> f64 {
    let qn = prep.q_norm;
    let ell = prep.ell;
    let gap = ell - qn * qn;
    let scaled = |r: f64| {
        if r <= qn {
            return f64::INFINITY;
        }
        let a = 2.0 * r * qn + ell;
        let num = 2.0 * ell * r.powi(3) + a * a * r + 8.0 * qn * a * r * r + 4.0 * qn * a * a;
        let d = (r - qn).powi(2) + gap;
        r * num / (d * d)
    };
    let mut k = 2.0 * ell + 20.0 * qn * qn;
    let mut r = l;
    for _ in 0..=320 {
        k = k.max(scaled(r));
        r *= 2f64.powf(0.125);
    }
    1.05 * k
}

/// One rung of the cutoff ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UVRung {
    pub cutoff: f64,
    pub value: Complex64,
    /// `|S^R(L) − S^R(L/2)|`; zero on the first rung.
    pub step_difference: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone)]
pub struct UVSecondaryRow {
    pub q: FourVector,
    pub c_plus: f64,
    pub b_plus: f64,
    /// Log-log slope of `|u(r, q)|` over `r ∈ [10, 10³]`, when `u` keeps one sign there.
    pub decay_slope: Option<f64>,
    pub cutoff: f64,
    pub value: Complex64,
    pub tail_bound: f64,
    pub ladder: Vec<UVRung>,
}

#[derive(Debug, Clone)]
pub struct UVSecondary {
    pub rows: Vec<UVSecondaryRow>,
    /// `sup_q` of the tail bounds: the norm-convergence certificate of the multiplication operator.
    pub sup_tail_bound: f64,
}

/// `S^R(+∞, q, ε)` on `q_grid` by cutoff doubling until the tail bound drops below `tol`.
pub fn uv_secondary(q_grid: &[FourVector], sc: &UVScenario, tol: f64) -> Result<UVSecondary> {
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let coeffs = coefficients(sc, q_grid)?;
    let rows: Vec<Result<UVSecondaryRow>> = q_grid
        .par_iter()
        .map(|q| secondary_row(q, sc, &coeffs, tol))
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let sup_tail_bound = rows.iter().map(|r| r.tail_bound).fold(0.0, f64::max);
    Ok(UVSecondary { rows, sup_tail_bound })
}

fn decay_slope(prep: &Prepared, q: &FourVector, sc: &UVScenario, coeffs: &UVCoefficients) -> Option<f64> {
    let rs: Vec<f64> = (0..=20).map(|k| 10f64.powf(1.0 + 0.1 * k as f64)).collect();
    let us: Vec<f64> = rs.iter().map(|&r| remainder_prepared(prep, r, q, sc, coeffs)).collect();
    let same_sign = us.iter().all(|&u| u > 0.0) || us.iter().all(|&u| u < 0.0);
    if !same_sign {
        return None;
    }
    let abs: Vec<f64> = us.iter().map(|u| u.abs()).collect();
    loglog_slope(&rs, &abs).ok()
}

fn secondary_row(q: &FourVector, sc: &UVScenario, coeffs: &UVCoefficients, tol: f64) -> Result<UVSecondaryRow> {
    let eps = sc.epsilon();
    let prep = sc.prepare(q)?;
    let slope = decay_slope(&prep, q, sc, coeffs);
    let mass = sc.rule.abs_mass;
    let tail = |l: f64| (eps.abs() * mass * envelope_constant(&prep, l) / l).exp_m1();
    let seg = AdaptiveOptions::abs(tol / (64.0 * eps.abs().max(1e-300)));
    let u = |r: f64| remainder_prepared(&prep, r, q, sc, coeffs);

    let mut l = LADDER_START;
    let mut integral = if eps == 0.0 { 0.0 } else { radial_integral(u, 1.0, l, seg)?.0 };
    let mut ladder: Vec<UVRung> = Vec::new();
    loop {
        let value = Complex64::cis(-eps * integral);
        let bound = tail(l);
        let step_difference = ladder.last().map_or(0.0, |r| (value - r.value).norm());
        ladder.push(UVRung {
            cutoff: l,
            value,
            step_difference,
            tail_bound: bound,
        });
        if bound <= tol {
            return Ok(UVSecondaryRow {
                q: *q,
                c_plus: coeffs.c_plus,
                b_plus: coeffs.b_plus_at(q),
                decay_slope: slope,
                cutoff: l,
                value,
                tail_bound: bound,
                ladder,
            });
        }
        if 2.0 * l > LADDER_CAP {
            return Err(Error::Convergence {
                what: format!("cutoff ladder at q = {q}"),
                achieved: bound,
                target: tol,
            });
        }
        integral += radial_integral(u, l, 2.0 * l, seg)?.0;
        l *= 2.0;
    }
}

/// 17 points on the diagonal `t(1,1,1,1)/2`, `t ∈ [−M, M]`, then 64 seeded
/// uniform points in the ball `|q| ≤ M`.
pub fn default_q_grid(m_bound: f64, seed: u64) -> Vec<FourVector> {
    let mut grid: Vec<FourVector> = (0..17)
        .map(|k| {
            let t = m_bound * (-1.0 + k as f64 / 8.0);
            FourVector([0.5 * t; 4])
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while grid.len() < 17 + 64 {
        let v = FourVector([(); 4].map(|_| rng.gen_range(-1.0..1.0)));
        if v.norm_sq() <= 1.0 {
            grid.push(v.scaled(m_bound));
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_sc() -> UVScenario {
        UVScenario::new(UVParams::default()).unwrap()
    }

    fn analytic_v0(l: f64) -> f64 {
        8.0 * PI / 3.0 * l.powi(4) / (l * l + 1.0).powi(2)
    }

    #[test]
    fn spherical_map_examples() {
        let p = spherical_map(1.0, PI / 2.0, PI / 2.0, 0.0).unwrap();
        for (a, b) in p.0.iter().zip([0.0, 0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(spherical_map(2.0, 0.0, 1.2, 4.0).unwrap().0, [2.0, 0.0, 0.0, 0.0]);
        let p = spherical_map(3.7, 0.4, 2.9, 5.5).unwrap();
        assert!((p.norm() - 3.7).abs() < 1e-14);
        assert!(spherical_map(1.0, 4.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn kernel_examples() {
        let sc = UVScenario::new(UVParams {
            ell: Ell::Constant { value: 1.0 },
            ..Default::default()
        })
        .unwrap();
        let p = FourVector([1.0, 0.0, 0.0, 0.0]);
        assert_eq!(kernel_f(&p, &FourVector::ZERO, &sc).unwrap(), 0.25);
        let p = spherical_map(1.3, PI / 2.0, 0.4, 0.2).unwrap();
        assert!(kernel_f(&p, &FourVector::ZERO, &sc).unwrap().abs() < 1e-16);
        let a = spherical_map(1.3, 0.7, 0.4, 0.2).unwrap();
        let b = spherical_map(1.3, 0.7, 0.4, 0.2 + PI).unwrap();
        assert_eq!(kernel_f(&a, &FourVector::ZERO, &sc).unwrap(), kernel_f(&b, &FourVector::ZERO, &sc).unwrap());
        let bad = kernel_f(&FourVector([0.5, 0.0, 0.0, 0.0]), &FourVector([0.5, 0.0, 0.0, 0.0]), &UVScenario::new(UVParams {
            ell: Ell::Constant { value: 0.25 },
            ..Default::default()
        }).unwrap());
        assert!(bad.is_err());
    }

    #[test]
    fn angular_examples() {
        let sc = default_sc();
        let one = angular_integral(|_| 1.0, &sc).unwrap();
        assert!((one.value - 2.0 * PI * PI).abs() < 1e-12);
        let c = angular_integral(|a| a[0].cos().abs(), &sc).unwrap();
        assert!((c.value - 8.0 * PI / 3.0).abs() < 1e-12);
        let odd = angular_integral(|a| a[0].cos() * a[0].cos().abs(), &sc).unwrap();
        assert!(odd.value.abs() < 1e-13);
        assert!(angular_integral(|_| f64::NAN, &sc).is_err());
    }

    #[test]
    fn potential_examples() {
        let sc = default_sc();
        assert!((potential_v(1.0, &FourVector::ZERO, &sc).unwrap() - 2.0 * PI / 3.0).abs() < 1e-12);
        for l in [3.0, 50.0, 1e4] {
            assert!((potential_v(l, &FourVector::ZERO, &sc).unwrap() - analytic_v0(l)).abs() < 1e-11);
        }
        let q = FourVector([0.3, -0.2, 0.5, 0.1]);
        let gap = |l: f64| (potential_v(l, &q, &sc).unwrap() - potential_v(l, &FourVector::ZERO, &sc).unwrap()).abs();
        assert!(gap(1e3) < gap(10.0) && gap(1e3) < 1e-4);
    }

    #[test]
    fn coefficient_examples() {
        let sc = default_sc();
        let grid = default_q_grid(1.0, 3);
        let c = coefficients(&sc, &grid).unwrap();
        assert!((c.c_plus - 8.0 * PI / 3.0).abs() < 1e-10);
        assert_eq!(c.b_plus_at(&FourVector::ZERO), 0.0);
        assert!(c.b_plus.iter().all(|(_, b)| b.abs() < 1e-12));
        assert!(c.radius_dependence < 1e-12);
    }

    #[test]
    fn superficial_kernel_has_no_constant() {
        let sc = UVScenario::new(UVParams {
            kernel: Kernel::Superficial,
            ..Default::default()
        })
        .unwrap();
        let q = FourVector([0.4, 0.0, 0.0, 0.0]);
        let c = coefficients(&sc, &[q]).unwrap();
        assert!(c.c_plus.abs() < 1e-13);
        // B₊ = 4 q₁ ∫ cos²φ₁ sin²φ₁ sinφ₂ = 4 q₁ π²/2
        assert!((c.b_plus[0].1 - 4.0 * 0.4 * PI * PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn remainder_examples() {
        let sc = default_sc();
        let c = coefficients(&sc, &[FourVector::ZERO]).unwrap();
        for r in [1.0, 10.0, 1e3, 1e6] {
            let u = remainder_u(r, &FourVector::ZERO, &sc, &c).unwrap();
            let exact = -8.0 * PI / 3.0 * (2.0 * r * r + 1.0) / (r * r + 1.0).powi(2);
            assert!((u - exact).abs() < 1e-12 * exact.abs().max(1e-300) + 1e-15, "r={r}");
        }
        let rs: Vec<f64> = (0..=10).map(|k| 10f64.powf(1.0 + 0.2 * k as f64)).collect();
        let us: Vec<f64> = rs.iter().map(|&r| remainder_u(r, &FourVector::ZERO, &sc, &c).unwrap().abs()).collect();
        assert!((loglog_slope(&rs, &us).unwrap() + 2.0).abs() < 0.1);

        let q = FourVector([0.1, 0.6, -0.3, 0.2]);
        let cq = coefficients(&sc, &[q]).unwrap();
        let r = 1e5;
        let lhs = r * (potential_v(r, &q, &sc).unwrap() - cq.c_plus);
        assert!((lhs - cq.b_plus_at(&q)).abs() < 1e-3);
    }

    #[test]
    fn first_approx_examples() {
        let sc = default_sc();
        assert_eq!(first_approx_a1(1.0, &FourVector::ZERO, &sc).unwrap().value, Complex64::new(0.0, 0.0));
        let anti = |r: f64| r - 1.5 * r.atan() + r / (2.0 * (r * r + 1.0));
        for l in [2.0, 17.5, 300.0] {
            let a = first_approx_a1(l, &FourVector::ZERO, &sc).unwrap();
            let exact = -8.0 * PI / 3.0 * (anti(l) - anti(1.0));
            assert!((a.value.im - exact).abs() < 1e-10 * exact.abs());
            assert!(a.discrepancy <= a.quadrature_error + 1e-10);
        }
        let q = FourVector([0.2, 0.2, -0.4, 0.1]);
        let a = first_approx_a1(40.0, &q, &sc).unwrap();
        assert!(a.discrepancy <= a.quadrature_error + 1e-10);
    }

    #[test]
    fn regularized_examples() {
        let sc = default_sc().with_epsilon(0.7).unwrap();
        let one = uv_regularized(1.0, &FourVector::ZERO, &sc, 1e-10).unwrap();
        assert_eq!(one.value, Complex64::new(1.0, 0.0));
        let l: f64 = 25.0;
        let r = uv_regularized(l, &FourVector::ZERO, &sc, 1e-10).unwrap();
        assert!((r.value.norm() - 1.0).abs() < 1e-15);
        // ∫₁^L (r⁴/(r²+1)² − 1) dr = [−(3/2)arctan r + r/(2(r²+1))]₁^L
        let anti = |r: f64| -1.5 * r.atan() + r / (2.0 * (r * r + 1.0));
        let exact = Complex64::cis(-0.7 * 8.0 * PI / 3.0 * (anti(l) - anti(1.0)));
        assert!((r.value - exact).norm() < 1e-10);
        assert!(r.discrepancy < 1e-10);
    }

    #[test]
    fn secondary_examples() {
        let sc = default_sc();
        let zero = uv_secondary(&[FourVector::ZERO], &sc.with_epsilon(0.0).unwrap(), 1e-8).unwrap();
        assert_eq!(zero.rows[0].value, Complex64::new(1.0, 0.0));
        let s = uv_secondary(&[FourVector::ZERO], &sc, 1e-8).unwrap();
        let exact = Complex64::cis(0.1 * (PI * PI + 2.0 * PI / 3.0));
        assert!((s.rows[0].value - exact).norm() < 1e-7);
        let row = &s.rows[0];
        for w in row.ladder.windows(2) {
            assert!(w[1].step_difference <= w[0].tail_bound);
        }
        assert!((row.decay_slope.unwrap() + 2.0).abs() < 0.1);
    }

    #[test]
    fn expansion_residual_decays_quadratically() {
        let sc = default_sc();
        let q = FourVector([0.3, 0.3, 0.3, 0.3]);
        let rs = [1e2, 1e3, 1e4];
        let res: Vec<f64> = rs.iter().map(|&r| expansion_residual(r, &q, &sc).unwrap()).collect();
        assert!((loglog_slope(&rs, &res).unwrap() + 2.0).abs() < 0.1);
    }

    #[test]
    fn scenario_validation() {
        let bad = UVScenario::new(UVParams {
            angular_orders: [8, 4, 8],
            ..Default::default()
        });
        assert!(bad.is_err());
        assert!(UVScenario::new(UVParams { ell: Ell::ShiftedSquare { shift: 0.0 }, ..Default::default() }).is_err());
        let sc = UVScenario::new(UVParams { ell: Ell::Constant { value: 0.5 }, ..Default::default() }).unwrap();
        assert!(sc.check_q(&FourVector([0.9, 0.0, 0.0, 0.0])).is_err());
        assert!(default_sc().check_q(&FourVector([1.0, 1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn grid_is_seeded() {
        let a = default_q_grid(1.0, 11);
        assert_eq!(a.len(), 81);
        assert_eq!(a, default_q_grid(1.0, 11));
        assert_eq!(a[8], FourVector::ZERO);
        assert!(a.iter().all(|q| q.norm() <= 1.0 + 1e-15));
    }
}
