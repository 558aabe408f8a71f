//! Canonical perturbation families `V(t) = C± + B±/t + u(t)`, their deviation
//! factors, the regularized propagator `S^R(t, τ, ε)` and its norm limit, the
//! secondary generalized scattering operator.

use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::{prod_integral, propagate, OperatorFamily, DEFAULT_BREAKPOINTS};
use crate::operator::{
    matexp_skew, operator_norm, relative_commutator_norm, unitary_defect, ComplexMatrix,
    HermitianOperator, UnitaryOperator,
};

/// Largest `|t|` probed when checking the decay envelope of `u`.
pub const ENVELOPE_CHECK_MAX: f64 = 1e6;
/// `[B±, C±]` below this (relative) counts as commuting.
pub const COMMUTING_TOL: f64 = 1e-12;
/// First rung of the symmetric truncation ladder.
pub const DEFAULT_LADDER_START: f64 = 2.0;
/// Last admissible rung of the ladder.
pub const DEFAULT_LADDER_CAP: f64 = 1_073_741_824.0; // 2^30
pub const DEFAULT_TOL: f64 = 1e-8;
/// Tolerance used for deviation factors that have to be integrated.
pub const DEVIATION_ODE_TOL: f64 = 1e-12;

/// `V(t)` with `C₊ + B₊/t + u(t)` for `t ≥ 1`, `u(t)` for `|t| ≤ 1`, and
/// `C₋ + B₋/t + u(t)` for `t ≤ −1`, where `‖u(t)‖ ≤ a |t|^{−ν}` for `|t| ≥ 1`.
#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    c_plus: HermitianOperator,
    b_plus: HermitianOperator,
    c_minus: HermitianOperator,
    b_minus: HermitianOperator,
    u: OperatorFamily,
    nu: f64,
    decay_constant: f64,
}

impl PerturbationFamily {
    pub fn new(
        c_plus: HermitianOperator,
        b_plus: HermitianOperator,
        c_minus: HermitianOperator,
        b_minus: HermitianOperator,
        u: OperatorFamily,
        nu: f64,
        decay_constant: f64,
    ) -> Result<Self> {
        let n = c_plus.dim();
        for (name, op) in [("B+", &b_plus), ("C-", &c_minus), ("B-", &b_minus)] {
            if op.dim() != n {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, C+ is {n}x{n}",
                    op.dim(),
                    op.dim()
                )));
            }
        }
        if u.dim() != n {
            return Err(Error::Dimension(format!("u has dimension {}, C+ has {n}", u.dim())));
        }
        if !(nu.is_finite() && nu > 1.0) {
            return Err(Error::Invalid(format!(
                "decay exponent must satisfy nu > 1 for an integrable remainder, got {nu}"
            )));
        }
        if !(decay_constant.is_finite() && decay_constant >= 0.0) {
            return Err(Error::Invalid(format!(
                "decay constant must be finite and non-negative, got {decay_constant}"
            )));
        }
        let family = PerturbationFamily {
            c_plus,
            b_plus,
            c_minus,
            b_minus,
            u,
            nu,
            decay_constant,
        };
        family.check_remainder()?;
        Ok(family)
    }

    /// Scalar family with real coefficients.
    pub fn scalar<F>(c_plus: f64, b_plus: f64, c_minus: f64, b_minus: f64, u: F, nu: f64, decay_constant: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            HermitianOperator::scalar(c_plus),
            HermitianOperator::scalar(b_plus),
            HermitianOperator::scalar(c_minus),
            HermitianOperator::scalar(b_minus),
            OperatorFamily::scalar(u),
            nu,
            decay_constant,
        )
    }

    /// Samples `u` on a logarithmic grid of `1 ≤ |t| ≤ 10^6` and checks the
    /// envelope and self-adjointness.
    fn check_remainder(&self) -> Result<()> {
        let points = 241;
        let top = ENVELOPE_CHECK_MAX.log10();
        for k in 0..points {
            let mag = 10f64.powf(top * k as f64 / (points - 1) as f64);
            for t in [mag, -mag] {
                let value = self.u.eval(t);
                let h = HermitianOperator::new(value.clone()).map_err(|e| {
                    Error::Invalid(format!("u({t}) is not self-adjoint: {e}"))
                })?;
                let norm = h.norm();
                let envelope = self.decay_constant * mag.powf(-self.nu) * (1.0 + 1e-6);
                if norm > envelope && norm > 1e-300 {
                    return Err(Error::Invalid(format!(
                        "‖u({t})‖ = {norm:.6e} exceeds the declared envelope {:.6e}·|t|^-{} = {envelope:.6e}",
                        self.decay_constant, self.nu
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.c_plus.dim()
    }
    pub fn c_plus(&self) -> &HermitianOperator {
        &self.c_plus
    }
    pub fn b_plus(&self) -> &HermitianOperator {
        &self.b_plus
    }
    pub fn c_minus(&self) -> &HermitianOperator {
        &self.c_minus
    }
    pub fn b_minus(&self) -> &HermitianOperator {
        &self.b_minus
    }
    pub fn u(&self) -> &OperatorFamily {
        &self.u
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn decay_constant(&self) -> f64 {
        self.decay_constant
    }

    /// Whether `[B₊, C₊]` and `[B₋, C₋]` both vanish.
    pub fn is_commuting(&self) -> bool {
        let plus = relative_commutator_norm(self.b_plus.matrix(), self.c_plus.matrix());
        let minus = relative_commutator_norm(self.b_minus.matrix(), self.c_minus.matrix());
        matches!((plus, minus), (Ok(p), Ok(m)) if p <= COMMUTING_TOL && m <= COMMUTING_TOL)
    }

    /// Non-integrable part `V₀(t)`: `C± + B±/t` for `±t ≥ 1`, zero for `|t| < 1`.
    pub fn v0(&self, t: f64) -> ComplexMatrix {
        if t >= 1.0 {
            self.c_plus.matrix() + self.b_plus.matrix() * Complex64::new(1.0 / t, 0.0)
        } else if t <= -1.0 {
            self.c_minus.matrix() + self.b_minus.matrix() * Complex64::new(1.0 / t, 0.0)
        } else {
            ComplexMatrix::zeros(self.dim(), self.dim())
        }
    }

    /// `±1` plus the breakpoints of `u`.
    fn breakpoints(&self) -> Vec<f64> {
        DEFAULT_BREAKPOINTS.iter().chain(self.u.breakpoints()).copied().collect()
    }

    pub fn v0_family(&self) -> OperatorFamily {
        let me = self.clone();
        OperatorFamily::with_breakpoints(self.dim(), DEFAULT_BREAKPOINTS.to_vec(), move |t| me.v0(t))
    }

    /// `exp(|ε| ∫_{|s|>T} a|s|^{−ν} ds) − 1`, bounding `‖S^R(+∞,−∞) − S^R(T,−T)‖`.
    pub fn tail_bound(&self, epsilon: f64, truncation: f64) -> f64 {
        let integral = 2.0 * self.decay_constant * truncation.powf(1.0 - self.nu) / (self.nu - 1.0);
        (epsilon.abs() * integral).exp_m1()
    }
}

/// `V(t)` assembled piecewise with breakpoints at `±1`.
pub fn assemble_v(f: &PerturbationFamily) -> OperatorFamily {
    let me = f.clone();
    OperatorFamily::with_breakpoints(f.dim(), f.breakpoints(), move |t| {
        let u = me.u.eval(t);
        if t.abs() <= 1.0 {
            u
        } else {
            me.v0(t) + u
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationMode {
    ClosedForm,
    Ode,
}

impl DeviationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeviationMode::ClosedForm => "closed_form",
            DeviationMode::Ode => "ode",
        }
    }
}

/// Fixed checkpoints `±(1 + k/4)` up to 8, then geometric with ratio 5/4.
fn checkpoint(k: usize) -> f64 {
    if k <= 28 {
        1.0 + 0.25 * k as f64
    } else {
        8.0 * 1.25f64.powi((k - 28) as i32)
    }
}

fn checkpoint_below(mag: f64) -> usize {
    if mag <= 8.0 {
        (((mag - 1.0) / 0.25).floor().max(0.0) as usize).min(28)
    } else {
        let j = ((mag / 8.0).ln() / 1.25f64.ln()).floor() as usize;
        let mut k = 28 + j;
        while k > 28 && checkpoint(k) > mag {
            k -= 1;
        }
        while checkpoint(k + 1) <= mag {
            k += 1;
        }
        k
    }
}

/// Deviation factor values at the checkpoints of one half-line, filled lazily.
/// Every value is chained from the previous checkpoint, so the result does not
/// depend on the order of evaluation.
#[derive(Debug, Default)]
struct CheckpointCache {
    plus: Vec<ComplexMatrix>,
    minus: Vec<ComplexMatrix>,
}

/// `W₀(t, ε)`: the unitary solution of `dW₀/dt = iεW₀V₀(t)`, `W₀(0) = I`.
#[derive(Debug, Clone)]
pub struct DeviationFactor {
    family: PerturbationFamily,
    epsilon: f64,
    mode: DeviationMode,
    tol: f64,
    cache: Arc<Mutex<CheckpointCache>>,
}

impl DeviationFactor {
    pub fn family(&self) -> &PerturbationFamily {
        &self.family
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn mode(&self) -> DeviationMode {
        self.mode
    }

    /// `W₀(t, ε)`.
    pub fn at(&self, t: f64) -> Result<UnitaryOperator> {
        if !t.is_finite() {
            return Err(Error::Invalid(format!("time must be finite, got {t}")));
        }
        let n = self.family.dim();
        if t.abs() <= 1.0 || self.epsilon == 0.0 {
            return Ok(UnitaryOperator::identity(n));
        }
        match self.mode {
            DeviationMode::ClosedForm => self.closed_form(t),
            DeviationMode::Ode => self.integrated(t),
        }
    }

    fn closed_form(&self, t: f64) -> Result<UnitaryOperator> {
        let f = &self.family;
        let phase = if t >= 1.0 {
            f.c_plus.matrix() * Complex64::new(t - 1.0, 0.0)
                + f.b_plus.matrix() * Complex64::new(t.ln(), 0.0)
        } else {
            f.c_minus.matrix() * Complex64::new(t + 1.0, 0.0)
                + f.b_minus.matrix() * Complex64::new(t.abs().ln(), 0.0)
        };
        matexp_skew(&HermitianOperator::symmetrized(phase), self.epsilon)
    }

    /// `W₀(c)` at checkpoint `k` of the half-line with the given sign.
    fn checkpoint_value(&self, k: usize, positive: bool) -> Result<ComplexMatrix> {
        let v0 = self.family.v0_family();
        let n = self.family.dim();
        let mut cache = self.cache.lock().expect("deviation cache poisoned");
        let list = if positive { &mut cache.plus } else { &mut cache.minus };
        if list.is_empty() {
            list.push(crate::operator::identity(n));
        }
        while list.len() <= k {
            let j = list.len() - 1;
            let (a, b) = (checkpoint(j), checkpoint(j + 1));
            let prev = &list[j];
            let next = if positive {
                // W(b) = W(a) S(b, a)*
                let s = propagate(&v0, a, b, self.epsilon, self.tol)?;
                prev * s.value.matrix().adjoint()
            } else {
                // W(−b) = W(−a) S(−a, −b)
                let s = propagate(&v0, -b, -a, self.epsilon, self.tol)?;
                prev * s.value.matrix()
            };
            list.push(next);
        }
        Ok(list[k].clone())
    }

    fn integrated(&self, t: f64) -> Result<UnitaryOperator> {
        let v0 = self.family.v0_family();
        let positive = t > 0.0;
        let mag = t.abs();
        let k = checkpoint_below(mag);
        let base = self.checkpoint_value(k, positive)?;
        let c = checkpoint(k);
        let value = if mag == c {
            base
        } else if positive {
            let s = propagate(&v0, c, mag, self.epsilon, self.tol)?;
            base * s.value.matrix().adjoint()
        } else {
            let s = propagate(&v0, -mag, -c, self.epsilon, self.tol)?;
            base * s.value.matrix()
        };
        UnitaryOperator::new(value)
    }

    /// `U(t, ε) = W₀ u(t) W₀*`.
    pub fn dressed(&self, t: f64) -> Result<HermitianOperator> {
        let u = self.family.u.eval(t);
        if t.abs() <= 1.0 || self.epsilon == 0.0 {
            return Ok(HermitianOperator::symmetrized(u));
        }
        let w = self.at(t)?;
        let conj = w.matrix() * u * w.matrix().adjoint();
        Ok(HermitianOperator::symmetrized(conj))
    }

    /// `s ↦ U(s, ε)` as a family. Evaluation failures surface as non-finite
    /// entries, which the integrators reject.
    pub fn dressed_family(&self) -> OperatorFamily {
        let me = self.clone();
        let n = self.family.dim();
        OperatorFamily::with_breakpoints(n, self.family.breakpoints(), move |t| {
            me.dressed(t)
                .map(HermitianOperator::into_matrix)
                .unwrap_or_else(|_| ComplexMatrix::from_element(n, n, Complex64::new(f64::NAN, f64::NAN)))
        })
    }
}

/// Builds `W₀(·, ε)`, in closed form when `[B±, C±] = 0` and by integration otherwise.
pub fn deviation_factor(f: &PerturbationFamily, epsilon: f64) -> Result<DeviationFactor> {
    if !epsilon.is_finite() {
        return Err(Error::Invalid(format!("coupling must be finite, got {epsilon}")));
    }
    let mode = if f.is_commuting() {
        DeviationMode::ClosedForm
    } else {
        DeviationMode::Ode
    };
    Ok(DeviationFactor {
        family: f.clone(),
        epsilon,
        mode,
        tol: DEVIATION_ODE_TOL,
        cache: Arc::new(Mutex::new(CheckpointCache::default())),
    })
}

/// `U(t, ε) = W₀(t, ε) u(t) W₀(t, ε)^{−1}`.
pub fn dressed_potential(f: &PerturbationFamily, t: f64, epsilon: f64) -> Result<HermitianOperator> {
    deviation_factor(f, epsilon)?.dressed(t)
}

#[derive(Debug, Clone)]
pub struct RegularizedPropagator {
    /// Product integral of `−iεU`.
    pub value: UnitaryOperator,
    /// `W₀(t) S(t, τ) W₀(τ)^{−1}`.
    pub conjugated: UnitaryOperator,
    pub discrepancy: f64,
    pub steps_used: usize,
}

/// Rounding level of the conjugated route, which carries phases of size
/// `|ε| ∫‖V₀‖` over `[τ, t]`.
fn phase_rounding(f: &PerturbationFamily, epsilon: f64, tau: f64, t: f64) -> f64 {
    let c = f.c_plus.norm().max(f.c_minus.norm());
    let b = f.b_plus.norm().max(f.b_minus.norm());
    let reach = |x: f64| (x.abs() - 1.0).max(0.0);
    let log = |x: f64| x.abs().max(1.0).ln();
    let phase = epsilon.abs() * (c * (reach(t) + reach(tau)) + b * (log(t) + log(tau)));
    64.0 * f64::EPSILON * phase
}

fn consistency(what: &str, discrepancy: f64, threshold: f64) -> Result<()> {
    if discrepancy > threshold {
        return Err(Error::Consistency {
            what: what.into(),
            discrepancy,
            threshold,
        });
    }
    Ok(())
}

/// `S^R(t, τ, ε)` computed by conjugating `S` with deviation factors and,
/// independently, as the product integral of the dressed potential.
pub fn regularized_propagator(
    f: &PerturbationFamily,
    tau: f64,
    t: f64,
    epsilon: f64,
    tol: f64,
) -> Result<RegularizedPropagator> {
    let dev = deviation_factor(f, epsilon)?;
    regularized_propagator_with(&dev, tau, t, tol)
}

/// As [`regularized_propagator`] with a prebuilt deviation factor.
pub fn regularized_propagator_with(
    dev: &DeviationFactor,
    tau: f64,
    t: f64,
    tol: f64,
) -> Result<RegularizedPropagator> {
    let epsilon = dev.epsilon();
    let f = dev.family();
    let s = propagate(&assemble_v(f), tau, t, epsilon, tol)?;
    let conjugated = dev.at(t)?.matrix() * s.value.matrix() * dev.at(tau)?.matrix().adjoint();
    let (dressed, steps) = if t == tau || epsilon == 0.0 {
        (crate::operator::identity(f.dim()), 0)
    } else {
        let pi = prod_integral(&dev.dressed_family().generator(epsilon), tau, t, tol)?;
        (pi.value, pi.steps)
    };
    let discrepancy = operator_norm(&(&conjugated - &dressed));
    let threshold = 10.0 * tol + phase_rounding(f, epsilon, tau, t);
    consistency("conjugated vs dressed product integral", discrepancy, threshold)?;
    Ok(RegularizedPropagator {
        value: UnitaryOperator::with_tol(dressed, crate::evolution::PROPAGATOR_UNITARITY_TOL)?,
        conjugated: UnitaryOperator::with_tol(conjugated, crate::evolution::PROPAGATOR_UNITARITY_TOL)?,
        discrepancy,
        steps_used: s.steps_used + steps,
    })
}

/// One rung of the symmetric truncation ladder.
#[derive(Debug, Clone)]
pub struct LadderRung {
    pub truncation: f64,
    pub value: ComplexMatrix,
    /// `‖S^R(T,−T) − S^R(T/2,−T/2)‖`; zero on the first rung.
    pub step_difference: f64,
    /// Tail bound at the previous rung, which `step_difference` must not exceed.
    pub previous_tail_bound: f64,
    pub tail_bound: f64,
    /// Difference between the conjugated and dressed routes at this rung.
    pub discrepancy: f64,
}

#[derive(Debug, Clone)]
pub struct SecondaryOperator {
    pub value: UnitaryOperator,
    pub epsilon: f64,
    pub truncation: f64,
    pub tail_bound: f64,
    pub ladder: Vec<LadderRung>,
    pub deviation_mode: DeviationMode,
}

impl SecondaryOperator {
    /// Rungs whose observed step exceeded the certified tail bound.
    pub fn contraction_violations(&self) -> usize {
        self.ladder
            .iter()
            .skip(1)
            .filter(|r| r.step_difference > r.previous_tail_bound)
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LadderOptions {
    pub start: f64,
    pub cap: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions {
            start: DEFAULT_LADDER_START,
            cap: DEFAULT_LADDER_CAP,
        }
    }
}

/// Incrementally extends `S(T, −T)` and `S^R(T, −T)` along a doubling ladder.
struct SymmetricLadder<'a> {
    dev: &'a DeviationFactor,
    v: OperatorFamily,
    dressed_gen: OperatorFamily,
    segment_tol: f64,
    truncation: f64,
    plain: ComplexMatrix,
    regularized: ComplexMatrix,
}

impl<'a> SymmetricLadder<'a> {
    fn new(dev: &'a DeviationFactor, start: f64, segment_tol: f64) -> Result<Self> {
        let epsilon = dev.epsilon();
        let v = assemble_v(dev.family());
        let dressed_gen = dev.dressed_family().generator(epsilon);
        let plain = propagate(&v, -start, start, epsilon, segment_tol)?.value.into_matrix();
        let regularized = prod_integral(&dressed_gen, -start, start, segment_tol)?.value;
        Ok(SymmetricLadder {
            dev,
            v,
            dressed_gen,
            segment_tol,
            truncation: start,
            plain,
            regularized,
        })
    }

    fn double(&mut self) -> Result<()> {
        let (a, b) = (self.truncation, 2.0 * self.truncation);
        let eps = self.dev.epsilon();
        let right = propagate(&self.v, a, b, eps, self.segment_tol)?.value.into_matrix();
        let left = propagate(&self.v, -b, -a, eps, self.segment_tol)?.value.into_matrix();
        self.plain = right * &self.plain * left;
        let right = prod_integral(&self.dressed_gen, a, b, self.segment_tol)?.value;
        let left = prod_integral(&self.dressed_gen, -b, -a, self.segment_tol)?.value;
        self.regularized = right * &self.regularized * left;
        self.truncation = b;
        Ok(())
    }

    fn conjugated(&self) -> Result<ComplexMatrix> {
        let t = self.truncation;
        Ok(self.dev.at(t)?.matrix() * &self.plain * self.dev.at(-t)?.matrix().adjoint())
    }
}

/// `S^R(+∞, −∞, ε)` by a symmetric doubling ladder, stopped once the analytic
/// tail bound falls below `tol`.
pub fn secondary_operator(f: &PerturbationFamily, epsilon: f64, tol: f64) -> Result<SecondaryOperator> {
    secondary_operator_with(f, epsilon, tol, LadderOptions::default())
}

pub fn secondary_operator_with(
    f: &PerturbationFamily,
    epsilon: f64,
    tol: f64,
    opts: LadderOptions,
) -> Result<SecondaryOperator> {
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !(opts.start >= 1.0 && opts.cap >= opts.start) {
        return Err(Error::Invalid(format!(
            "ladder must satisfy 1 <= start <= cap, got start={}, cap={}",
            opts.start, opts.cap
        )));
    }
    let dev = deviation_factor(f, epsilon)?;
    let segment_tol = tol / 64.0;
    let mut ladder = SymmetricLadder::new(&dev, opts.start, segment_tol)?;
    let mut rungs: Vec<LadderRung> = Vec::new();
    let mut previous: Option<(ComplexMatrix, f64)> = None;
    loop {
        let truncation = ladder.truncation;
        let bound = f.tail_bound(epsilon, truncation);
        let discrepancy = operator_norm(&(ladder.conjugated()? - &ladder.regularized));
        let threshold = 10.0 * tol + phase_rounding(f, epsilon, -truncation, truncation);
        consistency("conjugated vs dressed product integral", discrepancy, threshold)?;
        let (step_difference, previous_tail_bound) = match &previous {
            Some((value, prev_bound)) => (operator_norm(&(&ladder.regularized - value)), *prev_bound),
            None => (0.0, f64::INFINITY),
        };
        rungs.push(LadderRung {
            truncation,
            value: ladder.regularized.clone(),
            step_difference,
            previous_tail_bound,
            tail_bound: bound,
            discrepancy,
        });
        if bound <= tol {
            let value = UnitaryOperator::with_tol(
                ladder.regularized.clone(),
                crate::evolution::PROPAGATOR_UNITARITY_TOL,
            )?;
            return Ok(SecondaryOperator {
                value,
                epsilon,
                truncation,
                tail_bound: bound,
                ladder: rungs,
                deviation_mode: dev.mode(),
            });
        }
        if 2.0 * truncation > opts.cap {
            return Err(Error::Convergence {
                what: format!("secondary operator ladder (cap T = {:e})", opts.cap),
                achieved: bound,
                target: tol,
            });
        }
        previous = Some((ladder.regularized.clone(), bound));
        ladder.double()?;
    }
}

#[derive(Debug, Clone)]
pub struct WitnessRow {
    pub truncation: f64,
    /// `‖S(2T,−2T) − S(T,−T)‖`.
    pub unregularized: f64,
    /// `‖S^R(2T,−2T) − S^R(T,−T)‖`.
    pub regularized: f64,
    pub tail_bound: f64,
}

/// Contrasts successive differences of the bare and regularized propagators.
pub fn divergence_witness(
    f: &PerturbationFamily,
    epsilon: f64,
    truncations: &[f64],
    tol: f64,
) -> Result<Vec<WitnessRow>> {
    if f.c_plus().is_zero() && f.b_plus().is_zero() {
        return Err(Error::Invalid(
            "divergence witness needs a non-integrable tail (C+ or B+ nonzero)".into(),
        ));
    }
    let dev = deviation_factor(f, epsilon)?;
    let mut rows = Vec::with_capacity(truncations.len());
    for &truncation in truncations {
        if !(truncation >= 1.0) {
            return Err(Error::Invalid(format!("truncation must be at least 1, got {truncation}")));
        }
        let mut ladder = SymmetricLadder::new(&dev, truncation, tol)?;
        let plain = ladder.plain.clone();
        let regularized = ladder.regularized.clone();
        ladder.double()?;
        rows.push(WitnessRow {
            truncation,
            unregularized: operator_norm(&(&ladder.plain - plain)),
            regularized: operator_norm(&(&ladder.regularized - regularized)),
            tail_bound: f.tail_bound(epsilon, truncation),
        });
    }
    Ok(rows)
}

/// Unitarity defect of `S^R` values, exposed for reporting.
pub fn regularized_unitarity_defect(r: &RegularizedPropagator) -> f64 {
    unitary_defect(r.value.matrix())
}
