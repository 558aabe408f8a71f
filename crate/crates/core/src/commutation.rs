//! Residual checks for the axioms of deviation factors, the intertwining
//! property of generalized wave operators and the commutation relations of the
//! generalized scattering operator, on finite-dimensional data.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{
    diag_real, matexp_skew, operator_norm, ComplexMatrix, HermitianOperator, UnitaryOperator,
};
use crate::regularization::DeviationFactor;

/// Tolerance for `S = W₊*W₋` when both are supplied.
pub const SCATTERING_CONSISTENCY_TOL: f64 = 1e-10;

pub type DeviationMap = Arc<dyn Fn(f64) -> Result<UnitaryOperator> + Send + Sync>;

/// Finite-dimensional data `A₀, A, W±, 𝒞±, W₀(·), S`.
#[derive(Clone)]
pub struct CommutationScenario {
    a0: HermitianOperator,
    a: Option<HermitianOperator>,
    c_plus: HermitianOperator,
    c_minus: HermitianOperator,
    w_plus: Option<UnitaryOperator>,
    w_minus: Option<UnitaryOperator>,
    w0: Option<DeviationMap>,
    s: Option<UnitaryOperator>,
}

impl fmt::Debug for CommutationScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CommutationScenario")
            .field("a0", &self.a0)
            .field("a", &self.a)
            .field("c_plus", &self.c_plus)
            .field("c_minus", &self.c_minus)
            .field("w_plus", &self.w_plus)
            .field("w_minus", &self.w_minus)
            .field("w0", &self.w0.as_ref().map(|_| "<map>"))
            .field("s", &self.s)
            .finish()
    }
}

fn same_dim(what: &str, n: usize, m: usize) -> Result<()> {
    if n != m {
        return Err(Error::Dimension(format!("{what} has dimension {m}, A0 has {n}")));
    }
    Ok(())
}

impl CommutationScenario {
    pub fn new(a0: HermitianOperator, c_plus: HermitianOperator, c_minus: HermitianOperator) -> Result<Self> {
        let n = a0.dim();
        same_dim("C+", n, c_plus.dim())?;
        same_dim("C-", n, c_minus.dim())?;
        Ok(CommutationScenario {
            a0,
            a: None,
            c_plus,
            c_minus,
            w_plus: None,
            w_minus: None,
            w0: None,
            s: None,
        })
    }

    /// Scenario whose deviation factor is `W₀(·, ε)` of a canonical family, with `𝒞± = εC±`.
    pub fn from_deviation(dev: &DeviationFactor, a0: HermitianOperator) -> Result<Self> {
        let eps = dev.epsilon();
        let f = dev.family();
        let dev = dev.clone();
        let mut sc = Self::new(a0, f.c_plus().scaled(eps), f.c_minus().scaled(eps))?;
        sc.w0 = Some(Arc::new(move |t| dev.at(t)));
        same_dim("W0", sc.dim(), f.dim())?;
        Ok(sc)
    }

    pub fn with_a(mut self, a: HermitianOperator) -> Result<Self> {
        same_dim("A", self.dim(), a.dim())?;
        self.a = Some(a);
        Ok(self)
    }

    pub fn with_w0<F>(mut self, w0: F) -> Self
    where
        F: Fn(f64) -> Result<UnitaryOperator> + Send + Sync + 'static,
    {
        self.w0 = Some(Arc::new(w0));
        self
    }

    /// Sets `W±` and, unless already given, `S = W₊*W₋`.
    pub fn with_wave_operators(mut self, w_plus: UnitaryOperator, w_minus: UnitaryOperator) -> Result<Self> {
        same_dim("W+", self.dim(), w_plus.dim())?;
        same_dim("W-", self.dim(), w_minus.dim())?;
        self.w_plus = Some(w_plus);
        self.w_minus = Some(w_minus);
        self.check_scattering()?;
        if self.s.is_none() {
            self.s = self.derived_scattering();
        }
        Ok(self)
    }

    pub fn with_scattering(mut self, s: UnitaryOperator) -> Result<Self> {
        same_dim("S", self.dim(), s.dim())?;
        self.s = Some(s);
        self.check_scattering()?;
        Ok(self)
    }

    fn derived_scattering(&self) -> Option<UnitaryOperator> {
        match (&self.w_plus, &self.w_minus) {
            (Some(p), Some(m)) => Some(p.inverse().compose(m)),
            _ => None,
        }
    }

    fn check_scattering(&self) -> Result<()> {
        if let (Some(s), Some(derived)) = (&self.s, self.derived_scattering()) {
            let discrepancy = operator_norm(&(s.matrix() - derived.matrix()));
            if discrepancy > SCATTERING_CONSISTENCY_TOL {
                return Err(Error::Consistency {
                    what: "S = W+* W-".into(),
                    discrepancy,
                    threshold: SCATTERING_CONSISTENCY_TOL,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }
    pub fn a0(&self) -> &HermitianOperator {
        &self.a0
    }
    pub fn a(&self) -> Option<&HermitianOperator> {
        self.a.as_ref()
    }
    pub fn c_plus(&self) -> &HermitianOperator {
        &self.c_plus
    }
    pub fn c_minus(&self) -> &HermitianOperator {
        &self.c_minus
    }
    pub fn w_plus(&self) -> Option<&UnitaryOperator> {
        self.w_plus.as_ref()
    }
    pub fn w_minus(&self) -> Option<&UnitaryOperator> {
        self.w_minus.as_ref()
    }
    pub fn scattering(&self) -> Option<&UnitaryOperator> {
        self.s.as_ref()
    }

    pub fn w0(&self, t: f64) -> Result<UnitaryOperator> {
        match &self.w0 {
            Some(f) => f(t),
            None => Err(Error::Invalid("scenario has no deviation factor".into())),
        }
    }

    /// `𝒞₊` for `t > 0`, `𝒞₋` otherwise.
    fn c_for(&self, t: f64) -> &HermitianOperator {
        if t > 0.0 {
            &self.c_plus
        } else {
            &self.c_minus
        }
    }

    pub fn tails_coincide(&self) -> bool {
        let d = operator_norm(&(self.c_plus.matrix() - self.c_minus.matrix()));
        d <= 1e-12 * self.c_plus.norm().max(self.c_minus.norm()).max(1.0)
    }
}

fn commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    operator_norm(&(a * b - b * a))
}

/// `exp(iτ(A₀ + 𝒞))`.
fn shifted_exp(a0: &HermitianOperator, c: &HermitianOperator, tau: f64) -> Result<ComplexMatrix> {
    let sum = HermitianOperator::symmetrized(a0.matrix() + c.matrix());
    Ok(matexp_skew(&sum, tau)?.into_matrix())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSample {
    pub t: f64,
    pub tau: f64,
    /// `‖W₀(t+τ)W₀(t)^{−1} − exp(iτ𝒞±)‖`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct DeviationAxiomReport {
    pub limit: Vec<LimitSample>,
    pub limit_max: f64,
    /// `max_t ‖W₀(t)A₀ − A₀W₀(t)‖`.
    pub a0_commutation: f64,
    /// `max ‖W₀(t)W₀(t+τ) − W₀(t+τ)W₀(t)‖` over same-sign `t`, `t+τ`.
    pub self_commutation: f64,
    /// `max ‖A₀exp(iτ𝒞±) − exp(iτ𝒞±)A₀‖`.
    pub tail_commutation: f64,
}

impl DeviationAxiomReport {
    pub fn max_residual(&self) -> f64 {
        self.limit_max
            .max(self.a0_commutation)
            .max(self.self_commutation)
            .max(self.tail_commutation)
    }

    /// Limit residuals at a fixed `τ`, ordered by `t`.
    pub fn limit_curve(&self, tau: f64) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self
            .limit
            .iter()
            .filter(|s| s.tau == tau)
            .map(|s| (s.t, s.residual))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// Residuals of the deviation-factor axioms over `t_grid × tau_grid`.
pub fn deviation_axiom_residuals(
    sc: &CommutationScenario,
    t_grid: &[f64],
    tau_grid: &[f64],
) -> Result<DeviationAxiomReport> {
    let a0 = sc.a0.matrix();
    let per_t: Vec<Result<(Vec<LimitSample>, f64, f64)>> = t_grid
        .par_iter()
        .map(|&t| {
            let w = sc.w0(t)?.into_matrix();
            let w_inv = w.adjoint();
            let a0_res = commutator_norm(&w, a0);
            let mut samples = Vec::with_capacity(tau_grid.len());
            let mut self_res: f64 = 0.0;
            for &tau in tau_grid {
                let shifted = sc.w0(t + tau)?.into_matrix();
                let tail = matexp_skew(sc.c_for(t), tau)?.into_matrix();
                samples.push(LimitSample {
                    t,
                    tau,
                    residual: operator_norm(&(&shifted * &w_inv - tail)),
                });
                let same_sign = (t >= 0.0 && t + tau >= 0.0) || (t <= 0.0 && t + tau <= 0.0);
                if same_sign {
                    self_res = self_res.max(commutator_norm(&w, &shifted));
                }
            }
            Ok((samples, a0_res, self_res))
        })
        .collect();
    let mut limit = Vec::new();
    let mut a0_commutation: f64 = 0.0;
    let mut self_commutation: f64 = 0.0;
    for r in per_t {
        let (samples, a0_res, self_res) = r?;
        limit.extend(samples);
        a0_commutation = a0_commutation.max(a0_res);
        self_commutation = self_commutation.max(self_res);
    }
    let mut tail_commutation: f64 = 0.0;
    for &tau in tau_grid {
        for c in [&sc.c_plus, &sc.c_minus] {
            let e = matexp_skew(c, tau)?.into_matrix();
            tail_commutation = tail_commutation.max(commutator_norm(a0, &e));
        }
    }
    Ok(DeviationAxiomReport {
        limit_max: max_of(limit.iter().map(|s| s.residual)),
        limit,
        a0_commutation,
        self_commutation,
        tail_commutation,
    })
}

/// `‖exp(iτA)W± − W±exp(iτ(A₀+𝒞±))‖` for `+` and `−`.
pub fn intertwining_residual(sc: &CommutationScenario, tau: f64) -> Result<(f64, f64)> {
    let a = sc
        .a
        .as_ref()
        .ok_or_else(|| Error::Invalid("intertwining check needs A".into()))?;
    let (wp, wm) = match (&sc.w_plus, &sc.w_minus) {
        (Some(p), Some(m)) => (p.matrix(), m.matrix()),
        _ => return Err(Error::Invalid("intertwining check needs W+ and W-".into())),
    };
    let ea = matexp_skew(a, tau)?.into_matrix();
    let plus = operator_norm(&(&ea * wp - wp * shifted_exp(&sc.a0, &sc.c_plus, tau)?));
    let minus = operator_norm(&(&ea * wm - wm * shifted_exp(&sc.a0, &sc.c_minus, tau)?));
    Ok((plus, minus))
}

/// A residual that only makes sense when `𝒞₊ = 𝒞₋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Residual {
    Value(f64),
    Inapplicable,
}

impl Residual {
    pub fn value(&self) -> Option<f64> {
        match self {
            Residual::Value(v) => Some(*v),
            Residual::Inapplicable => None,
        }
    }
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Residual::Value(v) => write!(f, "{v:.6e}"),
            Residual::Inapplicable => f.write_str("inapplicable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringResiduals {
    /// `‖S − exp(−iτ(A₀+𝒞₊)) S exp(iτ(A₀+𝒞₋))‖`.
    pub conjugation: f64,
    /// `‖exp(iτ(A₀+𝒞))S − S exp(iτ(A₀+𝒞))‖`.
    pub exp_commutation: Residual,
    /// `‖(A₀+𝒞)S − S(A₀+𝒞)‖`.
    pub generator_commutation: Residual,
    /// `‖(A₀+𝒞₊)S − S(A₀+𝒞₋)‖`.
    pub shifted_generators: f64,
}

impl ScatteringResiduals {
    pub fn max_residual(&self) -> f64 {
        [
            Some(self.conjugation),
            self.exp_commutation.value(),
            self.generator_commutation.value(),
            Some(self.shifted_generators),
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max)
    }
}

pub fn scattering_commutation_residuals(sc: &CommutationScenario, tau: f64) -> Result<ScatteringResiduals> {
    let s = sc
        .s
        .as_ref()
        .ok_or_else(|| Error::Invalid("scattering check needs S".into()))?
        .matrix();
    let plus = sc.a0.matrix() + sc.c_plus.matrix();
    let minus = sc.a0.matrix() + sc.c_minus.matrix();
    let e_plus = shifted_exp(&sc.a0, &sc.c_plus, tau)?;
    let e_minus = shifted_exp(&sc.a0, &sc.c_minus, tau)?;
    let conjugation = operator_norm(&(s - e_plus.adjoint() * s * &e_minus));
    let (exp_commutation, generator_commutation) = if sc.tails_coincide() {
        (
            Residual::Value(operator_norm(&(&e_plus * s - s * &e_plus))),
            Residual::Value(operator_norm(&(&plus * s - s * &plus))),
        )
    } else {
        (Residual::Inapplicable, Residual::Inapplicable)
    };
    Ok(ScatteringResiduals {
        conjugation,
        exp_commutation,
        generator_commutation,
        shifted_generators: operator_norm(&(plus * s - s * minus)),
    })
}

/// Random diagonal scenario on which every identity holds exactly:
/// `W₀(t) = exp(it𝒞)`, `W± = I`, `A = A₀ + 𝒞`, `S = I`.
pub fn build_commuting_model(n: usize, seed: u64) -> Result<CommutationScenario> {
    if n == 0 {
        return Err(Error::Invalid("model dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a: Vec<f64> = a0.iter().zip(&c).map(|(x, y)| x + y).collect();
    let c_op = HermitianOperator::from_real_diag(&c);
    let phases = c.clone();
    let sc = CommutationScenario::new(HermitianOperator::from_real_diag(&a0), c_op.clone(), c_op)?
        .with_a(HermitianOperator::from_real_diag(&a))?
        .with_w0(move |t| {
            let mut m = diag_real(&vec![0.0; phases.len()]);
            for (k, c) in phases.iter().enumerate() {
                m[(k, k)] = Complex64::cis(t * c);
            }
            UnitaryOperator::new(m)
        })
        .with_wave_operators(UnitaryOperator::identity(n), UnitaryOperator::identity(n))?;
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{identity, pauli, random_unitary};
    use crate::regularization::{deviation_factor, PerturbationFamily};

    #[test]
    fn commuting_model_examples() {
        let grid = [-7.0, -2.5, -0.5, 0.0, 0.3, 1.0, 4.0, 12.0];
        let taus = [-1.5, 0.25, 1.0, 3.0];
        for n in [1, 4] {
            let sc = build_commuting_model(n, 42).unwrap();
            let r = deviation_axiom_residuals(&sc, &grid, &taus).unwrap();
            assert!(r.max_residual() <= 1e-12, "{r:?}");
            let (p, m) = intertwining_residual(&sc, 0.7).unwrap();
            assert!(p <= 1e-12 && m <= 1e-12);
            let s = scattering_commutation_residuals(&sc, 0.7).unwrap();
            assert!(s.max_residual() <= 1e-12);
        }
        let a = build_commuting_model(4, 9).unwrap();
        let b = build_commuting_model(4, 9).unwrap();
        assert_eq!(a.a0().matrix(), b.a0().matrix());
        assert_eq!(a.c_plus().matrix(), b.c_plus().matrix());
        assert_eq!(a.w0(2.0).unwrap().matrix(), b.w0(2.0).unwrap().matrix());
    }

    #[test]
    fn scalar_deviation_limit() {
        let f = PerturbationFamily::scalar(0.0, 1.0, 0.0, 0.0, |_| 0.0, 2.0, 0.0).unwrap();
        let dev = deviation_factor(&f, 1.0).unwrap();
        let sc = CommutationScenario::from_deviation(&dev, HermitianOperator::scalar(0.0)).unwrap();
        let r = deviation_axiom_residuals(&sc, &[100.0], &[1.0]).unwrap();
        let expected = (Complex64::cis(1.01f64.ln()) - 1.0).norm();
        assert!((r.limit[0].residual - expected).abs() < 1e-14);
        assert!((expected - 9.95e-3).abs() < 1e-5);
    }

    #[test]
    fn negative_control() {
        let (sx, _, sz) = pauli();
        let gen = HermitianOperator::new(sx).unwrap();
        let sc = CommutationScenario::new(
            HermitianOperator::new(sz).unwrap(),
            HermitianOperator::zero(2),
            HermitianOperator::zero(2),
        )
        .unwrap()
        .with_w0(move |t| matexp_skew(&gen, t));
        let r = deviation_axiom_residuals(&sc, &[1.0], &[0.5]).unwrap();
        assert!((r.a0_commutation - 2.0 * 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn intertwining_examples() {
        let a0 = HermitianOperator::from_real_diag(&[0.5, -1.0, 2.0]);
        let trivial = CommutationScenario::new(a0.clone(), HermitianOperator::zero(3), HermitianOperator::zero(3))
            .unwrap()
            .with_a(a0.clone())
            .unwrap()
            .with_wave_operators(UnitaryOperator::identity(3), UnitaryOperator::identity(3))
            .unwrap();
        assert_eq!(intertwining_residual(&trivial, 1.3).unwrap(), (0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(3, 1.0, &mut rng);
        let c = HermitianOperator::from_real_diag(&[0.1, 0.4, -0.3]);
        let sum = a0.matrix() + c.matrix();
        let a = HermitianOperator::with_tol(u.matrix() * sum * u.matrix().adjoint(), 1e-10).unwrap();
        let sc = CommutationScenario::new(a0.clone(), c.clone(), c.clone())
            .unwrap()
            .with_a(a)
            .unwrap()
            .with_wave_operators(u.clone(), u)
            .unwrap();
        let (p, m) = intertwining_residual(&sc, 0.9).unwrap();
        assert!(p <= 1e-11 && m <= 1e-11);
    }

    #[test]
    fn intertwining_is_first_order_sensitive() {
        let a0 = HermitianOperator::from_real_diag(&[0.0, 1.0]);
        let residual = |delta: f64| {
            let mut m = ComplexMatrix::zeros(2, 2);
            m[(0, 1)] = Complex64::new(delta, 0.0);
            m[(1, 0)] = Complex64::new(-delta, 0.0);
            let w = crate::operator::expm(&m).unwrap();
            let sc = CommutationScenario::new(a0.clone(), HermitianOperator::zero(2), HermitianOperator::zero(2))
                .unwrap()
                .with_a(a0.clone())
                .unwrap()
                .with_wave_operators(UnitaryOperator::with_tol(w.clone(), 1e-9).unwrap(), UnitaryOperator::with_tol(w, 1e-9).unwrap())
                .unwrap();
            intertwining_residual(&sc, 1.0).unwrap().0
        };
        let (r1, r2) = (residual(0.01), residual(0.02));
        assert!(r1 > 0.0);
        assert!((r2 / r1 - 2.0).abs() < 0.05);
    }

    #[test]
    fn scattering_examples() {
        let a0 = HermitianOperator::from_real_diag(&[1.0, 2.0, 3.0]);
        let c = HermitianOperator::from_real_diag(&[0.5, 0.5, -1.0]);
        // S a function of A₀ + 𝒞
        let sum = HermitianOperator::symmetrized(a0.matrix() + c.matrix());
        let s = matexp_skew(&sum, 0.37).unwrap();
        let sc = CommutationScenario::new(a0.clone(), c.clone(), c.clone())
            .unwrap()
            .with_scattering(s)
            .unwrap();
        let r = scattering_commutation_residuals(&sc, 1.1).unwrap();
        assert!(r.max_residual() <= 1e-11);

        // 𝒞₋ = 𝒞₊ + D with S a permutation matching the shifted spectra
        let c_plus = HermitianOperator::from_real_diag(&[0.0, 0.0, 0.0]);
        let c_minus = HermitianOperator::from_real_diag(&[1.0, 1.0, -2.0]);
        // A₀ + 𝒞₋ = diag(2, 3, 1); P maps it onto diag(1, 2, 3)
        let mut p = ComplexMatrix::zeros(3, 3);
        p[(0, 2)] = Complex64::new(1.0, 0.0);
        p[(1, 0)] = Complex64::new(1.0, 0.0);
        p[(2, 1)] = Complex64::new(1.0, 0.0);
        let sc = CommutationScenario::new(a0, c_plus, c_minus)
            .unwrap()
            .with_scattering(UnitaryOperator::new(p).unwrap())
            .unwrap();
        let r = scattering_commutation_residuals(&sc, 0.8).unwrap();
        assert!(r.shifted_generators <= 1e-11);
        assert!(r.conjugation <= 1e-11);
        assert_eq!(r.generator_commutation, Residual::Inapplicable);
        assert_eq!(r.exp_commutation, Residual::Inapplicable);
    }

    #[test]
    fn inconsistent_scattering_rejected() {
        let a0 = HermitianOperator::scalar(1.0);
        let z = HermitianOperator::scalar(0.0);
        let bad = CommutationScenario::new(a0, z.clone(), z)
            .unwrap()
            .with_scattering(UnitaryOperator::new(identity(1) * Complex64::new(-1.0, 0.0)).unwrap())
            .unwrap()
            .with_wave_operators(UnitaryOperator::identity(1), UnitaryOperator::identity(1));
        assert!(matches!(bad, Err(Error::Consistency { .. })));
    }
}
