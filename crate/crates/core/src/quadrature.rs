//! One-dimensional quadrature: Gauss–Legendre rules, a panel rule with a
//! spectral indefinite-integration matrix, and adaptive Gauss–Kronrod (7/15)
//! for scalar and matrix-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::ComplexMatrix;

/// Values that can be accumulated by a quadrature rule.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, s: f64);
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        *self += s * other;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        *self += other * s;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for ComplexMatrix {
    fn zero_like(&self) -> Self {
        ComplexMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        self.zip_apply(other, |a, b| *a += b * s);
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Sums in a fixed binary-tree order.
pub fn pairwise_sum<T: QuadValue>(items: &[T]) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        n => {
            let (left, right) = items.split_at(n / 2);
            let mut acc = pairwise_sum(left)?;
            acc.add_scaled(&pairwise_sum(right)?, 1.0);
            Some(acc)
        }
    }
}

/// Legendre polynomials `P_0(x) ..= P_n(x)`.
fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre_all(n, x);
            let pn = p[n];
            let pn1 = p[n - 1];
            let dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let p = legendre_all(n, x);
        let dp = if n == 1 { 1.0 } else { nf * (x * p[n] - p[n - 1]) / (x * x - 1.0) };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule on `[-1, 1]` with the matrix `Q[j][k] = ∫_{-1}^{x_j} ℓ_k(x) dx`
/// of integrated Lagrange basis polynomials.
#[derive(Debug, Clone)]
pub struct SpectralPanel {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub integration: Vec<Vec<f64>>,
}

impl SpectralPanel {
    pub fn new(m: usize) -> Self {
        let (nodes, weights) = gauss_legendre(m);
        let at_nodes: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_all(m, x)).collect();
        let mut integration = vec![vec![0.0; m]; m];
        for j in 0..m {
            let pj = &at_nodes[j];
            for k in 0..m {
                let pk = &at_nodes[k];
                let mut acc = 0.5 * (nodes[j] + 1.0);
                for n in 1..m {
                    acc += 0.5 * pk[n] * (pj[n + 1] - pj[n - 1]);
                }
                integration[j][k] = weights[k] * acc;
            }
        }
        SpectralPanel {
            nodes,
            weights,
            integration,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod-15 estimate and `|K15 − G7|` on `[a, b]`.
pub fn gk15<T, F>(f: &mut F, a: f64, b: f64) -> Result<(T, f64)>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc.zero_like();
    let mut gauss = fc.zero_like();
    kronrod.add_scaled(&fc, WGK[7]);
    gauss.add_scaled(&fc, WG[3]);
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod.add_scaled(&f1, WGK[j]);
        kronrod.add_scaled(&f2, WGK[j]);
        if j % 2 == 1 {
            gauss.add_scaled(&f1, WG[j / 2]);
            gauss.add_scaled(&f2, WG[j / 2]);
        }
    }
    let mut diff = kronrod.clone();
    diff.add_scaled(&gauss, -1.0);
    let err = diff.magnitude() * half.abs();
    let mut value = kronrod.zero_like();
    value.add_scaled(&kronrod, half);
    if !value.magnitude().is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((value, err))
}

#[derive(Debug, Clone)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    /// Final panel partition, ascending.
    pub partition: Vec<(f64, f64)>,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-13,
            max_panels: 20_000,
        }
    }
}

impl AdaptiveOptions {
    pub fn abs(abs_tol: f64) -> Self {
        AdaptiveOptions {
            abs_tol,
            rel_tol: 0.0,
            ..Default::default()
        }
    }
}

/// Globally adaptive Gauss–Kronrod 7/15 over `[a, b]`, splitting first at `breakpoints`.
pub fn integrate<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Invalid(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        let probe = f(a)?;
        return Ok(QuadResult {
            value: probe.zero_like(),
            error: 0.0,
            partition: Vec::new(),
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges = vec![lo];
    edges.extend(breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let (value, error) = gk15(&mut f, w[0], w[1])?;
        total_err += error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let current_value = |heap: &BinaryHeap<Panel<T>>| -> f64 {
        let values: Vec<T> = heap.iter().map(|p| p.value.clone()).collect();
        pairwise_sum(&values).map(|v| v.magnitude()).unwrap_or(0.0)
    };

    let mut target = opts.abs_tol.max(opts.rel_tol * current_value(&heap));
    while total_err > target {
        if heap.len() >= opts.max_panels {
            return Err(Error::Convergence {
                what: "adaptive Gauss–Kronrod quadrature".into(),
                achieved: total_err,
                target,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // panel can no longer be split in floating point
            heap.push(worst);
            return Err(Error::Convergence {
                what: "adaptive Gauss–Kronrod quadrature (panel width underflow)".into(),
                achieved: total_err,
                target,
            });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        if opts.rel_tol > 0.0 && heap.len() % 16 == 0 {
            target = opts.abs_tol.max(opts.rel_tol * current_value(&heap));
        }
    }

    let mut panels: Vec<Panel<T>> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let partition = panels.iter().map(|p| (p.a, p.b)).collect();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    let values: Vec<T> = panels.into_iter().map(|p| p.value).collect();
    let mut value = pairwise_sum(&values).expect("non-empty panel list");
    if sign < 0.0 {
        let mut neg = value.zero_like();
        neg.add_scaled(&value, -1.0);
        value = neg;
    }
    Ok(QuadResult {
        value,
        error,
        partition,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Invalid("slope fit needs at least two paired samples".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Invalid("slope fit needs positive finite samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
