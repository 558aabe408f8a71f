//! Turns a [`ScenarioConfig`] into library objects, collecting findings on the way.

use num_complex::Complex64;
use secscat::commutation::{build_commuting_model, CommutationScenario};
use secscat::evolution::OperatorFamily;
use secscat::operator::{matexp_skew, ComplexMatrix, HermitianOperator, UnitaryOperator};
use secscat::regularization::PerturbationFamily;
use secscat::uv::{default_q_grid, Ell, FourVector, Kernel, UVParams, UVScenario};

use crate::config::{
    Catalog, CommuteConfig, EllForm, FamilyConfig, Finding, KernelChoice, Kind, MatrixSpec,
    ScenarioConfig, UvConfig,
};

fn matrix(spec: &MatrixSpec, dim: usize, path: &str) -> Result<ComplexMatrix, Finding> {
    match spec {
        MatrixSpec::Scalar(x) => {
            if !x.is_finite() {
                return Err(Finding::new(path, format!("value must be finite, got {x}")));
            }
            Ok(ComplexMatrix::identity(dim, dim) * Complex64::new(*x, 0.0))
        }
        MatrixSpec::Entries(rows) => {
            if rows.len() != dim {
                return Err(Finding::new(path, format!("expected {dim} rows, got {}", rows.len())));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != dim {
                    return Err(Finding::new(
                        format!("{path}[{i}]"),
                        format!("expected {dim} entries, got {}", row.len()),
                    ));
                }
                if let Some(j) = row.iter().position(|z| !(z[0].is_finite() && z[1].is_finite())) {
                    return Err(Finding::new(format!("{path}[{i}][{j}]"), "entries must be finite"));
                }
            }
            Ok(ComplexMatrix::from_fn(dim, dim, |i, j| {
                Complex64::new(rows[i][j][0], rows[i][j][1])
            }))
        }
    }
}

fn hermitian(spec: &MatrixSpec, dim: usize, path: &str) -> Result<HermitianOperator, Finding> {
    HermitianOperator::new(matrix(spec, dim, path)?).map_err(|e| Finding::new(path, e.to_string()))
}

fn family_dim(f: &FamilyConfig) -> usize {
    f.dim
        .or_else(|| {
            [&f.c_plus, &f.b_plus, &f.c_minus, &f.b_minus]
                .into_iter()
                .chain(f.u.as_ref().and_then(|u| u.shape.as_ref()))
                .find_map(MatrixSpec::dim)
        })
        .unwrap_or(1)
}

/// `sup_{|t| ≥ 1} |t|^ν exp(−t²/2w²)`.
fn gaussian_envelope(nu: f64, width: f64) -> f64 {
    let peak = nu * width * width;
    if peak >= 1.0 {
        (peak.powf(nu / 2.0)) * (-nu / 2.0).exp()
    } else {
        (-1.0 / (2.0 * width * width)).exp()
    }
}

pub fn build_family(f: &FamilyConfig) -> Result<PerturbationFamily, Vec<Finding>> {
    let mut findings = Vec::new();
    let n = family_dim(f);
    if n == 0 {
        return Err(vec![Finding::new("family.dim", "dimension must be at least 1")]);
    }
    if !(f.nu.is_finite() && f.nu > 1.0) {
        findings.push(Finding::new(
            "family.nu",
            format!("decay exponent must exceed 1 so the remainder is integrable, got {}", f.nu),
        ));
    }
    let mut tail = |spec: &MatrixSpec, path: &str| match hermitian(spec, n, path) {
        Ok(h) => Some(h),
        Err(e) => {
            findings.push(e);
            None
        }
    };
    let cp = tail(&f.c_plus, "family.c_plus");
    let bp = tail(&f.b_plus, "family.b_plus");
    let cm = tail(&f.c_minus, "family.c_minus");
    let bm = tail(&f.b_minus, "family.b_minus");
    let remainder = match &f.u {
        None => Some((OperatorFamily::zero(n), 0.0)),
        Some(u) => remainder(u, f.nu, n, &mut findings),
    };
    match (cp, bp, cm, bm, remainder) {
        (Some(cp), Some(bp), Some(cm), Some(bm), Some((u, a))) if findings.is_empty() => {
            PerturbationFamily::new(cp, bp, cm, bm, u, f.nu, a)
                .map_err(|e| vec![Finding::new("family", e.to_string())])
        }
        _ => Err(findings),
    }
}

fn remainder(
    u: &crate::config::RemainderConfig,
    nu: f64,
    n: usize,
    findings: &mut Vec<Finding>,
) -> Option<(OperatorFamily, f64)> {
    if !u.amplitude.is_finite() {
        findings.push(Finding::new("family.u.amplitude", "amplitude must be finite"));
        return None;
    }
    let width = u.width.unwrap_or(1.0);
    if !(width.is_finite() && width > 0.0) {
        findings.push(Finding::new("family.u.width", format!("width must be positive, got {width}")));
        return None;
    }
    if u.catalog == Catalog::InverseSquare && nu > 2.0 {
        findings.push(Finding::new(
            "family.nu",
            format!("inverse_square decays like |t|^-2, so nu must not exceed 2, got {nu}"),
        ));
        return None;
    }
    let shape = match hermitian(u.shape.as_ref().unwrap_or(&MatrixSpec::Scalar(1.0)), n, "family.u.shape") {
        Ok(h) => h,
        Err(e) => {
            findings.push(e);
            return None;
        }
    };
    let scale = u.amplitude.abs() * shape.norm();
    let h = shape.into_matrix();
    let a = u.amplitude;
    let family = match u.catalog {
        Catalog::Zero => return Some((OperatorFamily::zero(n), 0.0)),
        Catalog::InverseSquare => {
            OperatorFamily::new(n, move |t| &h * Complex64::new(a / (1.0 + t * t), 0.0))
        }
        Catalog::Power => OperatorFamily::with_breakpoints(n, vec![-1.0, 0.0, 1.0], move |t| {
            &h * Complex64::new(a * (1.0 + t.abs()).powf(-nu), 0.0)
        }),
        Catalog::Gaussian => OperatorFamily::new(n, move |t| {
            &h * Complex64::new(a * (-t * t / (2.0 * width * width)).exp(), 0.0)
        }),
    };
    let envelope = match u.catalog {
        Catalog::Gaussian => gaussian_envelope(nu, width),
        _ => 1.0,
    };
    Some((family, scale * envelope))
}

fn ell(cfg: &EllForm, value: f64) -> Ell {
    match cfg {
        EllForm::ShiftedSquare => Ell::ShiftedSquare { shift: value },
        EllForm::Constant => Ell::Constant { value },
    }
}

pub fn build_uv(cfg: &UvConfig, epsilon: f64) -> Result<UVScenario, Vec<Finding>> {
    let mut findings = Vec::new();
    let m = cfg.m_bound;
    if !(m.is_finite() && m > 0.0) {
        findings.push(Finding::new("uv.m_bound", format!("must be positive, got {m}")));
    }
    let ell_ok = match cfg.ell.form {
        EllForm::ShiftedSquare => cfg.ell.value > 0.0,
        EllForm::Constant => cfg.ell.value > m * m,
    };
    if !(cfg.ell.value.is_finite() && ell_ok) {
        findings.push(Finding::new(
            "uv.ell",
            "l(q) must exceed q^2 for every |q| <= M so the denominator stays positive",
        ));
    }
    if let Some(grid) = &cfg.q_grid {
        for (i, q) in grid.iter().enumerate() {
            let q = FourVector(*q);
            if !q.0.iter().all(|x| x.is_finite()) || q.norm() > m {
                findings.push(Finding::new(
                    format!("uv.q_grid[{i}]"),
                    format!("q = {q} must be finite with |q| <= M = {m}"),
                ));
            }
        }
    }
    if !findings.is_empty() {
        return Err(findings);
    }
    UVScenario::new(UVParams {
        ell: ell(&cfg.ell.form, cfg.ell.value),
        m_bound: m,
        mu: cfg.mu,
        kernel: match cfg.kernel {
            KernelChoice::Linear => Kernel::Linear,
            KernelChoice::Superficial => Kernel::Superficial,
        },
        angular_orders: cfg.angular_orders,
        epsilon,
    })
    .map_err(|e| vec![Finding::new("uv", e.to_string())])
}

pub fn uv_grid(cfg: &UvConfig, seed: u64) -> Vec<FourVector> {
    match &cfg.q_grid {
        Some(grid) => grid.iter().map(|q| FourVector(*q)).collect(),
        None => default_q_grid(cfg.m_bound, seed),
    }
}

pub fn build_commute(cfg: &CommuteConfig, seed: u64) -> Result<CommutationScenario, Vec<Finding>> {
    let mut findings = Vec::new();
    for (name, grid) in [("commute.t_grid", &cfg.t_grid), ("commute.tau_grid", &cfg.tau_grid)] {
        if grid.is_empty() || !grid.iter().all(|x| x.is_finite()) {
            findings.push(Finding::new(name, "grid must be non-empty and finite"));
        }
    }
    if !cfg.tau.is_finite() {
        findings.push(Finding::new("commute.tau", "must be finite"));
    }
    if let Some(n) = cfg.model_dim {
        if n == 0 {
            findings.push(Finding::new("commute.model_dim", "dimension must be at least 1"));
        }
        if !findings.is_empty() {
            return Err(findings);
        }
        return build_commuting_model(n, seed).map_err(|e| vec![Finding::new("commute", e.to_string())]);
    }
    let (Some(a0), Some(cp), Some(cm)) = (&cfg.a0, &cfg.c_plus, &cfg.c_minus) else {
        findings.push(Finding::new("commute", "give either model_dim or all of a0, c_plus, c_minus"));
        return Err(findings);
    };
    let n = [a0, cp, cm].into_iter().find_map(MatrixSpec::dim).unwrap_or(1);
    let mut op = |spec: &MatrixSpec, path: &str| match hermitian(spec, n, path) {
        Ok(h) => Some(h),
        Err(e) => {
            findings.push(e);
            None
        }
    };
    let (a0, cp, cm) = (op(a0, "commute.a0"), op(cp, "commute.c_plus"), op(cm, "commute.c_minus"));
    let s = match &cfg.scattering {
        None => None,
        Some(spec) => match matrix(spec, n, "commute.scattering")
            .and_then(|m| UnitaryOperator::new(m).map_err(|e| Finding::new("commute.scattering", e.to_string())))
        {
            Ok(u) => Some(u),
            Err(e) => {
                findings.push(e);
                None
            }
        },
    };
    let (Some(a0), Some(cp), Some(cm)) = (a0, cp, cm) else {
        return Err(findings);
    };
    if !findings.is_empty() {
        return Err(findings);
    }
    let (tail_plus, tail_minus) = (cp.clone(), cm.clone());
    let sc = CommutationScenario::new(a0, cp, cm)
        .map_err(|e| vec![Finding::new("commute", e.to_string())])?
        .with_w0(move |t| matexp_skew(if t >= 0.0 { &tail_plus } else { &tail_minus }, t));
    match s {
        Some(s) => sc.with_scattering(s).map_err(|e| vec![Finding::new("commute.scattering", e.to_string())]),
        None => Ok(sc),
    }
}

/// Every problem with `cfg`; empty means the scenario can be run.
pub fn validate(cfg: &ScenarioConfig) -> Vec<Finding> {
    let mut findings = Vec::new();
    if !cfg.epsilon.is_finite() {
        findings.push(Finding::new("epsilon", "must be finite"));
    }
    if let Some(tol) = cfg.tol {
        if !(tol.is_finite() && tol > 0.0) {
            findings.push(Finding::new("tol", format!("must be positive, got {tol}")));
        }
    }
    let needs_family = matches!(cfg.kind, Kind::Propagate | Kind::Dyson | Kind::Secondary | Kind::Witness);
    match (&cfg.family, needs_family) {
        (Some(f), _) => {
            if let Err(e) = build_family(f) {
                findings.extend(e);
            }
        }
        (None, true) => findings.push(Finding::new("family", format!("required for kind {}", cfg.kind.as_str()))),
        (None, false) => {}
    }
    if matches!(cfg.kind, Kind::Propagate | Kind::Dyson) {
        match cfg.interval {
            None => findings.push(Finding::new("interval", format!("required for kind {}", cfg.kind.as_str()))),
            Some(iv) if !(iv.tau.is_finite() && iv.t.is_finite() && iv.t >= iv.tau) => {
                findings.push(Finding::new("interval", "need finite tau <= t"))
            }
            _ => {}
        }
    }
    if cfg.kind == Kind::Dyson && !(1..=64).contains(&cfg.order) {
        findings.push(Finding::new("order", format!("must be in 1..=64, got {}", cfg.order)));
    }
    if let Some(l) = cfg.ladder {
        if !(l.start.is_finite() && l.start >= 1.0 && l.cap.is_finite() && l.cap >= l.start) {
            findings.push(Finding::new("ladder", "need 1 <= start <= cap, both finite"));
        }
    }
    if let Some(ts) = &cfg.truncations {
        if ts.is_empty() || !ts.iter().all(|t| t.is_finite() && *t >= 1.0) {
            findings.push(Finding::new("truncations", "need a non-empty list of finite values >= 1"));
        }
    }
    if cfg.kind == Kind::Uv || cfg.uv.is_some() {
        let uv = cfg.uv.clone().unwrap_or_default();
        if let Err(e) = build_uv(&uv, cfg.epsilon) {
            findings.extend(e);
        }
    }
    if cfg.kind == Kind::Commute || cfg.commute.is_some() {
        let c = cfg.commute.clone().unwrap_or_else(default_commute);
        if let Err(e) = build_commute(&c, cfg.seed) {
            findings.extend(e);
        }
    }
    findings
}

pub fn default_commute() -> CommuteConfig {
    serde_json::from_str::<CommuteConfig>(r#"{"model_dim": 2}"#).expect("static default")
}
