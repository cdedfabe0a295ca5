//! Homogeneity parameters and the three kernel representations
//! K(x, y), Phi(s) and W(Y), with conversions between them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FluxError, Result};
use crate::w0builder::mollifier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityParams {
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
}

impl HomogeneityParams {
    /// gamma + 2p, the exponent combination that must lie in [0, 1).
    pub fn spread(&self) -> f64 {
        self.gamma + 2.0 * self.p
    }
}

/// Validates (gamma, p). When gamma + 2p < 0 the singularity exponent is
/// replaced by -(gamma + p), which leaves the kernel class unchanged.
pub fn validate_params(gamma: f64, p: f64) -> Result<HomogeneityParams> {
    if !gamma.is_finite() || !p.is_finite() {
        return Err(FluxError::InvalidParameter("non-finite exponent".into()));
    }
    let spread = gamma + 2.0 * p;
    if spread >= 1.0 {
        return Err(FluxError::NoConstantFluxRegime(spread));
    }
    let p = if spread < 0.0 { -(gamma + p) } else { p };
    Ok(HomogeneityParams { gamma, p, q: gamma / 2.0 + p })
}

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ShapeFunction {
    phi: RealFn,
    pub p: f64,
}

impl fmt::Debug for ShapeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShapeFunction").field("p", &self.p).finish_non_exhaustive()
    }
}

impl ShapeFunction {
    pub fn new(phi: impl Fn(f64) -> f64 + Send + Sync + 'static, p: f64) -> Self {
        Self { phi: Arc::new(phi), p }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, 0.0)
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(FluxError::Domain(format!("shape function needs s in (0,1), got {s}")));
        }
        Ok((self.phi)(s))
    }

    /// Limit of s^p Phi(s) as s -> 0+, certified by a Cauchy test on
    /// s = 1e-6, 1e-7, 1e-8.
    pub fn endpoint_limit(&self) -> Result<f64> {
        let v: Vec<f64> = [1e-6f64, 1e-7, 1e-8]
            .iter()
            .map(|&s| Ok(s.powf(self.p) * self.eval(s)?))
            .collect::<Result<_>>()?;
        let d1 = (v[1] - v[0]).abs();
        let d2 = (v[2] - v[1]).abs();
        let scale = v[2].abs();
        if !(scale > 0.0) || !(d2 <= d1 + 1e-12 * scale) || d2 > 1e-2 * scale {
            return Err(FluxError::Domain(format!(
                "s^p Phi(s) has no positive limit at 0 (samples {v:?})"
            )));
        }
        Ok(v[2])
    }

    /// max |Phi(s) - Phi(1-s)| relative to |Phi(s)| on a grid inside [1e-9, 1-1e-9].
    pub fn symmetry_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in metric_grid().into_iter().filter(|&s| s <= 0.5) {
            let a = self.eval(s)?;
            let b = self.eval(1.0 - s)?;
            worst = worst.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
        }
        Ok(worst)
    }
}

/// One building block of a log-variable kernel, evaluated at |Y|.
#[derive(Clone)]
pub enum KernelTerm {
    Constant,
    /// Unit-mass Gaussian mollifier centred at `center` (in |Y|).
    Bump { center: f64, width: f64 },
    /// (1 - exp(-(onset Y)^2)) exp(q sqrt(Y^2 + 1)).
    Tail { q: f64, onset: f64 },
    /// Arbitrary even function, with a bound C e^{q|Y|}.
    Custom { label: String, f: RealFn, bound: f64 },
}

impl fmt::Debug for KernelTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelTerm::Constant => write!(f, "Constant"),
            KernelTerm::Bump { center, width } => write!(f, "Bump({center}, {width})"),
            KernelTerm::Tail { q, onset } => write!(f, "Tail({q}, {onset})"),
            KernelTerm::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// Half-width, in units of the bump width, beyond which a Gaussian bump
/// is below e^{-81} of its peak.
pub const BUMP_REACH: f64 = 9.0;

impl KernelTerm {
    pub fn eval_abs(&self, z: f64) -> f64 {
        match self {
            KernelTerm::Constant => 1.0,
            KernelTerm::Bump { center, width } => mollifier(z, *center, *width),
            KernelTerm::Tail { q, onset } => {
                let e = onset * z;
                let g = if *q == 0.0 { 1.0 } else { (q * (z * z + 1.0).sqrt()).exp() };
                -(-e * e).exp_m1() * g
            }
            KernelTerm::Custom { f, .. } => f(z),
        }
    }

    /// Support in |Y| when compact (to double precision), otherwise None.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            KernelTerm::Bump { center, width } => {
                Some(((center - BUMP_REACH * width).max(0.0), center + BUMP_REACH * width))
            }
            _ => None,
        }
    }

    fn bound(&self) -> f64 {
        match self {
            KernelTerm::Constant => 1.0,
            KernelTerm::Bump { width, .. } => 1.0 / (width * std::f64::consts::PI.sqrt()),
            KernelTerm::Tail { q, .. } => q.exp(),
            KernelTerm::Custom { bound, .. } => *bound,
        }
    }

    fn describe(&self) -> Option<String> {
        match self {
            KernelTerm::Constant => Some("const".into()),
            KernelTerm::Bump { center, width } => {
                Some(format!("bump:{:016x}:{:016x}", center.to_bits(), width.to_bits()))
            }
            KernelTerm::Tail { q, onset } => {
                Some(format!("tail:{:016x}:{:016x}", q.to_bits(), onset.to_bits()))
            }
            KernelTerm::Custom { .. } => None,
        }
    }
}

/// Even kernel W on the real line, stored as a weighted sum of terms.
#[derive(Clone, Debug)]
pub struct LogKernel {
    terms: Vec<(f64, KernelTerm)>,
    pub q: f64,
    pub envelope_const: f64,
    pub symmetric: bool,
}

impl LogKernel {
    pub fn from_terms(terms: Vec<(f64, KernelTerm)>, q: f64) -> Self {
        let envelope_const = terms.iter().map(|(c, t)| c.abs() * t.bound()).sum::<f64>().max(1e-300);
        Self { terms, q, envelope_const, symmetric: true }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(vec![(c, KernelTerm::Constant)], 0.0)
    }

    pub fn zero(q: f64) -> Self {
        Self::from_terms(Vec::new(), q)
    }

    /// Wraps an even function with declared growth exponent `q`; the envelope
    /// constant is measured on the standard check grid.
    pub fn from_fn(label: &str, q: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let f: RealFn = Arc::new(f);
        let bound = check_grid()
            .iter()
            .map(|&y| f(y.abs()).abs() * (-q * y.abs()).exp())
            .fold(0.0, f64::max)
            * (1.0 + 1e-9);
        Self::from_terms(
            vec![(1.0, KernelTerm::Custom { label: label.to_string(), f, bound })],
            q,
        )
    }

    pub fn terms(&self) -> &[(f64, KernelTerm)] {
        &self.terms
    }

    pub fn eval(&self, y: f64) -> f64 {
        let z = y.abs();
        self.terms.iter().map(|(c, t)| c * t.eval_abs(z)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let terms = self.terms.iter().map(|(w, t)| (w * c, t.clone())).collect();
        Self::from_terms(terms, self.q)
    }

    pub fn plus(&self, other: &LogKernel) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(terms, self.q.max(other.q))
    }

    /// Points in |Y| where the kernel has fine structure (bump edges and centres).
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (_, t) in &self.terms {
            if let KernelTerm::Bump { center, width } = t {
                for j in [-BUMP_REACH, -3.0, -1.0, 0.0, 1.0, 3.0, BUMP_REACH] {
                    let x = center + j * width;
                    if x > 0.0 {
                        out.push(x);
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Stable textual description for hashing; None when the kernel holds a closure.
    pub fn describe(&self) -> Option<String> {
        let mut parts = vec![format!("q:{:016x}", self.q.to_bits())];
        for (c, t) in &self.terms {
            parts.push(format!("{:016x}*{}", c.to_bits(), t.describe()?));
        }
        Some(parts.join("|"))
    }

    pub fn symmetry_residual(&self) -> f64 {
        let g = check_grid();
        let m = g.iter().map(|&y| self.eval(y).abs()).fold(0.0, f64::max);
        let r = g.iter().map(|&y| (self.eval(y) - self.eval(-y)).abs()).fold(0.0, f64::max);
        if m > 0.0 { r / m } else { r }
    }

    /// max |W(Y)| e^{-q|Y|} / envelope_const on the check grid (<= 1 when the envelope holds).
    pub fn envelope_ratio(&self) -> f64 {
        check_grid()
            .iter()
            .map(|&y| self.eval(y).abs() * (-self.q * y.abs()).exp())
            .fold(0.0, f64::max)
            / self.envelope_const
    }

    pub fn min_on_grid(&self, grid: &[f64]) -> f64 {
        grid.iter().map(|&y| self.eval(y)).fold(f64::INFINITY, f64::min)
    }
}

/// 1024 points, logarithmically spaced in |Y| from 1e-3 to 30, both signs.
pub fn check_grid() -> Vec<f64> {
    let n = 512;
    let (a, b) = (1e-3f64.ln(), 30f64.ln());
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let y = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
        out.push(-y);
        out.push(y);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// W(Y) = (e^{Y/2} + e^{-Y/2})^gamma Phi(1/(1+e^Y)), evaluated through |Y|.
pub fn w_from_phi(phi: &ShapeFunction, params: &HomogeneityParams) -> LogKernel {
    let gamma = params.gamma;
    let f = phi.phi.clone();
    LogKernel::from_fn("w_from_phi", params.q, move |z: f64| {
        let z = z.abs();
        let s = 1.0 / (1.0 + z.exp());
        (2.0 * (0.5 * z).cosh()).powf(gamma) * f(s)
    })
}

/// Phi(s) = W(ln((1-s)/s)) / (sqrt((1-s)/s) + sqrt(s/(1-s)))^gamma.
pub fn phi_from_w(w: &LogKernel, params: &HomogeneityParams) -> ShapeFunction {
    let gamma = params.gamma;
    let w = w.clone();
    ShapeFunction::new(
        move |s: f64| {
            let r = (1.0 - s) / s;
            w.eval(r.ln()) / (r.sqrt() + r.sqrt().recip()).powf(gamma)
        },
        params.p,
    )
}

/// K(x, y) = (x + y)^gamma Phi(x / (x + y)).
pub fn kernel_eval(phi: &ShapeFunction, params: &HomogeneityParams, x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(FluxError::Domain(format!("kernel needs x, y > 0, got ({x}, {y})")));
    }
    let t = x + y;
    Ok(t.powf(params.gamma) * phi.eval(x / t)?)
}

/// 4096 points in (0,1): uniform interior plus geometric clusters at both ends.
pub fn metric_grid() -> Vec<f64> {
    let mut out = Vec::with_capacity(4096);
    let n_uni = 2048;
    for i in 0..n_uni {
        out.push((i as f64 + 0.5) / n_uni as f64);
    }
    let n_geo = 1024;
    let (a, b) = (1e-9f64.ln(), 1e-3f64.ln());
    for i in 0..n_geo {
        let s = (a + (b - a) * i as f64 / (n_geo - 1) as f64).exp();
        out.push(s);
        out.push(1.0 - s);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// sup_s s^p |Phi1(s) - Phi2(s)| over the metric grid.
pub fn kernel_metric(phi1: &ShapeFunction, phi2: &ShapeFunction, p: f64) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for s in metric_grid() {
        let d = (phi1.eval(s)? - phi2.eval(s)?).abs();
        sup = sup.max(s.powf(p) * d);
    }
    Ok(sup)
}
