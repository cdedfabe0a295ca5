//! Adaptive panel quadrature for smooth, exponentially decaying and
//! oscillatory integrands, plus small-argument-safe primitives.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{FluxError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Envelope |f(z)| <= envelope_const * exp(tail_exponent * z) far out.
    pub tail_exponent: f64,
    pub oscillation_freq: f64,
    pub envelope_const: f64,
    /// Phase advance of the fastest oscillation allowed across one initial panel.
    pub phase_per_panel: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 4_000_000,
            tail_exponent: -0.5,
            oscillation_freq: 0.0,
            envelope_const: 1.0,
            phase_per_panel: 2.0 * PI,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_exponent < 0.0) {
            return Err(FluxError::InvalidParameter(format!(
                "tail_exponent must be negative, got {}",
                self.tail_exponent
            )));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(FluxError::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn with_freq(mut self, freq: f64) -> Self {
        self.oscillation_freq = freq.abs();
        self
    }

    /// Maximal initial panel width, one wavelength of the fastest oscillation
    /// by default; local error control refines from there.
    pub fn panel_cap(&self) -> f64 {
        self.phase_per_panel / self.oscillation_freq.max(1.0)
    }

    /// Upper limit Z with envelope_const * e^{tail Z} / |tail| < abs_tol / 10.
    pub fn truncation_point(&self, lower: f64) -> f64 {
        let t = -self.tail_exponent;
        let z = (10.0 * self.envelope_const / (t * self.abs_tol)).ln() / t;
        z.max(lower + 1.0)
    }

    pub fn truncation_error(&self, upper: f64) -> f64 {
        let t = -self.tail_exponent;
        self.envelope_const * (-t * upper).exp() / t
    }

    pub fn halved(&self) -> Self {
        Self { abs_tol: self.abs_tol / 2.0, rel_tol: self.rel_tol / 2.0, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub err_est: f64,
    pub panels: usize,
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    refinable: bool,
}

struct HeapEntry {
    err: f64,
    idx: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv = [Complex64::new(0.0, 0.0); 15];
    for j in 0..7 {
        let dx = h * XGK[j];
        fv[2 * j] = f(c - dx);
        fv[2 * j + 1] = f(c + dx);
    }
    fv[14] = f(c);
    for (j, v) in fv.iter().enumerate() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            let x = if j == 14 {
                c
            } else if j % 2 == 0 {
                c - h * XGK[j / 2]
            } else {
                c + h * XGK[j / 2]
            };
            return Err(FluxError::NonFinite(x));
        }
    }
    let mut rk = fv[14] * WGK[7];
    let mut rg = fv[14] * WG[3];
    let mut rabs = fv[14].norm() * WGK[7];
    for j in 0..7 {
        let pair = fv[2 * j] + fv[2 * j + 1];
        rk += pair * WGK[j];
        rabs += (fv[2 * j].norm() + fv[2 * j + 1].norm()) * WGK[j];
        if j % 2 == 1 {
            rg += pair * WG[j / 2];
        }
    }
    let mean = rk * 0.5;
    let mut rasc = (fv[14] - mean).norm() * WGK[7];
    for j in 0..7 {
        rasc += ((fv[2 * j] - mean).norm() + (fv[2 * j + 1] - mean).norm()) * WGK[j];
    }
    let value = rk * h;
    let rabs = rabs * h.abs();
    let rasc = rasc * h.abs();
    let mut err = ((rk - rg) * h).norm();
    if rasc != 0.0 && err != 0.0 {
        err = rasc * (200.0 * err / rasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * rabs;
    let refinable = err > roundoff && (b - a).abs() > 1e-14 * (1.0 + c.abs());
    Ok(Panel { a, b, value, err: err.max(roundoff), refinable })
}

/// Adaptive quadrature of `f` over [a, b]. Initial panels respect `breakpoints`
/// and the oscillation cap of `spec`; refinement is global bisection of the
/// worst panel. Panels are summed left to right, so results are bit-reproducible.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if !(a < b) {
        return Ok(Integral { value: Complex64::new(0.0, 0.0), err_est: 0.0, panels: 0 });
    }
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let cap = spec.panel_cap();
    let mut panels: Vec<Panel> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = ((hi - lo) / cap).ceil().max(1.0) as usize;
        if panels.len() + n > spec.max_panels {
            return Err(FluxError::QuadratureNonConvergence {
                panels: panels.len() + n,
                err_est: f64::INFINITY,
                tol: spec.abs_tol,
            });
        }
        let h = (hi - lo) / n as f64;
        for i in 0..n {
            let pa = lo + h * i as f64;
            let pb = if i + 1 == n { hi } else { lo + h * (i + 1) as f64 };
            panels.push(gk15(&f, pa, pb)?);
        }
    }
    let mut heap: BinaryHeap<HeapEntry> = panels
        .iter()
        .enumerate()
        .filter(|(_, p)| p.refinable)
        .map(|(idx, p)| HeapEntry { err: p.err, idx })
        .collect();
    let mut total: Complex64 = panels.iter().map(|p| p.value).sum();
    let mut err: f64 = panels.iter().map(|p| p.err).sum();
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.norm());
        if err <= tol {
            break;
        }
        let Some(top) = heap.pop() else { break };
        if panels.len() + 1 > spec.max_panels {
            return Err(FluxError::QuadratureNonConvergence { panels: panels.len(), err_est: err, tol });
        }
        let p = panels[top.idx];
        let m = 0.5 * (p.a + p.b);
        let left = gk15(&f, p.a, m)?;
        let right = gk15(&f, m, p.b)?;
        total += left.value + right.value - p.value;
        err += left.err + right.err - p.err;
        panels[top.idx] = left;
        if left.refinable {
            heap.push(HeapEntry { err: left.err, idx: top.idx });
        }
        panels.push(right);
        if right.refinable {
            heap.push(HeapEntry { err: right.err, idx: panels.len() - 1 });
        }
    }
    // Fixed-order reduction.
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: Complex64 = panels.iter().map(|p| p.value).sum();
    let err_est: f64 = panels.iter().map(|p| p.err).sum();
    Ok(Integral { value, err_est, panels: panels.len() })
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, spec)?;
    Ok((r.value.re, r.err_est))
}

/// Integral over [lower, inf) of an integrand bounded by
/// `envelope_const * exp(tail_exponent * z)`. The truncation error is added to `err_est`.
pub fn integrate_semi_infinite<F: Fn(f64) -> Complex64>(
    f: F,
    lower: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    integrate_semi_infinite_with(f, lower, &[], spec)
}

pub fn integrate_semi_infinite_with<F: Fn(f64) -> Complex64>(
    f: F,
    lower: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral> {
    spec.validate()?;
    let upper = spec.truncation_point(lower);
    let mut r = integrate(f, lower, upper, breakpoints, spec)?;
    r.err_est += spec.truncation_error(upper);
    Ok(r)
}

/// Geometric grading toward `endpoint`: endpoint + dir * width * 2^{-j}
/// down to an offset of 1e-14.
pub fn graded_breakpoints(endpoint: f64, width: f64, dir: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut d = width;
    while d > 1e-14 {
        out.push(endpoint + dir.signum() * d);
        d *= 0.5;
    }
    out
}

/// 1 - exp(-i k L), free of cancellation for small kL.
pub fn stable_bracket(l: f64, k: f64) -> Complex64 {
    let x = k * l;
    if x.abs() < 1e-8 {
        let ix = Complex64::new(0.0, x);
        return ix * (Complex64::new(1.0, 0.0) - ix * 0.5);
    }
    // 1 - e^{-2i th} = 2 sin(th) (sin(th) + i cos(th)), th = kL/2
    let (s, c) = (0.5 * x).sin_cos();
    Complex64::new(2.0 * s * s, 2.0 * s * c)
}

/// (1 - exp(-i k L)) / (i k), continuous through k = 0 where it equals L.
pub fn bracket_over_ik(l: f64, k: f64) -> Complex64 {
    let th = 0.5 * k * l;
    let sinc = if th.abs() < 1e-4 {
        1.0 - th * th / 6.0 + th.powi(4) / 120.0
    } else {
        th.sin() / th
    };
    let (s, c) = th.sin_cos();
    Complex64::new(c, -s) * (l * sinc)
}

/// ln(1 + e^z) without overflow or cancellation.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
