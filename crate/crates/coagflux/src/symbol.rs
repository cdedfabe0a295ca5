//! The function G(z, k), the linearization symbol Psi(k; W), alignment
//! scans and location of the bifurcation wavenumber.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{FluxError, Result};
use crate::kernelspace::{HomogeneityParams, KernelTerm, LogKernel};
use crate::numerics::{bracket_over_ik, integrate, softplus, stable_bracket, QuadratureSpec};

pub const K_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub k_star: f64,
    /// Period in X, 2 pi / k_star.
    pub t: f64,
    /// Dilation factor e^T.
    pub q_dilation: f64,
    pub residual: f64,
    /// Median |Psi| over the scan grid.
    pub scale: f64,
    /// Smallest |Psi| found on (k_star, K_max].
    pub cert_min: f64,
    pub k_max: f64,
    /// Psi(K_max) / psi_asymptotic(K_max).
    pub asymptotic_ratio: [f64; 2],
}

impl BifurcationPoint {
    pub fn new(k_star: f64) -> Self {
        let t = 2.0 * PI / k_star;
        Self {
            k_star,
            t,
            q_dilation: t.exp(),
            residual: 0.0,
            scale: 1.0,
            cert_min: f64::NAN,
            k_max: f64::NAN,
            asymptotic_ratio: [f64::NAN, f64::NAN],
        }
    }
}

/// G(z,k) = e^{-z/2}(1+e^{ikz})(1-(e^z+1)^{-ik}) + e^{z/2}(1+e^{-ikz})(1-(e^{-z}+1)^{-ik}).
pub fn eval_g(z: f64, k: f64) -> Complex64 {
    if z < 0.0 {
        return eval_g_swapped(-z, k);
    }
    let emz = (-z).exp();
    let lm = emz.ln_1p();
    let lp = z + lm;
    let h = emz.sqrt();
    let (s, c) = (k * z).sin_cos();
    let e = Complex64::new(1.0 + c, s);
    e * stable_bracket(lp, k) * h + e.conj() * stable_bracket(lm, k) / h
}

// G evaluated at -z for z >= 0.
fn eval_g_swapped(z: f64, k: f64) -> Complex64 {
    let emz = (-z).exp();
    let lm = emz.ln_1p();
    let lp = z + lm;
    let h = emz.sqrt();
    let (s, c) = (k * z).sin_cos();
    let e = Complex64::new(1.0 + c, -s);
    e * stable_bracket(lm, k) / h + e.conj() * stable_bracket(lp, k) * h
}

/// Integrand of the non-singular full-line form of Psi, without the W factor.
fn psi_full_line_weight(z: f64, k: f64) -> Complex64 {
    let e = Complex64::new(0.0, k * z).exp();
    (Complex64::new(1.0, 0.0) + e) * bracket_over_ik(softplus(z), k) * (-0.5 * z).exp()
}

/// Upper truncation of the Psi integral for a term with envelope C e^{q z}.
pub fn psi_zmax(envelope_const: f64, q: f64, abs_tol: f64) -> f64 {
    (envelope_const.max(1e-300) / abs_tol).ln().max(0.0) / (0.5 - q) + 10.0
}

fn mirrored(features: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = features.iter().flat_map(|&x| [x, -x]).collect();
    out.push(0.0);
    out.sort_by(f64::total_cmp);
    out
}

/// Psi(k; single term), including its weight.
pub fn eval_psi_term(k: f64, weight: f64, term: &KernelTerm, q: f64, spec: &QuadratureSpec) -> Result<Complex64> {
    if weight == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let tol = spec.abs_tol / weight.abs();
    let tspec = QuadratureSpec { abs_tol: tol, ..*spec }.with_freq(2.0 * k.abs());
    let one = LogKernel::from_terms(vec![(1.0, term.clone())], q);
    let feats = one.features();
    let z_max = psi_zmax(one.envelope_const, q, tol);
    if k.abs() >= K_FLOOR {
        let (a, b) = term.support().unwrap_or((0.0, z_max));
        let r = integrate(|z| eval_g(z, k) * term.eval_abs(z), a, b, &feats, &tspec)?;
        Ok(r.value * weight / Complex64::new(0.0, k))
    } else {
        let f = |z: f64| psi_full_line_weight(z, k) * term.eval_abs(z.abs());
        let val = match term.support() {
            Some((a, b)) => {
                integrate(f, a, b, &feats, &tspec)?.value + integrate(f, -b, -a, &mirrored(&feats), &tspec)?.value
            }
            None => integrate(f, -z_max, z_max, &mirrored(&feats), &tspec)?.value,
        };
        Ok(val * weight)
    }
}

/// Psi(k; W) = (1/(ik)) int_0^inf W(z) G(z,k) dz, with the stable full-line
/// form below `K_FLOOR`.
pub fn eval_psi_with(k: f64, w: &LogKernel, spec: &QuadratureSpec) -> Result<Complex64> {
    let n = w.terms().len().max(1) as f64;
    let tspec = QuadratureSpec { abs_tol: spec.abs_tol / n, ..*spec };
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, t) in w.terms() {
        acc += eval_psi_term(k, *c, t, w.q, &tspec)?;
    }
    Ok(acc)
}

pub fn eval_psi(k: f64, w: &LogKernel) -> Result<Complex64> {
    eval_psi_with(k, w, &QuadratureSpec::default())
}

/// Large-|k| law for Psi. `amplitude` and `phase_per_sign` follow the
/// literature constant a = 2i Gamma(1/2-q)/(1+gamma+2p); `exponent` is the
/// growth rate of k Psi(k), so Psi itself decays like |k|^{q-1/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolAsymptotics {
    pub amplitude: Complex64,
    pub exponent: f64,
    pub phase_per_sign: f64,
}

impl SymbolAsymptotics {
    pub fn new(params: &HomogeneityParams) -> Self {
        let q = params.q;
        Self {
            amplitude: Complex64::new(0.0, 2.0 * gamma(0.5 - q) / (1.0 + params.spread())),
            exponent: 0.5 + q,
            phase_per_sign: 0.5 * PI * (q - 0.5),
        }
    }

    pub fn eval(&self, k: f64) -> Complex64 {
        let sg = k.signum();
        let phase = Complex64::from_polar(1.0, sg * self.phase_per_sign);
        self.amplitude * sg * phase * k.abs().powf(self.exponent) / Complex64::new(0.0, k)
    }
}

pub fn psi_asymptotic(k: f64, params: &HomogeneityParams) -> Complex64 {
    SymbolAsymptotics::new(params).eval(k)
}

/// Half-open k interval helper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRange {
    pub lo: f64,
    pub hi: f64,
}

impl KRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn grid(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn root(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

pub fn alignment_product(z_a: f64, z_b: f64, k: f64) -> Complex64 {
    eval_g(z_b, k).conj() * eval_g(z_a, k)
}

/// All sign changes of Im(conj(G(z_b,k)) G(z_a,k)) on a uniform grid where the
/// real part is negative, bisected to width 1e-10.
pub fn alignment_scan(z_a: f64, z_b: f64, range: KRange, grid: usize) -> Vec<Bracket> {
    let h = |k: f64| alignment_product(z_a, z_b, k).im;
    let ks = range.grid(grid.max(2));
    let hs: Vec<f64> = ks.iter().map(|&k| h(k)).collect();
    let mut out = Vec::new();
    for i in 0..ks.len() - 1 {
        let (mut lo, mut hi) = (ks[i], ks[i + 1]);
        let (mut flo, fhi) = (hs[i], hs[i + 1]);
        if flo == 0.0 && fhi == 0.0 {
            continue;
        }
        if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
            continue;
        }
        if fhi == 0.0 && i + 1 < ks.len() - 1 {
            // counted by the next interval
            continue;
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            let fm = h(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let b = Bracket { lo, hi };
        if alignment_product(z_a, z_b, b.root()).re < 0.0 {
            out.push(b);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct FindKstarOptions {
    pub grid: usize,
    pub k_max: f64,
    pub cert_step: f64,
    /// Minimum |Psi| / scale required on (k_star, K_max].
    pub cert_margin: f64,
    /// When set, |Psi(K_max)/psi_asymptotic(K_max) - 1| must be below this.
    pub asymptotic_tol: Option<f64>,
    pub params: HomogeneityParams,
    pub spec: QuadratureSpec,
}

impl FindKstarOptions {
    pub fn new(params: HomogeneityParams) -> Self {
        Self {
            grid: 201,
            k_max: 500.0,
            cert_step: 0.25,
            cert_margin: 1e-3,
            asymptotic_tol: None,
            params,
            spec: QuadratureSpec::default(),
        }
    }
}

fn psi_derivative(k: f64, w: &LogKernel, spec: &QuadratureSpec) -> Result<Complex64> {
    let h = 1e-6 * k.abs().max(1.0);
    Ok((eval_psi_with(k + h, w, spec)? - eval_psi_with(k - h, w, spec)?) / (2.0 * h))
}

/// Gauss-Newton for a real zero of the complex function Psi(.; w).
pub fn refine_zero(k0: f64, w: &LogKernel, target: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let mut k = k0;
    let mut val = eval_psi_with(k, w, spec)?;
    for _ in 0..60 {
        if val.norm() <= 0.01 * target {
            break;
        }
        let d = psi_derivative(k, w, spec)?;
        let step = (d.conj() * val).re / d.norm_sqr();
        let kn = k - step;
        let vn = eval_psi_with(kn, w, spec)?;
        if vn.norm() >= val.norm() && step.abs() < 1e-15 * k.abs() {
            break;
        }
        k = kn;
        val = vn;
        if step.abs() < 1e-15 * k.abs() {
            break;
        }
    }
    Ok((k, val.norm()))
}

/// Golden-section minimum of |Psi| on [a, b].
fn min_modulus(a: f64, b: f64, w: &LogKernel, spec: &QuadratureSpec) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval_psi_with(c, w, spec)?.norm();
    let mut fd = eval_psi_with(d, w, spec)?.norm();
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval_psi_with(c, w, spec)?.norm();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval_psi_with(d, w, spec)?.norm();
        }
    }
    Ok(fc.min(fd))
}

pub fn psi_on_grid(ks: &[f64], w: &LogKernel, spec: &QuadratureSpec) -> Result<Vec<Complex64>> {
    ks.par_iter().map(|&k| eval_psi_with(k, w, spec)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Median |Psi| over the scan grid: the reference scale for zero tests.
pub fn psi_scale(w0: &LogKernel, k_scan: KRange, opts: &FindKstarOptions) -> Result<f64> {
    let vals = psi_on_grid(&k_scan.grid(opts.grid), w0, &opts.spec)?;
    Ok(median(vals.iter().map(|v| v.norm()).collect()))
}

/// Largest zero of Psi(.; w0) in `k_scan`, with a no-further-zero
/// certificate on (k_star, K_max].
pub fn find_kstar(w0: &LogKernel, k_scan: KRange, opts: &FindKstarOptions) -> Result<BifurcationPoint> {
    let ks = k_scan.grid(opts.grid);
    let vals = psi_on_grid(&ks, w0, &opts.spec)?;
    let mods: Vec<f64> = vals.iter().map(|v| v.norm()).collect();
    let scale = median(mods.clone());
    let target = 1e-10 * scale;
    let mut best: Option<(f64, f64)> = None;
    for i in (0..ks.len()).rev() {
        let left = if i > 0 { mods[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < ks.len() { mods[i + 1] } else { f64::INFINITY };
        if !(mods[i] <= left && mods[i] <= right) {
            continue;
        }
        let (k, r) = refine_zero(ks[i], w0, target, &opts.spec)?;
        if r <= target && k >= k_scan.lo - 1e-9 && k <= k_scan.hi + 1e-9 {
            best = Some((k, r));
            break;
        }
    }
    let (k_star, residual) = best.ok_or(FluxError::NoZero { lo: k_scan.lo, hi: k_scan.hi })?;
    let mut bp = BifurcationPoint::new(k_star);
    bp.residual = residual;
    bp.scale = scale;
    bp.k_max = opts.k_max;
    bp.cert_min = certify_no_zero(w0, k_star, scale, opts)?;
    let tail = eval_psi_with(opts.k_max, w0, &opts.spec)? / psi_asymptotic(opts.k_max, &opts.params);
    bp.asymptotic_ratio = [tail.re, tail.im];
    if let Some(tol) = opts.asymptotic_tol {
        if (tail - 1.0).norm() > tol {
            return Err(FluxError::Certification(format!(
                "Psi(K_max)/asymptotic = {tail} differs from 1 by more than {tol}"
            )));
        }
    }
    Ok(bp)
}

/// Minimum of |Psi| on [k_star + 0.1, K_max], from a grid plus golden-section
/// refinement of every local minimum that the grid cannot rule out.
pub fn certify_no_zero(w0: &LogKernel, k_star: f64, scale: f64, opts: &FindKstarOptions) -> Result<f64> {
    let lo = k_star + 0.1;
    if lo >= opts.k_max {
        return Ok(f64::INFINITY);
    }
    let n = ((opts.k_max - lo) / opts.cert_step).ceil() as usize + 1;
    let ks = KRange::new(lo, opts.k_max).grid(n.max(2));
    let vals = psi_on_grid(&ks, w0, &opts.spec)?;
    let margin = opts.cert_margin * scale;
    let mut worst = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    for i in 0..ks.len() {
        let m = vals[i].norm();
        let l = if i > 0 { vals[i - 1].norm() } else { f64::INFINITY };
        let r = if i + 1 < ks.len() { vals[i + 1].norm() } else { f64::INFINITY };
        if !(m <= l && m <= r) {
            continue;
        }
        let var = [i.checked_sub(1), Some(i + 1)]
            .iter()
            .flatten()
            .filter(|&&j| j < ks.len())
            .map(|&j| (vals[j] - vals[i]).norm())
            .fold(0.0, f64::max);
        if m < margin + 2.0 * var {
            let a = ks[i.saturating_sub(1)];
            let b = ks[(i + 1).min(ks.len() - 1)];
            worst = worst.min(min_modulus(a, b, w0, &opts.spec)?);
        }
    }
    if worst <= margin {
        return Err(FluxError::Certification(format!(
            "|Psi| drops to {worst:e} (margin {margin:e}) beyond k_star = {k_star}"
        )));
    }
    Ok(worst)
}
