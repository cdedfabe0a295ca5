//! Independent flux oracles: direct quadrature of B(H1, H2; W)(X) in log
//! variables and of the volume flux J(x; f) in the original variables, plus
//! the constants b and C_W.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FluxError, Result};
use crate::kernelspace::{HomogeneityParams, LogKernel, ShapeFunction};
use crate::numerics::{bracket_over_ik, integrate, integrate_real, softplus, QuadratureSpec};
use crate::solver::Solution;
use crate::spectral::PeriodicField;
use crate::symbol::psi_zmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-11 }
    }
}

impl DirectOptions {
    fn spec(&self, freq: f64) -> QuadratureSpec {
        QuadratureSpec { abs_tol: self.abs_tol, rel_tol: self.rel_tol, ..QuadratureSpec::default() }.with_freq(freq)
    }
}

/// Largest |n| whose coefficient exceeds `rel` times the largest one.
pub fn effective_bandwidth(f: &PeriodicField, rel: f64) -> usize {
    let max = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    f.modes().filter(|&n| f.coeff(n).norm() > rel * max).map(|n| n.unsigned_abs() as usize).max().unwrap_or(0)
}

fn coeff_sum(f: &PeriodicField) -> f64 {
    f.coeffs().iter().map(|c| c.norm()).sum()
}

fn mirrored(features: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = features.iter().flat_map(|&x| [x, -x]).collect();
    out.push(0.0);
    out.sort_by(f64::total_cmp);
    out
}

/// Records the first error raised inside an integrand.
struct ErrSlot(RefCell<Option<FluxError>>);

impl ErrSlot {
    fn new() -> Self {
        Self(RefCell::new(None))
    }

    fn unwrap_or_record(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// B(H1, H2; W)(X) by direct quadrature of
/// int dxi e^{-xi/2} W(xi) int_{X - L(xi)}^{X} H1(Y) H2(Y + xi) dY, L = ln(1 + e^xi),
/// which is the defining double integral after the change of variables
/// xi = Z - Y. The inner integrand is a trigonometric polynomial of degree
/// at most N1 + N2 in Y; it is sampled at p > 2 (N1 + N2) equispaced points
/// and integrated exactly through its interpolant. The outer integral is adaptive.
pub fn bilinear_direct(h1: &PeriodicField, h2: &PeriodicField, w: &LogKernel, x: f64, opts: &DirectOptions) -> Result<f64> {
    if !(w.q < 0.5) {
        return Err(FluxError::NoConstantFluxRegime(2.0 * w.q));
    }
    let k = h1.k_star;
    let t = h1.period();
    let nb = effective_bandwidth(h1, 1e-16).max(effective_bandwidth(h2, 1e-16)) as f64;
    let p = 2 * (h1.n_max + h2.n_max) + 2;
    let jmax = p / 2 - 1;
    let gmax = coeff_sum(h1) * coeff_sum(h2);
    // offsets v_i = t i / p below X; G(v) = H1(X - v) H2(X - v + xi)
    let offs: Vec<f64> = (0..p).map(|i| t * i as f64 / p as f64).collect();
    let h1s: Vec<f64> = offs.iter().map(|v| h1.eval(x - v)).collect();
    let twiddle: Vec<Complex64> = (0..=jmax)
        .flat_map(|j| (0..p).map(move |i| Complex64::from_polar(1.0 / p as f64, -2.0 * PI * (j * i) as f64 / p as f64)))
        .collect();
    let inner = |xi: f64| -> f64 {
        let g: Vec<f64> = offs.iter().zip(&h1s).map(|(v, a)| a * h2.eval(x - v + xi)).collect();
        let l = softplus(xi);
        let r = l - (l / t).floor() * t;
        let mut acc = l * g.iter().sum::<f64>() / p as f64;
        for j in 1..=jmax {
            let row = &twiddle[j * p..(j + 1) * p];
            let gj: Complex64 = row.iter().zip(&g).map(|(c, v)| c * v).sum();
            // (e^{i j k r} - 1) / (i j k)
            acc += 2.0 * (gj * bracket_over_ik(r, -(j as f64) * k)).re;
        }
        acc
    };
    let spec = opts.spec(nb.max(1.0) * k);
    let mut total = 0.0;
    for (c, term) in w.terms() {
        let one = LogKernel::from_terms(vec![(1.0, term.clone())], w.q);
        let feats = one.features();
        let f = |xi: f64| Complex64::new((-0.5 * xi).exp() * term.eval_abs(xi.abs()) * inner(xi), 0.0);
        let tspec = QuadratureSpec { abs_tol: spec.abs_tol / c.abs().max(1e-300), ..spec };
        let v = match term.support() {
            Some((a, b)) => {
                let neg: Vec<f64> = feats.iter().map(|v| -v).collect();
                integrate(f, a, b, &feats, &tspec)?.value.re + integrate(f, -b, -a, &neg, &tspec)?.value.re
            }
            None => {
                let z = psi_zmax(100.0 * one.envelope_const * gmax.max(1.0), w.q, opts.abs_tol);
                integrate(f, -z, z, &mirrored(&feats), &tspec)?.value.re
            }
        };
        total += c * v;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxJOptions {
    pub rel_tol: f64,
    /// Oscillation frequency of f in ln x (0 for a power law).
    pub log_freq: f64,
    /// Values of |ln(z/y)| where the kernel has fine structure.
    pub breakpoints: Vec<f64>,
}

impl Default for FluxJOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, log_freq: 0.0, breakpoints: vec![] }
    }
}

/// J(x; f) = int_0^x dy int_{x-y}^inf dz K(y, z) y f(y) f(z), with
/// K(y, z) = (y + z)^gamma Phi(y / (y + z)). Variables: xi = ln(z / y) outside,
/// eta = ln((x - y) / y) in (-inf, xi] inside; the kernel shape is constant along
/// the inner integral.
pub fn flux_j(
    f: &dyn Fn(f64) -> f64,
    phi: &ShapeFunction,
    params: &HomogeneityParams,
    x: f64,
    opts: &FluxJOptions,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(FluxError::Domain(format!("flux needs x > 0, got {x}")));
    }
    if !(params.spread() < 1.0) {
        return Err(FluxError::NoConstantFluxRegime(params.spread()));
    }
    let gamma = params.gamma;
    let decay = 0.5 - params.q;
    let reach = (1e3 / opts.rel_tol).ln();
    let z_outer = reach / decay + 5.0;
    let z_inner = reach + 5.0;
    let smooth_spec = QuadratureSpec { abs_tol: 1e-300, rel_tol: 0.1 * opts.rel_tol, ..QuadratureSpec::default() };
    let inner_spec = smooth_spec.with_freq(2.0 * opts.log_freq);
    let outer_spec = QuadratureSpec { rel_tol: opts.rel_tol, ..smooth_spec }.with_freq(2.0 * opts.log_freq);
    let slot = ErrSlot::new();
    let outer = |xi: f64| -> f64 {
        // K is symmetric, so Phi is evaluated on the half of (0, 1) where it is resolvable.
        let s = 1.0 / (1.0 + xi.abs().exp());
        let phi_v = slot.unwrap_or_record(phi.eval(s));
        let exi = xi.exp();
        let g = |eta: f64| {
            let e = eta.exp();
            let y = x / (1.0 + e);
            let xm = x * e / (1.0 + e);
            let z = y * exi;
            (y + z).powf(gamma) * phi_v * y * f(y) * f(z) * z * (y * xm / x)
        };
        // for eta < 0, y stays within a factor 2 of x and f(y) barely oscillates
        let lo = xi.min(0.0) - z_inner;
        let near = integrate_real(g, lo, xi.min(0.0), &[], &smooth_spec).map(|v| v.0);
        let far = if xi > 0.0 { integrate_real(g, 0.0, xi, &[], &inner_spec).map(|v| v.0) } else { Ok(0.0) };
        slot.unwrap_or_record(near) + slot.unwrap_or_record(far)
    };
    let r = integrate(|xi| Complex64::new(outer(xi), 0.0), -z_outer, z_outer, &mirrored(&opts.breakpoints), &outer_spec)?;
    slot.check()?;
    Ok(r.value.re)
}

/// b = B(1, 1; W)^{-1/2}.
pub fn compute_b(w: &LogKernel, opts: &DirectOptions) -> Result<f64> {
    let one = PeriodicField::constant(1.0, 0, 1.0);
    let v = bilinear_direct(&one, &one, w, 0.0, opts)?;
    if !(v > 0.0) {
        return Err(FluxError::Domain(format!("B(1,1;W) = {v} is not positive")));
    }
    Ok(v.powf(-0.5))
}

/// C_W = int_{-inf}^0 dY int_{ln(1 - e^Y)}^inf dZ e^{(Y-Z)/2} |W(Y - Z)|, with
/// w~ = Z - ln(1 - e^Y) inside and Y = -u^m outside, m = 1/(1/2 - q), which
/// removes the |Y|^{-1/2-q} endpoint singularity.
pub fn compute_cw(w: &LogKernel, opts: &DirectOptions) -> Result<f64> {
    if !(w.q < 0.5) {
        return Err(FluxError::NoConstantFluxRegime(2.0 * w.q));
    }
    let m = 1.0 / (0.5 - w.q);
    let feats = mirrored(&w.features());
    let zmax = psi_zmax(100.0 * w.envelope_const, w.q, opts.abs_tol);
    let u_max = zmax.powf(1.0 / m);
    let spec = QuadratureSpec { abs_tol: opts.abs_tol, rel_tol: opts.rel_tol, ..QuadratureSpec::default() };
    let ispec = QuadratureSpec { abs_tol: 1e-3 * opts.abs_tol, rel_tol: 1e-3 * opts.rel_tol, ..spec };
    let slot = ErrSlot::new();
    let outer = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let y = -u.powf(m);
        let shift = y - (-y.exp()).ln_1p();
        // argument of W is shift - w~
        let g = |wt: f64| {
            let a = shift - wt;
            (0.5 * a).exp() * w.eval(a).abs()
        };
        let bps: Vec<f64> = feats.iter().map(|f| shift - f).filter(|&b| b > 0.0).collect();
        let upper = shift.max(0.0) + zmax;
        let v = slot.unwrap_or_record(integrate_real(g, 0.0, upper, &bps, &ispec).map(|v| v.0));
        v * m * u.powf(m - 1.0)
    };
    let r = integrate_real(outer, 0.0, u_max, &[0.5, 1.0, 2.0], &spec)?;
    slot.check()?;
    Ok(r.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxConstants {
    pub b: f64,
    pub c_w: f64,
    pub j0: f64,
}

pub fn flux_constants(w: &LogKernel, j0: f64, opts: &DirectOptions) -> Result<FluxConstants> {
    Ok(FluxConstants { b: compute_b(w, opts)?, c_w: compute_cw(w, opts)?, j0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub j0: f64,
    pub x_log_grid: Vec<f64>,
    pub b_values: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub j_values: Vec<f64>,
    pub max_rel_dev_log: f64,
    pub max_rel_dev_x: f64,
    pub tol_log: f64,
    pub tol_x: f64,
    pub pass: bool,
}

/// `n` equispaced points over one period [0, T).
pub fn period_grid(k_star: f64, n: usize) -> Vec<f64> {
    let t = 2.0 * PI / k_star;
    (0..n).map(|i| t * i as f64 / n as f64).collect()
}

/// x in {1, Q^{1/3}, Q^{1/2}, Q^{2/3}, Q, 10 Q}.
pub fn default_x_grid(k_star: f64) -> Vec<f64> {
    let q = (2.0 * PI / k_star).exp();
    vec![1.0, q.powf(1.0 / 3.0), q.sqrt(), q.powf(2.0 / 3.0), q, 10.0 * q]
}

/// Evaluates B(H, H; W) on `x_log_grid` and J(x; f) on `x_grid` and compares
/// both with J0.
pub fn verify_constant_flux(
    sol: &Solution,
    x_log_grid: &[f64],
    x_grid: &[f64],
    tol_log: f64,
    tol_x: f64,
    opts: &DirectOptions,
) -> Result<FluxReport> {
    let b_values: Vec<f64> =
        x_log_grid.iter().map(|&x| bilinear_direct(&sol.h, &sol.h, &sol.kernel, x, opts)).collect::<Result<_>>()?;
    let params = sol.recipe.params();
    let phi = crate::kernelspace::phi_from_w(&sol.kernel, &params);
    let jopts = FluxJOptions {
        rel_tol: 1e-8,
        log_freq: sol.k_star,
        breakpoints: sol.kernel.features(),
    };
    let f = |x: f64| sol.back_transform(x);
    let j_values: Vec<f64> = x_grid.iter().map(|&x| flux_j(&f, &phi, &params, x, &jopts)).collect::<Result<_>>()?;
    let dev = |v: &[f64]| v.iter().map(|b| (b - sol.j0).abs() / sol.j0).fold(0.0, f64::max);
    let max_rel_dev_log = dev(&b_values);
    let max_rel_dev_x = dev(&j_values);
    Ok(FluxReport {
        j0: sol.j0,
        x_log_grid: x_log_grid.to_vec(),
        b_values,
        x_grid: x_grid.to_vec(),
        j_values,
        max_rel_dev_log,
        max_rel_dev_x,
        tol_log,
        tol_x,
        pass: max_rel_dev_log <= tol_log && max_rel_dev_x <= tol_x,
    })
}
