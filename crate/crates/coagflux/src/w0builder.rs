//! The bifurcation kernel W0 (two mollified bumps plus a growth tail, tuned so
//! that Psi(k*; W0) = 0) and the perturbation pair W11, W12.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FluxError, Result};
use crate::kernelspace::{HomogeneityParams, KernelTerm, LogKernel};
use crate::numerics::QuadratureSpec;
use crate::symbol::{
    alignment_scan, eval_g, eval_psi_term, eval_psi_with, find_kstar, BifurcationPoint, FindKstarOptions, KRange,
};

/// Unit-mass Gaussian (1/(eps sqrt(pi))) exp(-((z-center)/eps)^2).
pub fn mollifier(z: f64, center: f64, epsilon: f64) -> f64 {
    let u = (z - center) / epsilon;
    (-u * u).exp() / (epsilon * PI.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W0Recipe {
    pub gamma: f64,
    pub p: f64,
    pub z_a: f64,
    pub z_b: f64,
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub k_star: f64,
}

impl W0Recipe {
    pub fn params(&self) -> HomogeneityParams {
        HomogeneityParams { gamma: self.gamma, p: self.p, q: self.gamma / 2.0 + self.p }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_a > self.z_b && self.z_b > 0.0) {
            return Err(FluxError::InvalidParameter(format!("need z_a > z_b > 0, got {} {}", self.z_a, self.z_b)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.z_b.min(1.0)) {
            return Err(FluxError::InvalidParameter(format!("epsilon {} too large", self.epsilon)));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(FluxError::InvalidParameter("bump amplitudes must be positive".into()));
        }
        Ok(())
    }
}

pub fn bump(center: f64, epsilon: f64) -> KernelTerm {
    KernelTerm::Bump { center, width: epsilon }
}

fn tail(q: f64, epsilon: f64) -> KernelTerm {
    KernelTerm::Tail { q, onset: epsilon }
}

pub fn build_w0(recipe: &W0Recipe) -> LogKernel {
    let q = recipe.params().q;
    LogKernel::from_terms(
        vec![
            (recipe.a, bump(recipe.z_a, recipe.epsilon)),
            (recipe.b, bump(recipe.z_b, recipe.epsilon)),
            (1.0, tail(q, recipe.epsilon)),
        ],
        q,
    )
}

/// Psi of the three building blocks of W0 at wavenumber k.
struct Parts {
    pa: Complex64,
    pb: Complex64,
    pt: Complex64,
}

fn parts(k: f64, z_a: f64, z_b: f64, eps: f64, q: f64, spec: &QuadratureSpec) -> Result<Parts> {
    Ok(Parts {
        pa: eval_psi_term(k, 1.0, &bump(z_a, eps), q, spec)?,
        pb: eval_psi_term(k, 1.0, &bump(z_b, eps), q, spec)?,
        pt: eval_psi_term(k, 1.0, &tail(q, eps), q, spec)?,
    })
}

fn tuned_residual(p: &Parts, sigma: f64) -> Complex64 {
    p.pa / p.pa.norm() + p.pb / p.pb.norm() * sigma + p.pt
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub fd_step: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { fd_step: 1e-6, max_iter: 50, tol: 1e-12 }
    }
}

/// Builds W0 with Psi(k*; W0) = 0 by Newton iteration on (k, sigma), where
/// a = 1/|Psi(k; bump_a)| and b = sigma/|Psi(k; bump_b)|.
pub fn solve_bifurcation_kernel(
    z_a: f64,
    z_b: f64,
    epsilon: f64,
    params: &HomogeneityParams,
    k_scan: KRange,
    opts: &FindKstarOptions,
) -> Result<(LogKernel, BifurcationPoint, W0Recipe)> {
    let newton = NewtonOptions::default();
    let spec = opts.spec;
    let q = params.q;
    let roots = alignment_scan(z_a, z_b, k_scan, 2001);
    // Roots where one of the G vectors nearly vanishes would need an unbounded amplitude.
    let k0 = roots
        .iter()
        .map(|b| b.root())
        .filter(|&k| {
            let (ga, gb) = (eval_g(z_a, k).norm(), eval_g(z_b, k).norm());
            ga.min(gb) > 1e-6 * ga.max(gb)
        })
        .fold(f64::NAN, f64::max);
    if k0.is_nan() {
        return Err(FluxError::Construction(format!(
            "no usable alignment root in [{}, {}]; widen the scan",
            k_scan.lo, k_scan.hi
        )));
    }
    let (mut k, mut sigma) = (k0, 1.0);
    let mut cur = parts(k, z_a, z_b, epsilon, q, &spec)?;
    let mut res = tuned_residual(&cur, sigma);
    let scale0 = 1.0;
    let mut converged = false;
    for _ in 0..newton.max_iter {
        if res.norm() < newton.tol * scale0 {
            converged = true;
            break;
        }
        let h = newton.fd_step * k;
        let fp = tuned_residual(&parts(k + h, z_a, z_b, epsilon, q, &spec)?, sigma);
        let fm = tuned_residual(&parts(k - h, z_a, z_b, epsilon, q, &spec)?, sigma);
        let dk = (fp - fm) / (2.0 * h);
        let ds = cur.pb / cur.pb.norm();
        let det = dk.re * ds.im - ds.re * dk.im;
        if det.abs() < 1e-300 {
            return Err(FluxError::Construction("singular Newton Jacobian".into()));
        }
        let step_k = (res.re * ds.im - ds.re * res.im) / det;
        let step_s = (dk.re * res.im - res.re * dk.im) / det;
        k -= step_k;
        sigma -= step_s;
        if !(k.is_finite() && sigma.is_finite()) || k <= 0.0 {
            return Err(FluxError::Construction(
                "Newton diverged; try a smaller epsilon or a wider scan".into(),
            ));
        }
        cur = parts(k, z_a, z_b, epsilon, q, &spec)?;
        res = tuned_residual(&cur, sigma);
        if step_k.abs() < 1e-15 * k && step_s.abs() < 1e-15 {
            converged = res.norm() < 1e-10;
            break;
        }
    }
    if !converged {
        return Err(FluxError::Construction(format!(
            "Newton did not converge (|residual| = {:e}); try a smaller epsilon",
            res.norm()
        )));
    }
    if (sigma - 1.0).abs() > 0.5 {
        return Err(FluxError::Construction(format!("sigma = {sigma} outside |sigma - 1| <= 1/2")));
    }
    let mut recipe = W0Recipe {
        gamma: params.gamma,
        p: params.p,
        z_a,
        z_b,
        epsilon,
        a: 1.0 / cur.pa.norm(),
        b: sigma / cur.pb.norm(),
        sigma,
        k_star: k,
    };
    recipe.validate()?;
    let w0 = build_w0(&recipe);
    let bp = find_kstar(&w0, k_scan, opts)?;
    recipe.k_star = bp.k_star;
    Ok((w0, bp, recipe))
}

#[derive(Debug, Clone)]
pub struct PerturbationPair {
    pub w11: LogKernel,
    pub w12: LogKernel,
    pub z1: f64,
    pub z2: f64,
    /// Columns (Re Psi(k*; W1j), -Im Psi(k*; W1j)).
    pub dual_matrix: [[f64; 2]; 2],
    /// Rows are the dual forms l1, l2 acting on (cos, sin) coordinates.
    pub dual_inverse: [[f64; 2]; 2],
}

impl PerturbationPair {
    /// (l1(w), l2(w)) for w = A cos(k* X) + B sin(k* X).
    pub fn dual_forms(&self, cos_sin: [f64; 2]) -> [f64; 2] {
        let m = &self.dual_inverse;
        [
            m[0][0] * cos_sin[0] + m[0][1] * cos_sin[1],
            m[1][0] * cos_sin[0] + m[1][1] * cos_sin[1],
        ]
    }
}

pub const COND_FLOOR: f64 = 0.05;

fn invert2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Chooses two Gaussian bump positions in `z_search` maximizing |det M|.
pub fn build_perturbations(
    k_star: f64,
    epsilon: f64,
    z_search: (f64, f64),
    q: f64,
    spec: &QuadratureSpec,
) -> Result<PerturbationPair> {
    let n = 64;
    let zs: Vec<f64> = (0..n).map(|i| z_search.0 + (z_search.1 - z_search.0) * i as f64 / (n - 1) as f64).collect();
    let psis: Vec<Complex64> = zs
        .par_iter()
        .map(|&z| eval_psi_term(k_star, 1.0, &bump(z, epsilon), q, spec))
        .collect::<Result<_>>()?;
    let mut best = (0usize, 0usize, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let det = (psis[i].re * -psis[j].im - psis[j].re * -psis[i].im).abs();
            if det > best.2 {
                best = (i, j, det);
            }
        }
    }
    let (i, j, det) = best;
    let m = [[psis[i].re, psis[j].re], [-psis[i].im, -psis[j].im]];
    let fro2: f64 = m.iter().flatten().map(|x| x * x).sum();
    if !(det >= COND_FLOOR * fro2) {
        return Err(FluxError::Construction(format!(
            "no perturbation pair with |det M| >= {COND_FLOOR} |M|^2 (best {det:e} vs {fro2:e})"
        )));
    }
    Ok(pair_from_parts(zs[i], zs[j], epsilon, q, m))
}

fn pair_from_parts(z1: f64, z2: f64, epsilon: f64, q: f64, m: [[f64; 2]; 2]) -> PerturbationPair {
    let mk = |z: f64| LogKernel::from_terms(vec![(1.0, bump(z, epsilon))], q);
    PerturbationPair { w11: mk(z1), w12: mk(z2), z1, z2, dual_matrix: m, dual_inverse: invert2(&m) }
}

/// Perturbation pair with bumps at given positions (used when reloading a manifest).
pub fn perturbation_pair_at(
    k_star: f64,
    epsilon: f64,
    z1: f64,
    z2: f64,
    q: f64,
    spec: &QuadratureSpec,
) -> Result<PerturbationPair> {
    let p1 = eval_psi_term(k_star, 1.0, &bump(z1, epsilon), q, spec)?;
    let p2 = eval_psi_term(k_star, 1.0, &bump(z2, epsilon), q, spec)?;
    let m = [[p1.re, p2.re], [-p1.im, -p2.im]];
    if m[0][0] * m[1][1] - m[0][1] * m[1][0] == 0.0 {
        return Err(FluxError::Construction(format!("bumps at {z1} and {z2} do not span Z1")));
    }
    Ok(pair_from_parts(z1, z2, epsilon, q, m))
}

/// Psi(k; W0) split by building block, for diagnostics.
pub fn psi_w0(k: f64, recipe: &W0Recipe, spec: &QuadratureSpec) -> Result<Complex64> {
    eval_psi_with(k, &build_w0(recipe), spec)
}
