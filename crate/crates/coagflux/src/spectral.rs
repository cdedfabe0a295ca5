//! Periodic fields in Fourier form, Sobolev norms, the projections P0/P1/P2,
//! the interaction table J(n, l), the Fourier form of B and the diagonal
//! operators L and A_W.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FluxError, Result};
use crate::kernelspace::{KernelTerm, LogKernel};
use crate::numerics::{bracket_over_ik, integrate, softplus, QuadratureSpec};
use crate::symbol::{eval_psi_with, psi_zmax};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Real T-periodic function, T = 2 pi / k_star, stored as a_n for |n| <= N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    pub k_star: f64,
    pub n_max: usize,
    coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    P0,
    P1,
    P2,
}

impl PeriodicField {
    pub fn zeros(n_max: usize, k_star: f64) -> Self {
        Self { k_star, n_max, coeffs: vec![ZERO; 2 * n_max + 1] }
    }

    pub fn constant(c: f64, n_max: usize, k_star: f64) -> Self {
        let mut f = Self::zeros(n_max, k_star);
        f.set(0, Complex64::new(c, 0.0));
        f
    }

    /// amp * cos(n k_star X).
    pub fn cosine(amp: f64, n: usize, n_max: usize, k_star: f64) -> Self {
        let mut f = Self::zeros(n_max, k_star);
        f.set_hermitian(n as i64, Complex64::new(0.5 * amp, 0.0));
        f
    }

    /// Random real field: a_0 = mean, |a_n| <= spread / n for 1 <= n <= N.
    pub fn random<R: Rng>(rng: &mut R, mean: f64, spread: f64, n_max: usize, k_star: f64) -> Self {
        let mut f = Self::constant(mean, n_max, k_star);
        for n in 1..=n_max as i64 {
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (0.5 * spread / n as f64);
            f.set_hermitian(n, a);
        }
        f
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.k_star
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            ZERO
        } else {
            self.coeffs[(n + self.n_max as i64) as usize]
        }
    }

    pub fn set(&mut self, n: i64, v: Complex64) {
        let idx = (n + self.n_max as i64) as usize;
        self.coeffs[idx] = v;
    }

    /// Sets a_n and a_{-n} = conj(a_n).
    pub fn set_hermitian(&mut self, n: i64, v: Complex64) {
        self.set(n, v);
        self.set(-n, v.conj());
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let n = self.n_max as i64;
        -n..=n
    }

    pub fn eval_complex(&self, x: f64) -> Complex64 {
        let step = Complex64::from_polar(1.0, self.k_star * x);
        let mut ph = step;
        let mut acc = self.coeff(0);
        for n in 1..=self.n_max as i64 {
            acc += self.coeff(n) * ph + self.coeff(-n) * ph.conj();
            ph *= step;
        }
        acc
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_complex(x).re
    }

    pub fn derivative(&self) -> Self {
        let mut d = self.clone();
        for n in self.modes() {
            d.set(n, self.coeff(n) * Complex64::new(0.0, n as f64 * self.k_star));
        }
        d
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.modes().map(|n| (self.coeff(-n) - self.coeff(n).conj()).norm()).fold(0.0, f64::max)
    }

    /// Resized copy; modes beyond the new bandwidth are dropped.
    pub fn with_bandwidth(&self, n_max: usize) -> Self {
        let mut f = Self::zeros(n_max, self.k_star);
        for n in f.modes().collect::<Vec<_>>() {
            f.set(n, self.coeff(n));
        }
        f
    }

    /// Shift in X: returns g with g(X) = f(X + c).
    pub fn translated(&self, c: f64) -> Self {
        let mut g = self.clone();
        for n in self.modes() {
            g.set(n, self.coeff(n) * Complex64::from_polar(1.0, n as f64 * self.k_star * c));
        }
        g
    }

    pub fn map_coeffs(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Self {
        let mut g = self.clone();
        for n in self.modes() {
            g.set(n, f(n, self.coeff(n)));
        }
        g
    }

    pub fn add(&self, other: &Self) -> Self {
        let n_max = self.n_max.max(other.n_max);
        let mut out = Self::zeros(n_max, self.k_star);
        for n in out.modes().collect::<Vec<_>>() {
            out.set(n, self.coeff(n) + other.coeff(n));
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_coeffs(|_, a| a * c)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// (sum (1 + |n|^{2s}) |a_n|^2)^{1/2}; the n = 0 weight is 1 for s > 0.
    pub fn norm(&self, s: f64) -> f64 {
        self.modes()
            .map(|n| {
                let w = if n == 0 { if s > 0.0 { 1.0 } else { 2.0 } } else { 1.0 + (n.abs() as f64).powf(2.0 * s) };
                w * self.coeff(n).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// (int_0^T |f|^2 + |f'|^2 dX)^{1/2}, via Parseval.
    pub fn h1_integral_norm(&self) -> f64 {
        let t = self.period();
        let k = self.k_star;
        (t * self.modes().map(|n| (1.0 + (n as f64 * k).powi(2)) * self.coeff(n).norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn project(&self, which: Projection) -> Self {
        self.map_coeffs(|n, a| {
            let keep = match which {
                Projection::P0 => n == 0,
                Projection::P1 => n.abs() == 1,
                Projection::P2 => n.abs() >= 2,
            };
            if keep { a } else { ZERO }
        })
    }

    /// (A, B) with P1 f = A cos(k X) + B sin(k X).
    pub fn p1_cos_sin(&self) -> [f64; 2] {
        let c1 = self.coeff(1);
        [2.0 * c1.re, -2.0 * c1.im]
    }

    /// max - min over a uniform grid of `samples` points in one period, halved.
    pub fn oscillation_amplitude(&self, samples: usize) -> f64 {
        let t = self.period();
        let v: Vec<f64> = (0..samples).map(|i| self.eval(t * i as f64 / samples as f64)).collect();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        0.5 * (max - min)
    }
}

pub fn norm(f: &PeriodicField, s: f64) -> f64 {
    f.norm(s)
}

pub fn project(f: &PeriodicField, which: Projection) -> PeriodicField {
    f.project(which)
}

/// Interaction coefficients J(n, l) for |n| <= N and |l - n| <= N
/// (other entries in |l| <= 2N are never used and left at zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolTable {
    pub k_star: f64,
    pub n_max: usize,
    pub kernel_id: String,
    jhat: Vec<Complex64>,
}

impl SymbolTable {
    fn width(&self) -> usize {
        4 * self.n_max + 1
    }

    fn index(&self, n: i64, l: i64) -> Option<usize> {
        let nm = self.n_max as i64;
        if n.abs() > nm || (l - n).abs() > nm {
            return None;
        }
        Some((n + nm) as usize * self.width() + (l + 2 * nm) as usize)
    }

    pub fn get(&self, n: i64, l: i64) -> Complex64 {
        self.index(n, l).map(|i| self.jhat[i]).unwrap_or(ZERO)
    }

    pub fn covers(&self, n: i64, l: i64) -> bool {
        self.index(n, l).is_some()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let nm = self.n_max as i64;
        (-nm..=nm).flat_map(move |n| (n - nm..=n + nm).map(move |l| (n, l)))
    }

    fn empty(k_star: f64, n_max: usize, kernel_id: String) -> Self {
        Self { k_star, n_max, kernel_id, jhat: vec![ZERO; (2 * n_max + 1) * (4 * n_max + 1)] }
    }

    /// sum_i c_i T_i for tables on the same grid.
    pub fn combine(parts: &[(f64, &SymbolTable)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| FluxError::Truncation("empty combination".into()))?.1;
        let mut out = Self::empty(first.k_star, first.n_max, "combination".into());
        for (c, t) in parts {
            if t.n_max != first.n_max || t.k_star != first.k_star {
                return Err(FluxError::Truncation("tables on different grids".into()));
            }
            for (o, v) in out.jhat.iter_mut().zip(&t.jhat) {
                *o += v * c;
            }
        }
        Ok(out)
    }

    /// Psi(n k_star) recovered from the table as J(n, n) + J(0, n).
    pub fn psi(&self, n: i64) -> Complex64 {
        self.get(n, n) + self.get(0, n)
    }

    pub fn conjugate_residual(&self) -> f64 {
        self.entries().map(|(n, l)| (self.get(-n, -l) - self.get(n, l).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.jhat.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn cache_key(w: &LogKernel, k_star: f64, n_max: usize, spec: &QuadratureSpec) -> Option<String> {
        let desc = w.describe()?;
        let mut h = Sha256::new();
        h.update(desc.as_bytes());
        h.update(k_star.to_bits().to_le_bytes());
        h.update((n_max as u64).to_le_bytes());
        h.update(spec.abs_tol.to_bits().to_le_bytes());
        h.update(spec.rel_tol.to_bits().to_le_bytes());
        h.update(spec.phase_per_panel.to_bits().to_le_bytes());
        Some(format!("{:x}", h.finalize()))
    }
}

fn jhat_weight(xi: f64, n: i64, l: i64, k: f64) -> Complex64 {
    let e = Complex64::from_polar((-0.5 * xi).exp(), n as f64 * k * xi);
    e * bracket_over_ik(softplus(xi), l as f64 * k)
}

/// J(n, l) for a single kernel term (weight 1).
pub fn jhat_term(term: &KernelTerm, q: f64, n: i64, l: i64, k: f64, spec: &QuadratureSpec) -> Result<Complex64> {
    let tspec = spec.with_freq((n.abs() + l.abs()) as f64 * k);
    let f = |xi: f64| jhat_weight(xi, n, l, k) * term.eval_abs(xi.abs());
    match term.support() {
        Some((a, b)) => {
            let one = LogKernel::from_terms(vec![(1.0, term.clone())], q);
            let feats = one.features();
            let neg: Vec<f64> = feats.iter().map(|x| -x).collect();
            Ok(integrate(f, a, b, &feats, &tspec)?.value + integrate(f, -b, -a, &neg, &tspec)?.value)
        }
        None => {
            let one = LogKernel::from_terms(vec![(1.0, term.clone())], q);
            let z = psi_zmax(100.0 * one.envelope_const, q, spec.abs_tol);
            Ok(integrate(f, -z, z, &[0.0], &tspec)?.value)
        }
    }
}

/// Table of J(n, l) = int e^{-xi/2} e^{i n k xi} W(xi) (1 - e^{-i l k L})/(i l k) dxi,
/// L = ln(e^xi + 1), with the l = 0 limit L. Built term by term.
pub fn build_symbol_table(w: &LogKernel, k_star: f64, n_max: usize, spec: &QuadratureSpec) -> Result<SymbolTable> {
    let id = SymbolTable::cache_key(w, k_star, n_max, spec).unwrap_or_else(|| "uncached".into());
    let mut table = SymbolTable::empty(k_star, n_max, id);
    // half of the entries; the rest follow from J(-n,-l) = conj J(n,l)
    let half: Vec<(i64, i64)> = table.entries().filter(|&(n, l)| n > 0 || (n == 0 && l >= 0)).collect();
    let nterms = w.terms().len().max(1) as f64;
    let values: Vec<Complex64> = half
        .par_iter()
        .map(|&(n, l)| {
            let mut acc = ZERO;
            for (c, t) in w.terms() {
                let tspec = QuadratureSpec { abs_tol: spec.abs_tol / (nterms * c.abs().max(1e-300)), ..*spec };
                acc += jhat_term(t, w.q, n, l, k_star, &tspec)? * *c;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    for (&(n, l), v) in half.iter().zip(values) {
        let i = table.index(n, l).unwrap();
        table.jhat[i] = v;
        let j = table.index(-n, -l).unwrap();
        table.jhat[j] = if n == 0 && l == 0 { Complex64::new(v.re, 0.0) } else { v.conj() };
    }
    Ok(table)
}

/// Loads the table from `dir` when a sidecar with the matching key exists,
/// otherwise builds and stores it. Kernels holding closures are never cached.
pub fn load_or_build_table(
    w: &LogKernel,
    k_star: f64,
    n_max: usize,
    spec: &QuadratureSpec,
    dir: &Path,
) -> Result<SymbolTable> {
    let Some(key) = SymbolTable::cache_key(w, k_star, n_max, spec) else {
        return build_symbol_table(w, k_star, n_max, spec);
    };
    let path = dir.join(format!("jtable_{}.json", &key[..16]));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(t) = serde_json::from_str::<SymbolTable>(&text) {
            if t.kernel_id == key {
                return Ok(t);
            }
        }
    }
    let t = build_symbol_table(w, k_star, n_max, spec)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(&path, serde_json::to_string(&t)?)?;
    Ok(t)
}

/// c_l = sum_{m+n=l} J(n, l) a_m b_n, for |l| <= 2N.
pub fn bilinear_fourier(u1: &PeriodicField, u2: &PeriodicField, table: &SymbolTable) -> Result<PeriodicField> {
    let n_max = u1.n_max.max(u2.n_max);
    if n_max > table.n_max {
        return Err(FluxError::Truncation(format!(
            "fields need N = {n_max} but the table has N = {}",
            table.n_max
        )));
    }
    if u1.k_star != table.k_star || u2.k_star != table.k_star {
        return Err(FluxError::Truncation("k_star mismatch between fields and table".into()));
    }
    let mut out = PeriodicField::zeros(2 * n_max, table.k_star);
    let nm = n_max as i64;
    for l in -2 * nm..=2 * nm {
        let mut acc = ZERO;
        for n in (l - nm).max(-nm)..=(l + nm).min(nm) {
            let m = l - n;
            let b = u2.coeff(n);
            let a = u1.coeff(m);
            if a == ZERO || b == ZERO {
                continue;
            }
            acc += table.get(n, l) * a * b;
        }
        out.set(l, acc);
    }
    Ok(out)
}

/// (L f)_n = Psi(n k*) a_n with Psi read off the table.
pub fn linearized_l(f: &PeriodicField, table: &SymbolTable) -> PeriodicField {
    f.map_coeffs(|n, a| table.psi(n) * a)
}

/// (L f)_n = Psi(n k*; W) a_n with Psi from the symbol module.
pub fn linearized_l_kernel(f: &PeriodicField, w: &LogKernel, spec: &QuadratureSpec) -> Result<PeriodicField> {
    let mut g = f.clone();
    for n in f.modes() {
        g.set(n, eval_psi_with(n as f64 * f.k_star, w, spec)? * f.coeff(n));
    }
    Ok(g)
}

/// Diagonal of A_W on Z2: Psi(n k*) for 2 <= |n| <= N.
#[derive(Debug, Clone)]
pub struct AwInverse {
    pub k_star: f64,
    pub n_max: usize,
    psi: Vec<Complex64>,
}

impl AwInverse {
    fn check(psi: &[Complex64], margin: f64) -> Result<()> {
        for (i, v) in psi.iter().enumerate().skip(2) {
            if v.norm() < margin {
                return Err(FluxError::NearZeroSymbol { mode: i as i64, value: v.norm(), margin });
            }
        }
        Ok(())
    }

    pub fn from_table(table: &SymbolTable, margin: f64) -> Result<Self> {
        let psi: Vec<Complex64> = (0..=table.n_max as i64).map(|n| table.psi(n)).collect();
        Self::check(&psi, margin)?;
        Ok(Self { k_star: table.k_star, n_max: table.n_max, psi })
    }

    pub fn from_kernel(w: &LogKernel, k_star: f64, n_max: usize, margin: f64, spec: &QuadratureSpec) -> Result<Self> {
        let psi: Vec<Complex64> =
            (0..=n_max).map(|n| eval_psi_with(n as f64 * k_star, w, spec)).collect::<Result<_>>()?;
        Self::check(&psi, margin)?;
        Ok(Self { k_star, n_max, psi })
    }

    pub fn symbol(&self, n: i64) -> Complex64 {
        let v = self.psi[n.unsigned_abs() as usize];
        if n < 0 { v.conj() } else { v }
    }

    pub fn apply(&self, f: &PeriodicField) -> PeriodicField {
        f.project(Projection::P2).map_coeffs(|n, a| {
            if n.unsigned_abs() as usize <= self.n_max { a * self.symbol(n) } else { ZERO }
        })
    }

    pub fn apply_inverse(&self, f: &PeriodicField) -> Result<PeriodicField> {
        if f.coeff(0) != ZERO || f.coeff(1) != ZERO || f.coeff(-1) != ZERO {
            return Err(FluxError::Truncation("A_W^{-1} needs a field in Z2".into()));
        }
        if f.n_max > self.n_max {
            return Err(FluxError::Truncation("field bandwidth exceeds the A_W diagonal".into()));
        }
        Ok(f.map_coeffs(|n, a| if n.abs() >= 2 { a / self.symbol(n) } else { ZERO }))
    }

    /// max_n (1+n^2)^{1/2} / ((1+|n|^{2s'})^{1/2} |Psi(n k*)|), s' = 1/2 - q.
    pub fn norm_surrogate(&self, q: f64) -> f64 {
        let s = 0.5 - q;
        (2..=self.n_max)
            .map(|n| {
                let n = n as f64;
                (1.0 + n * n).sqrt() / ((1.0 + n.powf(2.0 * s)).sqrt() * self.psi[n as usize].norm())
            })
            .fold(0.0, f64::max)
    }
}

pub fn apply_aw_inverse(f: &PeriodicField, aw: &AwInverse) -> Result<PeriodicField> {
    aw.apply_inverse(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const K: f64 = 19.5;

    #[test]
    fn norm_examples() {
        let one = PeriodicField::constant(1.0, 4, K);
        assert_eq!(one.norm(1.0), 1.0);
        let c = PeriodicField::cosine(1.0, 1, 4, K);
        assert!((c.norm(1.0) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = PeriodicField::random(&mut rng, 0.0, 1.0, 6, K);
        assert!(f.norm(0.5) <= f.norm(1.0) && f.norm(1.0) <= f.norm(2.0));
        // Parseval against a direct integral of |f|^2 + |f'|^2
        let t = f.period();
        let d = f.derivative();
        let m = 4096;
        let direct: f64 = (0..m).map(|i| {
            let x = t * i as f64 / m as f64;
            f.eval(x).powi(2) + d.eval(x).powi(2)
        }).sum::<f64>() * t / m as f64;
        assert!((direct.sqrt() - f.h1_integral_norm()).abs() < 1e-12 * direct.sqrt());
    }

    #[test]
    fn projection_examples() {
        let c2 = PeriodicField::cosine(1.0, 2, 4, K);
        assert_eq!(c2.project(Projection::P1).norm(1.0), 0.0);
        let f = PeriodicField::constant(1.0, 4, K).add(&PeriodicField::cosine(0.3, 1, 4, K));
        assert_eq!(f.project(Projection::P0), PeriodicField::constant(1.0, 4, K));
    }

    #[test]
    fn unit_kernel_table_corner() {
        let w = LogKernel::constant(1.0);
        let spec = QuadratureSpec::default();
        let t = build_symbol_table(&w, K, 2, &spec).unwrap();
        assert!((t.get(0, 0).re - 2.0 * PI).abs() < 1e-11, "{}", t.get(0, 0));
        assert!(t.conjugate_residual() < 1e-14);
        let one = PeriodicField::constant(1.0, 2, K);
        let b = bilinear_fourier(&one, &one, &t).unwrap();
        assert_eq!(b.coeff(0), t.get(0, 0));
        assert!(b.project(Projection::P1).norm(1.0) == 0.0);
    }

    #[test]
    fn table_psi_identity_small() {
        let w = LogKernel::from_terms(vec![(1.0, KernelTerm::Bump { center: 2.0, width: 0.05 })], 0.0);
        let spec = QuadratureSpec::default();
        let t = build_symbol_table(&w, 3.0, 5, &spec).unwrap();
        for n in 1..=5i64 {
            let direct = eval_psi_with(n as f64 * 3.0, &w, &spec).unwrap();
            assert!((t.psi(n) - direct).norm() <= 1e-9 * direct.norm().max(1e-3), "{n}");
        }
    }

    #[test]
    fn bilinear_output_hermitian_and_l_consistent() {
        let w = LogKernel::from_terms(vec![(1.0, KernelTerm::Bump { center: 1.5, width: 0.1 })], 0.0);
        let spec = QuadratureSpec::default();
        let t = build_symbol_table(&w, 4.0, 4, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = PeriodicField::random(&mut rng, 0.0, 1.0, 4, 4.0);
        let g = PeriodicField::random(&mut rng, 1.0, 1.0, 4, 4.0);
        let b = bilinear_fourier(&f, &g, &t).unwrap();
        assert!(b.hermitian_residual() < 1e-12);
        let one = PeriodicField::constant(1.0, 4, 4.0);
        let two_path = bilinear_fourier(&one, &f, &t).unwrap().add(&bilinear_fourier(&f, &one, &t).unwrap());
        let diag = linearized_l(&f, &t);
        assert!(two_path.sub(&diag).norm(1.0) < 1e-10);
        // point evaluation agrees with direct term summation
        for x in [0.1, 0.77, 1.3] {
            let mut direct = ZERO;
            for m in -4i64..=4 {
                for n in -4i64..=4 {
                    let l = m + n;
                    direct += t.get(n, l) * f.coeff(m) * g.coeff(n) * Complex64::from_polar(1.0, l as f64 * 4.0 * x);
                }
            }
            assert!((b.eval_complex(x) - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn aw_round_trip_and_bound() {
        let w = LogKernel::from_terms(vec![(1.0, KernelTerm::Bump { center: 2.0, width: 0.05 })], 0.0);
        let spec = QuadratureSpec::default();
        let t = build_symbol_table(&w, 3.0, 6, &spec).unwrap();
        let aw = AwInverse::from_table(&t, 1e-6).unwrap();
        let c = aw.norm_surrogate(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..32 {
            let f = PeriodicField::random(&mut rng, 0.0, 1.0, 6, 3.0).project(Projection::P2);
            let g = aw.apply_inverse(&f).unwrap();
            assert!(aw.apply(&g).sub(&f).norm(1.0) < 1e-12 * f.norm(1.0));
            assert!(g.norm(1.0) <= c * f.norm(0.5) * (1.0 + 1e-12));
        }
        let z = PeriodicField::zeros(6, 3.0);
        assert_eq!(aw.apply_inverse(&z).unwrap(), z);
    }

    proptest! {
        #[test]
        fn projections_idempotent(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = PeriodicField::random(&mut rng, 0.4, 2.0, 5, K);
            let ps = [Projection::P0, Projection::P1, Projection::P2];
            let mut sum = PeriodicField::zeros(5, K);
            for a in ps {
                let pa = f.project(a);
                prop_assert_eq!(pa.project(a), pa.clone());
                for b in ps {
                    if a != b {
                        prop_assert_eq!(pa.project(b).norm(1.0), 0.0);
                    }
                }
                sum = sum.add(&pa);
            }
            prop_assert_eq!(sum, f);
        }

        #[test]
        fn constants_exact_and_fields_periodic(seed in 0u64..1000, c in -5.0f64..5.0, x in -3.0f64..3.0) {
            prop_assert_eq!(PeriodicField::constant(c, 16, K).eval(x), c);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = PeriodicField::random(&mut rng, c, 1.0, 8, K);
            prop_assert!((f.eval(x + f.period()) - f.eval(x)).abs() < 1e-12);
        }

        #[test]
        fn real_fields_evaluate_real(seed in 0u64..1000, x in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = PeriodicField::random(&mut rng, 0.0, 1.0, 8, K);
            prop_assert!(f.eval_complex(x).im.abs() < 1e-12);
            prop_assert!((f.translated(0.3).eval(x) - f.eval(x + 0.3)).abs() < 1e-12);
        }
    }
}
