//! Fixed-point solution of the projected bifurcation system for
//! (alpha1, alpha2, psi), and assembly of the periodic profile H.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FluxError, Result};
use crate::kernelspace::{check_grid, LogKernel};
use crate::numerics::QuadratureSpec;
use crate::spectral::{
    bilinear_fourier, build_symbol_table, load_or_build_table, AwInverse, PeriodicField, Projection, SymbolTable,
};
use crate::w0builder::{PerturbationPair, W0Recipe};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Weight of the psi component in the iteration metric.
    pub m_weight: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations exempt from the contraction check.
    pub burn_in: usize,
    /// Largest tolerated ratio of successive distances after burn-in.
    pub max_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { m_weight: 10.0, tol: 1e-12, max_iter: 50, burn_in: 3, max_ratio: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub s: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub psi: PeriodicField,
    pub iter: usize,
    pub dist_history: Vec<f64>,
}

impl SolverState {
    pub fn origin(s: f64, n_max: usize, k_star: f64) -> Self {
        Self { s, alpha1: 0.0, alpha2: 0.0, psi: PeriodicField::zeros(n_max, k_star), iter: 0, dist_history: vec![] }
    }

    pub fn u(&self) -> PeriodicField {
        PeriodicField::cosine(self.s, 1, self.psi.n_max, self.psi.k_star).add(&self.psi)
    }

    pub fn h_tilde(&self) -> PeriodicField {
        PeriodicField::constant(1.0, self.psi.n_max, self.psi.k_star).add(&self.u())
    }

    /// |alpha1| + |alpha2| <= M |s| and ||psi||_{H^1} <= |s|.
    pub fn in_trust_region(&self, m_weight: f64) -> bool {
        let s = self.s.abs();
        self.alpha1.abs() + self.alpha2.abs() <= m_weight * s && self.psi.norm(1.0) <= s
    }

    pub fn dist(&self, other: &Self, m_weight: f64) -> f64 {
        (self.alpha1 - other.alpha1).abs()
            + (self.alpha2 - other.alpha2).abs()
            + m_weight * self.psi.sub(&other.psi).norm(1.0)
    }

    /// Largest ratio of successive distances after `burn_in` iterations.
    pub fn contraction_ratio(&self, burn_in: usize) -> f64 {
        self.dist_history
            .windows(2)
            .skip(burn_in.saturating_sub(1))
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

/// Everything the map T needs: the symbol tables of W0, W11, W12, the
/// diagonal of A_{W0} and the dual forms on Z1.
#[derive(Debug, Clone)]
pub struct SolverContext {
    pub k_star: f64,
    pub n_max: usize,
    pub q: f64,
    pub w0: LogKernel,
    pub pair: PerturbationPair,
    pub t0: SymbolTable,
    pub t11: SymbolTable,
    pub t12: SymbolTable,
    pub aw: AwInverse,
    /// Dual forms built from the table values of Psi(k*; W1j).
    pub dual_inverse: [[f64; 2]; 2],
}

impl SolverContext {
    /// `margin` is the smallest admissible |Psi(n k*; W0)| for 2 <= n <= N.
    pub fn new(
        w0: &LogKernel,
        pair: &PerturbationPair,
        k_star: f64,
        n_max: usize,
        margin: f64,
        spec: &QuadratureSpec,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        let table = |w: &LogKernel| match cache_dir {
            Some(dir) => load_or_build_table(w, k_star, n_max, spec, dir),
            None => build_symbol_table(w, k_star, n_max, spec),
        };
        let t0 = table(w0)?;
        let t11 = table(&pair.w11)?;
        let t12 = table(&pair.w12)?;
        let aw = AwInverse::from_table(&t0, margin)?;
        let (p1, p2) = (t11.psi(1), t12.psi(1));
        let m = [[p1.re, p2.re], [-p1.im, -p2.im]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(det.abs() > 0.0) {
            return Err(FluxError::Solver("perturbation pair does not span Z1".into()));
        }
        let dual_inverse = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        Ok(Self { k_star, n_max, q: w0.q, w0: w0.clone(), pair: pair.clone(), t0, t11, t12, aw, dual_inverse })
    }

    pub fn table(&self, alpha1: f64, alpha2: f64) -> Result<SymbolTable> {
        SymbolTable::combine(&[(1.0, &self.t0), (alpha1, &self.t11), (alpha2, &self.t12)])
    }

    pub fn kernel(&self, alpha1: f64, alpha2: f64) -> LogKernel {
        self.w0.plus(&self.pair.w11.scaled(alpha1)).plus(&self.pair.w12.scaled(alpha2))
    }

    fn dual(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.dual_inverse;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }
}

/// One application of T. The alpha update solves
/// s P1 L(phi; W1') = -P1 B(U, U; W0 + W1) - s P1 L(phi; W0) on Z1; the psi update is
/// psi' = -A_{W0}^{-1} P2 [L(psi; W1) + B(U, U; W0 + W1)].
pub fn t_map(state: &SolverState, ctx: &SolverContext) -> Result<SolverState> {
    let s = state.s;
    if s == 0.0 {
        let mut next = state.clone();
        next.iter += 1;
        return Ok(next);
    }
    let u = state.u();
    let table = ctx.table(state.alpha1, state.alpha2)?;
    let b = bilinear_fourier(&u, &u, &table)?;
    let c = b.p1_cos_sin();
    let psi0 = ctx.t0.psi(1);
    let rhs = [-c[0] / s - psi0.re, -c[1] / s + psi0.im];
    let [alpha1, alpha2] = ctx.dual(rhs);
    let mut f = b.with_bandwidth(ctx.n_max).project(Projection::P2);
    for n in f.modes().collect::<Vec<_>>() {
        if n.abs() < 2 {
            continue;
        }
        let l1 = ctx.t11.psi(n) * state.alpha1 + ctx.t12.psi(n) * state.alpha2;
        f.set(n, -(f.coeff(n) + l1 * state.psi.coeff(n)));
    }
    let psi = ctx.aw.apply_inverse(&f)?;
    Ok(SolverState {
        s,
        alpha1,
        alpha2,
        psi,
        iter: state.iter + 1,
        dist_history: state.dist_history.clone(),
    })
}

/// Iterates T from (0, 0, 0) until the distance between iterates drops below `tol`.
pub fn fixed_point_solve(s: f64, ctx: &SolverContext, opts: &SolverOptions) -> Result<SolverState> {
    let mut state = SolverState::origin(s, ctx.n_max, ctx.k_star);
    if s == 0.0 {
        return Ok(state);
    }
    for _ in 0..opts.max_iter {
        let mut next = t_map(&state, ctx)?;
        let d = next.dist(&state, opts.m_weight);
        if !d.is_finite() {
            return Err(FluxError::NonFinite(d));
        }
        next.dist_history.push(d);
        let k = next.dist_history.len();
        if k > opts.burn_in + 1 {
            let ratio = d / next.dist_history[k - 2];
            if ratio >= 1.0 && d > opts.tol {
                return Err(FluxError::Solver(format!(
                    "no contraction at s = {s} (distance ratio {ratio:.3} at iteration {k}); try a smaller s"
                )));
            }
        }
        state = next;
        if d < opts.tol {
            return Ok(state);
        }
    }
    Err(FluxError::Solver(format!(
        "no convergence in {} iterations at s = {s} (last distance {:e})",
        opts.max_iter,
        state.dist_history.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Halves s from `s0` until the iteration converges; returns the state and the s used.
pub fn solve_with_halving(s0: f64, ctx: &SolverContext, opts: &SolverOptions, max_halvings: usize) -> Result<SolverState> {
    let mut s = s0;
    let mut last = None;
    for _ in 0..=max_halvings {
        match fixed_point_solve(s, ctx, opts) {
            Ok(st) => return Ok(st),
            Err(e @ FluxError::Solver(_)) => {
                last = Some(e);
                s /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| FluxError::Solver("no halvings attempted".into())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// ||P1 B(H~, H~; W)||, in the H^1 norm.
    pub p1: f64,
    /// ||P2 B(H~, H~; W)||_{H^{1/2-q}}.
    pub p2: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub s: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub h_tilde: PeriodicField,
    pub h: PeriodicField,
    pub kernel: LogKernel,
    pub k_star: f64,
    pub k0: f64,
    pub j0: f64,
    pub gamma: f64,
    pub recipe: W0Recipe,
    pub residuals: Residuals,
    pub kernel_min: f64,
}

impl Solution {
    /// Q = e^{2 pi / k*}.
    pub fn q_dilation(&self) -> f64 {
        (self.h.period()).exp()
    }

    pub fn back_transform(&self, x: f64) -> f64 {
        back_transform(self, x)
    }

    pub fn power_law(&self, x: f64) -> f64 {
        self.h.coeff(0).re * x.powf(-(self.gamma + 3.0) / 2.0)
    }
}

/// H~ = 1 + U, K0 = P0 B(H~, H~; W), H = sqrt(J0 / K0) H~; fails when the
/// perturbed kernel is not positive on the check grid.
pub fn assemble_solution(state: &SolverState, ctx: &SolverContext, j0: f64, recipe: &W0Recipe) -> Result<Solution> {
    let sol = assemble_profile(state, ctx, j0, recipe)?;
    if !(sol.kernel_min > 0.0) {
        return Err(FluxError::Solver(format!(
            "perturbed kernel not positive (min {:e} on the check grid); reduce s",
            sol.kernel_min
        )));
    }
    Ok(sol)
}

/// As `assemble_solution`, without the positivity check.
pub fn assemble_profile(state: &SolverState, ctx: &SolverContext, j0: f64, recipe: &W0Recipe) -> Result<Solution> {
    if !(j0 > 0.0) {
        return Err(FluxError::InvalidParameter(format!("J0 must be positive, got {j0}")));
    }
    let h_tilde = state.h_tilde();
    let table = ctx.table(state.alpha1, state.alpha2)?;
    let b = bilinear_fourier(&h_tilde, &h_tilde, &table)?;
    let k0 = b.coeff(0).re;
    if !(k0 > 0.0) {
        return Err(FluxError::Solver(format!("non-positive flux constant K0 = {k0}")));
    }
    let residuals = Residuals {
        p1: b.project(Projection::P1).norm(1.0),
        p2: b.with_bandwidth(ctx.n_max).project(Projection::P2).norm(0.5 - ctx.q),
    };
    let kernel = ctx.kernel(state.alpha1, state.alpha2);
    let kernel_min = kernel.min_on_grid(&check_grid());
    let h = h_tilde.scale((j0 / k0).sqrt());
    Ok(Solution {
        s: state.s,
        alpha1: state.alpha1,
        alpha2: state.alpha2,
        h_tilde,
        h,
        kernel,
        k_star: ctx.k_star,
        k0,
        j0,
        gamma: recipe.gamma,
        recipe: *recipe,
        residuals,
        kernel_min,
    })
}

/// f(x) = H(ln x) x^{-(gamma+3)/2}.
pub fn back_transform(sol: &Solution, x: f64) -> f64 {
    sol.h.eval(x.ln()) * x.powf(-(sol.gamma + 3.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelspace::KernelTerm;
    use crate::symbol::eval_psi_with;

    /// Toy setting with cheap tables: W0 = two bumps tuned so that Psi(k*) = 0
    /// by adding a multiple of a third bump.
    fn toy() -> (SolverContext, W0Recipe) {
        let spec = QuadratureSpec::default();
        let k = 3.0;
        let bump = |c: f64| LogKernel::from_terms(vec![(1.0, KernelTerm::Bump { center: c, width: 0.05 })], 0.0);
        let (wa, wb, wc) = (bump(1.0), bump(2.0), bump(0.5));
        let pa = eval_psi_with(k, &wa, &spec).unwrap();
        let pb = eval_psi_with(k, &wb, &spec).unwrap();
        let pc = eval_psi_with(k, &wc, &spec).unwrap();
        // solve x pb + y pc = -pa (real x, y)
        let det = pb.re * pc.im - pc.re * pb.im;
        let x = (-pa.re * pc.im + pc.re * pa.im) / det;
        let y = (-pb.re * pa.im + pa.re * pb.im) / det;
        let w0 = wa.plus(&wb.scaled(x)).plus(&wc.scaled(y));
        assert!(eval_psi_with(k, &w0, &spec).unwrap().norm() < 1e-12);
        let mk = |c: f64| {
            let w = bump(c);
            (w.clone(), eval_psi_with(k, &w, &spec).unwrap())
        };
        let ((w11, p11), (w12, p12)) = (mk(1.3), mk(1.6));
        let m = [[p11.re, p12.re], [-p11.im, -p12.im]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let pair = PerturbationPair {
            w11,
            w12,
            z1: 1.3,
            z2: 1.6,
            dual_matrix: m,
            dual_inverse: [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]],
        };
        let ctx = SolverContext::new(&w0, &pair, k, 8, 1e-8, &spec, None).unwrap();
        let recipe =
            W0Recipe { gamma: 0.0, p: 0.0, z_a: 2.0, z_b: 1.0, epsilon: 0.05, a: 1.0, b: x, sigma: 1.0, k_star: k };
        (ctx, recipe)
    }

    #[test]
    fn zero_amplitude_is_fixed() {
        let (ctx, _) = toy();
        let st = fixed_point_solve(0.0, &ctx, &SolverOptions::default()).unwrap();
        assert_eq!(st.iter, 0);
        assert_eq!(t_map(&st, &ctx).unwrap().psi, st.psi);
    }

    #[test]
    fn alpha_zero_matches_no_perturbation() {
        let (ctx, _) = toy();
        let mut st = SolverState::origin(0.01, ctx.n_max, ctx.k_star);
        st.psi = PeriodicField::cosine(1e-4, 2, ctx.n_max, ctx.k_star);
        let a = t_map(&st, &ctx).unwrap();
        let bare = SolverContext { t11: SymbolTable::combine(&[(0.0, &ctx.t11)]).unwrap(), ..ctx.clone() };
        let b = t_map(&st, &SolverContext { dual_inverse: ctx.dual_inverse, ..bare }).unwrap();
        assert_eq!(a.psi, b.psi);
    }

    #[test]
    fn toy_fixed_point_solves_projected_system() {
        let (ctx, recipe) = toy();
        let opts = SolverOptions::default();
        let st = fixed_point_solve(0.01, &ctx, &opts).unwrap();
        assert!(*st.dist_history.last().unwrap() < 1e-12);
        let sol = assemble_profile(&st, &ctx, 1.0, &recipe).unwrap();
        assert!(sol.residuals.p1 < 1e-11 && sol.residuals.p2 < 1e-11, "{:?}", sol.residuals);
        let half = fixed_point_solve(0.005, &ctx, &opts).unwrap();
        let r = st.psi.norm(1.0) / half.psi.norm(1.0);
        assert!((3.0..=5.0).contains(&r), "{r}");
        let q = sol.q_dilation();
        for x in [1.0, 2.7, 10.0] {
            let f = back_transform(&sol, x);
            assert!((back_transform(&sol, q * x) * q.powf(1.5) - f).abs() < 1e-10 * f);
        }
    }
}
