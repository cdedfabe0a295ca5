//! End-to-end driver: construct W0, solve for H, verify the flux, and emit
//! manifests and plot data.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, VERSION};
use crate::error::{FluxError, Result};
use crate::fluxcheck::{default_x_grid, period_grid, verify_constant_flux, DirectOptions, FluxReport};
use crate::io::{read_json, write_csv, write_json, Provenance};
use crate::kernelspace::{phi_from_w, validate_params, HomogeneityParams, LogKernel};
use crate::solver::{assemble_solution, fixed_point_solve, Residuals, Solution, SolverContext, SolverOptions, SolverState};
use crate::spectral::PeriodicField;
use crate::symbol::{alignment_product, eval_g, eval_psi_with, psi_on_grid, BifurcationPoint, FindKstarOptions, KRange};
use crate::w0builder::{bump, build_perturbations, build_w0, perturbation_pair_at, solve_bifurcation_kernel, PerturbationPair, W0Recipe};

/// Pipeline stage, which fixes the process exit code on failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Usage,
    Construct,
    Solve,
    Verify,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Usage => 1,
            Stage::Construct => 2,
            Stage::Solve => 3,
            Stage::Verify => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage:?} stage: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: FluxError,
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance { config_hash: cfg.hash(), version: VERSION.to_string() }
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub params: HomogeneityParams,
    pub recipe: W0Recipe,
    pub point: BifurcationPoint,
    pub w0: LogKernel,
    pub pair: PerturbationPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationManifest {
    pub z1: f64,
    pub z2: f64,
    pub epsilon: f64,
    pub dual_matrix: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub recipe: W0Recipe,
    pub bifurcation: BifurcationPoint,
    pub perturbation: PerturbationManifest,
    /// |Psi(n k*; W0)| for n = 1..N.
    pub symbol_moduli: Vec<f64>,
}

pub fn construct(cfg: &RunConfig) -> Result<Construction> {
    cfg.validate()?;
    let params = validate_params(cfg.gamma, cfg.p)?;
    let spec = cfg.quad_spec();
    let opts = FindKstarOptions { k_max: cfg.k_max, spec, ..FindKstarOptions::new(params) };
    let (w0, point, recipe) = solve_bifurcation_kernel(
        cfg.z_a,
        cfg.z_b,
        cfg.epsilon,
        &params,
        KRange::new(cfg.k_scan_lo, cfg.k_scan_hi),
        &opts,
    )?;
    let pair = build_perturbations(point.k_star, cfg.epsilon, (cfg.z_search_lo, cfg.z_search_hi), params.q, &spec)?;
    Ok(Construction { params, recipe, point, w0, pair })
}

impl Construction {
    pub fn manifest(&self, cfg: &RunConfig) -> Result<ConstructManifest> {
        let spec = cfg.quad_spec();
        let symbol_moduli = (1..=cfg.n)
            .map(|n| eval_psi_with(n as f64 * self.point.k_star, &self.w0, &spec).map(|v| v.norm()))
            .collect::<Result<_>>()?;
        Ok(ConstructManifest {
            provenance: provenance(cfg),
            recipe: self.recipe,
            bifurcation: self.point,
            perturbation: PerturbationManifest {
                z1: self.pair.z1,
                z2: self.pair.z2,
                epsilon: self.recipe.epsilon,
                dual_matrix: self.pair.dual_matrix,
            },
            symbol_moduli,
        })
    }

    pub fn from_manifest(m: &ConstructManifest, cfg: &RunConfig) -> Result<Self> {
        let params = m.recipe.params();
        let w0 = build_w0(&m.recipe);
        let p = &m.perturbation;
        let pair = perturbation_pair_at(m.recipe.k_star, p.epsilon, p.z1, p.z2, params.q, &cfg.quad_spec())?;
        Ok(Self { params, recipe: m.recipe, point: m.bifurcation, w0, pair })
    }

    pub fn context(&self, cfg: &RunConfig, cache_dir: Option<&Path>) -> Result<SolverContext> {
        SolverContext::new(
            &self.w0,
            &self.pair,
            self.point.k_star,
            cfg.n,
            1e-3 * self.point.scale,
            &cfg.quad_spec(),
            cache_dir,
        )
    }
}

pub fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions { m_weight: cfg.m, tol: cfg.fp_tol, max_iter: cfg.max_iter, ..SolverOptions::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub recipe: W0Recipe,
    pub perturbation: PerturbationManifest,
    pub s: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub k_star: f64,
    pub n_max: usize,
    pub k0: f64,
    pub j0: f64,
    pub m_weight: f64,
    pub fp_tol: f64,
    pub iterations: usize,
    pub dist_history: Vec<f64>,
    pub residuals: Residuals,
    pub kernel_min: f64,
    pub h: PeriodicField,
}

pub fn solve(cfg: &RunConfig, c: &Construction, cache_dir: Option<&Path>) -> Result<(SolverState, Solution)> {
    let ctx = c.context(cfg, cache_dir)?;
    let state = fixed_point_solve(cfg.s, &ctx, &solver_options(cfg))?;
    let sol = assemble_solution(&state, &ctx, cfg.j0, &c.recipe)?;
    Ok((state, sol))
}

pub fn solution_manifest(cfg: &RunConfig, c: &Construction, state: &SolverState, sol: &Solution) -> SolutionManifest {
    SolutionManifest {
        provenance: provenance(cfg),
        recipe: c.recipe,
        perturbation: PerturbationManifest {
            z1: c.pair.z1,
            z2: c.pair.z2,
            epsilon: c.recipe.epsilon,
            dual_matrix: c.pair.dual_matrix,
        },
        s: sol.s,
        alpha1: sol.alpha1,
        alpha2: sol.alpha2,
        k_star: sol.k_star,
        n_max: sol.h.n_max,
        k0: sol.k0,
        j0: sol.j0,
        m_weight: cfg.m,
        fp_tol: cfg.fp_tol,
        iterations: state.iter,
        dist_history: state.dist_history.clone(),
        residuals: sol.residuals.clone(),
        kernel_min: sol.kernel_min,
        h: sol.h.clone(),
    }
}

impl SolutionManifest {
    /// Rebuilds the solution from the stored profile H and kernel data.
    pub fn to_solution(&self) -> Solution {
        let q = self.recipe.params().q;
        let p = &self.perturbation;
        let bump = |z: f64| LogKernel::from_terms(vec![(1.0, bump(z, p.epsilon))], q);
        let kernel = build_w0(&self.recipe).plus(&bump(p.z1).scaled(self.alpha1)).plus(&bump(p.z2).scaled(self.alpha2));
        let h_tilde = self.h.scale((self.k0 / self.j0).sqrt());
        Solution {
            s: self.s,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            h_tilde,
            h: self.h.clone(),
            kernel,
            k_star: self.k_star,
            k0: self.k0,
            j0: self.j0,
            gamma: self.recipe.gamma,
            recipe: self.recipe,
            residuals: self.residuals.clone(),
            kernel_min: self.kernel_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: FluxReport,
}

/// B(H, H; W) at `verify_points` points of one period and J(x; f) at
/// x in {1, Q^{1/3}, Q^{1/2}, Q^{2/3}, Q, 10 Q}; the x-space tolerance is twice `verify_tol`.
pub fn verify(cfg: &RunConfig, sol: &Solution) -> Result<FluxReport> {
    verify_constant_flux(
        sol,
        &period_grid(sol.k_star, cfg.verify_points),
        &default_x_grid(sol.k_star),
        cfg.verify_tol,
        2.0 * cfg.verify_tol,
        &DirectOptions::default(),
    )
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn write_construct_outputs(cfg: &RunConfig, c: &Construction, dir: &Path) -> Result<ConstructManifest> {
    std::fs::create_dir_all(dir)?;
    let prov = provenance(cfg);
    let m = c.manifest(cfg)?;
    write_json(&dir.join("w0_manifest.json"), &m)?;
    let phi = phi_from_w(&c.w0, &c.params);
    let phi_rows: Vec<Vec<f64>> = (1..1000)
        .map(|i| {
            let s = i as f64 / 1000.0;
            Ok(vec![s, phi.eval(s)?])
        })
        .collect::<Result<_>>()?;
    write_csv(&dir.join("phi.csv"), &prov, &["s", "phi"], &phi_rows)?;
    let w_rows: Vec<Vec<f64>> = linspace(-6.0, 6.0, 2401).into_iter().map(|y| vec![y, c.w0.eval(y)]).collect();
    write_csv(&dir.join("w0.csv"), &prov, &["Y", "W0"], &w_rows)?;
    let ks = linspace(cfg.k_scan_lo, cfg.k_scan_hi, 201);
    let psi = psi_on_grid(&ks, &c.w0, &cfg.quad_spec())?;
    let psi_rows: Vec<Vec<f64>> = ks.iter().zip(&psi).map(|(k, v)| vec![*k, v.re, v.im]).collect();
    write_csv(&dir.join("psi.csv"), &prov, &["k", "Re_psi", "Im_psi"], &psi_rows)?;
    Ok(m)
}

pub fn write_solution_outputs(cfg: &RunConfig, m: &SolutionManifest, sol: &Solution, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let prov = provenance(cfg);
    write_json(&dir.join("solution.json"), m)?;
    let t = 2.0 * PI / sol.k_star;
    let h_rows: Vec<Vec<f64>> = (0..256).map(|i| t * i as f64 / 256.0).map(|x| vec![x, sol.h.eval(x)]).collect();
    write_csv(&dir.join("H.csv"), &prov, &["X", "H"], &h_rows)?;
    let q3 = 3.0 * t;
    let f_rows: Vec<Vec<f64>> = (0..512)
        .map(|i| (q3 * i as f64 / 511.0).exp())
        .map(|x| vec![x, sol.back_transform(x), sol.power_law(x)])
        .collect();
    write_csv(&dir.join("f_vs_powerlaw.csv"), &prov, &["x", "f", "powerlaw"], &f_rows)?;
    Ok(())
}

pub fn write_verify_outputs(cfg: &RunConfig, report: &FluxReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let prov = provenance(cfg);
    write_json(&dir.join("verify.json"), &VerifyManifest { provenance: prov.clone(), report: report.clone() })?;
    let b_rows: Vec<Vec<f64>> = report.x_log_grid.iter().zip(&report.b_values).map(|(x, b)| vec![*x, *b]).collect();
    write_csv(&dir.join("B_HH.csv"), &prov, &["X", "B_HH"], &b_rows)?;
    let j_rows: Vec<Vec<f64>> = report.x_grid.iter().zip(&report.j_values).map(|(x, j)| vec![*x, *j]).collect();
    write_csv(&dir.join("J.csv"), &prov, &["x", "J"], &j_rows)?;
    Ok(())
}

/// `G_align.csv` (k, Re, Im of conj(G(z_b,k)) G(z_a,k)) and `G_vectors.csv`
/// (unit G vectors at z_a and z_b and their angles).
pub fn write_figdata(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let prov = provenance(cfg);
    let ks = linspace(cfg.fig_k_lo, cfg.fig_k_hi, cfg.fig_points);
    let align: Vec<Vec<f64>> = ks
        .iter()
        .map(|&k| {
            let v = alignment_product(cfg.z_a, cfg.z_b, k);
            vec![k, v.re, v.im]
        })
        .collect();
    write_csv(&dir.join("G_align.csv"), &prov, &["k", "Re", "Im"], &align)?;
    let vectors: Vec<Vec<f64>> = ks
        .iter()
        .map(|&k| {
            let (a, b) = (eval_g(cfg.z_a, k), eval_g(cfg.z_b, k));
            let (ua, ub) = (a / a.norm(), b / b.norm());
            vec![k, ua.re, ua.im, ub.re, ub.im, a.arg(), b.arg()]
        })
        .collect();
    write_csv(
        &dir.join("G_vectors.csv"),
        &prov,
        &["k", "re_a", "im_a", "re_b", "im_b", "angle_a", "angle_b"],
        &vectors,
    )?;
    Ok(())
}

pub fn cache_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("cache")
}

/// Config errors are usage errors, except an exponent pair outside the
/// constant-flux window, which is a construction failure.
fn validate_for(cfg: &RunConfig, stage: Stage) -> std::result::Result<(), StageError> {
    match cfg.validate() {
        Err(e @ FluxError::NoConstantFluxRegime(_)) => Err(StageError { stage, source: e }),
        r => r.at(Stage::Usage),
    }
}

pub fn cmd_construct(cfg: &RunConfig) -> std::result::Result<ConstructManifest, StageError> {
    validate_for(cfg, Stage::Construct)?;
    let c = construct(cfg).at(Stage::Construct)?;
    write_construct_outputs(cfg, &c, &cfg.out_dir).at(Stage::Construct)
}

pub fn cmd_solve(cfg: &RunConfig) -> std::result::Result<SolutionManifest, StageError> {
    cfg.validate().at(Stage::Usage)?;
    let m: ConstructManifest = read_json(&cfg.out_dir.join("w0_manifest.json")).at(Stage::Solve)?;
    let c = Construction::from_manifest(&m, cfg).at(Stage::Solve)?;
    let (state, sol) = solve(cfg, &c, Some(&cache_dir(cfg))).at(Stage::Solve)?;
    let sm = solution_manifest(cfg, &c, &state, &sol);
    write_solution_outputs(cfg, &sm, &sol, &cfg.out_dir).at(Stage::Solve)?;
    Ok(sm)
}

pub fn cmd_verify(cfg: &RunConfig) -> std::result::Result<FluxReport, StageError> {
    cfg.validate().at(Stage::Usage)?;
    let sm: SolutionManifest = read_json(&cfg.out_dir.join("solution.json")).at(Stage::Verify)?;
    let sol = sm.to_solution();
    let report = verify(cfg, &sol).at(Stage::Verify)?;
    write_verify_outputs(cfg, &report, &cfg.out_dir).at(Stage::Verify)?;
    if !report.pass {
        return Err(StageError {
            stage: Stage::Verify,
            source: FluxError::Certification(format!(
                "flux deviation {:e} (log grid) / {:e} (x grid) above tolerance {:e} / {:e}",
                report.max_rel_dev_log, report.max_rel_dev_x, report.tol_log, report.tol_x
            )),
        });
    }
    Ok(report)
}

pub fn cmd_figdata(cfg: &RunConfig) -> std::result::Result<(), StageError> {
    cfg.validate().at(Stage::Usage)?;
    write_figdata(cfg, &cfg.out_dir).at(Stage::Usage)
}

pub fn cmd_all(cfg: &RunConfig) -> std::result::Result<FluxReport, StageError> {
    cmd_construct(cfg)?;
    cmd_solve(cfg)?;
    let report = cmd_verify(cfg)?;
    cmd_figdata(cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub stage: Stage,
    pub exit_code: i32,
    pub message: String,
}

pub fn write_error(cfg: &RunConfig, err: &StageError) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_json(
        &cfg.out_dir.join("error.json"),
        &ErrorReport {
            provenance: provenance(cfg),
            stage: err.stage,
            exit_code: err.stage.exit_code(),
            message: err.source.to_string(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(
            [Stage::Usage, Stage::Construct, Stage::Solve, Stage::Verify].map(Stage::exit_code),
            [1, 2, 3, 4]
        );
    }

    #[test]
    fn figdata_files() {
        let dir = std::env::temp_dir().join(format!("coagflux-fig-{}", std::process::id()));
        let cfg = RunConfig { fig_points: 64, out_dir: dir.clone(), ..RunConfig::default() };
        cmd_figdata(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.join("G_align.csv")).unwrap();
        assert_eq!(text.lines().count(), 2 + 64);
        let rows: Vec<Vec<f64>> =
            text.lines().skip(2).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        let flips = rows.windows(2).filter(|w| w[0][2].signum() != w[1][2].signum()).count();
        assert_eq!(flips, 1);
        assert!(rows.iter().all(|r| r[1] < 0.0));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
