//! Builds the two-bump kernel W0 whose symbol vanishes at k*, and reports the
//! certificate that Psi(n k*; W0) stays away from zero for the higher modes.

use coagflux::kernelspace::{check_grid, validate_params};
use coagflux::numerics::QuadratureSpec;
use coagflux::symbol::{eval_psi_with, FindKstarOptions, KRange};
use coagflux::w0builder::solve_bifurcation_kernel;

fn main() -> coagflux::Result<()> {
    let params = validate_params(0.0, 0.0)?;
    let opts = FindKstarOptions::new(params);
    let (w0, point, recipe) = solve_bifurcation_kernel(2.0, 1.0, 0.02, &params, KRange::new(15.0, 25.0), &opts)?;
    println!("recipe: a = {:.6}, b = {:.6}, sigma = {:.9}", recipe.a, recipe.b, recipe.sigma);
    println!("k* = {:.12}, period T = {:.6}, Q = e^T = {:.6}", point.k_star, point.t, point.q_dilation);
    println!("|Psi(k*)| / scale = {:.2e}, no zero on (k*, {}] (min |Psi| / scale = {:.3})", point.residual / point.scale, point.k_max, point.cert_min / point.scale);
    println!("min W0 on the check grid: {:.3e}", w0.min_on_grid(&check_grid()));
    let spec = QuadratureSpec::default();
    for n in [1, 2, 3, 8, 16] {
        let v = eval_psi_with(n as f64 * point.k_star, &w0, &spec)?;
        println!("  |Psi({n} k*)| / scale = {:.4e}", v.norm() / point.scale);
    }
    Ok(())
}
