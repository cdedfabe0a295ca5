//! Checks that the solved f carries the same flux J0 through every size x,
//! both in log variables and with the original double integral.

use coagflux::config::RunConfig;
use coagflux::fluxcheck::{compute_b, compute_cw, default_x_grid, period_grid, verify_constant_flux, DirectOptions};
use coagflux::pipeline::construct;
use coagflux::kernelspace::LogKernel;

fn main() -> coagflux::Result<()> {
    let opts = DirectOptions::default();
    let one = LogKernel::constant(1.0);
    println!("constant kernel: B = {:.12}, C_W = {:.12}", compute_b(&one, &opts)?, compute_cw(&one, &opts)?);

    let cfg = RunConfig::default();
    let c = construct(&cfg)?;
    let (_, sol) = coagflux::pipeline::solve(&cfg, &c, Some(&std::env::temp_dir().join("coagflux-example-cache")))?;
    let report = verify_constant_flux(&sol, &period_grid(sol.k_star, 8), &default_x_grid(sol.k_star), 1e-4, 2e-4, &opts)?;
    for (x, b) in report.x_log_grid.iter().zip(&report.b_values) {
        println!("B(H,H;W)({x:.5}) = {b:.15}");
    }
    for (x, j) in report.x_grid.iter().zip(&report.j_values) {
        println!("J({x:.5}) = {j:.15}");
    }
    println!("max deviation {:.2e} / {:.2e}, pass = {}", report.max_rel_dev_log, report.max_rel_dev_x, report.pass);
    let q = sol.q_dilation();
    let x = 1.7;
    let ratio = sol.back_transform(q * x) * q.powf((sol.gamma + 3.0) / 2.0) / sol.back_transform(x);
    println!("f(Qx) Q^((gamma+3)/2) / f(x) = {ratio:.15}");
    Ok(())
}
