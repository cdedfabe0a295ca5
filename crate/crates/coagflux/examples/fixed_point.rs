//! Solves for the oscillatory profile H = sqrt(J0/K0)(1 + s cos(k* X) + psi)
//! and the kernel correction alpha, for two amplitudes s.

use coagflux::config::RunConfig;
use coagflux::pipeline::{construct, solver_options};
use coagflux::solver::{assemble_solution, fixed_point_solve};

fn main() -> coagflux::Result<()> {
    let cfg = RunConfig::default();
    let c = construct(&cfg)?;
    let cache = std::env::temp_dir().join("coagflux-example-cache");
    let ctx = c.context(&cfg, Some(&cache))?;
    let mut prev = None;
    for s in [0.005, 0.01] {
        let state = fixed_point_solve(s, &ctx, &solver_options(&cfg))?;
        let sol = assemble_solution(&state, &ctx, cfg.j0, &c.recipe)?;
        let psi = state.psi.norm(1.0);
        println!("s = {s}: {} iterations, alpha = ({:.4e}, {:.4e}), ||psi|| = {psi:.4e}", state.iter, state.alpha1, state.alpha2);
        println!("  distances {:?}", state.dist_history.iter().map(|d| format!("{d:.1e}")).collect::<Vec<_>>());
        println!("  K0 = {:.6}, oscillation of H~ = {:.6}, residuals {:?}", sol.k0, sol.h_tilde.oscillation_amplitude(512), sol.residuals);
        if let Some(p) = prev {
            println!("  ||psi(0.01)|| / ||psi(0.005)|| = {:.3} (quadratic scaling gives 4)", psi / p);
        }
        prev = Some(psi);
    }
    Ok(())
}
