//! Evaluates the symbol Psi(k; W) of the constant kernel and compares it
//! with its large-k law a |k|^{q-1/2} e^{-i pi sgn(k)(1/2-q)/2}.

use coagflux::kernelspace::{validate_params, LogKernel};
use coagflux::symbol::{eval_psi, psi_asymptotic};

fn main() -> coagflux::Result<()> {
    let params = validate_params(0.0, 0.0)?;
    let w = LogKernel::constant(1.0);
    println!("Psi(0)/2 = {:.12} (2 pi = {:.12})", eval_psi(0.0, &w)?.re / 2.0, 2.0 * std::f64::consts::PI);
    println!("{:>8} {:>24} {:>24} {:>10}", "k", "Psi(k)", "asymptotic", "ratio");
    for k in [1.0, 10.0, 50.0, 100.0, 250.0, 500.0, -500.0] {
        let v = eval_psi(k, &w)?;
        let a = psi_asymptotic(k, &params);
        println!("{k:>8} {:>24.6} {:>24.6} {:>10.6}", v, a, (v / a).norm());
    }
    Ok(())
}
