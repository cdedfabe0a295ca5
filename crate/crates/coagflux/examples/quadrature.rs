//! Adaptive Gauss-Kronrod quadrature on a slowly decaying oscillatory
//! integrand over [0, inf), checked against a closed form.

use coagflux::numerics::{integrate_semi_infinite, QuadratureSpec};
use num_complex::Complex64;

fn main() -> coagflux::Result<()> {
    // int_0^inf e^{-a z} e^{i k z} dz = 1 / (a - i k)
    let (a, k) = (0.05, 40.0);
    let spec = QuadratureSpec { tail_exponent: -a, envelope_const: 1.0, ..QuadratureSpec::default() }.with_freq(k);
    let r = integrate_semi_infinite(|z| Complex64::new(0.0, k * z).exp() * (-a * z).exp(), 0.0, &spec)?;
    let exact = 1.0 / Complex64::new(a, -k);
    println!("value {:.15}\nexact {:.15}", r.value, exact);
    println!("error {:.2e}, estimate {:.2e}, panels {}", (r.value - exact).norm(), r.err_est, r.panels);
    Ok(())
}
