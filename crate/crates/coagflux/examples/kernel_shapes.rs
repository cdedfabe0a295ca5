//! Converts between the shape function Phi on (0,1) and the log-variable
//! kernel W, and evaluates K(x, y) for a few exponent pairs.

use coagflux::kernelspace::{kernel_eval, phi_from_w, validate_params, w_from_phi, ShapeFunction};

fn main() -> coagflux::Result<()> {
    for (gamma, p) in [(0.0, 0.0), (0.2, 0.1), (0.5, 0.2)] {
        let params = validate_params(gamma, p)?;
        // Phi(s) = (s(1-s))^{-p}, symmetric with endpoint exponent p
        let phi = ShapeFunction::new(move |s: f64| (s * (1.0 - s)).powf(-p), p);
        let w = w_from_phi(&phi, &params);
        let back = phi_from_w(&w, &params);
        let err = [0.01, 0.2, 0.5, 0.9]
            .iter()
            .map(|&s| (back.eval(s).unwrap() - phi.eval(s).unwrap()).abs() / phi.eval(s).unwrap())
            .fold(0.0, f64::max);
        println!(
            "gamma={gamma} p={p} q={:.3}: K(1,1)={:.6} K(1,100)={:.6} W(0)={:.6} W(5)e^(-q5)={:.6} round trip {err:.1e} endpoint {:.6}",
            params.q,
            kernel_eval(&phi, &params, 1.0, 1.0)?,
            kernel_eval(&phi, &params, 1.0, 100.0)?,
            w.eval(0.0),
            w.eval(5.0) * (-params.q * 5.0).exp(),
            phi.endpoint_limit()?,
        );
    }
    match validate_params(0.6, 0.3) {
        Err(e) => println!("gamma=0.6 p=0.3 rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
