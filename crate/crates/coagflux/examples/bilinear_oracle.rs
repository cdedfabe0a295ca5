//! Evaluates the flux operator B(H1, H2; W)(X) for band-limited periodic H
//! twice: through the precomputed symbol table and by direct quadrature.

use coagflux::fluxcheck::{bilinear_direct, period_grid, DirectOptions};
use coagflux::kernelspace::{KernelTerm, LogKernel};
use coagflux::numerics::QuadratureSpec;
use coagflux::spectral::{bilinear_fourier, build_symbol_table, PeriodicField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> coagflux::Result<()> {
    let (k, n) = (19.5, 8);
    let w = LogKernel::from_terms(
        vec![
            (1.0, KernelTerm::Bump { center: 1.0, width: 0.05 }),
            (0.5, KernelTerm::Bump { center: 2.0, width: 0.05 }),
        ],
        0.0,
    );
    let table = build_symbol_table(&w, k, n, &QuadratureSpec::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h1 = PeriodicField::random(&mut rng, 1.0, 0.3, n, k);
    let h2 = PeriodicField::random(&mut rng, 1.0, 0.3, n, k);
    let b = bilinear_fourier(&h1, &h2, &table)?;
    for x in period_grid(k, 4) {
        let direct = bilinear_direct(&h1, &h2, &w, x, &DirectOptions::default())?;
        println!("X = {x:.5}: table {:.15}, direct {direct:.15}", b.eval(x));
    }
    Ok(())
}
