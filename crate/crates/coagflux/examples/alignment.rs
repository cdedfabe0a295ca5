//! Locates the k where G(z_b, k) and G(z_a, k) are antiparallel, the
//! frequency at which the two-bump kernel can cancel its own symbol.

use coagflux::symbol::{alignment_product, alignment_scan, eval_g, KRange};

fn main() {
    let (z_a, z_b) = (2.0, 1.0);
    let brackets = alignment_scan(z_a, z_b, KRange::new(19.0, 20.0), 400);
    for b in &brackets {
        let k = b.root();
        let v = alignment_product(z_a, z_b, k);
        println!("root k = {k:.12} (bracket width {:.1e}), conj(G_b) G_a = {:.6}", b.hi - b.lo, v);
        let (ga, gb) = (eval_g(z_a, k), eval_g(z_b, k));
        println!("  |G(z_a)| = {:.6}, |G(z_b)| = {:.6}, angle gap = {:.6} rad", ga.norm(), gb.norm(), (ga / gb).arg());
    }
}
