//! The boundary-layer and reduced systems of the two-timescale heavy ball.

use hybrid_ttsa::hhb::{hhb_reduced, HhbParams, HhbSystem, HhbTwoTimescale, QuadraticSum};
use hybrid_ttsa::linalg::BoxSet;
use hybrid_ttsa::systems::{boundary_layer, HybridSystem, TwoTimescaleSystem};

fn main() -> hybrid_ttsa::Result<()> {
    let obj = QuadraticSum::random(2, 4, 7)?;
    let params = HhbParams::default();
    let tt = HhbTwoTimescale::new(obj.clone(), params);

    // Boundary layer: slow state frozen, fast state relaxes toward ∇Ψ(q).
    let bl = boundary_layer(tt.clone());
    let x = tt.default_initial_state();
    println!("boundary-layer flow at x0: {:?}", bl.flow(&x));
    let j = HybridSystem::jump(&bl, &x);
    println!("boundary-layer jump at x0: {j:?}; jump map idempotent: {}", HybridSystem::jump(&bl, &j) == j);

    // Reduced system on a box of slow states, with Λ(χ) = ∇Ψ(q).
    let domain = BoxSet::cube(tt.slow_dim(), 2.0);
    let reduced = hhb_reduced(obj.clone(), params, domain);
    let hb = HhbSystem::new(obj, params);
    let chi = vec![0.5, -0.3, 0.2, 0.1, 0.6];
    println!(
        "chi in C: reduced {} / heavy ball {}; in D: reduced {} / heavy ball {}",
        reduced.in_flow_set(&chi),
        hb.in_flow_set(&chi),
        reduced.in_jump_set(&chi),
        hb.in_jump_set(&chi)
    );
    println!("reduced flow {:?}", reduced.flow(&chi));
    println!("heavy-ball flow {:?}", hb.flow(&chi));
    println!("outside the box the reduced sets are empty: {}", !reduced.in_flow_set(&[5.0; 5]));
    Ok(())
}
