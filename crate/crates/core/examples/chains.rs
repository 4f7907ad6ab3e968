//! (τ, ε)-chains and a weak-invariance spot check.

use hybrid_ttsa::chains::{find_chain, weak_invariance_spot_check, ChainSearch};
use hybrid_ttsa::linalg::BoxSet;
use hybrid_ttsa::systems::{FnSystem, LinearDecay};

fn main() -> hybrid_ttsa::Result<()> {
    let decay = LinearDecay { dim: 1 };
    let chain = find_chain(&decay, &[1.0], &[0.0], &ChainSearch::new(1.0, 0.5, 20))?;
    println!("decay 1 -> 0: {} legs, gaps {:?}", chain.num_legs(), chain.gaps);

    // Moving away from the attractor takes ε-hops; budget decides.
    match find_chain(&decay, &[0.0], &[1.0], &ChainSearch::new(1.0, 0.3, 10)) {
        Ok(c) => println!("decay 0 -> 1: {} legs", c.num_legs()),
        Err(e) => println!("decay 0 -> 1: {e}"),
    }

    // Rotation restricted to the upper half-disc.
    let rot = FnSystem::flow_only(2, |x| vec![-x[1], x[0]]);
    let upper = BoxSet::new(vec![-1.1, -0.05], vec![1.1, 1.1]);
    let search = ChainSearch::new(0.5, 0.1, 50).internal(upper);
    let c = find_chain(&rot, &[1.0, 0.0], &[-1.0, 0.0], &search)?;
    c.validate().expect("chain conditions");
    println!("internal rotation chain: {} legs ending at {:?}", c.num_legs(), c.waypoints.last());
    println!("{}", serde_json::to_string(&c.leg_horizons).expect("json"));

    let circle: Vec<Vec<f64>> = (0..128)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 128.0;
            vec![a.cos(), a.sin()]
        })
        .collect();
    let rep = weak_invariance_spot_check(&rot, &circle, 1.0, 0.05, 1e-3)?;
    println!("unit circle weakly invariant (sampled): {}/{}", rep.passed, rep.per_point.len());
    let rep = weak_invariance_spot_check(&decay, &[vec![1.0]], 5.0, 0.01, 1e-2)?;
    println!("transient point {{1}} weakly invariant: {}", rep.all_passed());
    Ok(())
}
