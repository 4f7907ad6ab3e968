//! Stochastic two-timescale heavy ball on a random least-squares sum.

use hybrid_ttsa::hhb::{distance_to_m, make_ttsa_instance, noise_bound_bp, HhbParams, QuadraticSum};
use hybrid_ttsa::schedules::{StepSchedule, TwoTimescaleSchedule};
use hybrid_ttsa::simulate::{run, RunConfig};
use hybrid_ttsa::systems::TwoTimescaleSystem;

fn main() -> hybrid_ttsa::Result<()> {
    let obj = QuadraticSum::random(2, 10, 3)?;
    let params = HhbParams::default();
    let (sys, oracle) = make_ttsa_instance(obj.clone(), params);
    let sched = TwoTimescaleSchedule::new(StepSchedule::power_law(1.0, 0.0, 0.9)?, StepSchedule::power_law(1.0, 0.0, 0.6)?);
    let x0 = sys.default_initial_state();
    let n_slow = sys.slow_dim();

    for seed in 0..3 {
        let r = run(&sys, &x0, &sched, Some(&oracle), &RunConfig::new(40_000, seed))?;
        let dist = |k: usize| distance_to_m(&r.flow_point(k)[..n_slow], &obj, &params);
        println!(
            "seed {seed}: |x|_M at k=1000 {:.4}, k=10000 {:.4}, k=40000 {:.4}; {} jumps",
            dist(1000)?,
            dist(10_000)?,
            dist(40_000)?,
            r.jump_log.len()
        );
    }
    // For a quadratic sum the gradient noise does not depend on q.
    println!("gradient noise B_1 at q*: {:.4}", noise_bound_bp(&obj, 1.0, &obj.centroid));
    println!("gradient noise B_1 at 0:  {:.4}", noise_bound_bp(&obj, 1.0, &[0.0, 0.0]));
    println!("closed-form gamma:        {:.4}", obj.exact_gamma(1.0));
    Ok(())
}
