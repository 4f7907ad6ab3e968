//! Deterministic Euler simulation of a single-timescale hybrid system.

use hybrid_ttsa::schedules::StepSchedule;
use hybrid_ttsa::simulate::{run_single, RunConfig};
use hybrid_ttsa::systems::{sampled_basic_conditions, FnSystem};
use hybrid_ttsa::linalg::BoxSet;

fn main() -> hybrid_ttsa::Result<()> {
    // A ball: height x0, velocity x1. Flows under gravity above the floor,
    // bounces with restitution 0.8 when it reaches the floor moving down.
    let ball = FnSystem::new(
        2,
        |x| x[0] >= 0.0,
        |x| vec![x[1], -9.81],
        |x| x[0] <= 0.0 && x[1] <= 0.0,
        |x| vec![0.0, -0.8 * x[1]],
    );

    let report = sampled_basic_conditions(&ball, &BoxSet::new(vec![-1.0, -10.0], vec![5.0, 10.0]), 2000, 1);
    println!("basic conditions evidence passed: {} (heuristic: {})", report.passed, report.heuristic);

    let sched = StepSchedule::explicit(vec![0.01])?;
    let run = run_single(&ball, &[1.0, 0.0], &sched, &RunConfig::new(400, 0))?;
    println!("{} flow steps, {} bounces", run.steps(), run.jump_log.len());
    for idx in &run.jump_log {
        let x = run.sequence.get(*idx).expect("logged index");
        println!("  bounce at (k={}, j={}): impact velocity {:.3}", idx.k, idx.j, x[1]);
    }
    println!("final state {:?}", run.sequence.last());
    Ok(())
}
