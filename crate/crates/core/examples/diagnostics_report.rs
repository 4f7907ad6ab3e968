//! Diagnosing a stochastic two-timescale heavy-ball run.

use hybrid_ttsa::diagnostics::{diagnose, DiagnosticsConfig};
use hybrid_ttsa::hhb::{lambda_graph, make_ttsa_instance, HhbParams, QuadraticSum};
use hybrid_ttsa::linalg::BoxSet;
use hybrid_ttsa::schedules::{StepSchedule, TwoTimescaleSchedule};
use hybrid_ttsa::simulate::{run, RunConfig};
use hybrid_ttsa::systems::Stacked;

fn main() -> hybrid_ttsa::Result<()> {
    let obj = QuadraticSum::random(2, 10, 3)?;
    let (sys, oracle) = make_ttsa_instance(obj.clone(), HhbParams::default());
    let sched = TwoTimescaleSchedule::new(StepSchedule::power_law(1.0, 0.0, 0.9)?, StepSchedule::power_law(1.0, 0.0, 0.6)?);
    let x0 = sys.default_initial_state();
    let r = run(&sys, &x0, &sched, Some(&oracle), &RunConfig::new(50_000, 1))?;

    let domain = BoxSet::bounding(r.sequence.iter().map(|(_, x)| r.slow_part(x))).expect("nonempty");
    let lambda = lambda_graph(obj, domain);
    let cfg = DiagnosticsConfig {
        horizons: vec![0.5, 1.0],
        ..DiagnosticsConfig::default()
    };
    let report = diagnose(&r, &Stacked(&sys), Some(&lambda), &cfg)?;
    print!("{}", report.verdict_table());
    println!("omega-cloud clusters: {}", report.omega_cloud.len());
    Ok(())
}
