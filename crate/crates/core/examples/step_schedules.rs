//! Step-size schedules: accumulated time, its inverse, window index sets
//! and the two-timescale checks.

use hybrid_ttsa::schedules::{index_set, StepSchedule, Timescale, TwoTimescaleSchedule};

fn main() -> hybrid_ttsa::Result<()> {
    let slow = StepSchedule::power_law(1.0, 1.0, 1.0)?;
    let fast = StepSchedule::power_law(1.0, 1.0, 0.6)?;

    println!("tau_s(100) = {:.6}", slow.tau(100));
    let t = slow.tau(100) + 1.0;
    println!("m_s({t:.4}) = {}", slow.m_of(t)?);
    println!("I_s(100, T=1) = {:?}", index_set(&slow, 100, 1.0)?);

    let explicit = StepSchedule::explicit(vec![1.0, 0.5, 0.25, 0.25])?;
    println!("explicit: tau(6) = {}  (last value repeats)", explicit.tau(6));

    let pair = TwoTimescaleSchedule::new(slow, fast);
    let verdict = pair.check_two_timescale_admissible(100_000)?;
    println!("two-timescale admissible: {} ({:?})", verdict.admissible, verdict.kind);
    for (k, r) in verdict.ratio_trace.iter().step_by(4) {
        println!("  h_s/h_f at k={k:>6}: {r:.4}");
    }

    let moment = pair.fast.check_fast_moment_condition()?;
    println!("fast moment condition: p_min = {:?}, attained = {}", moment.p_min, moment.attained);

    for horizon in [0.5, 1.0, 10.0] {
        let ell = pair.lemma_a1_threshold(horizon, 100_000)?;
        let (f, s) = (pair.index_set(Timescale::Fast, ell, horizon)?, pair.index_set(Timescale::Slow, ell, horizon)?);
        println!("T={horizon}: nesting from n={ell}; I_f = {f:?} within I_s = {s:?}");
    }
    Ok(())
}
