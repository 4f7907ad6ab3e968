//! Finite-window checks on simulated runs: drift-closeness sums, graph
//! containment, boundary-layer rescaling and fast-state tracking, each with
//! a trend verdict standing in for a limit.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid_time::omega_limit_estimate;
use crate::linalg::{dist, norm, norm_sq};
use crate::schedules::{geometric_indices, index_set, Timescale};
use crate::simulate::SimRun;
use crate::systems::{restricted_graph_distance, GraphKind, HybridSystem, LambdaGraph, ProbeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Window lengths `T` for the closeness traces.
    pub horizons: Vec<f64>,
    pub n_grid_size: usize,
    pub decay_factor: f64,
    pub abs_tol: f64,
    pub bl_decay_factor: f64,
    pub tracking_tol: f64,
    pub omega_tail_fraction: f64,
    pub omega_cluster_tol: f64,
    pub probe: ProbeConfig,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            horizons: vec![1.0],
            n_grid_size: 32,
            decay_factor: 0.2,
            abs_tol: 1e-3,
            bl_decay_factor: 0.2,
            tracking_tol: 0.05,
            omega_tail_fraction: 0.01,
            omega_cluster_tol: 0.05,
            probe: ProbeConfig::default(),
        }
    }
}

/// Pass/fail outcome of a trend check together with its statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    /// Statistic over the leading window (mean or max, see `rule`).
    pub head: f64,
    /// Statistic over the trailing window.
    pub tail: f64,
    pub rule: String,
}

/// Last-quartile mean ≤ `factor` × first-quartile mean, or ≤ `abs_tol`.
pub fn quartile_verdict(values: &[f64], factor: f64, abs_tol: f64) -> Verdict {
    let rule = format!("last-quartile mean <= {factor} * first-quartile mean or <= {abs_tol}");
    if values.is_empty() {
        return Verdict { passed: true, head: 0.0, tail: 0.0, rule };
    }
    let q = (values.len() / 4).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let head = mean(&values[..q]);
    let tail = mean(&values[values.len() - q..]);
    Verdict {
        passed: tail <= factor * head || tail <= abs_tol,
        head,
        tail,
        rule,
    }
}

/// Last-decile max ≤ `factor` × first-decile max.
pub fn decile_verdict(values: &[f64], factor: f64) -> Verdict {
    let rule = format!("last-decile max <= {factor} * first-decile max");
    if values.is_empty() {
        return Verdict { passed: true, head: 0.0, tail: 0.0, rule };
    }
    let d = (values.len() / 10).max(1);
    let max = |s: &[f64]| s.iter().cloned().fold(0.0, f64::max);
    let head = max(&values[..d]);
    let tail = max(&values[values.len() - d..]);
    Verdict {
        passed: tail <= factor * head,
        head,
        tail,
        rule,
    }
}

/// Max over the trailing `fraction` of the trace ≤ `tol`.
pub fn window_max_verdict(values: &[f64], fraction: f64, tol: f64) -> Verdict {
    let rule = format!("max over last {}% <= {tol}", fraction * 100.0);
    if values.is_empty() {
        return Verdict { passed: true, head: 0.0, tail: 0.0, rule };
    }
    let w = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
    let tail = values[values.len() - w..].iter().cloned().fold(0.0, f64::max);
    let head = values.iter().cloned().fold(0.0, f64::max);
    Verdict {
        passed: tail <= tol,
        head,
        tail,
        rule,
    }
}

/// A trace of `(index, value)` pairs with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<(usize, f64)>,
    pub verdict: Verdict,
}

impl Trace {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    /// CSV with header `n_or_k,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        write_entries_csv(&self.entries, w)
    }
}

fn write_entries_csv<W: Write>(entries: &[(usize, f64)], w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["n_or_k", "value"])?;
    for (i, v) in entries {
        wtr.write_record([i.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Closeness {
    pub value: f64,
    /// The window reached past the end of the run and was cut short.
    pub truncated: bool,
}

/// `sup_{k ∈ I_{r,n,T}} |Σ_{i=n}^{k-1} h_{r,i+1} (f̂_{r,i+1} − f_{r,i})|`.
///
/// Zero for an empty index set.
pub fn closeness_sup(run: &SimRun, r: Timescale, n: usize, horizon: f64) -> Result<Closeness> {
    let sched = run.schedule.get(r);
    let window = index_set(sched, n, horizon)?;
    let steps = run.steps();
    let end = window.end.min(steps + 1);
    let truncated = window.end > steps + 1;
    let (fhat, f) = (run.fhat(r), run.f(r));
    let mut acc = vec![0.0; fhat.width()];
    let mut best = 0.0f64;
    for k in window.start..end {
        let i = k - 1;
        let h = sched.step(i + 1);
        for ((a, x), y) in acc.iter_mut().zip(fhat.row(i)).zip(f.row(i)) {
            *a += h * (x - y);
        }
        best = best.max(norm_sq(&acc));
    }
    Ok(Closeness {
        value: best.sqrt(),
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessTrace {
    pub timescale: Timescale,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub entries: Vec<(usize, f64)>,
    pub truncated: Vec<usize>,
    pub verdict: Verdict,
}

impl ClosenessTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        write_entries_csv(&self.entries, w)
    }
}

/// `count` geometric points over `[K/10, 9K/10]`.
pub fn default_n_grid(steps: usize, count: usize) -> Vec<usize> {
    geometric_indices((steps / 10).max(1), (9 * steps / 10).max(1), count)
}

pub fn closeness_trace(
    run: &SimRun,
    r: Timescale,
    horizon: f64,
    n_grid: &[usize],
    decay_factor: f64,
    abs_tol: f64,
) -> Result<ClosenessTrace> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_grid must be strictly increasing".into()));
    }
    let mut entries = Vec::with_capacity(n_grid.len());
    let mut truncated = Vec::new();
    for &n in n_grid {
        let c = closeness_sup(run, r, n, horizon)?;
        if c.truncated {
            truncated.push(n);
        }
        entries.push((n, c.value));
    }
    let values: Vec<f64> = entries.iter().map(|e| e.1).collect();
    Ok(ClosenessTrace {
        timescale: r,
        horizon,
        entries,
        truncated,
        verdict: quartile_verdict(&values, decay_factor, abs_tol),
    })
}

/// Distances of `(Φ(k, j̄_k), f_k)` to `graph(F¹_C)` per flow step and of
/// `(Φ(k̄_j, j), Φ(k̄_j, j+1))` to `graph(G_D)` per jump.
pub fn graph_containment_trace<S: HybridSystem + ?Sized>(
    run: &SimRun,
    sys: &S,
    probe: &ProbeConfig,
    decay_factor: f64,
    abs_tol: f64,
) -> (Trace, Trace) {
    let flow: Vec<(usize, f64)> = (0..run.steps())
        .map(|k| {
            let d = restricted_graph_distance(sys, run.flow_point(k), &run.f_stacked(k), GraphKind::Flow, probe);
            (k, d)
        })
        .collect();
    let jump: Vec<(usize, f64)> = run
        .jump_log
        .iter()
        .map(|idx| {
            let from = run.sequence.get(*idx).expect("jump source in domain");
            let to = run.sequence.at(idx.k, idx.j + 1).expect("jump target in domain");
            (idx.j, restricted_graph_distance(sys, from, to, GraphKind::Jump, probe))
        })
        .collect();
    let fv: Vec<f64> = flow.iter().map(|e| e.1).collect();
    let jv: Vec<f64> = jump.iter().map(|e| e.1).collect();
    (
        Trace {
            verdict: quartile_verdict(&fv, decay_factor, abs_tol),
            entries: flow,
        },
        Trace {
            verdict: quartile_verdict(&jv, decay_factor, abs_tol),
            entries: jump,
        },
    )
}

/// `|(h_{s,k+1} / h_{f,k+1}) f_{s,k}|` per flow step.
pub fn boundary_layer_rescaled_drift(run: &SimRun, decay_factor: f64) -> Trace {
    let entries: Vec<(usize, f64)> = (0..run.steps())
        .map(|k| {
            let ratio = run.schedule.slow.step(k + 1) / run.schedule.fast.step(k + 1);
            (k, ratio * norm(run.f_slow.row(k)))
        })
        .collect();
    let values: Vec<f64> = entries.iter().map(|e| e.1).collect();
    Trace {
        verdict: decile_verdict(&values, decay_factor),
        entries,
    }
}

/// Flow points `Φ(k, j̄_k)` with `τ_{s,k} ≥ τ_{s,K} − slow_horizon`, evenly
/// thinned to at most `max_points` (the last point is always kept).
///
/// A step-count tail of a slowly decaying schedule covers very little slow
/// time; this tail is sized in slow time instead.
pub fn slow_time_tail(run: &SimRun, slow_horizon: f64, max_points: usize) -> Result<Vec<Vec<f64>>> {
    if !(slow_horizon >= 0.0) || max_points == 0 {
        return Err(Error::InvalidArgument("slow_horizon must be ≥ 0 and max_points ≥ 1".into()));
    }
    let k_max = run.steps();
    let end = run.schedule.slow.try_tau(k_max)?;
    let start = end - slow_horizon;
    let first = if start <= 0.0 {
        0
    } else {
        // m(t) is the last index with τ ≤ t; the tail begins just after it
        // unless τ hits t exactly.
        let m = run.schedule.slow.m_of(start)?;
        if run.schedule.slow.try_tau(m)? < start { m + 1 } else { m }
    };
    let count = k_max - first + 1;
    let stride = count.div_ceil(max_points);
    let mut picks: Vec<usize> = (first..=k_max).rev().step_by(stride).collect();
    picks.reverse();
    Ok(picks.into_iter().map(|k| run.flow_point(k).to_vec()).collect())
}

/// `|x_f(k, j̄_k) − Λ(x_s(k, j̄_k))|` for `k = 0..=K`.
pub fn lambda_tracking_trace(run: &SimRun, lambda: &LambdaGraph, tracking_tol: f64) -> Result<Trace> {
    if !matches!(lambda, LambdaGraph::SingleValued { .. }) {
        return Err(Error::InvalidArgument("tracking needs a single-valued Λ".into()));
    }
    if run.steps() == 0 {
        return Err(Error::EmptySequence);
    }
    let mut entries = Vec::with_capacity(run.steps() + 1);
    for k in 0..=run.steps() {
        let x = run.flow_point(k);
        let target = lambda.values(run.slow_part(x), 0.0)?.remove(0);
        entries.push((k, dist(run.fast_part(x), &target)));
    }
    let values: Vec<f64> = entries.iter().map(|e| e.1).collect();
    Ok(Trace {
        verdict: window_max_verdict(&values, 0.05, tracking_tol),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub closeness_slow: Vec<ClosenessTrace>,
    pub closeness_fast: Vec<ClosenessTrace>,
    pub graph_flow: Trace,
    pub graph_jump: Trace,
    pub bl_drift: Trace,
    pub lambda_tracking: Option<Trace>,
    pub omega_cloud: Vec<Vec<f64>>,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl DiagnosticsReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.values().all(|v| v.passed)
    }

    /// Rows of `name  PASS/FAIL  head  tail`.
    pub fn verdict_table(&self) -> String {
        let width = self.verdicts.keys().map(String::len).max().unwrap_or(4).max(4);
        let mut out = format!("{:<width$}  {:<6}  {:>12}  {:>12}\n", "check", "result", "head", "tail");
        for (name, v) in &self.verdicts {
            out.push_str(&format!(
                "{:<width$}  {:<6}  {:>12.4e}  {:>12.4e}\n",
                name,
                if v.passed { "PASS" } else { "FAIL" },
                v.head,
                v.tail
            ));
        }
        out
    }
}

/// Every diagnostic for one run against the stacked system `sys`.
pub fn diagnose<S: HybridSystem + ?Sized>(
    run: &SimRun,
    sys: &S,
    lambda: Option<&LambdaGraph>,
    cfg: &DiagnosticsConfig,
) -> Result<DiagnosticsReport> {
    let grid = default_n_grid(run.steps(), cfg.n_grid_size);
    let mut verdicts = BTreeMap::new();
    let mut closeness_slow = Vec::new();
    let mut closeness_fast = Vec::new();
    for &t in &cfg.horizons {
        let s = closeness_trace(run, Timescale::Slow, t, &grid, cfg.decay_factor, cfg.abs_tol)?;
        let f = closeness_trace(run, Timescale::Fast, t, &grid, cfg.decay_factor, cfg.abs_tol)?;
        verdicts.insert(format!("closeness_slow_T{t}"), s.verdict.clone());
        verdicts.insert(format!("closeness_fast_T{t}"), f.verdict.clone());
        closeness_slow.push(s);
        closeness_fast.push(f);
    }
    let (graph_flow, graph_jump) = graph_containment_trace(run, sys, &cfg.probe, cfg.decay_factor, cfg.abs_tol);
    verdicts.insert("graph_flow".into(), graph_flow.verdict.clone());
    verdicts.insert("graph_jump".into(), graph_jump.verdict.clone());
    let bl_drift = boundary_layer_rescaled_drift(run, cfg.bl_decay_factor);
    verdicts.insert("bl_drift".into(), bl_drift.verdict.clone());
    let lambda_tracking = match lambda {
        Some(l) => {
            let t = lambda_tracking_trace(run, l, cfg.tracking_tol)?;
            verdicts.insert("lambda_tracking".into(), t.verdict.clone());
            Some(t)
        }
        None => None,
    };
    let omega_cloud = omega_limit_estimate(&run.sequence, cfg.omega_tail_fraction, cfg.omega_cluster_tol)?;
    Ok(DiagnosticsReport {
        closeness_slow,
        closeness_fast,
        graph_flow,
        graph_jump,
        bl_drift,
        lambda_tracking,
        omega_cloud,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::BoxSet;
    use crate::schedules::{StepSchedule, TwoTimescaleSchedule};
    use crate::simulate::{run, Biased, DriftOracle, RunConfig};
    use crate::systems::{Stacked, TwoTimescaleSystem};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Slow x_s' = x_f − x_s, fast x_f' = −x_f + 0.5 x_s; no jumps.
    struct Linear;

    impl TwoTimescaleSystem for Linear {
        fn slow_dim(&self) -> usize {
            1
        }
        fn fast_dim(&self) -> usize {
            1
        }
        fn in_flow_set(&self, _: &[f64]) -> bool {
            true
        }
        fn in_jump_set(&self, _: &[f64]) -> bool {
            false
        }
        fn slow_flow(&self, x: &[f64]) -> Vec<f64> {
            vec![x[1] - x[0]]
        }
        fn fast_flow(&self, x: &[f64]) -> Vec<f64> {
            vec![-x[1] + 0.5 * x[0]]
        }
        fn jump(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
    }

    struct Noisy;

    impl DriftOracle for Noisy {
        fn mean(&self, x: &[f64], _: usize) -> Vec<f64> {
            Linear.fast_flow(x)
        }
        fn noise(&self, _: &[f64], _: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
            vec![rng.gen_range(-1.0..1.0)]
        }
    }

    fn sched() -> TwoTimescaleSchedule {
        TwoTimescaleSchedule::new(
            StepSchedule::power_law(1.0, 1.0, 1.0).unwrap(),
            StepSchedule::power_law(1.0, 1.0, 0.6).unwrap(),
        )
    }

    /// Recompute every partial sum from scratch.
    fn brute_closeness(run: &SimRun, r: Timescale, n: usize, t: f64) -> f64 {
        let s = run.schedule.get(r);
        let mut best = 0.0f64;
        let mut k = n + 1;
        loop {
            let window: f64 = (n + 1..=k).map(|i| s.step(i)).sum();
            if window > t || k > run.steps() {
                break;
            }
            let mut acc = vec![0.0; run.fhat(r).width()];
            for i in n..k {
                for d in 0..acc.len() {
                    acc[d] += s.step(i + 1) * (run.fhat(r).row(i)[d] - run.f(r).row(i)[d]);
                }
            }
            best = best.max(norm(&acc));
            k += 1;
        }
        best
    }

    #[test]
    fn slow_time_tail_covers_the_requested_window() {
        let r = run(&Linear, &[1.0, -1.0], &sched(), None, &RunConfig::new(2000, 0)).unwrap();
        let s = &r.schedule.slow;
        let end = s.tau(2000);
        let all = slow_time_tail(&r, 0.5, usize::MAX).unwrap();
        let first = (0..=2000).find(|&k| s.tau(k) >= end - 0.5).unwrap();
        assert_eq!(all.len(), 2000 - first + 1);
        assert_eq!(all[0], r.flow_point(first));
        assert_eq!(all.last().unwrap().as_slice(), r.flow_point(2000));
        let thin = slow_time_tail(&r, 0.5, 10).unwrap();
        assert!(thin.len() <= 10 && thin.len() >= 5);
        assert_eq!(thin.last(), all.last());
        assert_eq!(slow_time_tail(&r, 1e9, usize::MAX).unwrap().len(), 2001);
    }

    #[test]
    fn deterministic_runs_have_zero_closeness() {
        let r = run(&Linear, &[1.0, -1.0], &sched(), None, &RunConfig::new(2000, 0)).unwrap();
        for n in default_n_grid(2000, 32) {
            for t in [0.5, 1.0, 5.0] {
                assert_eq!(closeness_sup(&r, Timescale::Slow, n, t).unwrap().value, 0.0);
                assert_eq!(closeness_sup(&r, Timescale::Fast, n, t).unwrap().value, 0.0);
            }
        }
        let (flow, jump) = graph_containment_trace(&r, &Stacked(Linear), &ProbeConfig::default(), 0.2, 1e-3);
        assert!(flow.values().iter().all(|v| *v == 0.0));
        assert!(jump.entries.is_empty());
        assert!(flow.verdict.passed);
    }

    #[test]
    fn constant_bias_accumulates() {
        // Fast-only system driven by an oracle with zero mean error but a
        // constant offset δ.
        struct Zero;
        impl DriftOracle for Zero {
            fn mean(&self, _: &[f64], _: usize) -> Vec<f64> {
                vec![0.0]
            }
        }
        let delta = 0.25;
        let sched = TwoTimescaleSchedule::single(StepSchedule::explicit(vec![1.0]).unwrap());
        let oracle = Biased { inner: Zero, bias: delta };
        let r = run(&Linear, &[0.0, 0.0], &sched, Some(&oracle), &RunConfig::new(10, 0)).unwrap();
        let c = closeness_sup(&r, Timescale::Fast, 0, 2.0).unwrap();
        assert_eq!(c.value, 2.0 * delta);
        assert!(!c.truncated);
        let empty = closeness_sup(&r, Timescale::Fast, 0, 0.5).unwrap();
        assert_eq!(empty.value, 0.0);
        let cut = closeness_sup(&r, Timescale::Fast, 8, 5.0).unwrap();
        assert!(cut.truncated);
        assert_eq!(cut.value, 2.0 * delta);
    }

    #[test]
    fn verdict_rules() {
        assert!(quartile_verdict(&[1.0, 1.0, 1.0, 0.1], 0.2, 1e-3).passed);
        assert!(!quartile_verdict(&[1.0, 1.0, 1.0, 0.5], 0.2, 1e-3).passed);
        assert!(quartile_verdict(&[1e-4; 8], 0.2, 1e-3).passed);
        assert!(quartile_verdict(&[], 0.2, 1e-3).passed);
        assert!(decile_verdict(&[0.0; 20], 0.2).passed);
        assert!(!decile_verdict(&[1.0; 20], 0.2).passed);
        let v = window_max_verdict(&[5.0, 5.0, 0.01, 0.02], 0.05, 0.05);
        assert!(v.passed);
        assert_eq!(v.tail, 0.02);
    }

    #[test]
    fn noisy_closeness_decays_and_bias_does_not() {
        let k = 100_000;
        let grid = default_n_grid(k, 32);
        let noisy = run(&Linear, &[1.0, 0.0], &sched(), Some(&Noisy), &RunConfig::new(k, 2)).unwrap();
        let slow = closeness_trace(&noisy, Timescale::Slow, 1.0, &grid, 0.2, 1e-3).unwrap();
        assert!(slow.verdict.passed);
        assert!(slow.entries.iter().all(|e| e.1 == 0.0));
        let biased = Biased { inner: Noisy, bias: 0.1 };
        let b = run(&Linear, &[1.0, 0.0], &sched(), Some(&biased), &RunConfig::new(k, 2)).unwrap();
        let fast = closeness_trace(&b, Timescale::Fast, 1.0, &grid, 0.2, 1e-3).unwrap();
        assert!(!fast.verdict.passed);
        assert!(fast.entries.iter().all(|e| e.1 > 0.05));
    }

    #[test]
    fn rescaled_drift_examples() {
        let r = run(&Linear, &[1.0, 0.0], &sched(), Some(&Noisy), &RunConfig::new(20_000, 1)).unwrap();
        let t = boundary_layer_rescaled_drift(&r, 0.2);
        for &(k, v) in t.entries.iter().step_by(997) {
            let ratio = (k as f64 + 2.0).powf(-0.4);
            assert!((v - ratio * r.f_slow.row(k)[0].abs()).abs() < 1e-12);
        }
        let equal = TwoTimescaleSchedule::single(StepSchedule::power_law(1.0, 1.0, 0.8).unwrap());
        // Keep |f_s| roughly constant: start far from equilibrium on a
        // system whose slow drift is a constant.
        struct Drift;
        impl TwoTimescaleSystem for Drift {
            fn slow_dim(&self) -> usize {
                1
            }
            fn fast_dim(&self) -> usize {
                1
            }
            fn in_flow_set(&self, _: &[f64]) -> bool {
                true
            }
            fn in_jump_set(&self, _: &[f64]) -> bool {
                false
            }
            fn slow_flow(&self, _: &[f64]) -> Vec<f64> {
                vec![1.0]
            }
            fn fast_flow(&self, x: &[f64]) -> Vec<f64> {
                vec![-x[1]]
            }
            fn jump(&self, x: &[f64]) -> Vec<f64> {
                x.to_vec()
            }
        }
        let flat = run(&Drift, &[0.0, 0.0], &equal, None, &RunConfig::new(1000, 0)).unwrap();
        let t = boundary_layer_rescaled_drift(&flat, 0.2);
        assert!(t.values().iter().all(|v| *v == 1.0));
        assert!(!t.verdict.passed);
        let good = run(&Drift, &[0.0, 0.0], &sched(), None, &RunConfig::new(10_000, 0)).unwrap();
        assert!(boundary_layer_rescaled_drift(&good, 0.2).verdict.passed);
    }

    #[test]
    fn tracking_decays_for_frozen_slow_state() {
        struct Frozen;
        impl TwoTimescaleSystem for Frozen {
            fn slow_dim(&self) -> usize {
                1
            }
            fn fast_dim(&self) -> usize {
                1
            }
            fn in_flow_set(&self, _: &[f64]) -> bool {
                true
            }
            fn in_jump_set(&self, _: &[f64]) -> bool {
                false
            }
            fn slow_flow(&self, _: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
            fn fast_flow(&self, x: &[f64]) -> Vec<f64> {
                vec![x[0] - x[1]]
            }
            fn jump(&self, x: &[f64]) -> Vec<f64> {
                x.to_vec()
            }
        }
        let g = 0.7;
        let r = run(&Frozen, &[g, 3.0], &sched(), None, &RunConfig::new(500, 0)).unwrap();
        let lam = LambdaGraph::single_valued(|s| vec![s[0]], BoxSet::cube(1, 1.0));
        let t = lambda_tracking_trace(&r, &lam, 0.05).unwrap();
        // ξ⁺ − g = (1 − h_f)(ξ − g).
        let mut e = 3.0 - g;
        for k in 0..500 {
            assert!((t.entries[k].1 - e.abs()).abs() < 1e-12);
            e *= 1.0 - r.schedule.fast.step(k + 1);
        }
        assert!(t.verdict.passed);
        let cloud = LambdaGraph::point_cloud(vec![(vec![0.0], vec![0.0])], BoxSet::cube(1, 1.0)).unwrap();
        assert!(lambda_tracking_trace(&r, &cloud, 0.05).is_err());
    }

    #[test]
    fn graph_trace_flags_perturbed_states() {
        let mut r = run(&Linear, &[1.0, -1.0], &sched(), None, &RunConfig::new(300, 0)).unwrap();
        // Perturb the recorded drifts after the fact.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut f = crate::linalg::Rows::new(1);
        for k in 0..r.steps() {
            f.push(&[r.f_fast.row(k)[0] + rng.gen_range(0.01..0.1)]);
        }
        r.f_fast = f;
        let (flow, _) = graph_containment_trace(&r, &Stacked(Linear), &ProbeConfig::default(), 0.2, 1e-3);
        assert!(flow.values().iter().all(|v| *v >= 0.01 - 1e-15));
        assert!(!flow.verdict.passed);
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let r = run(&Linear, &[1.0, 0.0], &sched(), Some(&Noisy), &RunConfig::new(2000, 1)).unwrap();
        let lam = LambdaGraph::single_valued(|s| vec![0.5 * s[0]], BoxSet::cube(1, 10.0));
        let rep = diagnose(&r, &Stacked(Linear), Some(&lam), &DiagnosticsConfig::default()).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        for key in [
            "closeness_slow",
            "closeness_fast",
            "graph_flow",
            "graph_jump",
            "bl_drift",
            "lambda_tracking",
            "verdicts",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(rep.verdict_table().contains("bl_drift"));
        let mut buf = Vec::new();
        rep.bl_drift.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n_or_k,value\n0,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn closeness_matches_double_loop(
            seed in 0u64..1000,
            steps in 50usize..800,
            n in 0usize..60,
            t in 0.05f64..3.0,
        ) {
            let b = Biased { inner: Noisy, bias: 0.05 };
            let r = run(&Linear, &[0.5, -0.5], &sched(), Some(&b), &RunConfig::new(steps, seed)).unwrap();
            for ts in [Timescale::Slow, Timescale::Fast] {
                let fast = closeness_sup(&r, ts, n, t).unwrap().value;
                let brute = brute_closeness(&r, ts, n, t);
                prop_assert!((fast - brute).abs() <= 1e-12 * brute.max(1.0));
            }
        }

        #[test]
        fn closeness_is_monotone_in_window(
            seed in 0u64..1000,
            n in 0usize..200,
            t1 in 0.05f64..2.0,
            dt in 0.0f64..2.0,
        ) {
            let r = run(&Linear, &[0.5, -0.5], &sched(), Some(&Noisy), &RunConfig::new(1000, seed)).unwrap();
            let a = closeness_sup(&r, Timescale::Fast, n, t1).unwrap().value;
            let b = closeness_sup(&r, Timescale::Fast, n, t1 + dt).unwrap().value;
            prop_assert!(a <= b);
        }
    }
}
