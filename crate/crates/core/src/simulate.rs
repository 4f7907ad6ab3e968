//! Forward-Euler hybrid simulation with jump priority and optional
//! stochastic fast drift.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid_time::{HybridIndex, HybridSequence};
use crate::linalg::{all_finite, Rows};
use crate::schedules::{StepSchedule, Timescale, TwoTimescaleSchedule};
use crate::systems::{HybridSystem, TwoTimescaleSystem};

pub const DEFAULT_MAX_CONSECUTIVE_JUMPS: usize = 10_000;

/// Source of the fast drift.
///
/// `mean` is the conditional mean given everything up to step `k`; the
/// realized drift is `mean + noise`. The noise must be drawn from `rng`
/// only, which is private to step `k`.
pub trait DriftOracle: Send + Sync {
    fn mean(&self, x: &[f64], k: usize) -> Vec<f64>;

    /// Zero-mean perturbation; the default is noise-free.
    fn noise(&self, x: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let _ = rng;
        vec![0.0; self.mean(x, k).len()]
    }

    fn sample(&self, x: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let m = self.mean(x, k);
        let v = self.noise(x, k, rng);
        m.iter().zip(&v).map(|(a, b)| a + b).collect()
    }
}

impl<O: DriftOracle + ?Sized> DriftOracle for &O {
    fn mean(&self, x: &[f64], k: usize) -> Vec<f64> {
        (**self).mean(x, k)
    }
    fn noise(&self, x: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (**self).noise(x, k, rng)
    }
}

/// Adds a constant offset to every realized drift while reporting the
/// unbiased mean, so the offset shows up as a persistent residual.
#[derive(Debug, Clone)]
pub struct Biased<O> {
    pub inner: O,
    pub bias: f64,
}

impl<O: DriftOracle> DriftOracle for Biased<O> {
    fn mean(&self, x: &[f64], k: usize) -> Vec<f64> {
        self.inner.mean(x, k)
    }
    fn noise(&self, x: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.inner
            .noise(x, k, rng)
            .into_iter()
            .map(|v| v + self.bias)
            .collect()
    }
}

/// Per-step random stream keyed by `(seed, k)`.
pub fn step_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Flow,
    Jump,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Flow => "flow",
            Self::Jump => "jump",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of flow steps `K`.
    pub steps: usize,
    pub seed: u64,
    pub max_consecutive_jumps: usize,
}

impl RunConfig {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            seed,
            max_consecutive_jumps: DEFAULT_MAX_CONSECUTIVE_JUMPS,
        }
    }
}

/// A simulated hybrid sequence with everything the diagnostics consume.
///
/// Row `k` of the per-step tables belongs to the flow step from
/// `(k, j̄_k)` to `(k+1, j̄_k)`.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub sequence: HybridSequence,
    pub slow_dim: usize,
    pub fast_dim: usize,
    /// Realized difference quotients `f̂_{s,k+1}`.
    pub fhat_slow: Rows,
    pub fhat_fast: Rows,
    /// Recorded drift sequence `f_{s,k}`, `f_{f,k}`.
    pub f_slow: Rows,
    pub f_fast: Rows,
    /// Fast residuals `v̄_{f,k+1}`; zero in deterministic runs.
    pub residual_fast: Rows,
    /// Indices `(k, j)` at which a jump to `(k, j+1)` was taken.
    pub jump_log: Vec<HybridIndex>,
    pub seed: u64,
    pub stochastic: bool,
    pub schedule: TwoTimescaleSchedule,
}

impl SimRun {
    pub fn steps(&self) -> usize {
        self.fhat_slow.len()
    }

    /// `Φ(k, j̄_k)`, the point from which flow step `k` starts (or the
    /// terminal point for `k = K`).
    pub fn flow_point(&self, k: usize) -> &[f64] {
        let j = self.sequence.jbar(k).unwrap_or_else(|| self.sequence.domain().num_jumps());
        self.sequence.at(k, j).expect("flowing index in domain")
    }

    pub fn slow_part<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.slow_dim]
    }

    pub fn fast_part<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.slow_dim..]
    }

    pub fn fhat(&self, r: Timescale) -> &Rows {
        match r {
            Timescale::Slow => &self.fhat_slow,
            Timescale::Fast => &self.fhat_fast,
        }
    }

    pub fn f(&self, r: Timescale) -> &Rows {
        match r {
            Timescale::Slow => &self.f_slow,
            Timescale::Fast => &self.f_fast,
        }
    }

    /// Stacked `f_k = (f_{s,k}, f_{f,k})`.
    pub fn f_stacked(&self, k: usize) -> Vec<f64> {
        let mut v = self.f_slow.row(k).to_vec();
        v.extend_from_slice(self.f_fast.row(k));
        v
    }
}

/// `v̄_{f,k+1}` per flow step. The slow dynamics are deterministic, so the
/// slow residuals are identically zero and not stored.
pub fn residuals(run: &SimRun) -> &Rows {
    &run.residual_fast
}

/// `(x_s + h_s·slow_drift, x_f + h_f·fast_drift)`.
pub fn euler_flow_step(
    x: &[f64],
    slow_dim: usize,
    h_s: f64,
    h_f: f64,
    slow_drift: &[f64],
    fast_drift: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    out.extend(x[..slow_dim].iter().zip(slow_drift).map(|(a, d)| a + h_s * d));
    out.extend(x[slow_dim..].iter().zip(fast_drift).map(|(a, d)| a + h_f * d));
    if all_finite(&out) {
        Ok(out)
    } else {
        Err(Error::NumericalBlowup { k })
    }
}

/// Jump priority: jump iff `x ∈ D`, else flow iff `x ∈ C`.
pub fn step_policy<S: TwoTimescaleSystem + ?Sized>(sys: &S, x: &[f64], k: usize, j: usize) -> Result<Phase> {
    if sys.in_jump_set(x) {
        Ok(Phase::Jump)
    } else if sys.in_flow_set(x) {
        Ok(Phase::Flow)
    } else {
        Err(Error::EscapedFlowJumpSets { k, j })
    }
}

/// Simulate `K = cfg.steps` flow steps from `x0`.
///
/// Without an oracle the run is deterministic and records `f = f̂`. With
/// an oracle the fast drift is `oracle.sample`, the recorded fast drift is
/// `oracle.mean`, and the slow drift is the system's slow selection.
pub fn run<S: TwoTimescaleSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    sched: &TwoTimescaleSchedule,
    oracle: Option<&dyn DriftOracle>,
    cfg: &RunConfig,
) -> Result<SimRun> {
    let (ns, nf) = (sys.slow_dim(), sys.fast_dim());
    if x0.len() != ns + nf {
        return Err(Error::DimensionMismatch {
            expected: ns + nf,
            got: x0.len(),
        });
    }
    if cfg.steps == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let mut seq = HybridSequence::new(x0);
    let mut out = SimRun {
        sequence: HybridSequence::new(x0),
        slow_dim: ns,
        fast_dim: nf,
        fhat_slow: Rows::with_capacity(ns, cfg.steps),
        fhat_fast: Rows::with_capacity(nf, cfg.steps),
        f_slow: Rows::with_capacity(ns, cfg.steps),
        f_fast: Rows::with_capacity(nf, cfg.steps),
        residual_fast: Rows::with_capacity(nf, cfg.steps),
        jump_log: Vec::new(),
        seed: cfg.seed,
        stochastic: oracle.is_some(),
        schedule: sched.clone(),
    };
    let mut x = x0.to_vec();
    let (mut k, mut j) = (0usize, 0usize);
    let mut consecutive = 0usize;
    while k < cfg.steps {
        match step_policy(sys, &x, k, j)? {
            Phase::Jump => {
                consecutive += 1;
                if consecutive > cfg.max_consecutive_jumps {
                    return Err(Error::JumpLivelock {
                        k,
                        max: cfg.max_consecutive_jumps,
                    });
                }
                let next = sys.jump(&x);
                if next.len() != x.len() || !all_finite(&next) {
                    return Err(Error::NumericalBlowup { k });
                }
                out.jump_log.push(HybridIndex::new(k, j));
                seq.push_jump(&next);
                x = next;
                j += 1;
            }
            Phase::Flow => {
                consecutive = 0;
                let h_s = sched.slow.step(k + 1);
                let h_f = sched.fast.step(k + 1);
                let slow = sys.slow_flow(&x);
                let (fast, mean, noise) = match oracle {
                    None => {
                        let f = sys.fast_flow(&x);
                        (f.clone(), f, vec![0.0; nf])
                    }
                    Some(o) => {
                        let mut rng = step_rng(cfg.seed, k);
                        let m = o.mean(&x, k);
                        let v = o.noise(&x, k, &mut rng);
                        let s: Vec<f64> = m.iter().zip(&v).map(|(a, b)| a + b).collect();
                        (s, m, v)
                    }
                };
                let next = euler_flow_step(&x, ns, h_s, h_f, &slow, &fast, k)?;
                out.fhat_slow.push(&slow);
                out.fhat_fast.push(&fast);
                out.f_slow.push(&slow);
                out.f_fast.push(&mean);
                out.residual_fast.push(&noise);
                seq.push_flow(&next);
                x = next;
                k += 1;
            }
        }
    }
    out.sequence = seq;
    Ok(out)
}

/// A single-timescale hybrid system seen as a two-timescale system with an
/// empty fast block.
#[derive(Debug, Clone)]
pub struct SlowOnly<S>(pub S);

impl<S: HybridSystem> TwoTimescaleSystem for SlowOnly<S> {
    fn slow_dim(&self) -> usize {
        self.0.dim()
    }
    fn fast_dim(&self) -> usize {
        0
    }
    fn in_flow_set(&self, x: &[f64]) -> bool {
        self.0.in_flow_set(x)
    }
    fn in_jump_set(&self, x: &[f64]) -> bool {
        self.0.in_jump_set(x)
    }
    fn slow_flow(&self, x: &[f64]) -> Vec<f64> {
        self.0.flow(x)
    }
    fn fast_flow(&self, _: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        self.0.jump(x)
    }
    fn slow_flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.0.flow_distance(x, v)
    }
    fn fast_flow_distance(&self, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.0.jump_distance(x, v)
    }
}

/// Deterministic single-timescale Euler simulation.
pub fn run_single<S: HybridSystem>(
    sys: &S,
    x0: &[f64],
    sched: &StepSchedule,
    cfg: &RunConfig,
) -> Result<SimRun> {
    run(
        &SlowOnly(sys),
        x0,
        &TwoTimescaleSchedule::single(sched.clone()),
        None,
        cfg,
    )
}
