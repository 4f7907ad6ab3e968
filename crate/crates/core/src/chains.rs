//! Constructive `(τ, ε)`-chains and weak-invariance spot checks built from
//! simulated solution legs.
//!
//! Legs follow the single flow selection, so a failed search never proves
//! that no chain exists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, BoxSet};
use crate::simulate::DEFAULT_MAX_CONSECUTIVE_JUMPS;
use crate::systems::HybridSystem;

/// A sampled hybrid arc: `(t, j, ψ(t, j))` in hybrid-time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionArc {
    pub times: Vec<(f64, usize)>,
    pub points: Vec<Vec<f64>>,
}

impl SolutionArc {
    fn new(x0: &[f64]) -> Self {
        Self {
            times: vec![(0.0, 0)],
            points: vec![x0.to_vec()],
        }
    }

    fn push(&mut self, t: f64, j: usize, x: &[f64]) {
        self.times.push((t, j));
        self.points.push(x.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.iter().map(Vec::as_slice)
    }

    pub fn end(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    pub fn end_time(&self) -> (f64, usize) {
        *self.times.last().expect("nonempty arc")
    }

    /// The arc cut after sample `i`.
    pub fn prefix(&self, i: usize) -> Self {
        Self {
            times: self.times[..=i].to_vec(),
            points: self.points[..=i].to_vec(),
        }
    }
}

/// Euler integration of the flow selection with jump priority until
/// `t + j ≥ horizon`; `t` counts flow steps times `dt`.
pub fn simulate_solution_leg<S: HybridSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<SolutionArc> {
    match integrate(sys, x0, horizon, dt)? {
        (arc, None) => Ok(arc),
        (_, Some(e)) => Err(e),
    }
}

/// The samples computed before the first failure, and that failure.
fn integrate<S: HybridSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<(SolutionArc, Option<Error>)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut arc = SolutionArc::new(x0);
    let mut x = x0.to_vec();
    let (mut steps, mut j, mut consecutive) = (0usize, 0usize, 0usize);
    while (steps as f64) * dt + (j as f64) < horizon {
        if sys.in_jump_set(&x) {
            consecutive += 1;
            if consecutive > DEFAULT_MAX_CONSECUTIVE_JUMPS {
                let max = DEFAULT_MAX_CONSECUTIVE_JUMPS;
                return Ok((arc, Some(Error::JumpLivelock { k: steps, max })));
            }
            x = sys.jump(&x);
            j += 1;
        } else if sys.in_flow_set(&x) {
            consecutive = 0;
            let f = sys.flow(&x);
            x.iter_mut().zip(&f).for_each(|(a, d)| *a += dt * d);
            steps += 1;
        } else {
            return Ok((arc, Some(Error::EscapedFlowJumpSets { k: steps, j })));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Ok((arc, Some(Error::NumericalBlowup { k: steps })));
        }
        arc.push(steps as f64 * dt, j, &x);
    }
    Ok((arc, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub waypoints: Vec<Vec<f64>>,
    pub legs: Vec<SolutionArc>,
    /// `(t_k, j_k)` at which each leg was cut.
    pub leg_horizons: Vec<(f64, usize)>,
    /// `|x_{k+1} − ψ_k(t_k, j_k)|` per leg.
    pub gaps: Vec<f64>,
    pub epsilon: f64,
    pub tau: f64,
    pub internal_set: Option<BoxSet>,
}

impl Chain {
    pub fn num_legs(&self) -> usize {
        self.legs.len()
    }

    /// Re-check the chain conditions from the stored data.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.waypoints.len() != self.legs.len() + 1 {
            return Err("waypoint count must exceed leg count by one".into());
        }
        for (k, leg) in self.legs.iter().enumerate() {
            if leg.point(0) != self.waypoints[k].as_slice() {
                return Err(format!("leg {k} does not start at its waypoint"));
            }
            let (t, j) = leg.end_time();
            if (t, j) != self.leg_horizons[k] {
                return Err(format!("leg {k} horizon mismatch"));
            }
            if t + (j as f64) < self.tau {
                return Err(format!("leg {k} shorter than tau"));
            }
            if dist(&self.waypoints[k + 1], leg.end()) > self.epsilon {
                return Err(format!("hop after leg {k} exceeds epsilon"));
            }
            if let Some(b) = &self.internal_set {
                if leg.points().any(|p| !b.contains(p)) {
                    return Err(format!("leg {k} leaves the internal set"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSearch {
    pub tau: f64,
    pub epsilon: f64,
    /// Maximum number of legs.
    pub budget: usize,
    pub internal_box: Option<BoxSet>,
    /// Integration step; `None` means `min(1e-2, τ/100)`.
    pub dt: Option<f64>,
    /// Longest leg tried, as a multiple of `τ`.
    pub horizon_factor: f64,
}

impl ChainSearch {
    pub fn new(tau: f64, epsilon: f64, budget: usize) -> Self {
        Self {
            tau,
            epsilon,
            budget,
            internal_box: None,
            dt: None,
            horizon_factor: 8.0,
        }
    }

    pub fn internal(mut self, bounds: BoxSet) -> Self {
        self.internal_box = Some(bounds);
        self
    }

    pub fn step(&self) -> f64 {
        self.dt.unwrap_or((self.tau / 100.0).min(1e-2))
    }
}

/// Greedy best-first chain search from `x` to `y`.
///
/// Each round integrates legs of horizon `horizon_factor·τ` at two step
/// sizes; any sample with `t + j ≥ τ` (and, for internal chains, no earlier
/// sample outside the box) may end the leg, and the one closest to `y` is
/// taken. The search stops when that sample is within `ε` of `y`;
/// otherwise it hops up to `ε` toward `y` and repeats.
pub fn find_chain<S: HybridSystem + ?Sized>(sys: &S, x: &[f64], y: &[f64], search: &ChainSearch) -> Result<Chain> {
    let member = |p: &[f64]| sys.in_flow_set(p) || sys.in_jump_set(p);
    let inside = |p: &[f64]| search.internal_box.as_ref().map_or(true, |b| b.contains(p));
    if !(search.tau > 0.0 && search.epsilon > 0.0) {
        return Err(Error::InvalidArgument("tau and epsilon must be positive".into()));
    }
    if !member(x) || !member(y) || !inside(x) || !inside(y) {
        return Err(Error::InvalidArgument("chain endpoints must lie in C ∪ D and the internal set".into()));
    }
    let dt = search.step();
    let horizon = search.tau * search.horizon_factor.max(1.0);
    let mut chain = Chain {
        waypoints: vec![x.to_vec()],
        legs: Vec::new(),
        leg_horizons: Vec::new(),
        gaps: Vec::new(),
        epsilon: search.epsilon,
        tau: search.tau,
        internal_set: search.internal_box.clone(),
    };
    let mut best_gap = dist(x, y);
    let mut current = x.to_vec();
    for _ in 0..search.budget {
        let mut best: Option<(f64, SolutionArc, usize)> = None;
        for h in [dt, dt / 2.0] {
            // A failed leg still offers the samples before the failure; the
            // last one is dropped since it lies outside C ∪ D.
            let arc = match integrate(sys, &current, horizon, h)? {
                (a, None) => a,
                (a, Some(_)) if a.len() > 1 => a.prefix(a.len() - 2),
                _ => continue,
            };
            for i in 0..arc.len() {
                if !inside(arc.point(i)) {
                    break;
                }
                let (t, j) = arc.times[i];
                if t + j as f64 >= search.tau {
                    let d = dist(arc.point(i), y);
                    if best.as_ref().map_or(true, |b| d < b.0) {
                        best = Some((d, arc.clone(), i));
                    }
                }
            }
        }
        let Some((d, arc, i)) = best else {
            break;
        };
        best_gap = best_gap.min(d);
        let leg = arc.prefix(i);
        let end = leg.end().to_vec();
        let next = if d <= search.epsilon {
            y.to_vec()
        } else {
            hop_toward(&end, y, search.epsilon, |p| member(p) && inside(p))
        };
        chain.gaps.push(dist(&next, &end));
        chain.leg_horizons.push(leg.end_time());
        chain.legs.push(leg);
        chain.waypoints.push(next.clone());
        if d <= search.epsilon {
            return Ok(chain);
        }
        current = next;
    }
    Err(Error::BudgetExhausted {
        budget: search.budget,
        best_gap,
    })
}

/// The point at distance up to `eps` from `from` toward `to`, shortened
/// until `ok` accepts it (falling back to `from`).
fn hop_toward(from: &[f64], to: &[f64], eps: f64, ok: impl Fn(&[f64]) -> bool) -> Vec<f64> {
    let d = dist(from, to);
    let mut step = eps.min(d);
    for _ in 0..20 {
        let p: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + step * (b - a) / d).collect();
        if ok(&p) && dist(&p, from) <= eps {
            return p;
        }
        step /= 2.0;
    }
    from.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakInvarianceReport {
    /// Per cloud point: some sampled arc of hybrid length `≥ T` stays in
    /// the `eps`-inflation of the cloud and passes within `eps` of it.
    pub per_point: Vec<bool>,
    pub passed: usize,
    pub evidence_only: bool,
}

impl WeakInvarianceReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.per_point.len()
    }
}

/// Falsification-oriented check of weak invariance for a point cloud.
pub fn weak_invariance_spot_check<S: HybridSystem + ?Sized>(
    sys: &S,
    cloud: &[Vec<f64>],
    horizon: f64,
    eps: f64,
    dt: f64,
) -> Result<WeakInvarianceReport> {
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("point cloud must be nonempty".into()));
    }
    let near_cloud = |p: &[f64]| cloud.iter().any(|c| dist(c, p) <= eps);
    // One arc per cloud point, kept only if it stays near the cloud.
    let arcs: Vec<SolutionArc> = cloud
        .iter()
        .filter_map(|c| simulate_solution_leg(sys, c, horizon, dt).ok())
        .filter(|a| {
            let (t, j) = a.end_time();
            t + j as f64 >= horizon && a.points().all(near_cloud)
        })
        .collect();
    let per_point: Vec<bool> = cloud
        .iter()
        .map(|x| arcs.iter().any(|a| a.points().any(|p| dist(p, x) <= eps)))
        .collect();
    let passed = per_point.iter().filter(|b| **b).count();
    Ok(WeakInvarianceReport {
        per_point,
        passed,
        evidence_only: true,
    })
}
