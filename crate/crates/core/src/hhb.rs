//! Hybrid heavy ball with a timer, and its two-timescale stochastic
//! finite-sum optimizer.
//!
//! Slow state `χ = (q, p, τ) ∈ R^{2n+1}`, fast state `ξ ∈ R^n` tracking
//! `∇Ψ(q)`. Stacked layout: `[q, p, τ, ξ]`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm_pow, norm_sq, sub, BoxSet};
use crate::simulate::DriftOracle;
use crate::systems::{HybridSystem, LambdaGraph, ReducedSystem, TwoTimescaleSystem};

/// `Ψ = (1/N) Σ Ψ_i` on `R^n`.
pub trait FiniteSumObjective: Send + Sync {
    fn dim(&self) -> usize;
    fn num_components(&self) -> usize;
    /// `∇Ψ_i(q)` for `i ∈ 0..N`.
    fn component_grad(&self, i: usize, q: &[f64]) -> Vec<f64>;
    fn value(&self, q: &[f64]) -> f64;

    /// The literal average of the component gradients.
    fn full_grad(&self, q: &[f64]) -> Vec<f64> {
        let n = self.num_components();
        let mut g = vec![0.0; self.dim()];
        for i in 0..n {
            for (a, b) in g.iter_mut().zip(self.component_grad(i, q)) {
                *a += b;
            }
        }
        g.iter_mut().for_each(|v| *v /= n as f64);
        g
    }

    /// `|q|_{Q*}` when the minimizer set is known in closed form.
    fn minimizer_set_distance(&self, _q: &[f64]) -> Option<f64> {
        None
    }
}

impl<O: FiniteSumObjective + ?Sized> FiniteSumObjective for Arc<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_components(&self) -> usize {
        (**self).num_components()
    }
    fn component_grad(&self, i: usize, q: &[f64]) -> Vec<f64> {
        (**self).component_grad(i, q)
    }
    fn value(&self, q: &[f64]) -> f64 {
        (**self).value(q)
    }
    fn full_grad(&self, q: &[f64]) -> Vec<f64> {
        (**self).full_grad(q)
    }
    fn minimizer_set_distance(&self, q: &[f64]) -> Option<f64> {
        (**self).minimizer_set_distance(q)
    }
}

fn uniform_vectors(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

/// `Ψ_i(q) = ½|q − a_i|²`, so `∇Ψ(q) = q − ā` and `Q* = {ā}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSum {
    pub centers: Vec<Vec<f64>>,
    pub centroid: Vec<f64>,
}

impl QuadraticSum {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let n = centers.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidArgument("objective needs at least one component".into())
        })?;
        if n == 0 {
            return Err(Error::InvalidArgument("objective dimension must be positive".into()));
        }
        if let Some(c) = centers.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: c.len() });
        }
        let mut centroid = vec![0.0; n];
        for c in &centers {
            for (a, b) in centroid.iter_mut().zip(c) {
                *a += b;
            }
        }
        centroid.iter_mut().for_each(|v| *v /= centers.len() as f64);
        Ok(Self { centers, centroid })
    }

    /// Centers drawn uniformly from `[-1, 1]^n`.
    pub fn random(n: usize, components: usize, seed: u64) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidArgument("objective needs at least one component".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(uniform_vectors(n, components, &mut rng))
    }

    /// `γ` in closed form: `B_p` does not depend on `q` here.
    pub fn exact_gamma(&self, p: f64) -> f64 {
        self.centers
            .iter()
            .map(|a| norm_pow(&sub(a, &self.centroid), 2.0 * p))
            .fold(0.0, f64::max)
    }
}

impl FiniteSumObjective for QuadraticSum {
    fn dim(&self) -> usize {
        self.centroid.len()
    }
    fn num_components(&self) -> usize {
        self.centers.len()
    }
    fn component_grad(&self, i: usize, q: &[f64]) -> Vec<f64> {
        sub(q, &self.centers[i])
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.centers.iter().map(|a| 0.5 * norm_sq(&sub(q, a))).sum::<f64>() / self.centers.len() as f64
    }
    fn minimizer_set_distance(&self, q: &[f64]) -> Option<f64> {
        Some(dist(q, &self.centroid))
    }
}

/// `Ψ_i(q) = Σ_d [(q_d − c_d)² + 3 sin²(q_d − c_d)] + ⟨b_i, q⟩` with the
/// `b_i` summing to zero (they come in `±` pairs).
///
/// Each coordinate term has negative curvature near `|u| = π/2` yet its
/// derivative `2u + 3 sin 2u` vanishes only at `u = 0`, so `Q* = {c}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconvexDemo {
    pub center: Vec<f64>,
    pub offsets: Vec<Vec<f64>>,
}

impl NonconvexDemo {
    pub fn random(n: usize, components: usize, seed: u64) -> Result<Self> {
        if n == 0 || components == 0 {
            return Err(Error::InvalidArgument("objective needs n ≥ 1 and N ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = uniform_vectors(n, 1, &mut rng).remove(0);
        let half = uniform_vectors(n, components / 2, &mut rng);
        let mut offsets = half.clone();
        offsets.extend(half.iter().map(|b| b.iter().map(|v| -v).collect::<Vec<f64>>()));
        if components % 2 == 1 {
            offsets.push(vec![0.0; n]);
        }
        Ok(Self { center, offsets })
    }
}

impl FiniteSumObjective for NonconvexDemo {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn num_components(&self) -> usize {
        self.offsets.len()
    }
    fn component_grad(&self, i: usize, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.center)
            .zip(&self.offsets[i])
            .map(|((x, c), b)| {
                let u = x - c;
                2.0 * u + 3.0 * (2.0 * u).sin() + b
            })
            .collect()
    }
    fn value(&self, q: &[f64]) -> f64 {
        let base: f64 = q
            .iter()
            .zip(&self.center)
            .map(|(x, c)| {
                let u = x - c;
                u * u + 3.0 * u.sin().powi(2)
            })
            .sum();
        let lin: f64 = self.offsets.iter().map(|b| dot(b, q)).sum::<f64>() / self.offsets.len() as f64;
        base + lin
    }
    fn minimizer_set_distance(&self, q: &[f64]) -> Option<f64> {
        Some(dist(q, &self.center))
    }
}

/// Built-in objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    QuadraticSum(QuadraticSum),
    NonconvexDemo(NonconvexDemo),
}

impl FiniteSumObjective for Objective {
    fn dim(&self) -> usize {
        match self {
            Self::QuadraticSum(o) => o.dim(),
            Self::NonconvexDemo(o) => o.dim(),
        }
    }
    fn num_components(&self) -> usize {
        match self {
            Self::QuadraticSum(o) => o.num_components(),
            Self::NonconvexDemo(o) => o.num_components(),
        }
    }
    fn component_grad(&self, i: usize, q: &[f64]) -> Vec<f64> {
        match self {
            Self::QuadraticSum(o) => o.component_grad(i, q),
            Self::NonconvexDemo(o) => o.component_grad(i, q),
        }
    }
    fn value(&self, q: &[f64]) -> f64 {
        match self {
            Self::QuadraticSum(o) => o.value(q),
            Self::NonconvexDemo(o) => o.value(q),
        }
    }
    fn minimizer_set_distance(&self, q: &[f64]) -> Option<f64> {
        match self {
            Self::QuadraticSum(o) => o.minimizer_set_distance(q),
            Self::NonconvexDemo(o) => o.minimizer_set_distance(q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HhbParams {
    pub kappa: f64,
    /// Timer threshold `T`.
    #[serde(rename = "T")]
    pub timer: f64,
}

impl Default for HhbParams {
    fn default() -> Self {
        Self { kappa: 1.0, timer: 0.5 }
    }
}

impl HhbParams {
    pub fn new(kappa: f64, timer: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
        }
        if !(timer.is_finite() && timer > 0.0) {
            return Err(Error::InvalidArgument(format!("T must be positive, got {timer}")));
        }
        Ok(Self { kappa, timer })
    }
}

/// `(p, −κp − grad, min{1, 2 − τ/T})` at `χ = (q, p, τ)`.
pub fn hhb_flow(chi: &[f64], grad: &[f64], params: &HhbParams) -> Vec<f64> {
    let n = grad.len();
    let (p, tau) = (&chi[n..2 * n], chi[2 * n]);
    let mut out = Vec::with_capacity(2 * n + 1);
    out.extend_from_slice(p);
    out.extend(p.iter().zip(grad).map(|(pi, g)| -params.kappa * pi - g));
    out.push(1.0f64.min(2.0 - tau / params.timer));
    out
}

/// `G_HB(q, p, τ) = (q, 0, 0)`.
pub fn hhb_jump(chi: &[f64]) -> Vec<f64> {
    let n = (chi.len() - 1) / 2;
    let mut out = chi[..n].to_vec();
    out.resize(2 * n + 1, 0.0);
    out
}

/// `(x ∈ C, x ∈ D)` at the stacked state `x = (q, p, τ, ξ)`.
pub fn in_sets(x: &[f64], n: usize, params: &HhbParams) -> (bool, bool) {
    let (p, tau, xi) = (&x[n..2 * n], x[2 * n], &x[2 * n + 1..3 * n + 1]);
    sets_from(dot(xi, p), tau, params)
}

fn sets_from(inner: f64, tau: f64, params: &HhbParams) -> (bool, bool) {
    let t = params.timer;
    let in_c = (inner <= 0.0 && tau >= t) || tau <= t;
    let in_d = inner >= 0.0 && tau >= t;
    (in_c, in_d)
}

/// `|χ|_M` for `M = Q* × {0} × [0, 2T]`.
pub fn distance_to_m<O: FiniteSumObjective + ?Sized>(chi: &[f64], obj: &O, params: &HhbParams) -> Result<f64> {
    let n = obj.dim();
    let dq = obj
        .minimizer_set_distance(&chi[..n])
        .ok_or(Error::MinimizerSetUnavailable)?;
    let tau = chi[2 * n];
    let dt = if tau < 0.0 {
        -tau
    } else if tau > 2.0 * params.timer {
        tau - 2.0 * params.timer
    } else {
        0.0
    };
    Ok((dq * dq + norm_sq(&chi[n..2 * n]) + dt * dt).sqrt())
}

/// `B_p(q) = max_i |∇Ψ_i(q) − ∇Ψ(q)|^{2p}`.
pub fn noise_bound_bp<O: FiniteSumObjective + ?Sized>(obj: &O, p: f64, q: &[f64]) -> f64 {
    let g = obj.full_grad(q);
    (0..obj.num_components())
        .map(|i| norm_pow(&sub(&obj.component_grad(i, q), &g), 2.0 * p))
        .fold(0.0, f64::max)
}

/// Probe surrogate of `γ(r) = max_{|q| ≤ r} B_p(q)`.
///
/// Probes are `{0} ∪ {2^{m/4} w_i : 2^{m/4} ≤ r, m ≥ −80}` for fixed
/// unit directions `w_i`, so the probe set for `r1 ≤ r2` is contained in
/// the one for `r2` and the surrogate is monotone in `r`.
pub fn gamma_envelope<O: FiniteSumObjective + ?Sized>(obj: &O, p: f64, r: f64, probe_count: usize) -> f64 {
    let n = obj.dim();
    let mut best = noise_bound_bp(obj, p, &vec![0.0; n]);
    if !(r > 0.0) {
        return best;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let dirs: Vec<Vec<f64>> = (0..probe_count.max(1))
        .map(|_| loop {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let len = norm_sq(&w).sqrt();
            if len > 1e-3 && len <= 1.0 {
                break w.iter().map(|v| v / len).collect();
            }
        })
        .collect();
    let m_max = (4.0 * r.log2()).floor() as i64;
    for m in -80..=m_max {
        let s = 2f64.powf(m as f64 / 4.0);
        if s > r {
            break;
        }
        for w in &dirs {
            let q: Vec<f64> = w.iter().map(|v| s * v).collect();
            best = best.max(noise_bound_bp(obj, p, &q));
        }
    }
    best
}

/// The deterministic single-timescale heavy ball on `χ`, with `∇Ψ(q)` in
/// place of `ξ`.
#[derive(Debug, Clone)]
pub struct HhbSystem<O> {
    pub obj: O,
    pub params: HhbParams,
}

impl<O: FiniteSumObjective> HhbSystem<O> {
    pub fn new(obj: O, params: HhbParams) -> Self {
        Self { obj, params }
    }

    fn inner(&self, chi: &[f64]) -> f64 {
        let n = self.obj.dim();
        dot(&self.obj.full_grad(&chi[..n]), &chi[n..2 * n])
    }
}

impl<O: FiniteSumObjective> HybridSystem for HhbSystem<O> {
    fn dim(&self) -> usize {
        2 * self.obj.dim() + 1
    }
    fn in_flow_set(&self, chi: &[f64]) -> bool {
        sets_from(self.inner(chi), chi[2 * self.obj.dim()], &self.params).0
    }
    fn in_jump_set(&self, chi: &[f64]) -> bool {
        sets_from(self.inner(chi), chi[2 * self.obj.dim()], &self.params).1
    }
    fn flow(&self, chi: &[f64]) -> Vec<f64> {
        let n = self.obj.dim();
        hhb_flow(chi, &self.obj.full_grad(&chi[..n]), &self.params)
    }
    fn jump(&self, chi: &[f64]) -> Vec<f64> {
        hhb_jump(chi)
    }
}

/// The two-timescale heavy ball with slow `χ` and fast `ξ ≈ ∇Ψ(q)`.
#[derive(Debug, Clone)]
pub struct HhbTwoTimescale<O> {
    pub obj: O,
    pub params: HhbParams,
}

/// Mean fast drift `∇Ψ(q) − ξ`.
fn fast_mean<O: FiniteSumObjective + ?Sized>(obj: &O, x: &[f64]) -> Vec<f64> {
    let n = obj.dim();
    sub(&obj.full_grad(&x[..n]), &x[2 * n + 1..])
}

impl<O: FiniteSumObjective> HhbTwoTimescale<O> {
    pub fn new(obj: O, params: HhbParams) -> Self {
        Self { obj, params }
    }

    /// `x0 = (q = 1, p = 0, τ = 0, ξ = 0)`.
    pub fn default_initial_state(&self) -> Vec<f64> {
        let n = self.obj.dim();
        let mut x = vec![1.0; n];
        x.resize(3 * n + 1, 0.0);
        x
    }
}

impl<O: FiniteSumObjective> TwoTimescaleSystem for HhbTwoTimescale<O> {
    fn slow_dim(&self) -> usize {
        2 * self.obj.dim() + 1
    }
    fn fast_dim(&self) -> usize {
        self.obj.dim()
    }
    fn in_flow_set(&self, x: &[f64]) -> bool {
        in_sets(x, self.obj.dim(), &self.params).0
    }
    fn in_jump_set(&self, x: &[f64]) -> bool {
        in_sets(x, self.obj.dim(), &self.params).1
    }
    fn slow_flow(&self, x: &[f64]) -> Vec<f64> {
        let n = self.obj.dim();
        hhb_flow(&x[..2 * n + 1], &x[2 * n + 1..], &self.params)
    }
    fn fast_flow(&self, x: &[f64]) -> Vec<f64> {
        fast_mean(&self.obj, x)
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        let n = self.obj.dim();
        let mut out = hhb_jump(&x[..2 * n + 1]);
        out.extend_from_slice(&x[2 * n + 1..]);
        out
    }
}

/// Fast drift `∇Ψ_y(q) − ξ` with `y` uniform on the components.
#[derive(Debug, Clone)]
pub struct HhbOracle<O> {
    pub obj: O,
}

impl<O: FiniteSumObjective> DriftOracle for HhbOracle<O> {
    fn mean(&self, x: &[f64], _k: usize) -> Vec<f64> {
        fast_mean(&self.obj, x)
    }

    /// `∇Ψ_y(q) − ∇Ψ(q)`, the same expression `B_p` maximizes over `y`.
    fn noise(&self, x: &[f64], _k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.obj.dim();
        let q = &x[..n];
        let y = rng.gen_range(0..self.obj.num_components());
        sub(&self.obj.component_grad(y, q), &self.obj.full_grad(q))
    }
}

/// The two-timescale system and its stochastic fast-drift oracle.
pub fn make_ttsa_instance<O: FiniteSumObjective + Clone>(
    obj: O,
    params: HhbParams,
) -> (HhbTwoTimescale<O>, HhbOracle<O>) {
    (HhbTwoTimescale::new(obj.clone(), params), HhbOracle { obj })
}

/// `Λ(χ) = {∇Ψ(q)}` on the slow-state box `domain`.
pub fn lambda_graph<O: FiniteSumObjective + Clone + 'static>(obj: O, domain: BoxSet) -> LambdaGraph {
    let n = obj.dim();
    LambdaGraph::single_valued(move |chi| obj.full_grad(&chi[..n]), domain)
}

/// Reduced slow system of the two-timescale heavy ball under `Λ = ∇Ψ`.
pub fn hhb_reduced<O: FiniteSumObjective + Clone + 'static>(
    obj: O,
    params: HhbParams,
    domain: BoxSet,
) -> ReducedSystem<HhbTwoTimescale<O>> {
    ReducedSystem::new(HhbTwoTimescale::new(obj.clone(), params), lambda_graph(obj, domain), 0.0)
}
