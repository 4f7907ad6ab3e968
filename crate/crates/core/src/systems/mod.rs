//! Hybrid systems `(C, F, D, G)` represented by membership predicates,
//! single-valued selections and distance functionals.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, dist, norm, norm_sq, BoxSet};

pub mod hull;
mod reduced;

pub use reduced::{reduced_system, LambdaGraph, ReducedSystem};

/// A hybrid inclusion on `R^n`.
///
/// `flow` and `jump` return one selection from `F(x)` and `G(x)`; a
/// non-finite component signals that the evaluator is undefined at `x`.
pub trait HybridSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn in_flow_set(&self, x: &[f64]) -> bool;
    fn in_jump_set(&self, x: &[f64]) -> bool;
    fn flow(&self, x: &[f64]) -> Vec<f64>;
    fn jump(&self, x: &[f64]) -> Vec<f64>;

    /// `|v − F(x)|`; the default treats `F` as single-valued.
    fn flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        dist(v, &self.flow(x))
    }

    /// `|v − G(x)|`; the default treats `G` as single-valued.
    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        dist(v, &self.jump(x))
    }
}

/// A hybrid system on the stacked state `x = (x_s, x_f)`.
pub trait TwoTimescaleSystem: Send + Sync {
    fn slow_dim(&self) -> usize;
    fn fast_dim(&self) -> usize;
    fn in_flow_set(&self, x: &[f64]) -> bool;
    fn in_jump_set(&self, x: &[f64]) -> bool;
    fn slow_flow(&self, x: &[f64]) -> Vec<f64>;
    fn fast_flow(&self, x: &[f64]) -> Vec<f64>;
    fn jump(&self, x: &[f64]) -> Vec<f64>;

    fn dim(&self) -> usize {
        self.slow_dim() + self.fast_dim()
    }

    fn slow_flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        dist(v, &self.slow_flow(x))
    }

    fn fast_flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        dist(v, &self.fast_flow(x))
    }

    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        dist(v, &self.jump(x))
    }
}

macro_rules! forward_hybrid {
    ($($ptr:ty),*) => {$(
        impl<S: HybridSystem + ?Sized> HybridSystem for $ptr {
            fn dim(&self) -> usize { (**self).dim() }
            fn in_flow_set(&self, x: &[f64]) -> bool { (**self).in_flow_set(x) }
            fn in_jump_set(&self, x: &[f64]) -> bool { (**self).in_jump_set(x) }
            fn flow(&self, x: &[f64]) -> Vec<f64> { (**self).flow(x) }
            fn jump(&self, x: &[f64]) -> Vec<f64> { (**self).jump(x) }
            fn flow_distance(&self, x: &[f64], v: &[f64]) -> f64 { (**self).flow_distance(x, v) }
            fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 { (**self).jump_distance(x, v) }
        }
    )*};
}

macro_rules! forward_two_timescale {
    ($($ptr:ty),*) => {$(
        impl<S: TwoTimescaleSystem + ?Sized> TwoTimescaleSystem for $ptr {
            fn slow_dim(&self) -> usize { (**self).slow_dim() }
            fn fast_dim(&self) -> usize { (**self).fast_dim() }
            fn in_flow_set(&self, x: &[f64]) -> bool { (**self).in_flow_set(x) }
            fn in_jump_set(&self, x: &[f64]) -> bool { (**self).in_jump_set(x) }
            fn slow_flow(&self, x: &[f64]) -> Vec<f64> { (**self).slow_flow(x) }
            fn fast_flow(&self, x: &[f64]) -> Vec<f64> { (**self).fast_flow(x) }
            fn jump(&self, x: &[f64]) -> Vec<f64> { (**self).jump(x) }
            fn slow_flow_distance(&self, x: &[f64], v: &[f64]) -> f64 { (**self).slow_flow_distance(x, v) }
            fn fast_flow_distance(&self, x: &[f64], v: &[f64]) -> f64 { (**self).fast_flow_distance(x, v) }
            fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 { (**self).jump_distance(x, v) }
        }
    )*};
}

forward_hybrid!(&S, Box<S>, Arc<S>);
forward_two_timescale!(&S, Box<S>, Arc<S>);

type Pred = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
type Map = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A hybrid system assembled from closures.
#[derive(Clone)]
pub struct FnSystem {
    dim: usize,
    in_c: Pred,
    flow: Map,
    in_d: Pred,
    jump: Map,
}

impl FnSystem {
    pub fn new<C, F, D, G>(dim: usize, in_c: C, flow: F, in_d: D, jump: G) -> Self
    where
        C: Fn(&[f64]) -> bool + Send + Sync + 'static,
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        D: Fn(&[f64]) -> bool + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            in_c: Arc::new(in_c),
            flow: Arc::new(flow),
            in_d: Arc::new(in_d),
            jump: Arc::new(jump),
        }
    }

    /// `C = R^n`, `D = ∅`.
    pub fn flow_only<F>(dim: usize, flow: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::new(dim, |_| true, flow, |_| false, |x| x.to_vec())
    }

    /// `C = ∅`, `D = R^n`.
    pub fn jump_only<G>(dim: usize, jump: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::new(dim, |_| false, move |x| vec![0.0; x.len()], |_| true, jump)
    }
}

impl HybridSystem for FnSystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn in_flow_set(&self, x: &[f64]) -> bool {
        (self.in_c)(x)
    }
    fn in_jump_set(&self, x: &[f64]) -> bool {
        (self.in_d)(x)
    }
    fn flow(&self, x: &[f64]) -> Vec<f64> {
        (self.flow)(x)
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        (self.jump)(x)
    }
}

/// `ẋ = −x` on `C = R^n`, no jumps.
#[derive(Debug, Clone, Copy)]
pub struct LinearDecay {
    pub dim: usize,
}

impl HybridSystem for LinearDecay {
    fn dim(&self) -> usize {
        self.dim
    }
    fn in_flow_set(&self, _: &[f64]) -> bool {
        true
    }
    fn in_jump_set(&self, _: &[f64]) -> bool {
        false
    }
    fn flow(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// A two-timescale system viewed as a single hybrid system with flow
/// `F_s × F_f` (the timescale parameter fixed to one).
#[derive(Debug, Clone)]
pub struct Stacked<S>(pub S);

impl<S: TwoTimescaleSystem> HybridSystem for Stacked<S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn in_flow_set(&self, x: &[f64]) -> bool {
        self.0.in_flow_set(x)
    }
    fn in_jump_set(&self, x: &[f64]) -> bool {
        self.0.in_jump_set(x)
    }
    fn flow(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.0.slow_flow(x);
        v.extend(self.0.fast_flow(x));
        v
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        self.0.jump(x)
    }
    fn flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        let ns = self.0.slow_dim();
        let ds = self.0.slow_flow_distance(x, &v[..ns]);
        let df = self.0.fast_flow_distance(x, &v[ns..]);
        (ds * ds + df * df).sqrt()
    }
    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.0.jump_distance(x, v)
    }
}

/// The boundary-layer system: slow flow frozen at zero, fast flow, sets and
/// jump map unchanged.
#[derive(Debug, Clone)]
pub struct BoundaryLayer<S>(pub S);

pub fn boundary_layer<S: TwoTimescaleSystem>(sys: S) -> BoundaryLayer<S> {
    BoundaryLayer(sys)
}

impl<S: TwoTimescaleSystem> TwoTimescaleSystem for BoundaryLayer<S> {
    fn slow_dim(&self) -> usize {
        self.0.slow_dim()
    }
    fn fast_dim(&self) -> usize {
        self.0.fast_dim()
    }
    fn in_flow_set(&self, x: &[f64]) -> bool {
        self.0.in_flow_set(x)
    }
    fn in_jump_set(&self, x: &[f64]) -> bool {
        self.0.in_jump_set(x)
    }
    fn slow_flow(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.0.slow_dim()]
    }
    fn fast_flow(&self, x: &[f64]) -> Vec<f64> {
        self.0.fast_flow(x)
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        self.0.jump(x)
    }
    fn slow_flow_distance(&self, _: &[f64], v: &[f64]) -> f64 {
        norm(v)
    }
    fn fast_flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.0.fast_flow_distance(x, v)
    }
    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.0.jump_distance(x, v)
    }
}

impl<S: TwoTimescaleSystem> HybridSystem for BoundaryLayer<S> {
    fn dim(&self) -> usize {
        TwoTimescaleSystem::dim(self)
    }
    fn in_flow_set(&self, x: &[f64]) -> bool {
        self.0.in_flow_set(x)
    }
    fn in_jump_set(&self, x: &[f64]) -> bool {
        self.0.in_jump_set(x)
    }
    fn flow(&self, x: &[f64]) -> Vec<f64> {
        Stacked(self).flow(x)
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        self.0.jump(x)
    }
    fn flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        Stacked(self).flow_distance(x, v)
    }
    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.0.jump_distance(x, v)
    }
}

/// `C^K = C ∩ K` and `D^K = {x ∈ D ∩ K : G(x) ∈ K}`, with the selection
/// standing in for `G(x) ∩ K ≠ ∅`.
#[derive(Debug, Clone)]
pub struct Restricted<S> {
    pub inner: S,
    pub bounds: BoxSet,
}

pub fn restrict_to_box<S: HybridSystem>(sys: S, bounds: BoxSet) -> Restricted<S> {
    Restricted { inner: sys, bounds }
}

impl<S: HybridSystem> HybridSystem for Restricted<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn in_flow_set(&self, x: &[f64]) -> bool {
        self.bounds.contains(x) && self.inner.in_flow_set(x)
    }
    fn in_jump_set(&self, x: &[f64]) -> bool {
        self.bounds.contains(x) && self.inner.in_jump_set(x) && self.bounds.contains(&self.inner.jump(x))
    }
    fn flow(&self, x: &[f64]) -> Vec<f64> {
        self.inner.flow(x)
    }
    fn jump(&self, x: &[f64]) -> Vec<f64> {
        self.inner.jump(x)
    }
    fn flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.inner.flow_distance(x, v)
    }
    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        self.inner.jump_distance(x, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Flow,
    Jump,
}

/// Local search used when the base point is not in the relevant set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub radius: f64,
    pub probes: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            radius: 0.1,
            probes: 64,
            seed: 0,
        }
    }
}

/// Upper bound on the distance of `(x, v)` to `graph(F_C)` or `graph(G_D)`.
///
/// At a member point this is the map distance at `x`. Otherwise member
/// points `x'` are sought among deterministic probes in the box of the
/// configured radius around `x`, and the minimum of `|x − x'|` plus the map
/// distance at `x'` is returned; `+∞` if no probe is a member.
pub fn restricted_graph_distance<S: HybridSystem + ?Sized>(
    sys: &S,
    x: &[f64],
    v: &[f64],
    which: GraphKind,
    probe: &ProbeConfig,
) -> f64 {
    let member = |y: &[f64]| match which {
        GraphKind::Flow => sys.in_flow_set(y),
        GraphKind::Jump => sys.in_jump_set(y),
    };
    let map_dist = |y: &[f64]| match which {
        GraphKind::Flow => sys.flow_distance(y, v),
        GraphKind::Jump => sys.jump_distance(y, v),
    };
    if member(x) {
        return map_dist(x);
    }
    let search = BoxSet::new(x.to_vec(), x.to_vec()).inflate(probe.radius);
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let mut best = f64::INFINITY;
    for _ in 0..probe.probes {
        let y = search.sample(&mut rng);
        if member(&y) {
            best = best.min(dist(x, &y) + map_dist(&y));
        }
    }
    best
}

/// Outcome of [`sampled_basic_conditions`]. Always heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicConditionsReport {
    pub heuristic: bool,
    pub n_samples: usize,
    pub flow_set_samples: usize,
    pub jump_set_samples: usize,
    /// Sampled points of `C` where the flow selection is undefined.
    pub flow_failures: Vec<Vec<f64>>,
    /// Sampled points of `D` where the jump selection is undefined.
    pub jump_failures: Vec<Vec<f64>>,
    pub max_flow_norm: f64,
    pub max_jump_norm: f64,
    pub locally_bounded: bool,
    pub boundary_points_checked: usize,
    /// Boundary points of `C` or `D` where membership is not stable under
    /// small inward perturbation.
    pub closure_failures: Vec<Vec<f64>>,
    pub passed: bool,
}

/// Sampled evidence for the basic conditions: nonempty maps on the sets,
/// local boundedness and closedness.
///
/// For closedness, consecutive sample pairs straddling a set boundary are
/// bisected to a boundary point; the inner end and two points shifted
/// slightly further inward must all test as members.
pub fn sampled_basic_conditions<S: HybridSystem + ?Sized>(
    sys: &S,
    bounds: &BoxSet,
    n_samples: usize,
    seed: u64,
) -> BasicConditionsReport {
    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = BasicConditionsReport {
        heuristic: true,
        n_samples,
        flow_set_samples: 0,
        jump_set_samples: 0,
        flow_failures: Vec::new(),
        jump_failures: Vec::new(),
        max_flow_norm: 0.0,
        max_jump_norm: 0.0,
        locally_bounded: true,
        boundary_points_checked: 0,
        closure_failures: Vec::new(),
        passed: true,
    };
    let preds: [&dyn Fn(&[f64]) -> bool; 2] = [&|y| sys.in_flow_set(y), &|y| sys.in_jump_set(y)];
    let mut prev: Option<Vec<f64>> = None;
    for _ in 0..n_samples {
        let x = bounds.sample(&mut rng);
        if sys.in_flow_set(&x) {
            rep.flow_set_samples += 1;
            let f = sys.flow(&x);
            if f.len() != sys.dim() || !all_finite(&f) {
                rep.flow_failures.push(x.clone());
            } else {
                rep.max_flow_norm = rep.max_flow_norm.max(norm_sq(&f).sqrt());
            }
        }
        if sys.in_jump_set(&x) {
            rep.jump_set_samples += 1;
            let g = sys.jump(&x);
            if g.len() != sys.dim() || !all_finite(&g) {
                rep.jump_failures.push(x.clone());
            } else {
                rep.max_jump_norm = rep.max_jump_norm.max(norm_sq(&g).sqrt());
            }
        }
        if let Some(p) = &prev {
            for pred in preds {
                let (a, b) = match (pred(p), pred(&x)) {
                    (true, false) => (p.clone(), x.clone()),
                    (false, true) => (x.clone(), p.clone()),
                    _ => continue,
                };
                rep.boundary_points_checked += 1;
                if let Some(z) = closure_violation(pred, a, b) {
                    rep.closure_failures.push(z);
                }
            }
        }
        prev = Some(x);
    }
    rep.locally_bounded = rep.max_flow_norm.is_finite() && rep.max_jump_norm.is_finite();
    rep.passed = rep.flow_failures.is_empty()
        && rep.jump_failures.is_empty()
        && rep.locally_bounded
        && rep.closure_failures.is_empty();
    rep
}

/// Bisect from member `a` to non-member `b`; report the boundary point if an
/// inward perturbation of the member end is not a member.
fn closure_violation(pred: &dyn Fn(&[f64]) -> bool, mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let dir: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let len = norm(&dir);
    for _ in 0..60 {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        if pred(&mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    let shrink = 1e-9 * (1.0 + len);
    let stable = [shrink, 2.0 * shrink].iter().all(|s| {
        let y: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + s * d / len).collect();
        pred(&y)
    });
    if stable {
        None
    } else {
        Some(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Toy;

    // x_s' = -x_s + x_f, x_f' = -x_f; C = {x_s ≥ 0}, D = {x_s ≤ 0}, G = (1, x_f).
    impl TwoTimescaleSystem for Toy {
        fn slow_dim(&self) -> usize {
            1
        }
        fn fast_dim(&self) -> usize {
            1
        }
        fn in_flow_set(&self, x: &[f64]) -> bool {
            x[0] >= 0.0
        }
        fn in_jump_set(&self, x: &[f64]) -> bool {
            x[0] <= 0.0
        }
        fn slow_flow(&self, x: &[f64]) -> Vec<f64> {
            vec![-x[0] + x[1]]
        }
        fn fast_flow(&self, x: &[f64]) -> Vec<f64> {
            vec![-x[1]]
        }
        fn jump(&self, x: &[f64]) -> Vec<f64> {
            vec![1.0, x[1]]
        }
    }

    #[test]
    fn graph_distance_examples() {
        let sys = LinearDecay { dim: 2 };
        let p = ProbeConfig::default();
        let x = [1.0, -2.0];
        assert_eq!(restricted_graph_distance(&sys, &x, &[-1.0, 2.0], GraphKind::Flow, &p), 0.0);
        let d = restricted_graph_distance(&sys, &x, &[-1.0 + 0.3, 2.0], GraphKind::Flow, &p);
        assert!((d - 0.3).abs() < 1e-15);
        // D = ∅: no member anywhere.
        let d = restricted_graph_distance(&sys, &x, &x, GraphKind::Jump, &p);
        assert_eq!(d, f64::INFINITY);
    }

    #[test]
    fn graph_distance_probes_nearby_members() {
        let sys = FnSystem::new(1, |x| x[0] >= 0.0, |_| vec![1.0], |_| false, |x| x.to_vec());
        let p = ProbeConfig::default();
        let d = restricted_graph_distance(&sys, &[-0.05], &[1.0], GraphKind::Flow, &p);
        assert!(d.is_finite() && d >= 0.05 && d <= 0.15);
        assert_eq!(
            restricted_graph_distance(&sys, &[-0.05], &[1.0], GraphKind::Flow, &p),
            d,
            "probing is deterministic"
        );
        let far = restricted_graph_distance(&sys, &[-1.0], &[1.0], GraphKind::Flow, &p);
        assert_eq!(far, f64::INFINITY);
    }

    #[test]
    fn boundary_layer_freezes_slow_block() {
        let bl = boundary_layer(Toy);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = BoxSet::cube(2, 3.0);
        for _ in 0..100 {
            let x = b.sample(&mut rng);
            let f = HybridSystem::flow(&bl, &x);
            assert_eq!(f[0], 0.0);
            assert_eq!(f[1], -x[1]);
            assert_eq!(HybridSystem::jump(&bl, &x), Toy.jump(&x));
            let twice = boundary_layer(boundary_layer(Toy));
            assert_eq!(HybridSystem::flow(&twice, &x), f);
        }
    }

    #[test]
    fn stacked_distance_splits_blocks() {
        let s = Stacked(Toy);
        let x = [1.0, 2.0];
        let f = s.flow(&x);
        assert_eq!(f, vec![1.0, -2.0]);
        assert!((s.flow_distance(&x, &[4.0, 2.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn restriction_to_box() {
        let sys = FnSystem::new(1, |_| true, |x| vec![-x[0]], |_| true, |x| vec![2.0 * x[0]]);
        let r = restrict_to_box(sys, BoxSet::cube(1, 1.0));
        assert!(r.in_flow_set(&[0.9]));
        assert!(!r.in_flow_set(&[1.1]));
        assert!(r.in_jump_set(&[0.4]));
        // G(0.6) = 1.2 leaves K.
        assert!(!r.in_jump_set(&[0.6]));
    }

    #[test]
    fn basic_conditions_on_well_posed_system() {
        let rep = sampled_basic_conditions(&Stacked(Toy), &BoxSet::cube(2, 2.0), 1000, 3);
        assert!(rep.heuristic);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.boundary_points_checked > 0);
        let one = sampled_basic_conditions(&Stacked(Toy), &BoxSet::cube(2, 2.0), 1, 3);
        assert_eq!(one.n_samples, 1);
    }

    #[test]
    fn basic_conditions_flag_undefined_flow() {
        let sys = FnSystem::flow_only(1, |x| if x[0] > 0.5 { vec![f64::NAN] } else { vec![1.0] });
        let rep = sampled_basic_conditions(&sys, &BoxSet::cube(1, 1.0), 200, 0);
        assert!(!rep.passed);
        assert!(!rep.flow_failures.is_empty());
        assert!(rep.flow_failures.iter().all(|x| x[0] > 0.5));
    }

    #[test]
    fn basic_conditions_flag_fragmented_set() {
        // Membership alternates on a scale far below the perturbation size.
        let sys = FnSystem::new(
            1,
            |x| x[0] <= 0.0 || (x[0] * 1e10).fract() < 0.5,
            |_| vec![0.0],
            |_| false,
            |x| x.to_vec(),
        );
        let rep = sampled_basic_conditions(&sys, &BoxSet::cube(1, 1.0), 200, 0);
        assert!(rep.boundary_points_checked > 0);
        assert!(!rep.closure_failures.is_empty());
        assert!(!rep.passed);
    }
}
