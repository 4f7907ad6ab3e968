//! Step-size schedules, admissibility checks, accumulated times `τ_k`, the
//! index map `m(t)` and the window index sets `I_{r,n,T}`.

use std::fmt;
use std::ops::Range;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default hard cap on the largest step index the prefix-sum cache may reach.
pub const DEFAULT_MAX_INDEX: usize = 100_000_000;

/// Horizon used by heuristic checks that take none explicitly.
const HEURISTIC_HORIZON: usize = 100_000;

#[derive(Clone)]
pub enum ScheduleFamily {
    /// `h_k = a / (k + b)^rho`.
    PowerLaw { a: f64, b: f64, rho: f64 },
    /// `h_k = values[k-1]`; past the end the final value repeats.
    Explicit(Vec<f64>),
    /// Arbitrary rule `k ↦ h_k` for `k ≥ 1`.
    UserRule(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScheduleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { a, b, rho } => f
                .debug_struct("PowerLaw")
                .field("a", a)
                .field("b", b)
                .field("rho", rho)
                .finish(),
            Self::Explicit(v) => f.debug_tuple("Explicit").field(&v.len()).finish(),
            Self::UserRule(_) => f.write_str("UserRule(..)"),
        }
    }
}

/// Neumaier-compensated running sums `τ_0 = 0, τ_k = τ_{k-1} + h_k`.
#[derive(Debug)]
struct PrefixCache {
    tau: Vec<f64>,
    sum: f64,
    comp: f64,
}

impl PrefixCache {
    fn new() -> Self {
        Self {
            tau: vec![0.0],
            sum: 0.0,
            comp: 0.0,
        }
    }

    fn push(&mut self, h: f64) {
        let t = self.sum + h;
        if self.sum.abs() >= h.abs() {
            self.comp += (self.sum - t) + h;
        } else {
            self.comp += (h - t) + self.sum;
        }
        self.sum = t;
        self.tau.push(self.sum + self.comp);
    }
}

#[derive(Debug)]
struct Inner {
    family: ScheduleFamily,
    max_index: usize,
    cache: RwLock<PrefixCache>,
}

/// A step-size sequence `{h_k}_{k≥1}` with cached accumulated times.
///
/// Clones share the prefix-sum cache, which grows on demand under an
/// exclusive lock and is read concurrently otherwise.
#[derive(Debug, Clone)]
pub struct StepSchedule {
    inner: Arc<Inner>,
}

impl StepSchedule {
    fn from_family(family: ScheduleFamily) -> Self {
        Self {
            inner: Arc::new(Inner {
                family,
                max_index: DEFAULT_MAX_INDEX,
                cache: RwLock::new(PrefixCache::new()),
            }),
        }
    }

    pub fn power_law(a: f64, b: f64, rho: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidSchedule(format!("a must be positive, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidSchedule(format!("b must be nonnegative, got {b}")));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidSchedule(format!("rho must be positive, got {rho}")));
        }
        Ok(Self::from_family(ScheduleFamily::PowerLaw { a, b, rho }))
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSchedule("explicit schedule needs at least one value".into()));
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositiveStep { index: i + 1, value: v });
        }
        Ok(Self::from_family(ScheduleFamily::Explicit(values)))
    }

    pub fn user_rule<F>(rule: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        Self::from_family(ScheduleFamily::UserRule(Arc::new(rule)))
    }

    /// Same schedule with a different cap on the cached index range.
    pub fn with_max_index(self, max_index: usize) -> Self {
        Self {
            inner: Arc::new(Inner {
                family: self.inner.family.clone(),
                max_index,
                cache: RwLock::new(PrefixCache::new()),
            }),
        }
    }

    pub fn family(&self) -> &ScheduleFamily {
        &self.inner.family
    }

    pub fn max_index(&self) -> usize {
        self.inner.max_index
    }

    /// `h_k` for `k ≥ 1`.
    pub fn step(&self, k: usize) -> f64 {
        assert!(k >= 1, "step sizes are indexed from k = 1");
        match &self.inner.family {
            ScheduleFamily::PowerLaw { a, b, rho } => a / (k as f64 + b).powf(*rho),
            ScheduleFamily::Explicit(v) => v[(k - 1).min(v.len() - 1)],
            ScheduleFamily::UserRule(f) => f(k),
        }
    }

    fn checked_step(&self, k: usize) -> Result<f64> {
        let h = self.step(k);
        if h.is_finite() && h > 0.0 {
            Ok(h)
        } else {
            Err(Error::NonPositiveStep { index: k, value: h })
        }
    }

    /// Grow the cache so that it holds `τ_0..=τ_k`.
    fn ensure(&self, k: usize) -> Result<()> {
        if self.inner.cache.read().expect("cache lock").tau.len() > k {
            return Ok(());
        }
        let mut cache = self.inner.cache.write().expect("cache lock");
        while cache.tau.len() <= k {
            let next = cache.tau.len();
            let h = self.checked_step(next)?;
            cache.push(h);
        }
        Ok(())
    }

    /// `τ_k = Σ_{i=0}^{k-1} h_{i+1}`, failing on a nonpositive step.
    pub fn try_tau(&self, k: usize) -> Result<f64> {
        if k > self.inner.max_index {
            return Err(Error::InvalidArgument(format!(
                "index {k} beyond schedule cap {}",
                self.inner.max_index
            )));
        }
        self.ensure(k)?;
        Ok(self.inner.cache.read().expect("cache lock").tau[k])
    }

    /// `τ_k`. Panics if a user rule produced a nonpositive step.
    pub fn tau(&self, k: usize) -> f64 {
        self.try_tau(k).expect("invalid step schedule")
    }

    /// `m(t) = max{k ≥ 0 : τ_k ≤ t}`.
    pub fn m_of(&self, t: f64) -> Result<usize> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidArgument(format!("m(t) requires t ≥ 0, got {t}")));
        }
        let cap = self.inner.max_index;
        loop {
            {
                let cache = self.inner.cache.read().expect("cache lock");
                let last = *cache.tau.last().expect("tau_0 present");
                if last > t {
                    // tau is strictly increasing; count entries ≤ t.
                    return Ok(cache.tau.partition_point(|&v| v <= t) - 1);
                }
                let len = cache.tau.len();
                if len > cap {
                    return Err(Error::SearchCapExceeded { t, cap, reached: last });
                }
            }
            let len = self.inner.cache.read().expect("cache lock").tau.len();
            let target = (len * 2).max(1024).min(cap);
            self.ensure(target)?;
            if target == cap {
                let cache = self.inner.cache.read().expect("cache lock");
                let last = *cache.tau.last().expect("tau_0 present");
                if last <= t {
                    return Err(Error::SearchCapExceeded { t, cap, reached: last });
                }
            }
        }
    }

    /// Admissibility: positive, vanishing and nonsummable steps.
    ///
    /// Power laws get an analytic verdict. Other families are judged over
    /// `horizon` steps by trend tests and the verdict is marked heuristic.
    pub fn check_admissible(&self, horizon: usize) -> Result<AdmissibilityVerdict> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if let ScheduleFamily::PowerLaw { rho, .. } = self.inner.family {
            let nonsummable = rho <= 1.0;
            return Ok(AdmissibilityVerdict {
                admissible: nonsummable,
                kind: VerdictKind::Analytic,
                positive: true,
                tends_to_zero: true,
                nonsummable,
                detail: if nonsummable {
                    format!("power law with rho = {rho} ∈ (0, 1]")
                } else {
                    format!("power law with rho = {rho} > 1 is summable")
                },
            });
        }
        let steps = (1..=horizon)
            .map(|k| self.checked_step(k))
            .collect::<Result<Vec<f64>>>()?;
        let tends_to_zero = decays(&steps, 0.5);
        let half = horizon / 2;
        let first: f64 = steps[..half.max(1)].iter().sum();
        let second: f64 = steps[half.max(1)..].iter().sum();
        let nonsummable = horizon >= 2 && second >= 0.01 * first;
        Ok(AdmissibilityVerdict {
            admissible: tends_to_zero && nonsummable,
            kind: VerdictKind::Heuristic,
            positive: true,
            tends_to_zero,
            nonsummable,
            detail: format!(
                "last/first decile mean test {}; second-half/first-half sum ratio {:.3e}",
                if tends_to_zero { "passed" } else { "failed" },
                if first > 0.0 { second / first } else { f64::NAN }
            ),
        })
    }

    /// Least `p ≥ 1` with `Σ h_k^{1+p} < ∞`.
    ///
    /// For a power law with exponent `rho` the series converges iff
    /// `(1 + p)·rho > 1`, so the reported value is the infimum
    /// `max(1, 1/rho - 1)`; `attained` says whether that infimum itself
    /// satisfies the strict inequality. Other families are probed on the
    /// grid `{1, 2, 4, 8}` with a partial-sum growth test.
    pub fn check_fast_moment_condition(&self) -> Result<MomentCondition> {
        if let ScheduleFamily::PowerLaw { rho, .. } = self.inner.family {
            let p = (1.0 / rho - 1.0).max(1.0);
            return Ok(MomentCondition {
                p_min: Some(p),
                attained: (1.0 + p) * rho > 1.0,
                kind: VerdictKind::Analytic,
            });
        }
        let steps = (1..=HEURISTIC_HORIZON)
            .map(|k| self.checked_step(k))
            .collect::<Result<Vec<f64>>>()?;
        for p in [1.0, 2.0, 4.0, 8.0] {
            let pow: Vec<f64> = steps.iter().map(|h| h.powf(1.0 + p)).collect();
            let half = pow.len() / 2;
            let first: f64 = pow[..half].iter().sum();
            let second: f64 = pow[half..].iter().sum();
            if second < 1e-3 * first {
                return Ok(MomentCondition {
                    p_min: Some(p),
                    attained: true,
                    kind: VerdictKind::Heuristic,
                });
            }
        }
        Ok(MomentCondition {
            p_min: None,
            attained: false,
            kind: VerdictKind::Heuristic,
        })
    }
}

/// True iff the last-decile mean is at most `factor` times the first-decile mean.
fn decays(values: &[f64], factor: f64) -> bool {
    let d = (values.len() / 10).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first = mean(&values[..d]);
    let last = mean(&values[values.len() - d..]);
    last <= factor * first
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Analytic,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityVerdict {
    pub admissible: bool,
    pub kind: VerdictKind,
    pub positive: bool,
    pub tends_to_zero: bool,
    pub nonsummable: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCondition {
    pub p_min: Option<f64>,
    pub attained: bool,
    pub kind: VerdictKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTimescaleVerdict {
    pub admissible: bool,
    pub kind: VerdictKind,
    pub slow: AdmissibilityVerdict,
    pub fast: AdmissibilityVerdict,
    pub ratio_vanishes: bool,
    /// `(k, h_{s,k} / h_{f,k})` at geometrically spaced `k`.
    pub ratio_trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timescale {
    Slow,
    Fast,
}

impl fmt::Display for Timescale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Slow => "slow",
            Self::Fast => "fast",
        })
    }
}

/// Step-size vectors `H_k = (h_{s,k}, h_{f,k})`.
#[derive(Debug, Clone)]
pub struct TwoTimescaleSchedule {
    pub slow: StepSchedule,
    pub fast: StepSchedule,
}

impl TwoTimescaleSchedule {
    pub fn new(slow: StepSchedule, fast: StepSchedule) -> Self {
        Self { slow, fast }
    }

    /// Both timescales driven by the same schedule (single-timescale runs).
    pub fn single(schedule: StepSchedule) -> Self {
        Self {
            slow: schedule.clone(),
            fast: schedule,
        }
    }

    pub fn get(&self, r: Timescale) -> &StepSchedule {
        match r {
            Timescale::Slow => &self.slow,
            Timescale::Fast => &self.fast,
        }
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.slow.step(k) / self.fast.step(k)
    }

    pub fn check_two_timescale_admissible(&self, horizon: usize) -> Result<TwoTimescaleVerdict> {
        let slow = self.slow.check_admissible(horizon)?;
        let fast = self.fast.check_admissible(horizon)?;
        let ratio_trace: Vec<(usize, f64)> = geometric_indices(1, horizon, 32)
            .into_iter()
            .map(|k| (k, self.ratio(k)))
            .collect();
        let (ratio_vanishes, kind) = match (self.slow.family(), self.fast.family()) {
            (
                ScheduleFamily::PowerLaw { rho: rs, .. },
                ScheduleFamily::PowerLaw { rho: rf, .. },
            ) => (rs > rf, VerdictKind::Analytic),
            _ => {
                let ratios: Vec<f64> = (1..=horizon).map(|k| self.ratio(k)).collect();
                (decays(&ratios, 0.5), VerdictKind::Heuristic)
            }
        };
        let kind = if slow.kind == VerdictKind::Heuristic || fast.kind == VerdictKind::Heuristic {
            VerdictKind::Heuristic
        } else {
            kind
        };
        Ok(TwoTimescaleVerdict {
            admissible: slow.admissible && fast.admissible && ratio_vanishes,
            kind,
            slow,
            fast,
            ratio_vanishes,
            ratio_trace,
        })
    }

    /// `I_{r,n,T} = {n+1, …, m_r(τ_{r,n} + T)}` as a half-open range.
    pub fn index_set(&self, r: Timescale, n: usize, horizon: f64) -> Result<Range<usize>> {
        index_set(self.get(r), n, horizon)
    }

    /// Least `ℓ ≤ search_cap` such that for every `n ∈ [ℓ, search_cap]`
    /// both index sets are nonempty and `I_{f,n,T} ⊆ I_{s,n,T}`.
    pub fn lemma_a1_threshold(&self, horizon: f64, search_cap: usize) -> Result<usize> {
        for n in (0..=search_cap).rev() {
            if !self.nested_at(n, horizon)? {
                if n == search_cap {
                    return Err(Error::NoNestingThreshold {
                        cap: search_cap,
                        violating_n: n,
                    });
                }
                return Ok(n + 1);
            }
        }
        Ok(0)
    }

    /// Nonemptiness of both sets and `I_{f,n,T} ⊆ I_{s,n,T}` at one `n`.
    ///
    /// With both sets starting at `n + 1`, nesting means
    /// `m_f(τ_{f,n} + T) ≤ m_s(τ_{s,n} + T)`, which (τ_s strictly
    /// increasing) is `τ_{s, m_f} ≤ τ_{s,n} + T`. This avoids walking the
    /// slow cache out to `m_s`, which for large `T` is astronomically far.
    pub fn nested_at(&self, n: usize, horizon: f64) -> Result<bool> {
        if self.slow.step(n + 1) > horizon || self.fast.step(n + 1) > horizon {
            return Ok(false);
        }
        let m_fast = self.fast.m_of(self.fast.try_tau(n)? + horizon)?;
        Ok(self.slow.try_tau(m_fast)? <= self.slow.try_tau(n)? + horizon)
    }
}

/// `I_{n,T} = {k : n+1 ≤ k ≤ m(τ_n + T)}` as the half-open range `n+1..m+1`.
pub fn index_set(schedule: &StepSchedule, n: usize, horizon: f64) -> Result<Range<usize>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {horizon}")));
    }
    let m = schedule.m_of(schedule.try_tau(n)? + horizon)?;
    Ok((n + 1)..(m + 1).max(n + 1))
}

/// `count` geometrically spaced distinct integers in `[lo, hi]`.
pub fn geometric_indices(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let lo = lo.max(1);
    if hi <= lo || count <= 1 {
        return vec![lo.min(hi.max(lo))];
    }
    let ratio = (hi as f64 / lo as f64).ln();
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let x = lo as f64 * (ratio * i as f64 / (count - 1) as f64).exp();
            (x.round() as usize).clamp(lo, hi)
        })
        .collect();
    out.dedup();
    out
}

/// Configuration form of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    PowerLaw {
        a: f64,
        #[serde(default)]
        b: f64,
        rho: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<StepSchedule> {
        match self {
            Self::PowerLaw { a, b, rho } => StepSchedule::power_law(*a, *b, *rho),
            Self::Explicit { values } => StepSchedule::explicit(values.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> StepSchedule {
        StepSchedule::power_law(1.0, 0.0, 1.0).unwrap()
    }

    /// Plain left-to-right summation of the first `k` steps.
    fn naive_tau(s: &StepSchedule, k: usize) -> f64 {
        (1..=k).map(|i| s.step(i)).sum()
    }

    /// Linear scan: k ↦ Σ_{i=n}^{k-1} h_{i+1} ≤ T.
    fn brute_index_set(s: &StepSchedule, n: usize, t: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        let mut k = n + 1;
        loop {
            acc += s.step(k);
            if acc > t {
                break;
            }
            out.push(k);
            k += 1;
        }
        out
    }

    #[test]
    fn tau_examples() {
        let s = StepSchedule::explicit(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.tau(3), 3.0);
        assert!((harmonic().tau(3) - 11.0 / 6.0).abs() < 1e-15);
        assert_eq!(harmonic().tau(0), 0.0);
        assert_eq!(s.tau(0), 0.0);
    }

    #[test]
    fn m_of_examples() {
        assert_eq!(harmonic().m_of(1.6).unwrap(), 2);
        assert_eq!(harmonic().m_of(0.0).unwrap(), 0);
        let s = StepSchedule::explicit(vec![0.5; 4]).unwrap();
        assert_eq!(s.m_of(1.0).unwrap(), 2);
        assert!(harmonic().m_of(-1.0).is_err());
    }

    #[test]
    fn m_of_reports_cap_for_summable_schedule() {
        let s = StepSchedule::power_law(1.0, 0.0, 2.0).unwrap().with_max_index(10_000);
        // Σ 1/k^2 = π²/6 < 2, so τ_k ≤ 2 for every k.
        let err = s.m_of(2.0).unwrap_err();
        assert!(matches!(err, Error::SearchCapExceeded { cap: 10_000, .. }));
        assert!(err.to_string().starts_with("m(t) search cap exceeded"));
    }

    #[test]
    fn explicit_schedule_repeats_last_value() {
        let s = StepSchedule::explicit(vec![2.0, 1.0]).unwrap();
        assert_eq!(s.step(1), 2.0);
        assert_eq!(s.step(5), 1.0);
        assert_eq!(s.tau(4), 5.0);
    }

    #[test]
    fn constructor_validation() {
        assert!(StepSchedule::power_law(1.0, 0.0, 0.0).is_err());
        assert!(StepSchedule::power_law(0.0, 0.0, 1.0).is_err());
        assert!(StepSchedule::power_law(1.0, -1.0, 1.0).is_err());
        assert_eq!(
            StepSchedule::explicit(vec![1.0, 0.0]).unwrap_err(),
            Error::NonPositiveStep { index: 2, value: 0.0 }
        );
        assert!(StepSchedule::explicit(vec![]).is_err());
    }

    #[test]
    fn user_rule_nonpositive_step_is_reported() {
        let s = StepSchedule::user_rule(|k| if k == 7 { -1.0 } else { 1.0 / k as f64 });
        assert_eq!(
            s.check_admissible(100).unwrap_err(),
            Error::NonPositiveStep { index: 7, value: -1.0 }
        );
        assert!(s.try_tau(10).is_err());
    }

    #[test]
    fn admissibility_verdicts() {
        let v = harmonic().check_admissible(10).unwrap();
        assert!(v.admissible);
        assert_eq!(v.kind, VerdictKind::Analytic);
        let v = StepSchedule::power_law(1.0, 0.0, 2.0).unwrap().check_admissible(10).unwrap();
        assert!(!v.admissible);
        assert_eq!(v.kind, VerdictKind::Analytic);
        let v = StepSchedule::explicit(vec![0.1; 1000]).unwrap().check_admissible(1000).unwrap();
        assert!(!v.admissible);
        assert!(!v.tends_to_zero);
        assert_eq!(v.kind, VerdictKind::Heuristic);
        let v = StepSchedule::user_rule(|k| 1.0 / k as f64).check_admissible(1000).unwrap();
        assert!(v.admissible);
        assert_eq!(v.kind, VerdictKind::Heuristic);
        let v = StepSchedule::user_rule(|k| 1.0 / (k * k) as f64).check_admissible(1000).unwrap();
        assert!(!v.nonsummable);
    }

    #[test]
    fn two_timescale_verdicts() {
        let pl = |rho| StepSchedule::power_law(1.0, 0.0, rho).unwrap();
        let v = TwoTimescaleSchedule::new(pl(1.0), pl(0.6))
            .check_two_timescale_admissible(1000)
            .unwrap();
        assert!(v.admissible);
        let (k, r) = *v.ratio_trace.last().unwrap();
        assert!((r - (k as f64).powf(-0.4)).abs() < 1e-12);
        assert!(!TwoTimescaleSchedule::new(pl(0.6), pl(1.0))
            .check_two_timescale_admissible(1000)
            .unwrap()
            .admissible);
        let v = TwoTimescaleSchedule::new(pl(0.8), pl(0.8))
            .check_two_timescale_admissible(1000)
            .unwrap();
        assert!(!v.admissible);
        assert!(v.ratio_trace.iter().all(|&(_, r)| r == 1.0));
    }

    #[test]
    fn fast_moment_condition() {
        let pl = |rho| StepSchedule::power_law(1.0, 0.0, rho).unwrap();
        // Oracle: Σ k^{-(1+p)ρ} grows by less than 1% of its value between
        // 10^5 and 10^6 terms when (1+p)ρ > 1 clearly, and keeps growing
        // proportionally at the boundary.
        let growth = |e: f64| {
            let s5: f64 = (1..=100_000).map(|k| (k as f64).powf(-e)).sum();
            let s6: f64 = s5 + (100_001..=1_000_000).map(|k| (k as f64).powf(-e)).sum::<f64>();
            (s6 - s5) / s5
        };
        let m = pl(0.6).check_fast_moment_condition().unwrap();
        assert_eq!(m.p_min, Some(1.0));
        assert!(m.attained);
        assert!(growth(2.0 * 0.6) < 0.2);
        let m = pl(0.4).check_fast_moment_condition().unwrap();
        assert!((m.p_min.unwrap() - 1.5).abs() < 1e-12);
        assert!(!m.attained);
        // At p = 1.5 the series is harmonic; slightly above it, it settles.
        assert!(growth(2.5 * 0.4) > 0.15);
        assert!(growth(3.5 * 0.4) < 0.02);
        assert_eq!(pl(1.0).check_fast_moment_condition().unwrap().p_min, Some(1.0));
        let m = StepSchedule::user_rule(|k| (k as f64).powf(-0.6))
            .check_fast_moment_condition()
            .unwrap();
        assert_eq!(m.kind, VerdictKind::Heuristic);
        assert!(m.p_min.is_some());
    }

    #[test]
    fn index_set_examples() {
        let s = TwoTimescaleSchedule::new(harmonic(), StepSchedule::explicit(vec![1.0]).unwrap());
        assert_eq!(s.index_set(Timescale::Slow, 0, 1.0).unwrap(), 1..2);
        assert!(s.index_set(Timescale::Fast, 0, 0.5).unwrap().is_empty());
        // h_3 + h_4 + h_5 + h_6 = 0.95 ≤ 1 < 0.95 + 1/7.
        let brute = brute_index_set(&harmonic(), 2, 1.0);
        assert_eq!(brute, vec![3, 4, 5, 6]);
        assert_eq!(
            s.index_set(Timescale::Slow, 2, 1.0).unwrap().collect::<Vec<_>>(),
            brute
        );
    }

    #[test]
    fn lemma_a1_examples() {
        let cases = [(1.0, 0.6, 1.0), (0.9, 0.6, 10.0), (1.0, 0.6, 0.5)];
        for (rs, rf, t) in cases {
            let s = TwoTimescaleSchedule::new(
                StepSchedule::power_law(1.0, 0.0, rs).unwrap(),
                StepSchedule::power_law(1.0, 0.0, rf).unwrap(),
            );
            let l = s.lemma_a1_threshold(t, 2000).unwrap();
            for n in l..=l + 1000 {
                let fs = brute_index_set(&s.fast, n, t);
                let ss = brute_index_set(&s.slow, n, t);
                assert!(!fs.is_empty() && !ss.is_empty());
                assert!(fs.last() <= ss.last(), "nesting fails at n={n}");
            }
            if l > 0 {
                assert!(!s.nested_at(l - 1, t).unwrap());
            }
        }
        // h_s ≤ h_f ≤ T from k = 1: every n qualifies.
        let s = TwoTimescaleSchedule::new(
            StepSchedule::explicit(vec![0.1]).unwrap(),
            StepSchedule::explicit(vec![0.2]).unwrap(),
        );
        assert_eq!(s.lemma_a1_threshold(1.0, 500).unwrap(), 0);
    }

    #[test]
    fn lemma_a1_reports_violation() {
        // Fast steps smaller than slow ones: nesting never holds.
        let s = TwoTimescaleSchedule::new(
            StepSchedule::explicit(vec![0.2]).unwrap(),
            StepSchedule::explicit(vec![0.1]).unwrap(),
        );
        assert_eq!(
            s.lemma_a1_threshold(1.0, 50).unwrap_err(),
            Error::NoNestingThreshold { cap: 50, violating_n: 50 }
        );
    }

    #[test]
    fn geometric_grid_is_increasing() {
        let g = geometric_indices(1000, 9000, 32);
        assert_eq!(g.first(), Some(&1000));
        assert_eq!(g.last(), Some(&9000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    use proptest::prelude::*;

    fn schedule_strategy() -> impl Strategy<Value = StepSchedule> {
        prop_oneof![
            (0.1f64..3.0, 0.0f64..5.0, 0.3f64..1.0)
                .prop_map(|(a, b, rho)| StepSchedule::power_law(a, b, rho).unwrap()),
            prop::collection::vec(1u32..64, 1..20).prop_map(|v| StepSchedule::explicit(
                v.into_iter().map(|x| x as f64 / 64.0).collect()
            )
            .unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cached_tau_matches_fresh_compensated_sum(s in schedule_strategy(), k in 0usize..3000) {
            let fresh = s.clone().with_max_index(DEFAULT_MAX_INDEX);
            // Grow a fresh cache straight to k, and the original by steps.
            let direct = fresh.tau(k);
            for i in 0..=k { s.tau(i); }
            prop_assert_eq!(s.tau(k), direct);
            let naive = naive_tau(&s, k);
            prop_assert!((s.tau(k) - naive).abs() <= 1e-12 * naive.max(1.0));
        }

        #[test]
        fn tau_is_additive(s in schedule_strategy(), k in 0usize..2000, m in 0usize..500) {
            let window: f64 = (k + 1..=k + m).map(|i| s.step(i)).sum();
            let lhs = s.tau(k + m);
            let rhs = s.tau(k) + window;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }

        #[test]
        fn m_of_inverts_tau(s in schedule_strategy(), k in 0usize..5000) {
            prop_assert_eq!(s.m_of(s.tau(k)).unwrap(), k);
        }

        #[test]
        fn index_set_matches_window_scan(s in schedule_strategy(), n in 0usize..500, t in 0.01f64..4.0) {
            let fast = s.index_set_helper(n, t);
            prop_assert_eq!(fast, brute_index_set(&s, n, t));
        }
    }

    impl StepSchedule {
        fn index_set_helper(&self, n: usize, t: f64) -> Vec<usize> {
            index_set(self, n, t).unwrap().collect()
        }
    }
}
