//! The reduced slow system obtained by substituting the fast steady state
//! `x_f ∈ Λ(x_s)` into a two-timescale system.

use std::fmt;
use std::sync::Arc;

use super::hull::hull_distance;
use super::{HybridSystem, TwoTimescaleSystem};
use crate::error::{Error, Result};
use crate::linalg::{dist, BoxSet};

/// The graph of the fast steady-state map `Λ`.
#[derive(Clone)]
pub enum LambdaGraph {
    SingleValued {
        eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
        domain: BoxSet,
    },
    /// Finitely many `(x_s, x_f)` pairs, typically a tail cloud of a
    /// boundary-layer run and therefore only an approximation of the graph.
    PointCloud {
        points: Vec<(Vec<f64>, Vec<f64>)>,
        domain: BoxSet,
    },
}

impl fmt::Debug for LambdaGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SingleValued { domain, .. } => {
                f.debug_struct("SingleValued").field("domain", domain).finish()
            }
            Self::PointCloud { points, domain } => f
                .debug_struct("PointCloud")
                .field("points", &points.len())
                .field("domain", domain)
                .finish(),
        }
    }
}

impl LambdaGraph {
    pub fn single_valued<F>(eval: F, domain: BoxSet) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::SingleValued {
            eval: Arc::new(eval),
            domain,
        }
    }

    pub fn point_cloud(points: Vec<(Vec<f64>, Vec<f64>)>, domain: BoxSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("Λ point cloud must be nonempty".into()));
        }
        if let Some((xs, _)) = points.iter().find(|(xs, _)| xs.len() != domain.dim()) {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: xs.len(),
            });
        }
        Ok(Self::PointCloud { points, domain })
    }

    /// Split stacked states at `slow_dim`; the domain is the bounding box of
    /// the slow parts grown by `margin`.
    pub fn from_omega_cloud(cloud: &[Vec<f64>], slow_dim: usize, margin: f64) -> Result<Self> {
        let points: Vec<(Vec<f64>, Vec<f64>)> = cloud
            .iter()
            .map(|x| (x[..slow_dim].to_vec(), x[slow_dim..].to_vec()))
            .collect();
        let domain = BoxSet::bounding(points.iter().map(|(s, _)| s.as_slice()))
            .ok_or_else(|| Error::InvalidArgument("Λ point cloud must be nonempty".into()))?
            .inflate(margin);
        Self::point_cloud(points, domain)
    }

    pub fn domain(&self) -> &BoxSet {
        match self {
            Self::SingleValued { domain, .. } | Self::PointCloud { domain, .. } => domain,
        }
    }

    /// `Λ(x_s)`. Point-cloud values are those whose slow part lies within
    /// `tol` of `x_s`, with fast parts within `tol` of each other merged.
    pub fn values(&self, x_s: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
        if !self.domain().contains(x_s) {
            return Err(Error::OutsideLambdaDomain);
        }
        Ok(match self {
            Self::SingleValued { eval, .. } => vec![eval(x_s)],
            Self::PointCloud { points, .. } => {
                let mut out: Vec<Vec<f64>> = Vec::new();
                for (s, f) in points {
                    if dist(s, x_s) <= tol && !out.iter().any(|g| dist(g, f) <= tol) {
                        out.push(f.clone());
                    }
                }
                out
            }
        })
    }
}

/// The reduced system on `R^{n_s}`: `C_R = dom Λ_R^C`, `F_R = cch F_s(x_s,
/// Λ_R^C(x_s))`, `D_R = dom Λ_R^D`, `G_R = proj_s G(x_s, Λ_R^D(x_s))`.
#[derive(Debug, Clone)]
pub struct ReducedSystem<S> {
    pub sys: S,
    pub lambda: LambdaGraph,
    pub tol: f64,
}

pub fn reduced_system<S: TwoTimescaleSystem>(sys: S, lambda: LambdaGraph, tol: f64) -> ReducedSystem<S> {
    ReducedSystem { sys, lambda, tol }
}

impl<S: TwoTimescaleSystem> ReducedSystem<S> {
    pub fn new(sys: S, lambda: LambdaGraph, tol: f64) -> Self {
        reduced_system(sys, lambda, tol)
    }

    fn stack(x_s: &[f64], x_f: &[f64]) -> Vec<f64> {
        let mut x = x_s.to_vec();
        x.extend_from_slice(x_f);
        x
    }

    /// Stacked states `(x_s, x_f)`, `x_f ∈ Λ(x_s)`, lying in `C`.
    pub fn flow_admissible(&self, x_s: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .lambda
            .values(x_s, self.tol)?
            .iter()
            .map(|f| Self::stack(x_s, f))
            .filter(|x| self.sys.in_flow_set(x))
            .collect())
    }

    /// Stacked states `(x_s, x_f)`, `x_f ∈ Λ(x_s)`, lying in `D`.
    pub fn jump_admissible(&self, x_s: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .lambda
            .values(x_s, self.tol)?
            .iter()
            .map(|f| Self::stack(x_s, f))
            .filter(|x| self.sys.in_jump_set(x))
            .collect())
    }

    /// The finitely many slow drifts whose hull is `F_R(x_s)`.
    pub fn flow_values(&self, x_s: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .flow_admissible(x_s)?
            .iter()
            .map(|x| self.sys.slow_flow(x))
            .collect())
    }

    /// Slow drift at the first admissible fast value.
    pub fn try_flow(&self, x_s: &[f64]) -> Result<Vec<f64>> {
        let adm = self.flow_admissible(x_s)?;
        match adm.first() {
            Some(x) => Ok(self.sys.slow_flow(x)),
            None => self.fallback(x_s, |x| self.sys.slow_flow(x)),
        }
    }

    /// Slow projection of the jump at the first admissible fast value.
    pub fn try_jump(&self, x_s: &[f64]) -> Result<Vec<f64>> {
        let ns = self.sys.slow_dim();
        let adm = self.jump_admissible(x_s)?;
        match adm.first() {
            Some(x) => Ok(self.sys.jump(x)[..ns].to_vec()),
            None => self.fallback(x_s, |x| self.sys.jump(x)[..ns].to_vec()),
        }
    }

    /// Outside the relevant set the selection is taken at the first value of
    /// `Λ(x_s)`; with no value at all it is undefined.
    fn fallback(&self, x_s: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
        let vals = self.lambda.values(x_s, self.tol)?;
        Ok(match vals.first() {
            Some(v) => f(&Self::stack(x_s, v)),
            None => vec![f64::NAN; self.sys.slow_dim()],
        })
    }
}

impl<S: TwoTimescaleSystem> HybridSystem for ReducedSystem<S> {
    fn dim(&self) -> usize {
        self.sys.slow_dim()
    }

    fn in_flow_set(&self, x: &[f64]) -> bool {
        self.flow_admissible(x).map(|v| !v.is_empty()).unwrap_or(false)
    }

    fn in_jump_set(&self, x: &[f64]) -> bool {
        self.jump_admissible(x).map(|v| !v.is_empty()).unwrap_or(false)
    }

    fn flow(&self, x: &[f64]) -> Vec<f64> {
        self.try_flow(x).unwrap_or_else(|_| vec![f64::NAN; self.dim()])
    }

    fn jump(&self, x: &[f64]) -> Vec<f64> {
        self.try_jump(x).unwrap_or_else(|_| vec![f64::NAN; self.dim()])
    }

    fn flow_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        let Ok(adm) = self.flow_admissible(x) else {
            return f64::INFINITY;
        };
        match adm.len() {
            0 => f64::INFINITY,
            1 => self.sys.slow_flow_distance(&adm[0], v),
            _ => {
                let pts: Vec<Vec<f64>> = adm.iter().map(|y| self.sys.slow_flow(y)).collect();
                hull_distance(&pts, v)
            }
        }
    }

    fn jump_distance(&self, x: &[f64], v: &[f64]) -> f64 {
        let ns = self.sys.slow_dim();
        let Ok(adm) = self.jump_admissible(x) else {
            return f64::INFINITY;
        };
        adm.iter()
            .map(|y| dist(v, &self.sys.jump(y)[..ns]))
            .fold(f64::INFINITY, f64::min)
    }
}
