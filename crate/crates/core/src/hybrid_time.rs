//! Hybrid sequence domains, hybrid sequences and ω-limit estimation.
//!
//! A compact hybrid sequence domain is the union
//! `E = ∪_{j=0}^{J-1} {k_j, …, k_{j+1}} × {j}` for integers
//! `0 = k_0 ≤ k_1 ≤ … ≤ k_J`. It is stored as that list of break points, so
//! the point `(k, j)` sits at position `k + j` in the lexicographic
//! enumeration of the domain and values can live in a flat array.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, Rows};

/// A point `(k, j)` of a hybrid sequence domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HybridIndex {
    pub k: usize,
    pub j: usize,
}

impl HybridIndex {
    pub fn new(k: usize, j: usize) -> Self {
        Self { k, j }
    }

    /// Hybrid length `k + j`.
    pub fn length(&self) -> usize {
        self.k + self.j
    }
}

impl Ord for HybridIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.length()
            .cmp(&other.length())
            .then(self.j.cmp(&other.j))
    }
}

impl PartialOrd for HybridIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Compact hybrid sequence domain encoded by its break points `k_0..=k_J`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridSequenceDomain {
    /// `k_0 = 0 ≤ k_1 ≤ … ≤ k_J`; segment `j` spans `k_j..=k_{j+1}`.
    jump_indices: Vec<usize>,
    /// Whether this (finite) domain is a prefix of a domain that is
    /// unbounded in `k`.
    pub complete_in_k: bool,
    /// Whether this (finite) domain is a prefix of a domain that is
    /// unbounded in `j`.
    pub complete_in_j: bool,
}

impl Default for HybridSequenceDomain {
    fn default() -> Self {
        Self::single_point()
    }
}

impl HybridSequenceDomain {
    /// The domain `{(0, 0)}`.
    pub fn single_point() -> Self {
        Self {
            jump_indices: vec![0, 0],
            complete_in_k: false,
            complete_in_j: false,
        }
    }

    pub fn from_jump_indices(jump_indices: Vec<usize>) -> Result<Self> {
        if jump_indices.len() < 2 {
            return Err(Error::InvalidArgument(
                "a hybrid sequence domain needs at least k_0 and k_1".into(),
            ));
        }
        if jump_indices[0] != 0 {
            return Err(Error::InvalidArgument("k_0 must be 0".into()));
        }
        if jump_indices.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "jump indices must be nondecreasing".into(),
            ));
        }
        Ok(Self {
            jump_indices,
            complete_in_k: false,
            complete_in_j: false,
        })
    }

    /// Purely flowing domain `{0..=k_max} × {0}`.
    pub fn flowing(k_max: usize) -> Self {
        Self {
            jump_indices: vec![0, k_max],
            complete_in_k: false,
            complete_in_j: false,
        }
    }

    pub fn jump_indices(&self) -> &[usize] {
        &self.jump_indices
    }

    /// Number of segments `J`.
    pub fn num_segments(&self) -> usize {
        self.jump_indices.len() - 1
    }

    /// Number of jumps contained in the domain (`J - 1`).
    pub fn num_jumps(&self) -> usize {
        self.num_segments() - 1
    }

    pub fn max_k(&self) -> usize {
        *self.jump_indices.last().expect("nonempty by construction")
    }

    /// Number of points, `k_J + J`.
    pub fn len(&self) -> usize {
        self.max_k() + self.num_segments()
    }

    /// Always false: every domain contains `(0, 0)`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> HybridIndex {
        HybridIndex::new(self.max_k(), self.num_segments() - 1)
    }

    pub fn contains(&self, idx: HybridIndex) -> bool {
        idx.j < self.num_segments()
            && self.jump_indices[idx.j] <= idx.k
            && idx.k <= self.jump_indices[idx.j + 1]
    }

    /// Position of `idx` in the lexicographic enumeration, if a member.
    pub fn position(&self, idx: HybridIndex) -> Option<usize> {
        self.contains(idx).then_some(idx.k + idx.j)
    }

    /// Inverse of [`position`](Self::position).
    pub fn index_at(&self, pos: usize) -> Option<HybridIndex> {
        if pos >= self.len() {
            return None;
        }
        // Segment j occupies positions k_j + j ..= k_{j+1} + j.
        let (mut lo, mut hi) = (0, self.num_segments());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.jump_indices[mid + 1] + mid < pos {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Some(HybridIndex::new(pos - lo, lo))
    }

    /// `j̄_k = inf{j : (k+1, j) ∈ E}`; `None` is the infinite sentinel.
    pub fn jbar(&self, k: usize) -> Option<usize> {
        let target = k + 1;
        let j = self.jump_indices[1..].partition_point(|&kj| kj < target);
        (j < self.num_segments()).then_some(j)
    }

    /// `k̄_j = inf{k : (k, j+1) ∈ E}`; `None` is the infinite sentinel.
    pub fn kbar(&self, j: usize) -> Option<usize> {
        (j + 1 < self.num_segments()).then(|| self.jump_indices[j + 1])
    }

    /// Points of the domain in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = HybridIndex> + '_ {
        (0..self.num_segments()).flat_map(move |j| {
            (self.jump_indices[j]..=self.jump_indices[j + 1]).map(move |k| HybridIndex::new(k, j))
        })
    }

    /// Jump edges `(k̄_j, j) → (k̄_j, j+1)` as their source index.
    pub fn jumps(&self) -> impl Iterator<Item = HybridIndex> + '_ {
        (0..self.num_jumps()).map(move |j| HybridIndex::new(self.jump_indices[j + 1], j))
    }

    fn extend_flow(&mut self) {
        *self.jump_indices.last_mut().expect("nonempty") += 1;
    }

    fn extend_jump(&mut self) {
        let k = self.max_k();
        self.jump_indices.push(k);
    }
}

/// A hybrid sequence `φ : dom φ → R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSequence {
    domain: HybridSequenceDomain,
    values: Rows,
}

impl HybridSequence {
    /// Sequence with the single value `φ(0, 0) = x0`.
    pub fn new(x0: &[f64]) -> Self {
        let mut values = Rows::new(x0.len());
        values.push(x0);
        Self {
            domain: HybridSequenceDomain::single_point(),
            values,
        }
    }

    /// Build from a domain and values listed in lexicographic domain order.
    pub fn from_parts(domain: HybridSequenceDomain, values: Rows) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: values.len(),
            });
        }
        if values.width() == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        Ok(Self { domain, values })
    }

    /// Purely flowing sequence `φ(k, 0) = points[k]`.
    pub fn from_flow_points<I, V>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<[f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter.next().ok_or(Error::EmptySequence)?;
        let mut seq = Self::new(first.as_ref());
        for p in iter {
            seq.push_flow(p.as_ref());
        }
        Ok(seq)
    }

    pub fn dim(&self) -> usize {
        self.values.width()
    }

    pub fn domain(&self) -> &HybridSequenceDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Append `φ(k+1, j) = x` after the last point `(k, j)`.
    pub fn push_flow(&mut self, x: &[f64]) {
        self.values.push(x);
        self.domain.extend_flow();
    }

    /// Append `φ(k, j+1) = x` after the last point `(k, j)`.
    pub fn push_jump(&mut self, x: &[f64]) {
        self.values.push(x);
        self.domain.extend_jump();
    }

    pub fn get(&self, idx: HybridIndex) -> Option<&[f64]> {
        self.domain.position(idx).map(|p| self.values.row(p))
    }

    pub fn at(&self, k: usize, j: usize) -> Option<&[f64]> {
        self.get(HybridIndex::new(k, j))
    }

    pub fn last(&self) -> &[f64] {
        self.values.row(self.values.len() - 1)
    }

    pub fn jbar(&self, k: usize) -> Option<usize> {
        self.domain.jbar(k)
    }

    pub fn kbar(&self, j: usize) -> Option<usize> {
        self.domain.kbar(j)
    }

    /// `(index, value)` pairs in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (HybridIndex, &[f64])> + '_ {
        self.domain.iter().zip(self.values.iter())
    }

    pub fn values(&self) -> &Rows {
        &self.values
    }

    /// `max |φ(k,j)|` over all stored values.
    pub fn norm_bound(&self) -> f64 {
        self.values.iter().map(norm).fold(0.0, f64::max)
    }

    /// Writes columns `k, j, x_0..x_{n-1}` with a header row.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string(), "j".to_string()];
        header.extend((0..self.dim()).map(|i| format!("x_{i}")));
        wtr.write_record(&header)?;
        for (idx, x) in self.iter() {
            let mut rec = vec![idx.k.to_string(), idx.j.to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()
    }

    /// Reads the format produced by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(r: R) -> std::result::Result<Self, CsvError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut seq: Option<Self> = None;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| CsvError::Format(format!("row {}: {what}", line + 2));
            let k: usize = rec.get(0).ok_or_else(|| bad("missing k"))?.parse().map_err(|_| bad("bad k"))?;
            let j: usize = rec.get(1).ok_or_else(|| bad("missing j"))?.parse().map_err(|_| bad("bad j"))?;
            let x = rec
                .iter()
                .skip(2)
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad value"))?;
            match seq.as_mut() {
                None => {
                    if (k, j) != (0, 0) {
                        return Err(bad("sequence must start at (0, 0)"));
                    }
                    seq = Some(Self::new(&x));
                }
                Some(s) => {
                    let last = s.domain.last();
                    if (k, j) == (last.k + 1, last.j) {
                        s.push_flow(&x);
                    } else if (k, j) == (last.k, last.j + 1) {
                        s.push_jump(&x);
                    } else {
                        return Err(bad("index does not extend the domain"));
                    }
                }
            }
        }
        seq.ok_or(CsvError::Format("empty sequence".into()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed sequence csv: {0}")]
    Format(String),
}

/// Finite-run surrogate for ω(φ).
///
/// Keeps the values at indices with `k + j ≥ (1 - tail_fraction)·max(k + j)`
/// and merges them by single-linkage clustering at distance `cluster_tol`,
/// each cluster represented by its centroid. The result is sorted
/// lexicographically.
pub fn omega_limit_estimate(
    seq: &HybridSequence,
    tail_fraction: f64,
    cluster_tol: f64,
) -> Result<Vec<Vec<f64>>> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail_fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    if cluster_tol.is_nan() || cluster_tol < 0.0 {
        return Err(Error::InvalidArgument("cluster_tol must be nonnegative".into()));
    }
    let max_len = seq.len() - 1;
    let start = ((1.0 - tail_fraction) * max_len as f64).ceil() as usize;
    let tail: Vec<&[f64]> = (start..seq.len()).map(|p| seq.values.row(p)).collect();
    Ok(single_linkage_centroids(&tail, cluster_tol))
}

/// Single-linkage clusters at threshold `tol`, returned as sorted centroids.
pub fn single_linkage_centroids(points: &[&[f64]], tol: f64) -> Vec<Vec<f64>> {
    let m = points.len();
    if m == 0 {
        return Vec::new();
    }
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    // Sweep along the first coordinate: only pairs within tol there can link.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    for (oi, &a) in order.iter().enumerate() {
        for &b in &order[oi + 1..] {
            if points[b][0] - points[a][0] > tol {
                break;
            }
            if crate::linalg::dist(points[a], points[b]) <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let dim = points[0].len();
    let mut sums: std::collections::BTreeMap<usize, (Vec<f64>, usize)> = Default::default();
    for i in 0..m {
        let r = find(&mut parent, i);
        let entry = sums.entry(r).or_insert_with(|| (vec![0.0; dim], 0));
        for (s, v) in entry.0.iter_mut().zip(points[i]) {
            *s += v;
        }
        entry.1 += 1;
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_values()
        .map(|(s, c)| s.into_iter().map(|v| v / c as f64).collect())
        .collect();
    centroids.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force enumeration of E = ∪_j {k_j..=k_{j+1}} × {j}.
    fn brute_domain(ks: &[usize]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..ks.len() - 1 {
            for k in ks[j]..=ks[j + 1] {
                out.push((k, j));
            }
        }
        out
    }

    fn brute_jbar(ks: &[usize], k: usize) -> Option<usize> {
        brute_domain(ks)
            .into_iter()
            .filter(|&(kk, _)| kk == k + 1)
            .map(|(_, j)| j)
            .min()
    }

    fn brute_kbar(ks: &[usize], j: usize) -> Option<usize> {
        brute_domain(ks)
            .into_iter()
            .filter(|&(_, jj)| jj == j + 1)
            .map(|(k, _)| k)
            .min()
    }

    #[test]
    fn jbar_examples() {
        // Single jump at k = 2, domain continuing to k = 6.
        let d = HybridSequenceDomain::from_jump_indices(vec![0, 2, 6]).unwrap();
        assert_eq!(d.jbar(0), Some(0));
        assert_eq!(d.jbar(2), brute_jbar(&[0, 2, 6], 2));
        assert_eq!(d.jbar(2), Some(1));
        // Finite domain ending at (5, 1).
        let d = HybridSequenceDomain::from_jump_indices(vec![0, 3, 5]).unwrap();
        assert_eq!(d.last(), HybridIndex::new(5, 1));
        assert_eq!(d.jbar(5), None);
    }

    #[test]
    fn kbar_examples() {
        let d = HybridSequenceDomain::from_jump_indices(vec![0, 3, 8]).unwrap();
        assert_eq!(d.kbar(0), brute_kbar(&[0, 3, 8], 0));
        assert_eq!(d.kbar(0), Some(3));
        assert_eq!(HybridSequenceDomain::flowing(10).kbar(0), None);
        let ks = [0, 4, 4, 7];
        let d = HybridSequenceDomain::from_jump_indices(ks.to_vec()).unwrap();
        assert_eq!(d.kbar(1), brute_kbar(&ks, 1));
        assert_eq!(d.kbar(1), Some(4));
    }

    #[test]
    fn rejects_malformed_domains() {
        assert!(HybridSequenceDomain::from_jump_indices(vec![0]).is_err());
        assert!(HybridSequenceDomain::from_jump_indices(vec![1, 2]).is_err());
        assert!(HybridSequenceDomain::from_jump_indices(vec![0, 3, 2]).is_err());
    }

    #[test]
    fn positions_follow_enumeration() {
        let d = HybridSequenceDomain::from_jump_indices(vec![0, 2, 2, 5]).unwrap();
        for (pos, idx) in d.iter().enumerate() {
            assert_eq!(d.position(idx), Some(pos));
            assert_eq!(d.index_at(pos), Some(idx));
        }
        assert_eq!(d.index_at(d.len()), None);
        assert_eq!(d.len(), brute_domain(&[0, 2, 2, 5]).len());
    }

    #[test]
    fn index_order_is_length_then_jump() {
        let mut v = vec![
            HybridIndex::new(2, 0),
            HybridIndex::new(1, 1),
            HybridIndex::new(0, 0),
            HybridIndex::new(0, 3),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                HybridIndex::new(0, 0),
                HybridIndex::new(2, 0),
                HybridIndex::new(1, 1),
                HybridIndex::new(0, 3)
            ]
        );
    }

    #[test]
    fn builder_tracks_domain() {
        let mut s = HybridSequence::new(&[0.0]);
        s.push_flow(&[1.0]);
        s.push_flow(&[2.0]);
        s.push_jump(&[20.0]);
        s.push_jump(&[200.0]);
        s.push_flow(&[3.0]);
        assert_eq!(s.domain().jump_indices(), &[0, 2, 2, 3]);
        assert_eq!(s.at(2, 0), Some(&[2.0][..]));
        assert_eq!(s.at(2, 2), Some(&[200.0][..]));
        assert_eq!(s.at(3, 2), Some(&[3.0][..]));
        assert_eq!(s.at(3, 0), None);
        assert_eq!(s.domain().jumps().collect::<Vec<_>>(), vec![
            HybridIndex::new(2, 0),
            HybridIndex::new(2, 1)
        ]);
    }

    #[test]
    fn csv_roundtrip_preserves_bits() {
        let mut s = HybridSequence::new(&[0.1, -1.0 / 3.0]);
        s.push_flow(&[1e-300, std::f64::consts::PI]);
        s.push_jump(&[0.0, -0.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = HybridSequence::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,j,x_0,x_1\n"));
    }

    #[test]
    fn omega_of_constant_sequence() {
        let s = HybridSequence::from_flow_points(vec![[2.0, -1.0]; 50]).unwrap();
        assert_eq!(omega_limit_estimate(&s, 0.3, 0.0).unwrap(), vec![vec![2.0, -1.0]]);
    }

    #[test]
    fn omega_of_alternating_sequence() {
        let pts: Vec<[f64; 2]> = (0..100)
            .map(|k| [if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0])
            .collect();
        let s = HybridSequence::from_flow_points(pts).unwrap();
        let cloud = omega_limit_estimate(&s, 0.5, 1e-9).unwrap();
        assert_eq!(cloud, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn omega_of_harmonic_decay() {
        let s = HybridSequence::from_flow_points((0..10_000).map(|k| [1.0 / (k as f64 + 1.0)])).unwrap();
        let cloud = omega_limit_estimate(&s, 0.1, 1e-3).unwrap();
        assert_eq!(cloud.len(), 1);
        assert!(cloud[0][0] < 2e-4);
    }

    #[test]
    fn omega_rejects_bad_fraction() {
        let s = HybridSequence::new(&[1.0]);
        assert!(omega_limit_estimate(&s, 0.0, 0.1).is_err());
        assert!(omega_limit_estimate(&s, 1.5, 0.1).is_err());
    }

    use proptest::prelude::*;

    fn domain_strategy() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0usize..6, 1..8).prop_map(|gaps| {
            let mut ks = vec![0];
            for g in gaps {
                let next = ks.last().unwrap() + g;
                ks.push(next);
            }
            ks
        })
    }

    proptest! {
        #[test]
        fn membership_matches_enumeration(ks in domain_strategy()) {
            let d = HybridSequenceDomain::from_jump_indices(ks.clone()).unwrap();
            let members = brute_domain(&ks);
            for k in 0..=d.max_k() + 2 {
                for j in 0..d.num_segments() + 2 {
                    prop_assert_eq!(d.contains(HybridIndex::new(k, j)), members.contains(&(k, j)));
                }
            }
            prop_assert_eq!(d.iter().map(|i| (i.k, i.j)).collect::<Vec<_>>(), members);
        }

        #[test]
        fn successor_indices_match_brute_force(ks in domain_strategy()) {
            let d = HybridSequenceDomain::from_jump_indices(ks.clone()).unwrap();
            for k in 0..=d.max_k() + 1 {
                prop_assert_eq!(d.jbar(k), brute_jbar(&ks, k));
            }
            for j in 0..d.num_segments() + 1 {
                prop_assert_eq!(d.kbar(j), brute_kbar(&ks, j));
            }
        }

        #[test]
        fn flow_edges_are_unique_at_jbar(ks in domain_strategy()) {
            let d = HybridSequenceDomain::from_jump_indices(ks).unwrap();
            for k in 0..d.max_k() {
                let edges: Vec<usize> = (0..d.num_segments())
                    .filter(|&j| d.contains(HybridIndex::new(k, j)) && d.contains(HybridIndex::new(k + 1, j)))
                    .collect();
                prop_assert_eq!(edges, vec![d.jbar(k).unwrap()]);
            }
        }

        #[test]
        fn omega_ignores_transient_prefix(prefix in prop::collection::vec(-50.0f64..50.0, 0..40), period in 1usize..5) {
            let tail_vals: Vec<f64> = (0..period).map(|i| i as f64 * 3.0).collect();
            let mut pts: Vec<[f64; 1]> = prefix.iter().map(|&v| [v]).collect();
            for r in 0..400 {
                pts.push([tail_vals[r % period]]);
            }
            let s = HybridSequence::from_flow_points(pts).unwrap();
            let cloud = omega_limit_estimate(&s, 0.5, 1e-6).unwrap();
            let expect: Vec<Vec<f64>> = tail_vals.iter().map(|&v| vec![v]).collect();
            prop_assert_eq!(cloud, expect);
        }
    }
}
