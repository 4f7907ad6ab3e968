//! Trajectory CSVs, run reconstruction and hashed manifests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::hybrid_time::{HybridIndex, HybridSequence};
use crate::linalg::{sub, Rows};
use crate::schedules::TwoTimescaleSchedule;
use crate::simulate::{Phase, SimRun};
use crate::systems::TwoTimescaleSystem;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub fn trajectory_name(seed: u64) -> String {
    format!("trajectory_seed{seed}.csv")
}

pub fn convergence_name(seed: u64) -> String {
    format!("convergence_seed{seed}.csv")
}

fn phase_at(run: &SimRun, idx: HybridIndex) -> Option<Phase> {
    let d = run.sequence.domain();
    if d.contains(HybridIndex::new(idx.k, idx.j + 1)) {
        Some(Phase::Jump)
    } else if d.contains(HybridIndex::new(idx.k + 1, idx.j)) {
        Some(Phase::Flow)
    } else {
        None
    }
}

/// One row per domain point: `k, j, phase, x_*, fhat_s_*, fhat_f_*`.
/// Jump rows leave the drift columns empty; the terminal row also leaves
/// `phase` empty.
pub fn write_trajectory_csv<W: Write>(run: &SimRun, w: W) -> std::io::Result<()> {
    let dim = run.slow_dim + run.fast_dim;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["k".to_string(), "j".into(), "phase".into()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    header.extend((0..run.slow_dim).map(|i| format!("fhat_s_{i}")));
    header.extend((0..run.fast_dim).map(|i| format!("fhat_f_{i}")));
    out.write_record(&header)?;
    let blank = run.slow_dim + run.fast_dim;
    for (idx, x) in run.sequence.iter() {
        let phase = phase_at(run, idx);
        let mut rec = vec![idx.k.to_string(), idx.j.to_string(), phase.map_or("", Phase::as_str).to_string()];
        rec.extend(x.iter().map(f64::to_string));
        if phase == Some(Phase::Flow) {
            rec.extend(run.fhat_slow.row(idx.k).iter().map(f64::to_string));
            rec.extend(run.fhat_fast.row(idx.k).iter().map(f64::to_string));
        } else {
            rec.extend(std::iter::repeat(String::new()).take(blank));
        }
        out.write_record(&rec)?;
    }
    out.flush()
}

/// `(dist_to_M, lambda_tracking)` per flow point.
pub fn write_convergence_csv<W: Write>(rows: &[(usize, f64, Option<f64>)], w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "dist_to_M", "lambda_tracking"])?;
    for (k, d, l) in rows {
        out.write_record([k.to_string(), d.to_string(), l.map_or_else(String::new, |v| v.to_string())])?;
    }
    out.flush()
}

/// Rebuild a run from its trajectory CSV. The recorded drifts `f` are
/// recomputed from `sys` at each flow point; the fast residual is
/// `f̂_f − f_f` for stochastic runs and zero otherwise.
pub fn read_trajectory_csv<S: TwoTimescaleSystem + ?Sized>(
    path: &Path,
    sys: &S,
    schedule: TwoTimescaleSchedule,
    seed: u64,
    stochastic: bool,
) -> Result<SimRun, CliError> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.to_path_buf()));
    }
    let bad = |m: String| CliError::Artifact(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let count = |p: &str| header.iter().filter(|h| h.starts_with(p)).count();
    let (dim, ns, nf) = (count("x_"), count("fhat_s_"), count("fhat_f_"));
    if ns != sys.slow_dim() || nf != sys.fast_dim() || dim != ns + nf {
        return Err(bad("column layout does not match the configured system".into()));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number {s:?}: {e}")));
    let mut seq: Option<HybridSequence> = None;
    let (mut fhat_s, mut fhat_f) = (Rows::new(ns), Rows::new(nf));
    let (mut f_s, mut f_f, mut res) = (Rows::new(ns), Rows::new(nf), Rows::new(nf));
    let mut jump_log = Vec::new();
    let mut prev_j = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let k: usize = rec[0].parse().map_err(|_| bad("bad k".into()))?;
        let j: usize = rec[1].parse().map_err(|_| bad("bad j".into()))?;
        let x = (3..3 + dim).map(|c| parse(&rec[c])).collect::<Result<Vec<_>, _>>()?;
        match seq.as_mut() {
            None => seq = Some(HybridSequence::new(&x)),
            Some(s) if j > prev_j => s.push_jump(&x),
            Some(s) => s.push_flow(&x),
        }
        prev_j = j;
        match &rec[2] {
            "flow" => {
                let d = (3 + dim..3 + 2 * dim).map(|c| parse(&rec[c])).collect::<Result<Vec<_>, _>>()?;
                let (ds, df) = d.split_at(ns);
                let mean = sys.fast_flow(&x);
                fhat_s.push(ds);
                fhat_f.push(df);
                f_s.push(&sys.slow_flow(&x));
                if stochastic {
                    res.push(&sub(df, &mean));
                } else {
                    res.push(&vec![0.0; nf]);
                }
                f_f.push(&mean);
            }
            "jump" => jump_log.push(HybridIndex::new(k, j)),
            "" => {}
            other => return Err(bad(format!("unknown phase {other:?}"))),
        }
    }
    let sequence = seq.ok_or_else(|| bad("empty trajectory".into()))?;
    if fhat_s.len() != sequence.domain().max_k() {
        return Err(bad("flow rows do not match the hybrid domain".into()));
    }
    Ok(SimRun {
        sequence,
        slow_dim: ns,
        fast_dim: nf,
        fhat_slow: fhat_s,
        fhat_fast: fhat_f,
        f_slow: f_s,
        f_fast: f_f,
        residual_fast: res,
        jump_log,
        seed,
        stochastic,
        schedule,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

pub fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Effective config, code version and output hashes of one command.
///
/// `digest` covers everything except `created_unix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    pub config: serde_json::Value,
    pub files: BTreeMap<String, String>,
    pub digest: String,
    pub created_unix: u64,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C, dir: &Path, files: &[String]) -> std::io::Result<Self> {
        let config = serde_json::to_value(config).map_err(std::io::Error::other)?;
        let mut hashes = BTreeMap::new();
        for f in files {
            hashes.insert(f.clone(), hash_file(&dir.join(f))?);
        }
        let mut material = format!("{command}\n{CODE_VERSION}\n{config}\n");
        for (f, h) in &hashes {
            material.push_str(&format!("{f} {h}\n"));
        }
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Ok(Self {
            command: command.into(),
            code_version: CODE_VERSION.into(),
            config,
            files: hashes,
            digest: sha256_hex(material.as_bytes()),
            created_unix,
        })
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
        w.flush()
    }
}

pub fn manifest_path(dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("manifest_{command}.json"))
}
