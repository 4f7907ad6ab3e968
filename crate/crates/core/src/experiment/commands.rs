//! `simulate`, `diagnose`, `chain` and `print-defaults`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::artifacts::{
    convergence_name, create, manifest_path, read_trajectory_csv, trajectory_name, write_convergence_csv,
    write_trajectory_csv, Manifest,
};
use super::config::{ChainBlock, ExperimentConfig};
use super::{CliError, ExitStatus};
use crate::chains::{find_chain, Chain, ChainSearch};
use crate::diagnostics::{diagnose, DiagnosticsReport};
use crate::error::Error;
use crate::hhb::{distance_to_m, hhb_reduced, lambda_graph, FiniteSumObjective, HhbOracle, HhbSystem, HhbTwoTimescale, Objective};
use crate::linalg::{dist, BoxSet};
use crate::simulate::{run, Biased, DriftOracle, RunConfig, SimRun, SlowOnly};
use crate::systems::{LinearDecay, Stacked};

/// Result of a command: exit status plus the human-readable summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: ExitStatus,
    pub summary: String,
}

/// A registry entry instantiated from the config.
#[derive(Debug, Clone)]
pub enum BuiltSystem {
    Hhb(HhbSystem<Objective>),
    HhbTt(HhbTwoTimescale<Objective>),
    Linear(LinearDecay),
}

pub fn build_system(cfg: &ExperimentConfig) -> Result<BuiltSystem, CliError> {
    Ok(match cfg.system.name.as_str() {
        "hhb" => BuiltSystem::Hhb(HhbSystem::new(cfg.objective()?, cfg.hhb_params()?)),
        "hhb_tt" => BuiltSystem::HhbTt(HhbTwoTimescale::new(cfg.objective()?, cfg.hhb_params()?)),
        "linear_decay_demo" => BuiltSystem::Linear(LinearDecay { dim: cfg.system.dim }),
        other => return Err(CliError::Config(format!("system.name: unknown system {other:?}"))),
    })
}

impl BuiltSystem {
    fn default_x0(&self) -> Vec<f64> {
        match self {
            Self::Hhb(s) => {
                let n = s.obj.dim();
                let mut x = vec![1.0; n];
                x.resize(2 * n + 1, 0.0);
                x
            }
            Self::HhbTt(s) => s.default_initial_state(),
            Self::Linear(s) => vec![1.0; s.dim],
        }
    }

    /// `(dist_to_M, |ξ − ∇Ψ(q)|)` at a state, where defined.
    fn convergence_point(&self, x: &[f64]) -> crate::Result<Option<(f64, Option<f64>)>> {
        Ok(match self {
            Self::Hhb(s) => Some((distance_to_m(x, &s.obj, &s.params)?, None)),
            Self::HhbTt(s) => {
                let n = s.obj.dim();
                let chi = &x[..2 * n + 1];
                let track = dist(&x[2 * n + 1..], &s.obj.full_grad(&x[..n]));
                Some((distance_to_m(chi, &s.obj, &s.params)?, Some(track)))
            }
            Self::Linear(_) => None,
        })
    }
}

/// One simulation of the configured system with the given seed.
pub fn simulate_seed(cfg: &ExperimentConfig, sys: &BuiltSystem, seed: u64) -> Result<SimRun, CliError> {
    let sched = cfg.schedules()?;
    let x0 = cfg.run.x0.clone().unwrap_or_else(|| sys.default_x0());
    let rc = RunConfig {
        steps: cfg.run.steps,
        seed,
        max_consecutive_jumps: cfg.run.max_consecutive_jumps,
    };
    let out = match sys {
        BuiltSystem::Hhb(s) => run(&SlowOnly(s), &x0, &sched, None, &rc),
        BuiltSystem::Linear(s) => run(&SlowOnly(s), &x0, &sched, None, &rc),
        BuiltSystem::HhbTt(s) => {
            let oracle = HhbOracle { obj: s.obj.clone() };
            let biased = Biased {
                inner: oracle.clone(),
                bias: cfg.run.bias,
            };
            let chosen: Option<&dyn DriftOracle> = match (cfg.run.stochastic, cfg.run.bias != 0.0) {
                (false, _) => None,
                (true, false) => Some(&oracle),
                (true, true) => Some(&biased),
            };
            run(s, &x0, &sched, chosen, &rc)
        }
    }?;
    Ok(out)
}

/// Apply `f` to every seed on a bounded worker pool; results keep seed order.
fn for_each_seed<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T, CliError> + Sync) -> Result<Vec<T>, CliError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T, CliError>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = f(seeds[i]);
                slots.lock().expect("slot lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|r| r.expect("every seed processed"))
        .collect()
}

struct SimSummary {
    seed: u64,
    jumps: usize,
    final_dist: Option<f64>,
    files: Vec<String>,
}

/// Run every seed, write `trajectory_seed{s}.csv` (and convergence CSVs)
/// plus `manifest_simulate.json` into `out`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let sys = build_system(cfg)?;
    let results = for_each_seed(&cfg.run.seeds, |seed| {
        let run = simulate_seed(cfg, &sys, seed)?;
        let name = trajectory_name(seed);
        let mut w = create(&out.join(&name))?;
        write_trajectory_csv(&run, &mut w)?;
        w.flush()?;
        let mut files = vec![name];
        let mut final_dist = None;
        if cfg.output.convergence_csv {
            let mut rows = Vec::with_capacity(run.steps() + 1);
            for k in 0..=run.steps() {
                if let Some((d, l)) = sys.convergence_point(run.flow_point(k))? {
                    rows.push((k, d, l));
                }
            }
            final_dist = rows.last().map(|r| r.1);
            if !rows.is_empty() {
                let name = convergence_name(seed);
                let mut w = create(&out.join(&name))?;
                write_convergence_csv(&rows, &mut w)?;
                w.flush()?;
                files.push(name);
            }
        }
        Ok(SimSummary {
            seed,
            jumps: run.jump_log.len(),
            final_dist,
            files,
        })
    })?;
    let files: Vec<String> = results.iter().flat_map(|r| r.files.clone()).collect();
    Manifest::new("simulate", cfg, out, &files)?.write(&manifest_path(out, "simulate"))?;
    let mut summary = format!("{:>8}  {:>10}  {:>8}  {:>14}\n", "seed", "K", "jumps", "final dist_M");
    for r in &results {
        let d = r.final_dist.map_or_else(|| "-".into(), |d| format!("{d:.6e}"));
        let _ = writeln!(summary, "{:>8}  {:>10}  {:>8}  {:>14}", r.seed, cfg.run.steps, r.jumps, d);
    }
    Ok(Outcome {
        status: ExitStatus::Pass,
        summary,
    })
}

fn report_name(seed: u64) -> String {
    format!("report_seed{seed}.json")
}

fn write_traces(report: &DiagnosticsReport, seed: u64, out: &Path) -> Result<Vec<String>, CliError> {
    let mut files = Vec::new();
    let mut emit = |name: String, write: &dyn Fn(&mut dyn std::io::Write) -> csv::Result<()>| -> Result<(), CliError> {
        let mut w = create(&out.join(&name))?;
        write(&mut w).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        w.flush()?;
        files.push(name);
        Ok(())
    };
    for c in report.closeness_slow.iter().chain(&report.closeness_fast) {
        let tag = format!("closeness_{}_T{}_seed{seed}.csv", c.timescale.to_string().to_lowercase(), c.horizon);
        emit(tag, &|w| c.write_csv(w))?;
    }
    emit(format!("graph_flow_seed{seed}.csv"), &|w| report.graph_flow.write_csv(w))?;
    emit(format!("graph_jump_seed{seed}.csv"), &|w| report.graph_jump.write_csv(w))?;
    emit(format!("bl_drift_seed{seed}.csv"), &|w| report.bl_drift.write_csv(w))?;
    if let Some(t) = &report.lambda_tracking {
        emit(format!("lambda_tracking_seed{seed}.csv"), &|w| t.write_csv(w))?;
    }
    Ok(files)
}

/// Diagnose one reconstructed run against the configured system.
fn diagnose_run(cfg: &ExperimentConfig, sys: &BuiltSystem, run: &SimRun) -> crate::Result<DiagnosticsReport> {
    match sys {
        BuiltSystem::Hhb(s) => diagnose(run, s, None, &cfg.diagnostics),
        BuiltSystem::Linear(s) => diagnose(run, s, None, &cfg.diagnostics),
        BuiltSystem::HhbTt(s) => {
            let domain = BoxSet::bounding(run.sequence.iter().map(|(_, x)| run.slow_part(x)))
                .ok_or(Error::EmptySequence)?;
            let lambda = lambda_graph(s.obj.clone(), domain);
            diagnose(run, &Stacked(s), Some(&lambda), &cfg.diagnostics)
        }
    }
}

/// Recompute every diagnostic from the trajectory CSVs in `out`.
///
/// Writes `report_seed{s}.json`, per-trace CSVs, `verdicts.txt` and
/// `manifest_diagnose.json`. Passes iff every verdict of every seed passes.
pub fn cmd_diagnose(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let sys = build_system(cfg)?;
    let sched = cfg.schedules()?;
    let stochastic = matches!(sys, BuiltSystem::HhbTt(_)) && cfg.run.stochastic;
    for seed in &cfg.run.seeds {
        let p = out.join(trajectory_name(*seed));
        if !p.exists() {
            return Err(CliError::MissingArtifact(p));
        }
    }
    let results = for_each_seed(&cfg.run.seeds, |seed| {
        let path = out.join(trajectory_name(seed));
        let run = match &sys {
            BuiltSystem::HhbTt(s) => read_trajectory_csv(&path, s, sched.clone(), seed, stochastic)?,
            BuiltSystem::Hhb(s) => read_trajectory_csv(&path, &SlowOnly(s), sched.clone(), seed, false)?,
            BuiltSystem::Linear(s) => read_trajectory_csv(&path, &SlowOnly(s), sched.clone(), seed, false)?,
        };
        let report = diagnose_run(cfg, &sys, &run)?;
        let name = report_name(seed);
        let mut w = create(&out.join(&name))?;
        serde_json::to_writer(&mut w, &report).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
        w.flush()?;
        let mut files = vec![name];
        files.extend(write_traces(&report, seed, out)?);
        Ok((seed, report, files))
    })?;
    let mut table = String::new();
    let mut all_passed = true;
    for (seed, report, _) in &results {
        all_passed &= report.all_passed();
        let _ = writeln!(table, "seed {seed}\n{}", report.verdict_table());
    }
    std::fs::write(out.join("verdicts.txt"), &table)?;
    let mut files: Vec<String> = results.iter().flat_map(|r| r.2.clone()).collect();
    files.push("verdicts.txt".into());
    Manifest::new("diagnose", cfg, out, &files)?.write(&manifest_path(out, "diagnose"))?;
    Ok(Outcome {
        status: if all_passed { ExitStatus::Pass } else { ExitStatus::Fail },
        summary: table,
    })
}

/// `find_chain` on the configured system; the two-timescale heavy ball is
/// replaced by its reduced system with `Λ` restricted to the internal box.
fn search_chain(cfg: &ExperimentConfig, block: &ChainBlock) -> Result<Chain, CliError> {
    let mut search = ChainSearch::new(block.tau, block.epsilon, block.budget);
    search.dt = block.dt;
    search.internal_box = block.internal_box.clone();
    let found = match build_system(cfg)? {
        BuiltSystem::Linear(s) => find_chain(&s, &block.x, &block.y, &search),
        BuiltSystem::Hhb(s) => find_chain(&s, &block.x, &block.y, &search),
        BuiltSystem::HhbTt(s) => {
            let domain = block.internal_box.clone().expect("validated");
            let reduced = hhb_reduced(s.obj.clone(), s.params, domain);
            find_chain(&reduced, &block.x, &block.y, &search)
        }
    };
    found.map_err(|e| match e {
        Error::InvalidArgument(m) => CliError::Config(format!("chain: {m}")),
        other => CliError::Run(other),
    })
}

/// Search for a chain, write `chain.json` on success.
pub fn cmd_chain(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let block = cfg.validate_chain()?;
    match search_chain(cfg, block) {
        Ok(chain) => {
            std::fs::create_dir_all(out)?;
            let mut w = create(&out.join("chain.json"))?;
            serde_json::to_writer_pretty(&mut w, &chain).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
            w.flush()?;
            Manifest::new("chain", cfg, out, &["chain.json".into()])?.write(&manifest_path(out, "chain"))?;
            let mut summary = format!(
                "chain found: {} legs, tau = {}, epsilon = {}\n{:>4}  {:>10}  {:>6}  {:>12}\n",
                chain.num_legs(),
                chain.tau,
                chain.epsilon,
                "leg",
                "t",
                "j",
                "gap"
            );
            for (i, ((t, j), g)) in chain.leg_horizons.iter().zip(&chain.gaps).enumerate() {
                let _ = writeln!(summary, "{i:>4}  {t:>10.4}  {j:>6}  {g:>12.4e}");
            }
            Ok(Outcome {
                status: ExitStatus::Pass,
                summary,
            })
        }
        Err(CliError::Run(Error::BudgetExhausted { budget, best_gap })) => Ok(Outcome {
            status: ExitStatus::Fail,
            summary: format!("no chain within {budget} legs; closest approach to y: {best_gap:.6e}\n"),
        }),
        Err(e) => Err(e),
    }
}

/// The full default configuration, including an example `chain` block.
pub fn print_defaults() -> String {
    let cfg = ExperimentConfig {
        chain: Some(ChainBlock::default()),
        ..ExperimentConfig::default()
    };
    cfg.to_toml()
}
