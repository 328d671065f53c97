//! Parameter-sweep engine: grids of (cell x trial x init) runs with derived
//! seeds, canonical record ordering, and CSV/JSON emission.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{run_finite, run_to_convergence, BpOptions, InitMode};
use crate::diagnose::PhaseDiagnosis;
use crate::error::{Error, Result};
use crate::graph::sample_network;
use crate::metrics::{overlap_report, OverlapReport};
use crate::model::SymmetricFamily;
use crate::seed::derive_seed;

/// Which family parameter an axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisParam {
    Epsilon,
    Delta,
    MeanDegree,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::Epsilon => "epsilon",
            AxisParam::Delta => "delta",
            AxisParam::MeanDegree => "c",
        }
    }

    pub fn apply(self, family: &SymmetricFamily, value: f64) -> SymmetricFamily {
        match self {
            AxisParam::Epsilon => family.with_epsilon(value),
            AxisParam::Delta => family.with_delta(value),
            AxisParam::MeanDegree => family.with_c(value),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Axis {
    pub param: AxisParam,
    pub values: Vec<f64>,
}

/// Initial-condition kind; concrete seeds are derived per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitKind {
    Random,
    Prior,
    Planted,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Random => "random",
            InitKind::Prior => "prior",
            InitKind::Planted => "planted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    Converged,
    Finite(usize),
}

impl RunMode {
    pub fn label(self) -> String {
        match self {
            RunMode::Converged => "converged".into(),
            RunMode::Finite(t) => format!("t{t}"),
        }
    }

    fn parse(s: &str) -> Option<RunMode> {
        if s == "converged" {
            Some(RunMode::Converged)
        } else {
            s.strip_prefix('t').and_then(|t| t.parse().ok()).map(RunMode::Finite)
        }
    }
}

/// Grid description for one sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: SymmetricFamily,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub n: usize,
    pub trials: usize,
    pub inits: Vec<InitKind>,
    pub finite_steps: Vec<usize>,
    pub tol: f64,
    pub max_sweeps: usize,
    pub gap_threshold: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axis1.values.is_empty() {
            return Err(Error::invalid("axis1 has no grid points"));
        }
        if let Some(a2) = &self.axis2 {
            if a2.values.is_empty() {
                return Err(Error::invalid("axis2 has no grid points"));
            }
            if a2.param == self.axis1.param {
                return Err(Error::invalid("axis1 and axis2 vary the same parameter"));
            }
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.inits.is_empty() && self.finite_steps.is_empty() {
            return Err(Error::invalid("no init modes and no finite-step runs"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        Ok(())
    }

    /// Linearized grid cells in canonical order (axis2-major).
    pub fn cells(&self) -> Vec<(f64, Option<f64>)> {
        match &self.axis2 {
            None => self.axis1.values.iter().map(|&v| (v, None)).collect(),
            Some(a2) => a2
                .values
                .iter()
                .flat_map(|&v2| self.axis1.values.iter().map(move |&v1| (v1, Some(v2))))
                .collect(),
        }
    }

    pub fn family_for_cell(&self, axis1: f64, axis2: Option<f64>) -> SymmetricFamily {
        let mut fam = self.axis1.param.apply(&self.family, axis1);
        if let (Some(a2), Some(v2)) = (&self.axis2, axis2) {
            fam = a2.param.apply(&fam, v2);
        }
        fam
    }
}

/// One experiment cell result.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub cell: usize,
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub q: usize,
    pub n: usize,
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub trial: usize,
    pub net_seed: u64,
    pub init: InitKind,
    pub mode: RunMode,
    pub ok: bool,
    pub converged: bool,
    pub sweeps: usize,
    pub residual: f64,
    pub log_likelihood: f64,
    pub overlaps: OverlapReport,
    /// Wall-clock time; kept out of the records CSV so replays are
    /// bit-identical.
    #[serde(skip)]
    pub wall_ms: f64,
    pub note: String,
}

fn nan_overlaps() -> OverlapReport {
    OverlapReport {
        q_argmax: f64::NAN,
        q_marginal: f64::NAN,
        q_perm: f64::NAN,
        baseline_q: f64::NAN,
        baseline_qmu: f64::NAN,
    }
}

fn flagged_record(
    spec: &SweepSpec,
    cell: usize,
    axis1: f64,
    axis2: Option<f64>,
    trial: usize,
    init: InitKind,
    mode: RunMode,
    note: String,
) -> RunRecord {
    RunRecord {
        cell,
        axis1,
        axis2,
        q: spec.family.q,
        n: spec.n,
        c: f64::NAN,
        epsilon: f64::NAN,
        delta: f64::NAN,
        trial,
        net_seed: 0,
        init,
        mode,
        ok: false,
        converged: false,
        sweeps: 0,
        residual: f64::NAN,
        log_likelihood: f64::NAN,
        overlaps: nan_overlaps(),
        wall_ms: 0.0,
        note: note.replace(',', ";"),
    }
}

/// Runs one (cell, trial) job: a single sampled network shared across every
/// init mode and finite-step setting requested.
fn run_job(
    spec: &SweepSpec,
    master_seed: u64,
    cell: usize,
    axis1: f64,
    axis2: Option<f64>,
    trial: usize,
) -> Vec<RunRecord> {
    let fam = spec.family_for_cell(axis1, axis2);
    let first_init = *spec.inits.first().unwrap_or(&InitKind::Prior);
    let model_spec = match fam.spec_for(spec.n) {
        Ok(s) => s,
        Err(e) => {
            return vec![flagged_record(
                spec,
                cell,
                axis1,
                axis2,
                trial,
                first_init,
                RunMode::Converged,
                format!("cell parameters invalid: {e}"),
            )]
        }
    };
    let (_, c_eff) = crate::model::degree_profile(&model_spec);
    let eps_eff = fam.effective_epsilon().unwrap_or(f64::NAN);
    let net_seed = derive_seed(master_seed, &[cell as u64, trial as u64, 0]);
    let net = match sample_network(&model_spec, net_seed) {
        Ok(n) => n,
        Err(e) => {
            return vec![flagged_record(
                spec,
                cell,
                axis1,
                axis2,
                trial,
                first_init,
                RunMode::Converged,
                format!("sampling failed: {e}"),
            )]
        }
    };

    let base = RunRecord {
        cell,
        axis1,
        axis2,
        q: fam.q,
        n: spec.n,
        c: c_eff,
        epsilon: eps_eff,
        delta: fam.delta,
        trial,
        net_seed,
        init: first_init,
        mode: RunMode::Converged,
        ok: true,
        converged: false,
        sweeps: 0,
        residual: f64::NAN,
        log_likelihood: f64::NAN,
        overlaps: nan_overlaps(),
        wall_ms: 0.0,
        note: String::new(),
    };

    let init_mode = |kind: InitKind, tag: u64| match kind {
        InitKind::Random => InitMode::Random(derive_seed(
            master_seed,
            &[cell as u64, trial as u64, 1, tag],
        )),
        InitKind::Prior => InitMode::Prior,
        InitKind::Planted => InitMode::Planted,
    };

    let mut out = Vec::new();
    for (k, &kind) in spec.inits.iter().enumerate() {
        let opts = BpOptions {
            tol: spec.tol,
            max_sweeps: spec.max_sweeps,
            order_seed: derive_seed(master_seed, &[cell as u64, trial as u64, 2, k as u64]),
            ..BpOptions::default()
        };
        let start = Instant::now();
        let mut rec = RunRecord {
            init: kind,
            ..base.clone()
        };
        match run_to_convergence(&net, init_mode(kind, k as u64), &opts) {
            Ok((state, report)) => {
                rec.converged = report.converged;
                rec.sweeps = report.sweeps;
                rec.residual = report.residual;
                rec.log_likelihood = report.log_likelihood;
                rec.overlaps = overlap_report(
                    state.marginals(),
                    net.planted(),
                    fam.delta,
                    &model_spec.prior,
                )
                .expect("q within permutation bound");
            }
            Err(e) => {
                rec.ok = false;
                rec.note = format!("run failed: {e}").replace(',', ";");
            }
        }
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        out.push(rec);
    }

    for &t in &spec.finite_steps {
        for (k, &kind) in spec.inits.iter().enumerate() {
            let start = Instant::now();
            let mut rec = RunRecord {
                init: kind,
                mode: RunMode::Finite(t),
                ..base.clone()
            };
            match run_finite(&net, init_mode(kind, 100 + k as u64), t) {
                Ok(state) => {
                    rec.overlaps = overlap_report(
                        state.marginals(),
                        net.planted(),
                        fam.delta,
                        &model_spec.prior,
                    )
                    .expect("q within permutation bound");
                    rec.sweeps = t;
                    rec.converged = false;
                    rec.residual = f64::NAN;
                }
                Err(e) => {
                    rec.ok = false;
                    rec.note = format!("finite run failed: {e}").replace(',', ";");
                }
            }
            rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            out.push(rec);
        }
    }
    out
}

/// Runs the whole grid. Jobs (one per cell x trial) execute in parallel;
/// output order is canonical (cell, trial, mode, init) and independent of
/// scheduling, and every value is a pure function of (spec, master_seed).
pub fn sweep(spec: &SweepSpec, master_seed: u64) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, f64, Option<f64>, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, &(a1, a2))| (0..spec.trials).map(move |t| (ci, a1, a2, t)))
        .collect();
    let mut results: Vec<(usize, usize, Vec<RunRecord>)> = jobs
        .par_iter()
        .map(|&(ci, a1, a2, t)| (ci, t, run_job(spec, master_seed, ci, a1, a2, t)))
        .collect();
    results.sort_by_key(|&(ci, t, _)| (ci, t));
    Ok(results.into_iter().flat_map(|(_, _, r)| r).collect())
}

// ---------------------------------------------------------------------------
// emission
// ---------------------------------------------------------------------------

pub const RECORDS_HEADER: &str = "cell,axis1,axis2,q,n,c,epsilon,delta,trial,net_seed,init,mode,ok,converged,sweeps,residual,log_likelihood,q_argmax,q_marginal,q_perm,baseline_q,baseline_qmu,note";

pub fn write_records<W: Write>(records: &[RunRecord], w: &mut W) -> Result<()> {
    writeln!(w, "{RECORDS_HEADER}")?;
    for r in records {
        let axis2 = r.axis2.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell,
            r.axis1,
            axis2,
            r.q,
            r.n,
            r.c,
            r.epsilon,
            r.delta,
            r.trial,
            r.net_seed,
            r.init.name(),
            r.mode.label(),
            r.ok,
            r.converged,
            r.sweeps,
            r.residual,
            r.log_likelihood,
            r.overlaps.q_argmax,
            r.overlaps.q_marginal,
            r.overlaps.q_perm,
            r.overlaps.baseline_q,
            r.overlaps.baseline_qmu,
            r.note
        )?;
    }
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(r);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let ln = idx + 1;
        let line = line?;
        if idx == 0 {
            if line.trim() != RECORDS_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: "unexpected records header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.splitn(23, ',').collect();
        if f.len() != 23 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected 23 fields, got {}", f.len()),
            });
        }
        let perr = |msg: &str| Error::Parse {
            line: ln,
            msg: msg.into(),
        };
        let parse_f64 = |s: &str| -> f64 { s.parse().unwrap_or(f64::NAN) };
        out.push(RunRecord {
            cell: f[0].parse().map_err(|_| perr("bad cell"))?,
            axis1: f[1].parse().map_err(|_| perr("bad axis1"))?,
            axis2: if f[2].is_empty() {
                None
            } else {
                Some(f[2].parse().map_err(|_| perr("bad axis2"))?)
            },
            q: f[3].parse().map_err(|_| perr("bad q"))?,
            n: f[4].parse().map_err(|_| perr("bad n"))?,
            c: parse_f64(f[5]),
            epsilon: parse_f64(f[6]),
            delta: parse_f64(f[7]),
            trial: f[8].parse().map_err(|_| perr("bad trial"))?,
            net_seed: f[9].parse().map_err(|_| perr("bad seed"))?,
            init: match f[10] {
                "random" => InitKind::Random,
                "prior" => InitKind::Prior,
                "planted" => InitKind::Planted,
                _ => return Err(perr("bad init")),
            },
            mode: RunMode::parse(f[11]).ok_or_else(|| perr("bad mode"))?,
            ok: f[12].parse().map_err(|_| perr("bad ok"))?,
            converged: f[13].parse().map_err(|_| perr("bad converged"))?,
            sweeps: f[14].parse().map_err(|_| perr("bad sweeps"))?,
            residual: parse_f64(f[15]),
            log_likelihood: parse_f64(f[16]),
            overlaps: OverlapReport {
                q_argmax: parse_f64(f[17]),
                q_marginal: parse_f64(f[18]),
                q_perm: parse_f64(f[19]),
                baseline_q: parse_f64(f[20]),
                baseline_qmu: parse_f64(f[21]),
            },
            wall_ms: 0.0,
            note: f[22].to_string(),
        });
    }
    Ok(out)
}

/// Writes `records.csv`, `summary.json` (the diagnosis), and
/// `sweep_spec.json` (the exact resolved spec plus master seed, sufficient
/// for bit-identical replay).
pub fn emit<P: AsRef<Path>>(
    records: &[RunRecord],
    diagnosis: Option<&PhaseDiagnosis>,
    spec: &SweepSpec,
    master_seed: u64,
    out_dir: P,
) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(std::fs::File::create(dir.join("records.csv"))?);
    write_records(records, &mut w)?;
    w.flush()?;

    let total_wall: f64 = records.iter().map(|r| r.wall_ms).sum();
    let replay = serde_json::json!({
        "master_seed": master_seed,
        "spec": spec,
        "total_wall_ms": total_wall,
    });
    std::fs::write(
        dir.join("sweep_spec.json"),
        serde_json::to_string_pretty(&replay).expect("spec serializes"),
    )?;

    if let Some(d) = diagnosis {
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(d).expect("diagnosis serializes"),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SymmetricFamily;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            family: SymmetricFamily {
                q: 2,
                c: 3.0,
                epsilon: 1.0,
                delta: 0.2,
                zeta: None,
                disassortative: false,
            },
            axis1: Axis {
                param: AxisParam::Epsilon,
                values: vec![0.5, 1.5],
            },
            axis2: None,
            n: 200,
            trials: 2,
            inits: vec![InitKind::Random, InitKind::Planted],
            finite_steps: vec![1],
            tol: 1e-6,
            max_sweeps: 100,
            gap_threshold: 0.05,
        }
    }

    #[test]
    fn single_cell_single_trial_yields_one_record_per_init() {
        let mut spec = tiny_spec();
        spec.axis1.values = vec![1.0];
        spec.trials = 1;
        spec.finite_steps = vec![];
        let records = sweep(&spec, 42).unwrap();
        assert_eq!(records.len(), spec.inits.len());
        assert!(records.iter().all(|r| r.ok));
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = tiny_spec();
        let a = sweep(&spec, 7).unwrap();
        let b = sweep(&spec, 7).unwrap();
        let mut wa = Vec::new();
        write_records(&a, &mut wa).unwrap();
        let mut wb = Vec::new();
        write_records(&b, &mut wb).unwrap();
        assert_eq!(wa, wb);
    }

    #[test]
    fn invalid_cells_are_flagged_not_fatal() {
        let mut spec = tiny_spec();
        // epsilon = 12 implies c_out < 0 at c = 3
        spec.axis1.values = vec![1.0, 12.0];
        spec.trials = 1;
        spec.finite_steps = vec![];
        let records = sweep(&spec, 1).unwrap();
        let bad: Vec<_> = records.iter().filter(|r| !r.ok).collect();
        assert!(!bad.is_empty());
        assert!(bad.iter().all(|r| r.note.contains("invalid")));
        assert!(records.iter().any(|r| r.ok));
    }

    #[test]
    fn records_roundtrip_through_csv() {
        let spec = tiny_spec();
        let records = sweep(&spec, 3).unwrap();
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back.len(), records.len());
        let mut buf2 = Vec::new();
        write_records(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
