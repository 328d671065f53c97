//! Phase diagnosis from sweep records: discontinuity detection,
//! convergence-time peaks, dual-initialization coexistence, and
//! free-energy crossings.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sweep::{InitKind, RunMode, RunRecord};

/// Aggregated statistics of one grid cell for one init mode.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CellStats {
    pub trials: usize,
    pub mean_q: f64,
    pub mean_q_perm: f64,
    pub mean_q_marginal: f64,
    pub sd_q_perm: f64,
    pub mean_sweeps: f64,
    pub mean_log_likelihood: f64,
}

fn aggregate(values: &[&RunRecord]) -> CellStats {
    let n = values.len() as f64;
    let mean = |f: &dyn Fn(&RunRecord) -> f64| values.iter().map(|r| f(r)).sum::<f64>() / n;
    let mean_qp = mean(&|r| r.overlaps.q_perm);
    let var_qp = if values.len() > 1 {
        values
            .iter()
            .map(|r| (r.overlaps.q_perm - mean_qp).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    CellStats {
        trials: values.len(),
        mean_q: mean(&|r| r.overlaps.q_argmax),
        mean_q_perm: mean_qp,
        mean_q_marginal: mean(&|r| r.overlaps.q_marginal),
        sd_q_perm: var_qp.sqrt(),
        mean_sweeps: mean(&|r| r.sweeps as f64),
        mean_log_likelihood: mean(&|r| r.log_likelihood),
    }
}

/// One axis1 grid cell with per-init aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub axis1: f64,
    pub random: Option<CellStats>,
    pub prior: Option<CellStats>,
    pub planted: Option<CellStats>,
}

impl CellSummary {
    pub fn by_init(&self, init: InitKind) -> Option<&CellStats> {
        match init {
            InitKind::Random => self.random.as_ref(),
            InitKind::Prior => self.prior.as_ref(),
            InitKind::Planted => self.planted.as_ref(),
        }
    }

    /// Stats used for jump/time scans: random init if present, else prior,
    /// else planted.
    fn scan_stats(&self) -> Option<&CellStats> {
        self.random
            .as_ref()
            .or(self.prior.as_ref())
            .or(self.planted.as_ref())
    }
}

/// Groups converged, unflagged records into rows (one per axis2 value) of
/// cells sorted by axis1.
pub fn summarize(records: &[RunRecord]) -> Vec<(Option<f64>, Vec<CellSummary>)> {
    let mut rows: Vec<(Option<u64>, Vec<(u64, Vec<&RunRecord>)>)> = Vec::new();
    for r in records {
        if !r.ok || r.mode != RunMode::Converged {
            continue;
        }
        let row_key = r.axis2.map(|v| v.to_bits());
        let cell_key = r.axis1.to_bits();
        let row = match rows.iter_mut().find(|(k, _)| *k == row_key) {
            Some(row) => &mut row.1,
            None => {
                rows.push((row_key, Vec::new()));
                &mut rows.last_mut().unwrap().1
            }
        };
        match row.iter_mut().find(|(k, _)| *k == cell_key) {
            Some(cell) => cell.1.push(r),
            None => row.push((cell_key, vec![r])),
        }
    }

    let mut out = Vec::new();
    for (row_key, mut cells) in rows {
        cells.sort_by(|a, b| {
            f64::from_bits(a.0)
                .partial_cmp(&f64::from_bits(b.0))
                .unwrap()
        });
        let summaries = cells
            .into_iter()
            .map(|(bits, recs)| {
                let per_init = |k: InitKind| {
                    let sel: Vec<&RunRecord> = recs.iter().cloned().filter(|r| r.init == k).collect();
                    if sel.is_empty() {
                        None
                    } else {
                        Some(aggregate(&sel))
                    }
                };
                CellSummary {
                    axis1: f64::from_bits(bits),
                    random: per_init(InitKind::Random),
                    prior: per_init(InitKind::Prior),
                    planted: per_init(InitKind::Planted),
                }
            })
            .collect();
        out.push((row_key.map(f64::from_bits), summaries));
    }
    out.sort_by(|a, b| match (a.0, b.0) {
        (None, None) => std::cmp::Ordering::Equal,
        (None, _) => std::cmp::Ordering::Less,
        (_, None) => std::cmp::Ordering::Greater,
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
    });
    out
}

/// Coexistence evidence at one cell.
#[derive(Debug, Clone, Serialize)]
pub struct GapCell {
    pub axis1: f64,
    /// Planted-init minus random-init overlap, permutation-corrected.
    /// Relabeled images of the same fixed point are the same phase, so the
    /// gap is measured on `q_perm`.
    pub gap: f64,
    /// The raw-overlap gap, for figure parity.
    pub gap_raw: f64,
    pub flagged: bool,
}

/// Per-row diagnosis.
#[derive(Debug, Clone, Serialize)]
pub struct RowDiagnosis {
    pub axis2: Option<f64>,
    /// Discontinuity height: the largest adjacent-cell change in mean
    /// overlap in excess of the neighboring changes. A smooth trend has
    /// near-zero excess; a first-order jump retains its full height.
    pub jump_height: f64,
    /// Midpoint of the adjacent pair realizing the jump.
    pub jump_location: Option<f64>,
    pub jump_significant: bool,
    /// Pooled inter-seed standard deviation of the overlap away from the
    /// jump pair; the significance threshold is 3x this value.
    pub noise: f64,
    /// Grid value with the largest mean convergence time.
    pub time_peak_location: Option<f64>,
    pub time_peak_sweeps: f64,
    pub gaps: Vec<GapCell>,
    pub coexistence: bool,
    /// Crossing of the planted-minus-random log-likelihood difference along
    /// axis1, interpolated; only sought inside flagged coexistence spans.
    pub condensation_crossing: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseDiagnosis {
    pub gap_threshold: f64,
    pub rows: Vec<RowDiagnosis>,
}

/// Excess-jump statistic over a sequence of cell means: for each adjacent
/// difference, how much it exceeds the larger of its neighboring
/// differences. Returns (height, index of the left cell of the pair).
fn excess_jump(means: &[f64]) -> (f64, Option<usize>) {
    if means.len() < 2 {
        return (0.0, None);
    }
    let diffs: Vec<f64> = means.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut best = (0.0, None);
    for i in 0..diffs.len() {
        let left = if i > 0 { diffs[i - 1] } else { f64::NAN };
        let right = if i + 1 < diffs.len() {
            diffs[i + 1]
        } else {
            f64::NAN
        };
        let reference = match (left.is_nan(), right.is_nan()) {
            (true, true) => 0.0,
            (true, false) => right,
            (false, true) => left,
            (false, false) => left.max(right),
        };
        let excess = (diffs[i] - reference).max(0.0);
        if excess > best.0 {
            best = (excess, Some(i));
        }
    }
    best
}

fn scan_row(cells: &[CellSummary]) -> (f64, Option<f64>, bool, f64, Option<f64>, f64) {
    let means: Vec<f64> = cells
        .iter()
        .map(|c| c.scan_stats().map(|s| s.mean_q_perm).unwrap_or(f64::NAN))
        .collect();
    let (height, idx) = excess_jump(&means);
    let location = idx.map(|i| 0.5 * (cells[i].axis1 + cells[i + 1].axis1));

    // pooled seed noise away from the jump pair
    let mut vars = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        if let Some(j) = idx {
            if i == j || i == j + 1 {
                continue;
            }
        }
        if let Some(s) = c.scan_stats() {
            vars.push(s.sd_q_perm * s.sd_q_perm);
        }
    }
    let noise = if vars.is_empty() {
        0.0
    } else {
        (vars.iter().sum::<f64>() / vars.len() as f64).sqrt()
    };
    let significant = height > 3.0 * noise && noise > 0.0;

    let mut peak: (Option<f64>, f64) = (None, f64::NEG_INFINITY);
    for c in cells {
        if let Some(s) = c.scan_stats() {
            if s.mean_sweeps > peak.1 {
                peak = (Some(c.axis1), s.mean_sweeps);
            }
        }
    }
    (height, location, significant, noise, peak.0, peak.1)
}

/// Largest adjacent-cell overlap discontinuity and convergence-time peak per
/// row. Requires at least 10 cells per row.
pub fn transition_scan(records: &[RunRecord]) -> Result<PhaseDiagnosis> {
    let rows = summarize(records);
    if rows.iter().any(|(_, cells)| cells.len() < 10) {
        return Err(Error::InsufficientGrid(
            "transition scan needs >= 10 cells per row".into(),
        ));
    }
    Ok(diagnose(records, 0.05))
}

/// Per-cell overlap gap between planted- and random-initialized runs on the
/// shared networks. Errors if either init mode is absent.
pub fn dual_init_gap(records: &[RunRecord], gap_threshold: f64) -> Result<PhaseDiagnosis> {
    let rows = summarize(records);
    for (_, cells) in &rows {
        for c in cells {
            if c.planted.is_none() {
                return Err(Error::MissingInit("planted"));
            }
            if c.random.is_none() {
                return Err(Error::MissingInit("random"));
            }
        }
    }
    Ok(diagnose(records, gap_threshold))
}

/// Locates the condensation crossing: the sign change of
/// `L(planted) - L(random)` along axis1, sought only inside coexistence
/// spans. Returns one location per row, when present.
pub fn condensation_scan(records: &[RunRecord], gap_threshold: f64) -> Result<Vec<Option<f64>>> {
    let d = dual_init_gap(records, gap_threshold)?;
    Ok(d.rows.iter().map(|r| r.condensation_crossing).collect())
}

/// Full diagnosis: jump scan, time peak, coexistence gaps, and condensation
/// crossing for every row. Missing init modes simply leave the
/// corresponding parts empty.
pub fn diagnose(records: &[RunRecord], gap_threshold: f64) -> PhaseDiagnosis {
    let rows = summarize(records);
    let mut out = Vec::new();
    for (axis2, cells) in rows {
        let (jump_height, jump_location, jump_significant, noise, time_loc, time_sweeps) =
            scan_row(&cells);

        let mut gaps = Vec::new();
        for c in &cells {
            if let (Some(p), Some(r)) = (&c.planted, &c.random) {
                let gap = p.mean_q_perm - r.mean_q_perm;
                gaps.push(GapCell {
                    axis1: c.axis1,
                    gap,
                    gap_raw: p.mean_q - r.mean_q,
                    flagged: gap > gap_threshold,
                });
            }
        }
        let coexistence = gaps.iter().any(|g| g.flagged);

        // condensation: interpolated zero of dL inside flagged spans
        let mut crossing = None;
        if coexistence {
            let dl: Vec<(f64, f64, bool)> = cells
                .iter()
                .filter_map(|c| {
                    let (p, r) = (c.planted.as_ref()?, c.random.as_ref()?);
                    let flagged = gaps
                        .iter()
                        .find(|g| g.axis1 == c.axis1)
                        .map(|g| g.flagged)
                        .unwrap_or(false);
                    Some((
                        c.axis1,
                        p.mean_log_likelihood - r.mean_log_likelihood,
                        flagged,
                    ))
                })
                .collect();
            for w in dl.windows(2) {
                let (x0, y0, f0) = w[0];
                let (x1, y1, f1) = w[1];
                if (f0 || f1) && y0 * y1 < 0.0 {
                    crossing = Some(x0 + (x1 - x0) * (0.0 - y0) / (y1 - y0));
                    break;
                }
            }
        }

        out.push(RowDiagnosis {
            axis2,
            jump_height,
            jump_location,
            jump_significant,
            noise,
            time_peak_location: time_loc,
            time_peak_sweeps: time_sweeps,
            gaps,
            coexistence,
            condensation_crossing: crossing,
        });
    }
    PhaseDiagnosis {
        gap_threshold,
        rows: out,
    }
}
