//! Target-decoy statistics: empirical p-values, q-values and absolute ranking curves.
//!
//! Decoy best-scores (one per spectrum) are pooled into a single null sample.

use std::io::Write;

use crate::error::{Error, Result};
use crate::search::Psm;

/// How exceedance counts become p-values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PValueMode {
    /// `#{decoy > v} / n`.
    #[default]
    Strict,
    /// `(1 + #{decoy > v}) / (1 + n)`, never zero.
    Smoothed,
}

/// Fraction of decoy scores strictly exceeding each target score.
pub fn empirical_pvalues(targets: &[f64], decoys: &[f64], mode: PValueMode) -> Result<Vec<f64>> {
    if decoys.is_empty() {
        return Err(Error::invalid("empirical p-values need at least one decoy score"));
    }
    let mut sorted = decoys.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(targets
        .iter()
        .map(|&v| {
            let exceed = n - sorted.partition_point(|&d| d <= v);
            match mode {
                PValueMode::Strict => exceed as f64 / n as f64,
                PValueMode::Smoothed => (exceed + 1) as f64 / (n + 1) as f64,
            }
        })
        .collect())
}

/// q-values from decoy/target counts above each target threshold.
///
/// `FDR(c) = #{decoy ≥ c} / #{target ≥ c}` capped at 1, and each target's
/// q-value is the minimum FDR over thresholds at or below its score.
pub fn qvalues(targets: &[f64], decoys: &[f64]) -> Result<Vec<f64>> {
    qvalues_with_pi0(targets, decoys, 1.0)
}

/// [`qvalues`] with the FDR scaled by an estimated null fraction `pi0 ∈ (0, 1]`.
pub fn qvalues_with_pi0(targets: &[f64], decoys: &[f64], pi0: f64) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::invalid("q-values need at least one target score"));
    }
    if decoys.is_empty() {
        return Err(Error::invalid("q-values need at least one decoy score"));
    }
    if !(pi0 > 0.0 && pi0 <= 1.0) {
        return Err(Error::config(format!("pi0 must lie in (0, 1], got {pi0}")));
    }
    let mut sorted_targets = targets.to_vec();
    sorted_targets.sort_by(f64::total_cmp);
    let mut sorted_decoys = decoys.to_vec();
    sorted_decoys.sort_by(f64::total_cmp);
    let at_or_above = |sorted: &[f64], c: f64| sorted.len() - sorted.partition_point(|&x| x < c);
    let fdr = |c: f64| {
        let d = at_or_above(&sorted_decoys, c) as f64;
        let t = at_or_above(&sorted_targets, c) as f64;
        (pi0 * d / t).min(1.0)
    };

    // Ascending thresholds: the running minimum from the bottom up is the q-value.
    let mut q_sorted = vec![0.0; sorted_targets.len()];
    let mut running = f64::INFINITY;
    for (i, &c) in sorted_targets.iter().enumerate() {
        running = running.min(fdr(c));
        q_sorted[i] = running;
    }
    Ok(targets
        .iter()
        .map(|&v| {
            // Last index whose score is ≤ v: all thresholds c ≤ v are covered.
            let idx = sorted_targets.partition_point(|&x| x <= v) - 1;
            q_sorted[idx]
        })
        .collect())
}

/// Evenly spaced thresholds on `[0, 0.1]`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 * 0.001).collect()
}

/// Number of targets accepted at each q threshold.
pub fn ranking_curve(q_values: &[f64], grid: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted = q_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&threshold| (threshold, sorted.partition_point(|&q| q <= threshold)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub spectrum_id: String,
    pub score: f64,
    pub p_value: f64,
    pub q_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub curve: Vec<(f64, usize)>,
}

pub fn evaluate(
    targets: &[Psm],
    decoys: &[Psm],
    grid: &[f64],
    mode: PValueMode,
) -> Result<EvalTable> {
    let t: Vec<f64> = targets.iter().map(|p| p.score).collect();
    let d: Vec<f64> = decoys.iter().map(|p| p.score).collect();
    let p = empirical_pvalues(&t, &d, mode)?;
    let q = qvalues(&t, &d)?;
    let rows = targets
        .iter()
        .zip(p.iter().zip(&q))
        .map(|(psm, (&p_value, &q_value))| EvalRow {
            spectrum_id: psm.spectrum_id.clone(),
            score: psm.score,
            p_value,
            q_value,
        })
        .collect();
    Ok(EvalTable {
        rows,
        curve: ranking_curve(&q, grid),
    })
}

impl EvalTable {
    pub fn write_rows_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "spectrum_id\tscore\tp_value\tq_value")?;
        for r in &self.rows {
            writeln!(
                w,
                "{}\t{:.6}\t{:.6}\t{:.6}",
                r.spectrum_id, r.score, r.p_value, r.q_value
            )?;
        }
        Ok(())
    }

    pub fn write_curve_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "q_threshold,accepted_count")?;
        for (q, n) in &self.curve {
            writeln!(w, "{q:.6},{n}")?;
        }
        Ok(())
    }
}
