//! Database search: candidate selection by precursor mass and best-match extraction.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::chem::{Peptide, PeptideDatabase, Provenance};
use crate::error::{Error, Result};
use crate::scoring::{didea_score_detail, xcorr_score_detail, ScoredModel, ScoringConfig};
use crate::spectra::ProcessedSpectrum;

pub const DEFAULT_DELTA: f64 = 3.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Scorer {
    #[default]
    Didea,
    Xcorr,
}

impl FromStr for Scorer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "didea" => Ok(Scorer::Didea),
            "xcorr" => Ok(Scorer::Xcorr),
            _ => Err(Error::config(format!("unknown scorer '{s}'"))),
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scorer::Didea => "didea",
            Scorer::Xcorr => "xcorr",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub scoring: ScoringConfig,
    pub scorer: Scorer,
    /// Precursor tolerance in Da; candidates satisfy `|m(p) - m(s)| < delta`.
    pub delta: f64,
    /// Matches reported per spectrum.
    pub top_k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            scoring: ScoringConfig::default(),
            scorer: Scorer::Didea,
            delta: DEFAULT_DELTA,
            top_k: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.scoring.validate()?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::config(format!("delta must be positive, got {}", self.delta)));
        }
        if self.top_k == 0 {
            return Err(Error::config("top-k must be at least 1"));
        }
        Ok(())
    }
}

/// A scored peptide-spectrum match.
#[derive(Clone, Debug, PartialEq)]
pub struct Psm {
    pub spectrum_id: String,
    pub peptide: String,
    pub score: f64,
    pub scorer: Scorer,
    pub charge_model: ScoredModel,
    pub is_decoy: bool,
    /// Number of candidates scored for this spectrum.
    pub candidate_count: usize,
}

/// Peptides with `|m(p) - mass| < delta`, excluding single residues.
pub fn select_candidates(db: &PeptideDatabase, mass: f64, delta: f64) -> Vec<&Peptide> {
    db.mass_range_open(mass - delta, mass + delta)
        .iter()
        .filter(|p| p.len() >= 2)
        .collect()
}

/// Union of the candidate windows of every declared precursor charge, in database order.
pub fn spectrum_candidates<'a>(
    db: &'a PeptideDatabase,
    spectrum: &ProcessedSpectrum,
    delta: f64,
) -> Vec<&'a Peptide> {
    if let [only] = spectrum.precursors.as_slice() {
        return select_candidates(db, only.neutral_mass, delta);
    }
    let mut seen = HashSet::new();
    let mut out: Vec<&Peptide> = spectrum
        .precursors
        .iter()
        .flat_map(|p| select_candidates(db, p.neutral_mass, delta))
        .filter(|p| seen.insert(p.sequence()))
        .collect();
    out.sort_by(|a, b| {
        a.neutral_mass()
            .cmp(&b.neutral_mass())
            .then_with(|| a.sequence().cmp(b.sequence()))
    });
    out
}

fn score_one(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    cfg: &SearchConfig,
) -> Result<(f64, ScoredModel)> {
    match cfg.scorer {
        Scorer::Didea => {
            didea_score_detail(peptide, spectrum, &cfg.scoring).map(|s| (s.theta, s.model))
        }
        Scorer::Xcorr => {
            xcorr_score_detail(peptide, spectrum, &cfg.scoring).map(|s| (s.score, s.model))
        }
    }
}

/// The `top_k` best matches, best first. Equal scores are ordered by sequence.
pub fn search_spectrum_top_k(
    spectrum: &ProcessedSpectrum,
    db: &PeptideDatabase,
    cfg: &SearchConfig,
) -> Result<Vec<Psm>> {
    let candidates = spectrum_candidates(db, spectrum, cfg.delta);
    let count = candidates.len();
    let mut scored = candidates
        .into_iter()
        .map(|p| score_one(p, spectrum, cfg).map(|(score, model)| (p, score, model)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.sequence().cmp(b.0.sequence()))
    });
    let is_decoy = matches!(db.provenance(), Provenance::Decoy { .. });
    Ok(scored
        .into_iter()
        .take(cfg.top_k)
        .map(|(p, score, model)| Psm {
            spectrum_id: spectrum.id.clone(),
            peptide: p.sequence().to_string(),
            score,
            scorer: cfg.scorer,
            charge_model: model,
            is_decoy,
            candidate_count: count,
        })
        .collect())
}

/// Highest-scoring candidate, or `None` when no peptide falls in the precursor window.
pub fn search_spectrum(
    spectrum: &ProcessedSpectrum,
    db: &PeptideDatabase,
    cfg: &SearchConfig,
) -> Result<Option<Psm>> {
    let top1 = SearchConfig { top_k: 1, ..cfg.clone() };
    Ok(search_spectrum_top_k(spectrum, db, &top1)?.into_iter().next())
}

/// Per-spectrum results against the target and decoy databases, in input order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchOutput {
    pub target: Vec<Vec<Psm>>,
    pub decoy: Vec<Vec<Psm>>,
}

impl SearchOutput {
    /// Best target match per matched spectrum.
    pub fn target_best(&self) -> Vec<&Psm> {
        self.target.iter().filter_map(|v| v.first()).collect()
    }

    pub fn decoy_best(&self) -> Vec<&Psm> {
        self.decoy.iter().filter_map(|v| v.first()).collect()
    }

    pub fn unmatched_target(&self) -> usize {
        self.target.iter().filter(|v| v.is_empty()).count()
    }

    pub fn unmatched_decoy(&self) -> usize {
        self.decoy.iter().filter(|v| v.is_empty()).count()
    }
}

/// Search every spectrum against both databases. Runs on the current rayon pool;
/// output order follows `spectra` regardless of scheduling.
pub fn run_search(
    spectra: &[ProcessedSpectrum],
    target: &PeptideDatabase,
    decoy: &PeptideDatabase,
    cfg: &SearchConfig,
) -> Result<SearchOutput> {
    cfg.validate()?;
    if let Some(s) = spectra.iter().find(|s| s.lambda != cfg.scoring.lambda) {
        return Err(Error::config(format!(
            "spectrum {} was preprocessed with lambda {}, search uses {}",
            s.id, s.lambda, cfg.scoring.lambda
        )));
    }
    if target.provenance() != Provenance::Target
        || !matches!(decoy.provenance(), Provenance::Decoy { .. })
    {
        return Err(Error::invalid("run_search expects a target and a decoy database"));
    }
    let target_seqs: HashSet<&str> = target.peptides().iter().map(|p| p.sequence()).collect();
    if let Some(p) = decoy.peptides().iter().find(|p| target_seqs.contains(p.sequence())) {
        return Err(Error::invalid(format!(
            "decoy database shares peptide {p} with the target database"
        )));
    }

    let results = spectra
        .par_iter()
        .map(|s| {
            Ok((
                search_spectrum_top_k(s, target, cfg)?,
                search_spectrum_top_k(s, decoy, cfg)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (target, decoy) = results.into_iter().unzip();
    Ok(SearchOutput { target, decoy })
}

pub const PSM_HEADER: &str =
    "spectrum_id\tpeptide\tscore\tscorer\tcharge_model\tis_decoy\tcandidate_count";

/// Tab-separated PSMs with a header row; scores carry 6 decimals.
pub fn write_psms<'a, W, I>(mut w: W, psms: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Psm>,
{
    writeln!(w, "{PSM_HEADER}")?;
    for p in psms {
        writeln!(
            w,
            "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}",
            p.spectrum_id,
            p.peptide,
            p.score,
            p.scorer,
            p.charge_model,
            p.is_decoy,
            p.candidate_count
        )?;
    }
    Ok(())
}

/// Read PSMs written by [`write_psms`]. Lines starting with `#` are comments.
pub fn read_psms<R: BufRead>(reader: R, source: &str) -> Result<Vec<Psm>> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let location = || format!("{source}:{}", idx + 1);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line.trim_end() != PSM_HEADER {
                return Err(Error::parse(location(), "missing PSM header row"));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                location(),
                format!("expected 7 columns, found {}", fields.len()),
            ));
        }
        let bad = |what: &str| Error::parse(location(), format!("bad {what} '{line}'"));
        let score: f64 = fields[2].parse().map_err(|_| bad("score"))?;
        if !score.is_finite() {
            return Err(bad("score"));
        }
        out.push(Psm {
            spectrum_id: fields[0].to_string(),
            peptide: fields[1].to_string(),
            score,
            scorer: fields[3].parse().map_err(|_| bad("scorer"))?,
            charge_model: fields[4].parse().map_err(|_| bad("charge model"))?,
            is_decoy: fields[5].parse().map_err(|_| bad("is_decoy"))?,
            candidate_count: fields[6].parse().map_err(|_| bad("candidate count"))?,
        });
    }
    Ok(out)
}
