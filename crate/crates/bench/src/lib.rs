//! Fixtures shared by the criterion benches.

use didea_core::chem::decoys_from_proteins;
use didea_core::spectra::{DEFAULT_BINS, DEFAULT_LAMBDA};
use didea_core::synth::{random_proteome, synthesize_batch, synthesize_spectrum};
use didea_core::{
    DigestRules, Peptide, PeptideDatabase, ProcessedSpectrum, Provenance, ResidueMassTable,
    SynthParams,
};

pub fn peptide(sequence: &str) -> Peptide {
    Peptide::new(sequence, &ResidueMassTable::default()).expect("valid peptide")
}

/// A noisy synthetic spectrum of `peptide`, declared `{+2,+3}` when `ambiguous`.
pub fn spectrum_for(peptide: &Peptide, ambiguous: bool) -> ProcessedSpectrum {
    let params = SynthParams {
        seed: 7,
        signal_peaks_fraction: 0.7,
        noise_peak_count: 50,
        ambiguous_charge: ambiguous,
        ..SynthParams::default()
    };
    let raw = synthesize_spectrum("bench", peptide, &params).expect("synthesizable");
    ProcessedSpectrum::from_raw(&raw, DEFAULT_BINS, DEFAULT_LAMBDA).expect("processable")
}

pub struct SearchFixture {
    pub target: PeptideDatabase,
    pub decoy: PeptideDatabase,
    pub spectra: Vec<ProcessedSpectrum>,
}

/// Random proteome digest plus `count` noisy spectra drawn from it.
pub fn search_fixture(proteins: usize, count: usize) -> SearchFixture {
    let table = ResidueMassTable::default();
    let rules = DigestRules { min_length: 2, ..DigestRules::default() };
    let proteome = random_proteome(3, proteins, 400);
    let target = PeptideDatabase::from_proteins(&proteome, &table, &rules, Provenance::Target)
        .expect("digest");
    let decoy = decoys_from_proteins(&proteome, 1, &table, &rules, &target).expect("decoys");
    let picks: Vec<Peptide> = target
        .peptides()
        .iter()
        .filter(|p| p.len() >= 6)
        .step_by(7)
        .take(count)
        .cloned()
        .collect();
    let params = SynthParams {
        seed: 11,
        signal_peaks_fraction: 0.7,
        noise_peak_count: 50,
        ..SynthParams::default()
    };
    let (raw, _) = synthesize_batch(&picks, &params).expect("synthesizable");
    let spectra = raw
        .iter()
        .map(|r| ProcessedSpectrum::from_raw(r, DEFAULT_BINS, DEFAULT_LAMBDA).expect("processable"))
        .collect();
    SearchFixture { target, decoy, spectra }
}
