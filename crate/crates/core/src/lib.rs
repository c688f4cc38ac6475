//! Peptide-spectrum match identification.
//!
//! The crate is organised bottom-up:
//!
//! * [`chem`] residue masses, ion ladders, tryptic digestion and target/decoy databases
//! * [`spectra`] MGF/MS2 parsing and the binned, rank-normalized, weighted spectrum
//! * [`scoring`] the shift-marginalizing DBN score, the XCorr baseline and a brute-force oracle
//! * [`search`] candidate selection and best-match extraction
//! * [`evaluate`] empirical p-values, q-values and absolute ranking curves
//! * [`synth`] seeded synthetic spectra with a ground-truth key
//!
//! Commonly used types are re-exported at the crate root.

pub mod chem;
pub mod error;
pub mod evaluate;
pub mod math;
pub mod scoring;
pub mod search;
pub mod spectra;
pub mod synth;

pub use chem::{DigestRules, Peptide, PeptideDatabase, Protein, Provenance, ResidueMassTable};
pub use error::{Error, Result};
pub use evaluate::{EvalRow, EvalTable, PValueMode};
pub use scoring::oracle::{brute_force_posterior, OracleModel, OracleResult};
pub use scoring::{
    ChargeMode, ChargeModel, IonType, ScoringConfig, ShiftProfile, TheoreticalSpectrum,
    YChargeRule,
};
pub use search::{Psm, Scorer, SearchConfig, SearchOutput};
pub use spectra::{ChargeSet, Peak, Precursor, ProcessedSpectrum, RawSpectrum, SpectrumFormat};
pub use synth::{IntensityModel, SynthParams};
