//! Seeded synthetic spectra generated from known peptides.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::chem::{Peptide, Protein, WATER_MASS, STANDARD_AMINO_ACIDS};
use crate::error::{Error, Result};
use crate::spectra::{Peak, Precursor, RawSpectrum, DEFAULT_BINS, PROTON_MASS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IntensityModel {
    /// Signal and noise intensities both uniform on (0, 1].
    Uniform,
    /// Signal uniform on (0.5, 1], noise uniform on (0, 0.5].
    #[default]
    RankBiased,
}

impl FromStr for IntensityModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(IntensityModel::Uniform),
            "rank-biased" | "rank_biased" => Ok(IntensityModel::RankBiased),
            _ => Err(Error::config(format!("unknown intensity model '{s}'"))),
        }
    }
}

impl fmt::Display for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntensityModel::Uniform => "uniform",
            IntensityModel::RankBiased => "rank-biased",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    /// Fraction of the b/y ions emitted.
    pub signal_peaks_fraction: f64,
    pub noise_peak_count: usize,
    /// Standard deviation of Gaussian m/z jitter on signal peaks.
    pub mz_jitter_sd: f64,
    pub intensity_model: IntensityModel,
    /// True precursor charge.
    pub charge: u8,
    /// Declare `{+2, +3}` instead of the true charge (only for charge 2 or 3).
    pub ambiguous_charge: bool,
    /// Precursor tolerance the spectra are meant for; mass noise stays inside `±delta/2`.
    pub delta: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 1,
            signal_peaks_fraction: 1.0,
            noise_peak_count: 0,
            mz_jitter_sd: 0.0,
            intensity_model: IntensityModel::RankBiased,
            charge: 2,
            ambiguous_charge: false,
            delta: 3.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.signal_peaks_fraction) {
            return Err(Error::config("signal fraction must lie in [0, 1]"));
        }
        if !(self.mz_jitter_sd >= 0.0 && self.mz_jitter_sd.is_finite()) {
            return Err(Error::config("m/z jitter must be a finite non-negative number"));
        }
        if !(1..=3).contains(&self.charge) {
            return Err(Error::config(format!("unsupported charge {}", self.charge)));
        }
        if self.ambiguous_charge && self.charge == 1 {
            return Err(Error::config("a +1 precursor cannot be declared ambiguous"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::config("delta must be positive"));
        }
        Ok(())
    }
}

/// m/z of every b/y ion for precursor charge `z`, using the conserve rule for +3.
fn ion_mzs(peptide: &Peptide, z: u8) -> Vec<f64> {
    let mut out = Vec::new();
    let max_fragment = if z == 3 { 2 } else { 1 };
    for t in 1..peptide.len() {
        let b = peptide.prefix_masses()[t] as f64;
        let y = (peptide.suffix_masses()[t] + WATER_MASS) as f64;
        for c in 1..=max_fragment {
            let c = c as f64;
            out.push((b + c) / c);
            out.push((y + c) / c);
        }
    }
    out
}

/// One synthetic spectrum of `peptide`.
pub fn synthesize_spectrum(
    id: impl Into<String>,
    peptide: &Peptide,
    params: &SynthParams,
) -> Result<RawSpectrum> {
    params.validate()?;
    if peptide.len() < 2 {
        return Err(Error::invalid(format!(
            "cannot fragment single-residue peptide {peptide}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut ions = ion_mzs(peptide, params.charge);
    ions.shuffle(&mut rng);
    let keep = (params.signal_peaks_fraction * ions.len() as f64).round() as usize;
    ions.truncate(keep);

    let jitter = Normal::new(0.0, params.mz_jitter_sd).expect("validated sd");
    let mut peaks = Vec::with_capacity(ions.len() + params.noise_peak_count);
    for mz in ions {
        let mz = if params.mz_jitter_sd > 0.0 {
            (mz + jitter.sample(&mut rng)).max(f64::MIN_POSITIVE)
        } else {
            mz
        };
        let intensity = match params.intensity_model {
            IntensityModel::Uniform => 1.0 - rng.random::<f64>(),
            IntensityModel::RankBiased => 1.0 - 0.5 * rng.random::<f64>(),
        };
        peaks.push(Peak::new(mz, intensity));
    }
    for _ in 0..params.noise_peak_count {
        let mz = rng.random_range(1.0..=DEFAULT_BINS as f64);
        let intensity = match params.intensity_model {
            IntensityModel::Uniform => 1.0 - rng.random::<f64>(),
            IntensityModel::RankBiased => 0.5 * (1.0 - rng.random::<f64>()),
        };
        peaks.push(Peak::new(mz, intensity));
    }
    peaks.sort_by(|a, b| a.mz.total_cmp(&b.mz));

    let half = params.delta / 2.0;
    let observed = peptide.neutral_mass() as f64 + rng.random_range(-half..half);
    let z = params.charge as f64;
    let precursor_mz = (observed + z * PROTON_MASS) / z;
    let declared: Vec<u8> = if params.ambiguous_charge { vec![2, 3] } else { vec![params.charge] };
    let precursors = declared
        .into_iter()
        .map(|c| Precursor {
            charge: c,
            neutral_mass: c as f64 * precursor_mz - c as f64 * PROTON_MASS,
        })
        .collect();
    RawSpectrum::new(id, peaks, precursors)
}

/// Ground truth for a synthesized spectrum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyEntry {
    pub spectrum_id: String,
    pub true_peptide: String,
}

/// One spectrum per peptide; spectrum `i` uses seed `params.seed ^ i`.
pub fn synthesize_batch(
    peptides: &[Peptide],
    params: &SynthParams,
) -> Result<(Vec<RawSpectrum>, Vec<KeyEntry>)> {
    let mut spectra = Vec::with_capacity(peptides.len());
    let mut key = Vec::with_capacity(peptides.len());
    for (i, p) in peptides.iter().enumerate() {
        let id = format!("synth_{i}");
        let local = SynthParams {
            seed: params.seed ^ i as u64,
            ..params.clone()
        };
        spectra.push(synthesize_spectrum(id.clone(), p, &local)?);
        key.push(KeyEntry {
            spectrum_id: id,
            true_peptide: p.sequence().to_string(),
        });
    }
    Ok((spectra, key))
}

pub fn write_key<W: Write>(mut w: W, key: &[KeyEntry]) -> std::io::Result<()> {
    writeln!(w, "spectrum_id\ttrue_peptide")?;
    for k in key {
        writeln!(w, "{}\t{}", k.spectrum_id, k.true_peptide)?;
    }
    Ok(())
}

/// Random proteins with uniformly drawn residues, for benchmarks without a real proteome.
pub fn random_proteome(seed: u64, count: usize, length: usize) -> Vec<Protein> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| Protein {
            header: format!("synthetic_protein_{i}"),
            sequence: (0..length)
                .map(|_| STANDARD_AMINO_ACIDS[rng.random_range(0..20)] as char)
                .collect(),
        })
        .collect()
}
