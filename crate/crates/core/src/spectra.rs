//! Fragmentation spectra: MGF/MS2 parsing and preprocessing into binned,
//! rank-normalized, weighted vectors.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Proton mass used to recover neutral precursor masses.
pub const PROTON_MASS: f64 = 1.00728;

/// Number of 1 Da m/z bins.
pub const DEFAULT_BINS: usize = 2000;

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub mz: f64,
    pub intensity: f64,
}

impl Peak {
    pub fn new(mz: f64, intensity: f64) -> Self {
        Peak { mz, intensity }
    }
}

/// The declared precursor charge states of a spectrum.
///
/// Only `{+1}`, `{+2}`, `{+3}` and the ambiguous `{+2, +3}` are representable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChargeSet(u8);

impl ChargeSet {
    pub const SINGLE_1: ChargeSet = ChargeSet(0b0010);
    pub const SINGLE_2: ChargeSet = ChargeSet(0b0100);
    pub const SINGLE_3: ChargeSet = ChargeSet(0b1000);
    pub const TWO_OR_THREE: ChargeSet = ChargeSet(0b1100);

    pub fn from_charges(charges: &[u8]) -> Result<Self> {
        let mut bits = 0u8;
        for &z in charges {
            if !(1..=3).contains(&z) {
                return Err(Error::invalid(format!("unsupported precursor charge {z}")));
            }
            bits |= 1 << z;
        }
        let set = ChargeSet(bits);
        match set {
            Self::SINGLE_1 | Self::SINGLE_2 | Self::SINGLE_3 | Self::TWO_OR_THREE => Ok(set),
            _ => Err(Error::invalid(format!(
                "unsupported charge set {charges:?}"
            ))),
        }
    }

    pub fn contains(&self, z: u8) -> bool {
        z < 8 && self.0 & (1 << z) != 0
    }

    /// Charges in increasing order.
    pub fn charges(&self) -> impl Iterator<Item = u8> + '_ {
        (1..=3u8).filter(move |&z| self.contains(z))
    }

    pub fn single(&self) -> Option<u8> {
        (self.0.count_ones() == 1).then(|| self.0.trailing_zeros() as u8)
    }

    pub fn is_ambiguous(&self) -> bool {
        *self == Self::TWO_OR_THREE
    }
}

impl fmt::Display for ChargeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.charges().map(|z| format!("+{z}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A precursor hypothesis: charge and the neutral mass it implies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Precursor {
    pub charge: u8,
    pub neutral_mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawSpectrum {
    pub id: String,
    pub peaks: Vec<Peak>,
    /// One entry per declared charge, sorted by charge.
    precursors: Vec<Precursor>,
    charge_set: ChargeSet,
}

impl RawSpectrum {
    pub fn new(id: impl Into<String>, peaks: Vec<Peak>, mut precursors: Vec<Precursor>) -> Result<Self> {
        let id = id.into();
        if let Some(p) = peaks
            .iter()
            .find(|p| !(p.mz > 0.0 && p.mz.is_finite() && p.intensity >= 0.0 && p.intensity.is_finite()))
        {
            return Err(Error::invalid(format!(
                "spectrum {id}: invalid peak ({}, {})",
                p.mz, p.intensity
            )));
        }
        precursors.sort_by_key(|p| p.charge);
        precursors.dedup_by_key(|p| p.charge);
        let charges: Vec<u8> = precursors.iter().map(|p| p.charge).collect();
        let charge_set = ChargeSet::from_charges(&charges)
            .map_err(|e| Error::invalid(format!("spectrum {id}: {e}")))?;
        Ok(RawSpectrum {
            id,
            peaks,
            precursors,
            charge_set,
        })
    }

    pub fn precursors(&self) -> &[Precursor] {
        &self.precursors
    }

    pub fn charge_set(&self) -> ChargeSet {
        self.charge_set
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumFormat {
    Mgf,
    Ms2,
}

impl SpectrumFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("mgf") => Ok(SpectrumFormat::Mgf),
            Some("ms2") => Ok(SpectrumFormat::Ms2),
            _ => Err(Error::invalid(format!(
                "cannot infer spectrum format of {} (expected .mgf or .ms2)",
                path.display()
            ))),
        }
    }
}

pub fn parse_spectra(path: &Path, format: SpectrumFormat) -> Result<Vec<RawSpectrum>> {
    let file = File::open(path).map_err(|e| {
        Error::parse(path.display().to_string(), format!("cannot open spectra: {e}"))
    })?;
    let reader = BufReader::new(file);
    let source = path.display().to_string();
    match format {
        SpectrumFormat::Mgf => parse_mgf(reader, &source),
        SpectrumFormat::Ms2 => parse_ms2(reader, &source),
    }
}

fn parse_peak_line(line: &str) -> Option<Peak> {
    let mut fields = line.split_whitespace();
    let mz = fields.next()?.parse().ok()?;
    let intensity = fields.next()?.parse().ok()?;
    Some(Peak { mz, intensity })
}

fn parse_charge_list(value: &str) -> Option<Vec<u8>> {
    value
        .split(',')
        .flat_map(|part| part.split(" and "))
        .map(|tok| tok.trim().trim_start_matches('+').trim_end_matches('+'))
        .filter(|tok| !tok.is_empty())
        .map(|tok| tok.parse::<u8>().ok())
        .collect()
}

/// Finish a parsed record. Records that fail validation abort the parse;
/// records with no usable charge are dropped with a warning.
fn finish_record(
    id: String,
    peaks: Vec<Peak>,
    precursors: Vec<Precursor>,
    location: String,
    out: &mut Vec<RawSpectrum>,
) -> Result<()> {
    if precursors.is_empty() {
        log::warn!("{location}: spectrum {id} has no charge, skipped");
        return Ok(());
    }
    if precursors.iter().any(|p| !(1..=3).contains(&p.charge))
        || ChargeSet::from_charges(&precursors.iter().map(|p| p.charge).collect::<Vec<_>>()).is_err()
    {
        log::warn!("{location}: spectrum {id} has an unsupported charge set, skipped");
        return Ok(());
    }
    let spectrum = RawSpectrum::new(id, peaks, precursors)
        .map_err(|e| Error::parse(location, e.to_string()))?;
    out.push(spectrum);
    Ok(())
}

/// Parse MGF text. `PEPMASS` holds the precursor m/z; each listed charge `z`
/// yields neutral mass `z * pepmass - z * PROTON_MASS`.
pub fn parse_mgf<R: BufRead>(reader: R, source: &str) -> Result<Vec<RawSpectrum>> {
    struct Record {
        title: Option<String>,
        pepmass: Option<f64>,
        charges: Vec<u8>,
        peaks: Vec<Peak>,
        start_line: usize,
    }

    let mut out = Vec::new();
    let mut current: Option<Record> = None;
    let mut index = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.eq_ignore_ascii_case("BEGIN IONS") {
            if current.is_some() {
                return Err(Error::parse(
                    format!("{source}:{line_no}"),
                    "BEGIN IONS inside an open record",
                ));
            }
            current = Some(Record {
                title: None,
                pepmass: None,
                charges: Vec::new(),
                peaks: Vec::new(),
                start_line: line_no,
            });
            continue;
        }
        let Some(rec) = current.as_mut() else {
            // Global parameters before the first record are ignored.
            if line.contains('=') {
                continue;
            }
            return Err(Error::parse(
                format!("{source}:{line_no}"),
                "data outside BEGIN IONS/END IONS",
            ));
        };
        let scan = || {
            rec.title
                .clone()
                .unwrap_or_else(|| format!("index={index}"))
        };
        if line.eq_ignore_ascii_case("END IONS") {
            let rec = current.take().unwrap();
            let id = rec.title.clone().unwrap_or_else(|| format!("index={index}"));
            let location = format!("{source}:{} (scan {id})", rec.start_line);
            let Some(pepmass) = rec.pepmass else {
                return Err(Error::parse(location, "missing PEPMASS"));
            };
            let precursors = rec
                .charges
                .iter()
                .map(|&z| Precursor {
                    charge: z,
                    neutral_mass: z as f64 * pepmass - z as f64 * PROTON_MASS,
                })
                .collect();
            finish_record(id, rec.peaks, precursors, location, &mut out)?;
            index += 1;
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            match key.trim().to_ascii_uppercase().as_str() {
                "TITLE" => rec.title = Some(value.trim().to_string()),
                "PEPMASS" => {
                    let mz = value
                        .split_whitespace()
                        .next()
                        .and_then(|v| v.parse::<f64>().ok())
                        .filter(|v| *v > 0.0)
                        .ok_or_else(|| {
                            Error::parse(
                                format!("{source}:{line_no} (scan {})", scan()),
                                format!("bad PEPMASS '{value}'"),
                            )
                        })?;
                    rec.pepmass = Some(mz);
                }
                "CHARGE" => {
                    rec.charges = parse_charge_list(value).ok_or_else(|| {
                        Error::parse(
                            format!("{source}:{line_no} (scan {})", scan()),
                            format!("bad CHARGE '{value}'"),
                        )
                    })?;
                }
                _ => {}
            }
            continue;
        }
        let peak = parse_peak_line(line).ok_or_else(|| {
            Error::parse(
                format!("{source}:{line_no} (scan {})", scan()),
                format!("bad peak line '{line}'"),
            )
        })?;
        rec.peaks.push(peak);
    }
    if let Some(rec) = current {
        return Err(Error::parse(
            format!("{source}:{}", rec.start_line),
            "record not terminated by END IONS",
        ));
    }
    Ok(out)
}

/// Parse MS2 text. Each `Z <charge> <M+H>` line contributes neutral mass
/// `M+H - PROTON_MASS` for that charge.
pub fn parse_ms2<R: BufRead>(reader: R, source: &str) -> Result<Vec<RawSpectrum>> {
    struct Record {
        id: String,
        precursors: Vec<Precursor>,
        peaks: Vec<Peak>,
        start_line: usize,
    }

    fn flush(rec: Option<Record>, source: &str, out: &mut Vec<RawSpectrum>) -> Result<()> {
        if let Some(rec) = rec {
            let location = format!("{source}:{} (scan {})", rec.start_line, rec.id);
            finish_record(rec.id, rec.peaks, rec.precursors, location, out)?;
        }
        Ok(())
    }

    let mut out = Vec::new();
    let mut current: Option<Record> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap();
        match tag {
            "H" => continue,
            "S" => {
                flush(current.take(), source, &mut out)?;
                let id = fields.next().ok_or_else(|| {
                    Error::parse(format!("{source}:{line_no}"), "S line without scan number")
                })?;
                current = Some(Record {
                    id: id.to_string(),
                    precursors: Vec::new(),
                    peaks: Vec::new(),
                    start_line: line_no,
                });
            }
            "I" | "D" => {}
            "Z" => {
                let rec = current.as_mut().ok_or_else(|| {
                    Error::parse(format!("{source}:{line_no}"), "Z line before any S line")
                })?;
                let charge = fields.next().and_then(|v| v.parse::<u8>().ok());
                let mh = fields.next().and_then(|v| v.parse::<f64>().ok());
                let (Some(charge), Some(mh)) = (charge, mh) else {
                    return Err(Error::parse(
                        format!("{source}:{line_no} (scan {})", rec.id),
                        format!("bad Z line '{line}'"),
                    ));
                };
                rec.precursors.push(Precursor {
                    charge,
                    neutral_mass: mh - PROTON_MASS,
                });
            }
            _ => {
                let rec = current.as_mut().ok_or_else(|| {
                    Error::parse(format!("{source}:{line_no}"), "peak data before any S line")
                })?;
                let peak = parse_peak_line(line).ok_or_else(|| {
                    Error::parse(
                        format!("{source}:{line_no} (scan {})", rec.id),
                        format!("bad peak line '{line}'"),
                    )
                })?;
                rec.peaks.push(peak);
            }
        }
    }
    flush(current, source, &mut out)?;
    Ok(out)
}

/// Write spectra as MGF. The precursor m/z is derived from the lowest declared
/// charge; every declared charge is listed on the `CHARGE` line.
pub fn write_mgf<W: Write>(mut w: W, spectra: &[RawSpectrum]) -> std::io::Result<()> {
    for s in spectra {
        let first = s.precursors[0];
        let z = first.charge as f64;
        let pepmass = (first.neutral_mass + z * PROTON_MASS) / z;
        let charges: Vec<String> = s.charge_set.charges().map(|z| format!("{z}+")).collect();
        writeln!(w, "BEGIN IONS")?;
        writeln!(w, "TITLE={}", s.id)?;
        writeln!(w, "PEPMASS={pepmass:.6}")?;
        writeln!(w, "CHARGE={}", charges.join(" and "))?;
        for p in &s.peaks {
            writeln!(w, "{:.6} {:.6}", p.mz, p.intensity)?;
        }
        writeln!(w, "END IONS")?;
    }
    Ok(())
}

/// Replace each intensity by its rank divided by the peak count.
///
/// Ranks follow increasing intensity with ties broken by increasing m/z. The
/// returned peaks keep the input order.
pub fn rank_normalize(peaks: &[Peak]) -> Result<Vec<Peak>> {
    if peaks.is_empty() {
        return Err(Error::invalid("cannot rank-normalize an empty peak list"));
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| {
        peaks[a]
            .intensity
            .total_cmp(&peaks[b].intensity)
            .then_with(|| peaks[a].mz.total_cmp(&peaks[b].mz))
    });
    let n = peaks.len() as f64;
    let mut out = peaks.to_vec();
    for (rank, &i) in order.iter().enumerate() {
        out[i].intensity = (rank + 1) as f64 / n;
    }
    Ok(out)
}

/// 1-based bin of an m/z value: `round(mz)` clamped to `[1, bins]`.
#[inline]
pub fn bin_index(mz: f64, bins: usize) -> usize {
    let r = mz.round();
    if r < 1.0 {
        1
    } else if r >= bins as f64 {
        bins
    } else {
        r as usize
    }
}

/// Max-pool peaks into `bins` 1 Da bins. Entry `i - 1` holds bin `i`.
pub fn bin_spectrum(peaks: &[Peak], bins: usize) -> Vec<f64> {
    let mut out = vec![0.0; bins];
    for p in peaks {
        let slot = &mut out[bin_index(p.mz, bins) - 1];
        if p.intensity > *slot {
            *slot = p.intensity;
        }
    }
    out
}

/// `f_λ(s) = 1 - λe^{-λ} + λe^{-λ(1-s)}`, evaluated as `1 + λe^{-λ}(e^{λs} - 1)`
/// so that `f_λ(0)` is exactly 1.
#[inline]
pub fn f_lambda(s: f64, lambda: f64) -> f64 {
    1.0 + lambda * (-lambda).exp() * (lambda * s).exp_m1()
}

#[inline]
fn ln_f_lambda(s: f64, lambda: f64) -> f64 {
    (lambda * (-lambda).exp() * (lambda * s).exp_m1()).ln_1p()
}

/// `ln f_λ` of every bin.
pub fn weight_transform(bins: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be positive, got {lambda}")));
    }
    if let Some(s) = bins.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::invalid(format!("bin value {s} outside [0, 1]")));
    }
    Ok(bins.iter().map(|&s| ln_f_lambda(s, lambda)).collect())
}

/// A spectrum ready for scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedSpectrum {
    pub id: String,
    /// Rank-normalized bin intensities; entry `i - 1` is bin `i`.
    pub bins: Vec<f64>,
    /// `ln f_λ(bins[i])`.
    pub log_weights: Vec<f64>,
    pub precursors: Vec<Precursor>,
    pub charge_set: ChargeSet,
    pub lambda: f64,
}

impl ProcessedSpectrum {
    /// Rank-normalize, bin and weight a raw spectrum. No peaks are filtered.
    pub fn from_raw(raw: &RawSpectrum, bins: usize, lambda: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("bin count must be positive"));
        }
        let binned = if raw.peaks.is_empty() {
            vec![0.0; bins]
        } else {
            bin_spectrum(&rank_normalize(&raw.peaks)?, bins)
        };
        Self::from_bins(
            raw.id.clone(),
            binned,
            raw.precursors.clone(),
            lambda,
        )
    }

    /// Build from already-normalized bins (each in `[0, 1]`).
    pub fn from_bins(
        id: impl Into<String>,
        bins: Vec<f64>,
        precursors: Vec<Precursor>,
        lambda: f64,
    ) -> Result<Self> {
        let id = id.into();
        if bins.is_empty() {
            return Err(Error::config("bin count must be positive"));
        }
        let log_weights = weight_transform(&bins, lambda)?;
        let charge_set =
            ChargeSet::from_charges(&precursors.iter().map(|p| p.charge).collect::<Vec<_>>())?;
        Ok(ProcessedSpectrum {
            id,
            bins,
            log_weights,
            precursors,
            charge_set,
            lambda,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn neutral_mass(&self, charge: u8) -> Option<f64> {
        self.precursors
            .iter()
            .find(|p| p.charge == charge)
            .map(|p| p.neutral_mass)
    }
}

pub fn preprocess(raw: &RawSpectrum, bins: usize, lambda: f64) -> Result<ProcessedSpectrum> {
    ProcessedSpectrum::from_raw(raw, bins, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mgf_neutral_mass_and_charge_sets() {
        let text = "\
BEGIN IONS
TITLE=scan1
PEPMASS=500.0 1234.5
CHARGE=2+
100.0 10
200.5 20.5
END IONS
BEGIN IONS
TITLE=scan2
PEPMASS=400.0
CHARGE=2+ and 3+
150 1
END IONS
BEGIN IONS
TITLE=nocharge
PEPMASS=400.0
150 1
END IONS
";
        let spectra = parse_mgf(text.as_bytes(), "mem.mgf").unwrap();
        assert_eq!(spectra.len(), 2);
        let s = &spectra[0];
        assert_eq!(s.id, "scan1");
        assert_eq!(s.charge_set(), ChargeSet::SINGLE_2);
        assert!(close(s.precursors()[0].neutral_mass, 997.98544, 1e-9));
        assert_eq!(s.peaks.len(), 2);
        let amb = &spectra[1];
        assert_eq!(amb.charge_set(), ChargeSet::TWO_OR_THREE);
        assert!(close(amb.precursors()[0].neutral_mass, 800.0 - 2.0 * PROTON_MASS, 1e-9));
        assert!(close(amb.precursors()[1].neutral_mass, 1200.0 - 3.0 * PROTON_MASS, 1e-9));

        assert!(parse_mgf("".as_bytes(), "e").unwrap().is_empty());
    }

    #[test]
    fn mgf_errors_name_the_scan() {
        let bad = "BEGIN IONS\nTITLE=s7\nPEPMASS=300\nCHARGE=2+\n100 x\nEND IONS\n";
        let err = parse_mgf(bad.as_bytes(), "f.mgf").unwrap_err();
        assert!(err.to_string().contains("s7"), "{err}");
        let missing = "BEGIN IONS\nTITLE=s8\nCHARGE=2+\nEND IONS\n";
        assert!(parse_mgf(missing.as_bytes(), "f.mgf").unwrap_err().to_string().contains("s8"));
        let open = "BEGIN IONS\nPEPMASS=300\n";
        assert!(parse_mgf(open.as_bytes(), "f.mgf").is_err());
        let negative = "BEGIN IONS\nTITLE=s9\nPEPMASS=300\nCHARGE=1+\n100 -1\nEND IONS\n";
        assert!(parse_mgf(negative.as_bytes(), "f.mgf").unwrap_err().to_string().contains("s9"));
    }

    #[test]
    fn ms2_multiple_z_lines() {
        let text = "\
H\tCreationDate\ttoday
S\t17\t17\t500.25
Z\t2\t999.49
Z\t3\t1498.73
100.1\t5
200.2\t7
S\t18\t18\t300.0
I\tRTime\t1.0
120\t1
S\t19\t19\t300.0
Z\t1\t300.0
";
        let spectra = parse_ms2(text.as_bytes(), "mem.ms2").unwrap();
        assert_eq!(spectra.len(), 2);
        assert_eq!(spectra[0].id, "17");
        assert_eq!(spectra[0].charge_set(), ChargeSet::TWO_OR_THREE);
        assert!(close(spectra[0].precursors()[0].neutral_mass, 999.49 - PROTON_MASS, 1e-9));
        assert_eq!(spectra[0].peaks.len(), 2);
        assert_eq!(spectra[1].id, "19");
        assert!(spectra[1].peaks.is_empty());
    }

    #[test]
    fn rank_normalization() {
        let peaks = vec![Peak::new(10.0, 50.0), Peak::new(20.0, 10.0), Peak::new(30.0, 70.0)];
        let r: Vec<f64> = rank_normalize(&peaks).unwrap().iter().map(|p| p.intensity).collect();
        assert_eq!(r, vec![2.0 / 3.0, 1.0 / 3.0, 1.0]);

        let single = rank_normalize(&[Peak::new(5.0, 0.1)]).unwrap();
        assert_eq!(single[0].intensity, 1.0);

        let tie = rank_normalize(&[Peak::new(200.0, 3.0), Peak::new(100.0, 3.0)]).unwrap();
        assert_eq!(tie[0].intensity, 1.0);
        assert_eq!(tie[1].intensity, 0.5);

        assert!(rank_normalize(&[]).is_err());
    }

    #[test]
    fn binning() {
        let b = bin_spectrum(&[Peak::new(100.2, 0.5)], DEFAULT_BINS);
        assert_eq!(b[99], 0.5);
        let b = bin_spectrum(&[Peak::new(99.7, 0.4), Peak::new(100.4, 0.9)], DEFAULT_BINS);
        assert_eq!(b[99], 0.9);
        let b = bin_spectrum(&[Peak::new(2500.0, 1.0)], DEFAULT_BINS);
        assert_eq!(b[1999], 1.0);
        let b = bin_spectrum(&[Peak::new(0.2, 1.0)], DEFAULT_BINS);
        assert_eq!(b[0], 1.0);
        assert_eq!(b.iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn weight_function_values() {
        assert_eq!(f_lambda(0.0, 0.5), 1.0);
        assert!(close(f_lambda(1.0, 0.5), 1.196735, 1e-6));
        assert!(close(f_lambda(0.5, 0.5), 1.086135, 1e-6));
        let lw = weight_transform(&[0.0, 1.0], 0.5).unwrap();
        assert_eq!(lw[0], 0.0);
        assert!(close(lw[1], 1.1967346701436834f64.ln(), 1e-15));
        assert!(weight_transform(&[0.5], 0.0).is_err());
        assert!(weight_transform(&[0.5], -1.0).is_err());
        assert!(weight_transform(&[1.5], 0.5).is_err());
    }

    #[test]
    fn processed_spectrum_invariants() {
        let raw = RawSpectrum::new(
            "x",
            vec![Peak::new(100.0, 3.0), Peak::new(100.3, 1.0), Peak::new(700.0, 2.0)],
            vec![Precursor { charge: 2, neutral_mass: 1000.0 }],
        )
        .unwrap();
        let p = preprocess(&raw, DEFAULT_BINS, DEFAULT_LAMBDA).unwrap();
        assert_eq!(p.bins.len(), DEFAULT_BINS);
        assert_eq!(p.bins[99], 1.0);
        assert!(close(p.bins[699], 2.0 / 3.0, 0.0));
        assert_eq!(p.bins.iter().cloned().fold(0.0, f64::max), 1.0);
        for (s, lw) in p.bins.iter().zip(&p.log_weights) {
            assert!(*lw >= 0.0);
            assert_eq!(*s == 0.0, *lw == 0.0);
        }

        let empty = RawSpectrum::new("e", vec![], vec![Precursor { charge: 1, neutral_mass: 10.0 }]).unwrap();
        let pe = preprocess(&empty, DEFAULT_BINS, DEFAULT_LAMBDA).unwrap();
        assert!(pe.log_weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn charge_sets() {
        assert!(ChargeSet::from_charges(&[1, 2]).is_err());
        assert!(ChargeSet::from_charges(&[4]).is_err());
        assert!(ChargeSet::from_charges(&[]).is_err());
        let s = ChargeSet::from_charges(&[3, 2]).unwrap();
        assert!(s.is_ambiguous());
        assert_eq!(s.charges().collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(s.single(), None);
        assert_eq!(ChargeSet::SINGLE_3.single(), Some(3));
        assert_eq!(s.to_string(), "{+2,+3}");
    }

    #[test]
    fn mgf_write_roundtrip() {
        let raw = RawSpectrum::new(
            "t1",
            vec![Peak::new(130.0, 0.75), Peak::new(90.5, 0.25)],
            vec![
                Precursor { charge: 2, neutral_mass: 216.5 },
                Precursor { charge: 3, neutral_mass: 216.5 * 1.5 },
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_mgf(&mut buf, std::slice::from_ref(&raw)).unwrap();
        let back = parse_mgf(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].peaks, raw.peaks);
        for (a, b) in back[0].precursors().iter().zip(raw.precursors()) {
            assert_eq!(a.charge, b.charge);
            assert!(close(a.neutral_mass, b.neutral_mass, 1e-5));
        }
    }

    proptest! {
        #[test]
        fn f_lambda_strictly_increasing(a in 0.0f64..1.0, gap in 1e-6f64..1.0, lambda in 0.05f64..5.0) {
            let b = (a + gap).min(1.0);
            prop_assume!(b > a);
            prop_assert!(f_lambda(a, lambda) < f_lambda(b, lambda));
        }

        #[test]
        fn rank_normalization_scale_invariant(
            raw in proptest::collection::vec((1u32..2000, 0u32..100_000), 1..60),
            scale in 1e-3f64..1e3,
        ) {
            let peaks: Vec<Peak> = raw.iter().map(|&(m, i)| Peak::new(m as f64 + 0.25, i as f64)).collect();
            let scaled: Vec<Peak> = peaks.iter().map(|p| Peak::new(p.mz, p.intensity * scale)).collect();
            let a = rank_normalize(&peaks).unwrap();
            let b = rank_normalize(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.intensity.to_bits(), y.intensity.to_bits());
            }
            let max = a.iter().map(|p| p.intensity).fold(0.0, f64::max);
            prop_assert_eq!(max, 1.0);
        }

        #[test]
        fn rebinning_bin_centers_is_idempotent(
            raw in proptest::collection::vec((0.0f64..2600.0, 0.0f64..1e6), 1..80),
        ) {
            let peaks: Vec<Peak> = raw.iter().map(|&(m, i)| Peak::new(m + 0.01, i)).collect();
            let bins = bin_spectrum(&rank_normalize(&peaks).unwrap(), DEFAULT_BINS);
            let centers: Vec<Peak> = bins.iter().enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(i, &v)| Peak::new((i + 1) as f64, v))
                .collect();
            prop_assert_eq!(bin_spectrum(&centers, DEFAULT_BINS), bins);
        }
    }
}
