//! Peptide-spectrum match scores.
//!
//! The DBN score marginalizes a global shift `τ ∈ [-M, M]` applied to every
//! theoretical b/y ion bin and reports `θ = ln p(τ = 0 | peptide, spectrum)`.
//! With the spectrum folded into per-bin log-weights `ln f_λ(s_i)`, each
//! cleavage site contributes an independent log factor per shift, so the
//! whole posterior is a sum over frames followed by one logsumexp over the
//! `2M + 1` shifts.
//!
//! Charge models:
//!
//! * `+1` one product ion carries the proton, b or y with probability 1/2.
//! * `+2` both b and y ions carry one proton.
//! * `+3` the b ion carries 1 or 2 protons (probability 1/2 each) and the y ion
//!   the remainder ([`YChargeRule::Conserve`]) or the same count
//!   ([`YChargeRule::Literal`]).
//! * mixture: a latent precursor charge in `{+2, +3}` with equal prior,
//!   shared by every frame.

pub mod oracle;

use std::fmt;
use std::str::FromStr;

use crate::chem::{Peptide, WATER_MASS};
use crate::error::{Error, Result};
use crate::math::{log_add_exp, logsumexp};
use crate::spectra::{ChargeSet, ProcessedSpectrum, DEFAULT_BINS, DEFAULT_LAMBDA};

pub const DEFAULT_SHIFT_MAX: usize = 37;

/// XCorr background shifts run over `[-75, 75]` excluding zero.
pub const XCORR_MAX_SHIFT: i64 = 75;
pub const XCORR_NORMALIZER: f64 = 150.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonType {
    B,
    Y,
}

/// Charge of the y ion when the b ion carries `ξ` protons under the +3 model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum YChargeRule {
    /// `3 - ξ`: protons are conserved across the cleavage.
    #[default]
    Conserve,
    /// `ξ`: the y ion mirrors the b ion's charge.
    Literal,
}

impl YChargeRule {
    #[inline]
    pub fn y_charge(self, b_charge: u8, precursor_charge: u8) -> u8 {
        match self {
            YChargeRule::Conserve => precursor_charge - b_charge,
            YChargeRule::Literal => b_charge,
        }
    }
}

impl FromStr for YChargeRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conserve" => Ok(YChargeRule::Conserve),
            "literal" => Ok(YChargeRule::Literal),
            _ => Err(Error::config(format!("unknown y-charge rule '{s}'"))),
        }
    }
}

impl fmt::Display for YChargeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            YChargeRule::Conserve => "conserve",
            YChargeRule::Literal => "literal",
        })
    }
}

/// How the declared charge set of a spectrum is turned into a score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChargeMode {
    /// Score under one precursor charge, which must be declared by the spectrum.
    Fixed(u8),
    /// Ambiguous `{+2,+3}` spectra use the latent-charge mixture model.
    #[default]
    Mixture,
    /// Ambiguous spectra are scored at each charge and the larger score kept.
    MaxOverCharges,
}

impl FromStr for ChargeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(ChargeMode::Mixture),
            "max_over_charges" | "max-over-charges" => Ok(ChargeMode::MaxOverCharges),
            _ => {
                let z = s
                    .strip_prefix("fixed:")
                    .and_then(|z| z.trim_start_matches('+').parse::<u8>().ok())
                    .filter(|z| (1..=3).contains(z))
                    .ok_or_else(|| {
                        Error::config(format!(
                            "unknown charge mode '{s}' (expected mixture, max_over_charges or fixed:<1|2|3>)"
                        ))
                    })?;
                Ok(ChargeMode::Fixed(z))
            }
        }
    }
}

impl fmt::Display for ChargeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChargeMode::Fixed(z) => write!(f, "fixed:{z}"),
            ChargeMode::Mixture => f.write_str("mixture"),
            ChargeMode::MaxOverCharges => f.write_str("max_over_charges"),
        }
    }
}

/// The probabilistic model a shift profile was computed under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChargeModel {
    Charge(u8),
    Mixture,
}

impl fmt::Display for ChargeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChargeModel::Charge(z) => write!(f, "+{z}"),
            ChargeModel::Mixture => f.write_str("mixture"),
        }
    }
}

/// Which model produced a reported score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScoredModel {
    Charge(u8),
    Mixture,
    MaxOverCharges { best: u8 },
}

impl fmt::Display for ScoredModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoredModel::Charge(z) => write!(f, "+{z}"),
            ScoredModel::Mixture => f.write_str("mixture"),
            ScoredModel::MaxOverCharges { best } => write!(f, "max:+{best}"),
        }
    }
}

impl FromStr for ScoredModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let charge = |t: &str| {
            t.strip_prefix('+')
                .and_then(|z| z.parse::<u8>().ok())
                .ok_or_else(|| Error::invalid(format!("bad charge model tag '{s}'")))
        };
        if s == "mixture" {
            Ok(ScoredModel::Mixture)
        } else if let Some(rest) = s.strip_prefix("max:") {
            Ok(ScoredModel::MaxOverCharges { best: charge(rest)? })
        } else {
            Ok(ScoredModel::Charge(charge(s)?))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoringConfig {
    /// Largest shift `M`; shifts run over `[-M, M]`.
    pub shift_max: usize,
    pub bins: usize,
    pub lambda: f64,
    pub y_charge_rule: YChargeRule,
    pub charge_mode: ChargeMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            shift_max: DEFAULT_SHIFT_MAX,
            bins: DEFAULT_BINS,
            lambda: DEFAULT_LAMBDA,
            y_charge_rule: YChargeRule::Conserve,
            charge_mode: ChargeMode::Mixture,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::config("bin count must be positive"));
        }
        if self.shift_max < 1 || self.shift_max > self.bins {
            return Err(Error::config(format!(
                "shift max {} must lie in [1, {}]",
                self.shift_max, self.bins
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if let ChargeMode::Fixed(z) = self.charge_mode {
            if !(1..=3).contains(&z) {
                return Err(Error::config(format!("unsupported fixed charge {z}")));
            }
        }
        Ok(())
    }

    pub fn num_shifts(&self) -> usize {
        2 * self.shift_max + 1
    }

    fn check_spectrum(&self, spectrum: &ProcessedSpectrum) -> Result<()> {
        self.validate()?;
        if spectrum.num_bins() != self.bins {
            return Err(Error::config(format!(
                "spectrum {} has {} bins, configuration expects {}",
                spectrum.id,
                spectrum.num_bins(),
                self.bins
            )));
        }
        if spectrum.lambda != self.lambda {
            return Err(Error::config(format!(
                "spectrum {} was weighted with lambda {}, scoring uses {}",
                spectrum.id, spectrum.lambda, self.lambda
            )));
        }
        Ok(())
    }
}

/// 1-based bin of a fragment with `mass` Da (residue sum) carrying `charge` protons.
///
/// b ions: `round((mass + z) / z)`; y ions: `round((mass + 18 + z) / z)`.
/// The result is clamped to `[1, bins]`.
pub fn ion_bin(mass: u32, charge: u8, ion: IonType, bins: usize) -> Result<usize> {
    if charge == 0 {
        return Err(Error::invalid("uncharged fragments have no m/z"));
    }
    let z = charge as f64;
    let neutral = match ion {
        IonType::B => mass as f64,
        IonType::Y => (mass + WATER_MASS) as f64,
    };
    let mz = ((neutral + z) / z).round();
    Ok((mz as usize).clamp(1, bins))
}

#[inline]
fn shifted(bin: usize, tau: i64, bins: usize) -> usize {
    (bin as i64 + tau).clamp(1, bins as i64) as usize
}

/// One charge assignment inside a frame: prior and the bins of its detectable ions.
#[derive(Clone, Copy, Debug)]
struct Term {
    log_prior: f64,
    b: Option<usize>,
    y: Option<usize>,
}

/// Per-frame charge assignments for precursor charge `z`.
fn frame_terms(peptide: &Peptide, t: usize, z: u8, cfg: &ScoringConfig) -> Result<Vec<Term>> {
    let n_t = peptide.prefix_masses()[t];
    let c_t = peptide.suffix_masses()[t];
    let b = |c: u8| ion_bin(n_t, c, IonType::B, cfg.bins);
    let y = |c: u8| ion_bin(c_t, c, IonType::Y, cfg.bins);
    let half = 0.5f64.ln();
    Ok(match z {
        1 => vec![
            Term { log_prior: half, b: Some(b(1)?), y: None },
            Term { log_prior: half, b: None, y: Some(y(1)?) },
        ],
        2 => vec![Term { log_prior: 0.0, b: Some(b(1)?), y: Some(y(1)?) }],
        3 => (1..=2u8)
            .map(|xi| {
                Ok(Term {
                    log_prior: half,
                    b: Some(b(xi)?),
                    y: Some(y(cfg.y_charge_rule.y_charge(xi, 3))?),
                })
            })
            .collect::<Result<_>>()?,
        _ => return Err(Error::invalid(format!("unsupported precursor charge {z}"))),
    })
}

#[inline]
fn evaluate_terms(terms: &[Term], tau: i64, log_weights: &[f64]) -> f64 {
    let bins = log_weights.len();
    let lw = |bin: Option<usize>| bin.map_or(0.0, |i| log_weights[shifted(i, tau, bins) - 1]);
    match terms {
        [only] => lw(only.b) + lw(only.y),
        [first, second] => log_add_exp(
            first.log_prior + lw(first.b) + lw(first.y),
            second.log_prior + lw(second.b) + lw(second.y),
        ),
        _ => {
            let parts: Vec<f64> = terms
                .iter()
                .map(|term| term.log_prior + lw(term.b) + lw(term.y))
                .collect();
            logsumexp(&parts)
        }
    }
}

/// Log factor contributed by cleavage site `t` (1-based, `1 ≤ t ≤ n-1`) at shift `tau`
/// under precursor charge `z`.
pub fn frame_log_factor(
    peptide: &Peptide,
    t: usize,
    tau: i64,
    z: u8,
    spectrum: &ProcessedSpectrum,
    cfg: &ScoringConfig,
) -> Result<f64> {
    cfg.check_spectrum(spectrum)?;
    if t == 0 || t >= peptide.len() {
        return Err(Error::invalid(format!(
            "frame {t} outside [1, {}] for {}",
            peptide.len().saturating_sub(1),
            peptide
        )));
    }
    if tau.unsigned_abs() as usize > cfg.shift_max {
        return Err(Error::invalid(format!(
            "shift {tau} outside [-{m}, {m}]",
            m = cfg.shift_max
        )));
    }
    let terms = frame_terms(peptide, t, z, cfg)?;
    Ok(evaluate_terms(&terms, tau, &spectrum.log_weights))
}

/// Per-shift log-likelihood `a[τ]` for `τ ∈ [-M, M]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftProfile {
    shift_max: usize,
    values: Vec<f64>,
    model: ChargeModel,
}

impl ShiftProfile {
    pub fn from_values(values: Vec<f64>, model: ChargeModel) -> Result<Self> {
        if values.len().is_multiple_of(2) {
            return Err(Error::invalid("shift profile length must be odd"));
        }
        Ok(ShiftProfile {
            shift_max: values.len() / 2,
            values,
            model,
        })
    }

    pub fn shift_max(&self) -> usize {
        self.shift_max
    }

    pub fn model(&self) -> ChargeModel {
        self.model
    }

    /// Values indexed by `τ + M`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, tau: i64) -> f64 {
        self.values[(tau + self.shift_max as i64) as usize]
    }

    pub fn shifts(&self) -> impl Iterator<Item = i64> {
        let m = self.shift_max as i64;
        -m..=m
    }

    /// `logsumexp_τ a[τ]`.
    pub fn log_normalizer(&self) -> f64 {
        logsumexp(&self.values)
    }

    pub fn log_posterior(&self, tau: i64) -> f64 {
        self.at(tau) - self.log_normalizer()
    }

    /// `θ = a[0] - logsumexp_τ a[τ]`; the uniform shift prior cancels.
    ///
    /// Computed as `-ln(1 + Σ_{τ≠0} e^{a[τ] - a[0]})` so that posteriors close to
    /// one keep their resolution instead of rounding to `θ = 0`.
    pub fn theta(&self) -> f64 {
        let a0 = self.at(0);
        let centre = self.shift_max;
        let mut rest = 0.0;
        for (i, &a) in self.values.iter().enumerate() {
            if i == centre {
                continue;
            }
            let d = a - a0;
            if d > 700.0 || d.is_nan() {
                return self.log_posterior(0);
            }
            rest += d.exp();
        }
        -rest.ln_1p()
    }

    /// Posterior over shifts, summing to one.
    pub fn posterior(&self) -> Vec<f64> {
        let z = self.log_normalizer();
        self.values.iter().map(|a| (a - z).exp()).collect()
    }
}

fn single_charge_profile(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    z: u8,
    cfg: &ScoringConfig,
) -> Result<ShiftProfile> {
    if peptide.len() < 2 {
        return Err(Error::invalid(format!(
            "peptide {peptide} has no cleavage site and cannot be scored"
        )));
    }
    let frames = (1..peptide.len())
        .map(|t| frame_terms(peptide, t, z, cfg))
        .collect::<Result<Vec<_>>>()?;
    let m = cfg.shift_max as i64;
    let values = (-m..=m)
        .map(|tau| {
            frames
                .iter()
                .map(|terms| evaluate_terms(terms, tau, &spectrum.log_weights))
                .sum()
        })
        .collect();
    Ok(ShiftProfile {
        shift_max: cfg.shift_max,
        values,
        model: ChargeModel::Charge(z),
    })
}

/// Combine +2 and +3 profiles under the latent-charge model with equal priors:
/// `a[τ] = ln(½e^{a₂[τ]} + ½e^{a₃[τ]})`.
fn mixture_of(doubly: &ShiftProfile, triply: &ShiftProfile) -> ShiftProfile {
    let half = 0.5f64.ln();
    let values = doubly
        .values
        .iter()
        .zip(&triply.values)
        .map(|(&a2, &a3)| half + log_add_exp(a2, a3))
        .collect();
    ShiftProfile {
        shift_max: doubly.shift_max,
        values,
        model: ChargeModel::Mixture,
    }
}

/// Shift profile for `peptide` against `spectrum` under `model`.
pub fn shift_profile(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    model: ChargeModel,
    cfg: &ScoringConfig,
) -> Result<ShiftProfile> {
    cfg.check_spectrum(spectrum)?;
    match model {
        ChargeModel::Charge(z) => single_charge_profile(peptide, spectrum, z, cfg),
        ChargeModel::Mixture => {
            let a2 = single_charge_profile(peptide, spectrum, 2, cfg)?;
            let a3 = single_charge_profile(peptide, spectrum, 3, cfg)?;
            Ok(mixture_of(&a2, &a3))
        }
    }
}

/// How a spectrum's charge set is scored under a charge mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Resolved {
    Single(u8),
    Mixture,
    Max,
}

fn resolve(mode: ChargeMode, charges: ChargeSet) -> Result<Resolved> {
    match mode {
        ChargeMode::Fixed(z) if charges.contains(z) => Ok(Resolved::Single(z)),
        ChargeMode::Fixed(z) => Err(Error::config(format!(
            "fixed charge +{z} is not among the declared charges {charges}"
        ))),
        ChargeMode::Mixture if charges.is_ambiguous() => Ok(Resolved::Mixture),
        ChargeMode::MaxOverCharges if charges.is_ambiguous() => Ok(Resolved::Max),
        _ => Ok(Resolved::Single(charges.single().expect("unambiguous charge set"))),
    }
}

/// A DBN score with the model that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DideaScore {
    pub theta: f64,
    pub model: ScoredModel,
}

/// DBN score of `peptide` against `spectrum` under `cfg.charge_mode`.
pub fn didea_score_detail(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    cfg: &ScoringConfig,
) -> Result<DideaScore> {
    cfg.check_spectrum(spectrum)?;
    match resolve(cfg.charge_mode, spectrum.charge_set)? {
        Resolved::Single(z) => Ok(DideaScore {
            theta: single_charge_profile(peptide, spectrum, z, cfg)?.theta(),
            model: ScoredModel::Charge(z),
        }),
        Resolved::Mixture => Ok(DideaScore {
            theta: shift_profile(peptide, spectrum, ChargeModel::Mixture, cfg)?.theta(),
            model: ScoredModel::Mixture,
        }),
        Resolved::Max => {
            let mut best: Option<(f64, u8)> = None;
            for z in spectrum.charge_set.charges() {
                let theta = single_charge_profile(peptide, spectrum, z, cfg)?.theta();
                if best.is_none_or(|(b, _)| theta > b) {
                    best = Some((theta, z));
                }
            }
            let (theta, z) = best.expect("nonempty charge set");
            Ok(DideaScore {
                theta,
                model: ScoredModel::MaxOverCharges { best: z },
            })
        }
    }
}

pub fn didea_score(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    cfg: &ScoringConfig,
) -> Result<f64> {
    didea_score_detail(peptide, spectrum, cfg).map(|s| s.theta)
}

/// Posterior `(p(+2), p(+3))` of the precursor charge under the mixture model,
/// marginalizing the shift.
pub fn charge_posterior(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    cfg: &ScoringConfig,
) -> Result<(f64, f64)> {
    cfg.check_spectrum(spectrum)?;
    if !spectrum.charge_set.is_ambiguous() {
        return Err(Error::invalid(format!(
            "spectrum {} declares {}, charge posterior needs {{+2,+3}}",
            spectrum.id, spectrum.charge_set
        )));
    }
    let l2 = single_charge_profile(peptide, spectrum, 2, cfg)?.log_normalizer();
    let l3 = single_charge_profile(peptide, spectrum, 3, cfg)?.log_normalizer();
    let p2 = (l2 - log_add_exp(l2, l3)).exp();
    Ok((p2, 1.0 - p2))
}

/// Unit-intensity theoretical spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoreticalSpectrum {
    /// Length `bins`; entry `i - 1` is bin `i`.
    pub phi: Vec<f64>,
    /// Sorted distinct 1-based bins carrying a unit peak.
    pub peaks: Vec<usize>,
}

/// b/y ion bins at charge +1, plus the +2 variants when `z = 3`.
pub fn theoretical_spectrum(peptide: &Peptide, z: u8, bins: usize) -> Result<TheoreticalSpectrum> {
    if peptide.len() < 2 {
        return Err(Error::invalid(format!(
            "peptide {peptide} has no cleavage site"
        )));
    }
    if !(1..=3).contains(&z) {
        return Err(Error::invalid(format!("unsupported precursor charge {z}")));
    }
    let max_fragment_charge = if z == 3 { 2 } else { 1 };
    let mut peaks = Vec::with_capacity(4 * peptide.len());
    for t in 1..peptide.len() {
        for c in 1..=max_fragment_charge {
            peaks.push(ion_bin(peptide.prefix_masses()[t], c, IonType::B, bins)?);
            peaks.push(ion_bin(peptide.suffix_masses()[t], c, IonType::Y, bins)?);
        }
    }
    peaks.sort_unstable();
    peaks.dedup();
    let mut phi = vec![0.0; bins];
    for &p in &peaks {
        phi[p - 1] = 1.0;
    }
    Ok(TheoreticalSpectrum { phi, peaks })
}

/// `⟨s, φ⟩ - (1/150) Σ_{τ ∈ [-75, 75], τ ≠ 0} ⟨s, φ_τ⟩` with out-of-range shifts contributing 0.
///
/// Evaluated as the mean over shifts of `⟨s, φ⟩ - ⟨s, φ_τ⟩`, with every inner
/// product accumulated in the same peak order, so a flat spectrum scores exactly 0.
pub fn xcorr(bins: &[f64], theoretical: &TheoreticalSpectrum) -> f64 {
    let n = bins.len() as i64;
    let inner = |tau: i64| -> f64 {
        theoretical
            .peaks
            .iter()
            .map(|&p| {
                let bin = p as i64 + tau;
                if (1..=n).contains(&bin) {
                    bins[(bin - 1) as usize]
                } else {
                    0.0
                }
            })
            .sum()
    };
    let alpha = inner(0);
    let total: f64 = (-XCORR_MAX_SHIFT..=XCORR_MAX_SHIFT)
        .filter(|&tau| tau != 0)
        .map(|tau| alpha - inner(tau))
        .sum();
    total / XCORR_NORMALIZER
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XcorrScore {
    pub score: f64,
    pub model: ScoredModel,
}

/// XCorr on the rank-normalized bins. Ambiguous spectra take the larger of the
/// per-charge scores unless the mode fixes a charge.
pub fn xcorr_score_detail(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    cfg: &ScoringConfig,
) -> Result<XcorrScore> {
    if spectrum.num_bins() != cfg.bins {
        return Err(Error::config(format!(
            "spectrum {} has {} bins, configuration expects {}",
            spectrum.id,
            spectrum.num_bins(),
            cfg.bins
        )));
    }
    let charges: Vec<u8> = match resolve(cfg.charge_mode, spectrum.charge_set)? {
        Resolved::Single(z) => vec![z],
        Resolved::Mixture | Resolved::Max => spectrum.charge_set.charges().collect(),
    };
    let mut best: Option<(f64, u8)> = None;
    for &z in &charges {
        let score = xcorr(&spectrum.bins, &theoretical_spectrum(peptide, z, cfg.bins)?);
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, z));
        }
    }
    let (score, z) = best.expect("nonempty charge set");
    let model = if charges.len() > 1 {
        ScoredModel::MaxOverCharges { best: z }
    } else {
        ScoredModel::Charge(z)
    };
    Ok(XcorrScore { score, model })
}

pub fn xcorr_score(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    cfg: &ScoringConfig,
) -> Result<f64> {
    xcorr_score_detail(peptide, spectrum, cfg).map(|s| s.score)
}
