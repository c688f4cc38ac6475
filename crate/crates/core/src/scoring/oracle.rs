//! Exhaustive-enumeration reference for the DBN score.
//!
//! Every joint assignment of the shift, the per-frame fragment charges and
//! (for the mixture) the latent precursor charge is enumerated explicitly, the
//! unnormalized probabilities are multiplied out in linear space and then
//! normalized. Ion bins use integer arithmetic and weights are evaluated from
//! the raw bin intensities, so nothing here shares a code path with the
//! log-space dynamic program in the parent module.

use crate::chem::{Peptide, WATER_MASS};
use crate::error::{Error, Result};
use crate::spectra::{f_lambda, ProcessedSpectrum};

use super::{ScoringConfig, YChargeRule};

/// Longest peptide the enumeration accepts (`2^(n-1)` fragment-charge vectors).
pub const ORACLE_MAX_LENGTH: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleModel {
    Charge(u8),
    Mixture,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleResult {
    /// `ln p(τ = 0 | peptide, spectrum)`.
    pub log_posterior_zero: f64,
    /// `(p(+2), p(+3))` for the mixture model.
    pub charge_posterior: Option<(f64, f64)>,
}

/// A fragment-charge choice at one cleavage site: probability and the charges
/// carried by the b and y ions (`None` for an uncharged, undetectable fragment).
#[derive(Clone, Copy)]
struct Choice {
    prob: f64,
    b: Option<u64>,
    y: Option<u64>,
}

fn choices(precursor: u8, rule: YChargeRule) -> Vec<Choice> {
    match precursor {
        1 => vec![
            Choice { prob: 0.5, b: Some(1), y: None },
            Choice { prob: 0.5, b: None, y: Some(1) },
        ],
        2 => vec![Choice { prob: 1.0, b: Some(1), y: Some(1) }],
        3 => [1u64, 2]
            .iter()
            .map(|&xi| Choice {
                prob: 0.5,
                b: Some(xi),
                y: Some(match rule {
                    YChargeRule::Conserve => 3 - xi,
                    YChargeRule::Literal => xi,
                }),
            })
            .collect(),
        _ => unreachable!(),
    }
}

/// `round((mass + z) / z)` for positive integers, rounding halves up.
fn quantize(mass: u64, z: u64, bins: i64) -> i64 {
    let mz = (2 * (mass + z) + z) / (2 * z);
    (mz as i64).clamp(1, bins)
}

pub fn brute_force_posterior(
    peptide: &Peptide,
    spectrum: &ProcessedSpectrum,
    model: OracleModel,
    cfg: &ScoringConfig,
) -> Result<OracleResult> {
    let n = peptide.len();
    if n < 2 {
        return Err(Error::invalid("oracle needs at least one cleavage site"));
    }
    if n > ORACLE_MAX_LENGTH {
        return Err(Error::invalid(format!(
            "oracle enumerates peptides of at most {ORACLE_MAX_LENGTH} residues, got {n}"
        )));
    }
    let bins = spectrum.bins.len() as i64;
    let m = cfg.shift_max as i64;
    let num_shifts = (2 * m + 1) as f64;

    let weight = |bin: i64, tau: i64| -> f64 {
        let i = (bin + tau).clamp(1, bins);
        f_lambda(spectrum.bins[(i - 1) as usize], spectrum.lambda)
    };

    let kappas: Vec<(f64, u8)> = match model {
        OracleModel::Charge(z) if (1..=3).contains(&z) => vec![(1.0, z)],
        OracleModel::Charge(z) => {
            return Err(Error::invalid(format!("unsupported precursor charge {z}")))
        }
        OracleModel::Mixture => vec![(0.5, 2), (0.5, 3)],
    };

    let frames = n - 1;
    let mut total = 0.0;
    let mut at_zero = 0.0;
    let mut per_kappa = vec![0.0; kappas.len()];

    for (k, &(kappa_prior, kappa)) in kappas.iter().enumerate() {
        let options = choices(kappa, cfg.y_charge_rule);
        let assignments = options.len().pow(frames as u32);
        for tau in -m..=m {
            for code in 0..assignments {
                let mut joint = kappa_prior / num_shifts;
                let mut rest = code;
                for t in 1..=frames {
                    let choice = options[rest % options.len()];
                    rest /= options.len();
                    let prefix = peptide.prefix_masses()[t] as u64;
                    let suffix = peptide.suffix_masses()[t] as u64 + WATER_MASS as u64;
                    let mut omega = choice.prob;
                    if let Some(zb) = choice.b {
                        omega *= weight(quantize(prefix, zb, bins), tau);
                    }
                    if let Some(zy) = choice.y {
                        omega *= weight(quantize(suffix, zy, bins), tau);
                    }
                    joint *= omega;
                }
                total += joint;
                per_kappa[k] += joint;
                if tau == 0 {
                    at_zero += joint;
                }
            }
        }
    }

    let charge_posterior = match model {
        OracleModel::Mixture => Some((per_kappa[0] / total, per_kappa[1] / total)),
        OracleModel::Charge(_) => None,
    };
    Ok(OracleResult {
        log_posterior_zero: (at_zero / total).ln(),
        charge_posterior,
    })
}
