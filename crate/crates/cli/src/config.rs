//! Run configuration: defaults, TOML config file, command-line overrides.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use didea_core::scoring::DEFAULT_SHIFT_MAX;
use didea_core::search::DEFAULT_DELTA;
use didea_core::spectra::{DEFAULT_BINS, DEFAULT_LAMBDA};
use didea_core::{ChargeMode, DigestRules, Scorer, ScoringConfig, SearchConfig, YChargeRule};

use crate::CliError;

/// Serialize through `Display` / `FromStr`, so config files use the same
/// spellings as the flags.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub delta: f64,
    pub lambda: f64,
    pub shift_max: usize,
    pub bins: usize,
    #[serde(with = "text")]
    pub scorer: Scorer,
    #[serde(with = "text")]
    pub charge_mode: ChargeMode,
    #[serde(with = "text")]
    pub y_charge_rule: YChargeRule,
    pub decoy_seed: u64,
    /// Worker threads for search; 0 lets the pool pick one per core.
    pub threads: usize,
    pub top_k: usize,
    pub missed_cleavages: usize,
    pub min_length: usize,
    pub max_length: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rules = DigestRules::default();
        RunConfig {
            delta: DEFAULT_DELTA,
            lambda: DEFAULT_LAMBDA,
            shift_max: DEFAULT_SHIFT_MAX,
            bins: DEFAULT_BINS,
            scorer: Scorer::Didea,
            charge_mode: ChargeMode::Mixture,
            y_charge_rule: YChargeRule::Conserve,
            decoy_seed: 1,
            threads: 0,
            top_k: 1,
            missed_cleavages: rules.missed_cleavages,
            min_length: rules.min_length,
            max_length: rules.max_length,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain fields serialize")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            shift_max: self.shift_max,
            bins: self.bins,
            lambda: self.lambda,
            y_charge_rule: self.y_charge_rule,
            charge_mode: self.charge_mode,
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            scoring: self.scoring(),
            scorer: self.scorer,
            delta: self.delta,
            top_k: self.top_k,
        }
    }

    pub fn digest_rules(&self) -> DigestRules {
        DigestRules {
            missed_cleavages: self.missed_cleavages,
            min_length: self.min_length,
            max_length: self.max_length,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.search().validate()?;
        self.digest_rules().validate()?;
        Ok(())
    }

    /// The configuration as `#`-prefixed lines for output file headers. The
    /// thread count is left out: it never changes results, and outputs must not
    /// depend on it.
    pub fn comment_header(&self, command: &str) -> String {
        let mut out = format!("# didea {command} {}\n", env!("CARGO_PKG_VERSION"));
        for line in self.to_toml().lines().filter(|l| !l.starts_with("threads ")) {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

/// Flags shared by every subcommand that touches the configuration.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// TOML file with any subset of the configuration keys.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub shift_max: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// didea or xcorr.
    #[arg(long)]
    pub scorer: Option<String>,
    /// mixture, max_over_charges or fixed:<1|2|3>.
    #[arg(long)]
    pub charge_mode: Option<String>,
    /// conserve or literal.
    #[arg(long)]
    pub y_charge_rule: Option<String>,
    #[arg(long)]
    pub decoy_seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub missed_cleavages: Option<usize>,
    #[arg(long)]
    pub min_length: Option<usize>,
    #[arg(long)]
    pub max_length: Option<usize>,
}

impl ConfigArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(
            delta,
            lambda,
            shift_max,
            bins,
            decoy_seed,
            threads,
            top_k,
            missed_cleavages,
            min_length,
            max_length
        );
        if let Some(s) = &self.scorer {
            cfg.scorer = s.parse()?;
        }
        if let Some(s) = &self.charge_mode {
            cfg.charge_mode = s.parse()?;
        }
        if let Some(s) = &self.y_charge_rule {
            cfg.y_charge_rule = s.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig {
            charge_mode: ChargeMode::Fixed(3),
            scorer: Scorer::Xcorr,
            y_charge_rule: YChargeRule::Literal,
            delta: 2.5,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "delta = 1.5\nlambda = 0.7\nscorer = \"xcorr\"\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            lambda: Some(0.9),
            ..ConfigArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.delta, 1.5);
        assert_eq!(cfg.lambda, 0.9);
        assert_eq!(cfg.scorer, Scorer::Xcorr);
        assert_eq!(cfg.shift_max, 37);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(CliError::Config(_))));
        assert!(matches!(
            RunConfig::from_toml("charge_mode = \"fixed:7\""),
            Err(CliError::Config(_))
        ));
        let args = ConfigArgs { lambda: Some(-1.0), ..ConfigArgs::default() };
        assert!(matches!(args.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn header_lines_are_comments() {
        let header = RunConfig::default().comment_header("search");
        assert!(header.lines().all(|l| l.starts_with('#')));
        assert!(header.contains("# delta = 3.0"));
        assert!(!header.contains("threads"));
    }
}
