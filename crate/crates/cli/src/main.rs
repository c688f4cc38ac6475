//! `didea`: digest, search, evaluate, synth and score from the command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 input or parse error, 4 configuration error.

mod config;

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use didea_core::chem::{build_database, decoys_from_proteins, read_fasta};
use didea_core::evaluate::{default_grid, evaluate};
use didea_core::scoring::{charge_posterior, didea_score_detail, shift_profile, ScoredModel};
use didea_core::search::{read_psms, run_search, write_psms};
use didea_core::spectra::{parse_spectra, write_mgf};
use didea_core::synth::{synthesize_batch, write_key};
use didea_core::{
    brute_force_posterior, ChargeModel, Error, IntensityModel, OracleModel, PValueMode, Peptide,
    PeptideDatabase, ProcessedSpectrum, Provenance, Psm, ResidueMassTable, SpectrumFormat,
    SynthParams,
};

use config::{ConfigArgs, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Config(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "didea", version, about = "Peptide identification from tandem mass spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Digest a FASTA proteome into a peptide/mass table.
    Digest {
        #[arg(long)]
        fasta: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Search spectra against target and shuffled-decoy databases.
    Search {
        /// MGF or MS2 file.
        #[arg(long)]
        spectra: PathBuf,
        #[arg(long)]
        fasta: PathBuf,
        /// Writes `<prefix>.target.tsv` and `<prefix>.decoy.tsv`.
        #[arg(long)]
        out_prefix: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// p-values, q-values and the ranking curve from target and decoy PSMs.
    Evaluate {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        decoy: PathBuf,
        /// Writes `<prefix>.psms.tsv` and `<prefix>.curve.csv`.
        #[arg(long)]
        out_prefix: PathBuf,
        /// Use (1 + exceedances) / (1 + decoys) p-values.
        #[arg(long)]
        smoothed: bool,
    },
    /// Synthesize spectra for a peptide list, with a ground-truth key.
    Synth(SynthArgs),
    /// Score one peptide against one spectrum and print the shift profile.
    Score {
        #[arg(long)]
        peptide: String,
        #[arg(long)]
        spectra: PathBuf,
        /// Spectrum title or scan id; defaults to the first spectrum.
        #[arg(long)]
        id: Option<String>,
        /// Also run the brute-force enumeration (peptides of at most 6 residues).
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// One peptide per line, or the TSV written by `digest`.
    #[arg(long)]
    peptides: PathBuf,
    /// Writes `<prefix>.mgf` and `<prefix>.key.tsv`.
    #[arg(long)]
    out_prefix: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    signal_fraction: f64,
    #[arg(long, default_value_t = 0)]
    noise_peaks: usize,
    #[arg(long, default_value_t = 0.0)]
    mz_jitter: f64,
    /// uniform or rank-biased.
    #[arg(long, default_value = "rank-biased")]
    intensity_model: String,
    #[arg(long, default_value_t = 2)]
    charge: u8,
    /// Declare {+2,+3} instead of the true charge.
    #[arg(long)]
    ambiguous: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn thread_pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

fn load_spectra(path: &Path, cfg: &RunConfig) -> CliResult<Vec<ProcessedSpectrum>> {
    let format = SpectrumFormat::from_path(path)?;
    let raw = parse_spectra(path, format)?;
    raw.iter()
        .map(|r| ProcessedSpectrum::from_raw(r, cfg.bins, cfg.lambda).map_err(CliError::from))
        .collect()
}

fn cmd_digest(fasta: &Path, out: &Path, args: &ConfigArgs) -> CliResult {
    let cfg = args.resolve()?;
    let pool = thread_pool(cfg.threads)?;
    let db = pool.install(|| build_database(fasta, &ResidueMassTable::default(), &cfg.digest_rules()))?;
    let mut w = create(out)?;
    w.write_all(cfg.comment_header("digest").as_bytes())?;
    db.write_tsv(&mut w)?;
    w.flush()?;
    log::info!("{} peptides written to {}", db.len(), out.display());
    Ok(())
}

fn cmd_search(spectra: &Path, fasta: &Path, prefix: &Path, args: &ConfigArgs) -> CliResult {
    let cfg = args.resolve()?;
    print!("{}", cfg.to_toml());
    let table = ResidueMassTable::default();
    let rules = cfg.digest_rules();
    let proteins = read_fasta(fasta)?;
    let spectra = load_spectra(spectra, &cfg)?;
    let pool = thread_pool(cfg.threads)?;
    let out = pool.install(|| -> CliResult<_> {
        let target = PeptideDatabase::from_proteins(&proteins, &table, &rules, Provenance::Target)?;
        let decoy = decoys_from_proteins(&proteins, cfg.decoy_seed, &table, &rules, &target)?;
        log::info!(
            "{} spectra, {} target and {} decoy peptides",
            spectra.len(),
            target.len(),
            decoy.len()
        );
        Ok(run_search(&spectra, &target, &decoy, &cfg.search())?)
    })?;
    if out.unmatched_target() > 0 {
        log::warn!("{} spectra had no target candidate", out.unmatched_target());
    }
    let header = cfg.comment_header("search");
    for (suffix, psms) in [(".target.tsv", &out.target), (".decoy.tsv", &out.decoy)] {
        let path = with_suffix(prefix, suffix);
        let mut w = create(&path)?;
        w.write_all(header.as_bytes())?;
        write_psms(&mut w, psms.iter().flatten())?;
        w.flush()?;
    }
    Ok(())
}

/// Highest-scoring PSM per spectrum, in order of first appearance.
fn best_per_spectrum(psms: Vec<Psm>) -> Vec<Psm> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut best: Vec<Psm> = Vec::new();
    for p in psms {
        match index.get(&p.spectrum_id) {
            Some(&i) if best[i].score >= p.score => {}
            Some(&i) => best[i] = p,
            None => {
                index.insert(p.spectrum_id.clone(), best.len());
                best.push(p);
            }
        }
    }
    best
}

fn cmd_evaluate(target: &Path, decoy: &Path, prefix: &Path, smoothed: bool) -> CliResult {
    let read = |path: &Path| -> CliResult<Vec<Psm>> {
        let psms = read_psms(open(path)?, &path.display().to_string())?;
        Ok(best_per_spectrum(psms))
    };
    let targets = read(target)?;
    let decoys = read(decoy)?;
    let mode = if smoothed { PValueMode::Smoothed } else { PValueMode::Strict };
    let table = evaluate(&targets, &decoys, &default_grid(), mode)?;
    let header = format!(
        "# didea evaluate {}\n# target = \"{}\"\n# decoy = \"{}\"\n# p_value_mode = \"{}\"\n",
        env!("CARGO_PKG_VERSION"),
        target.display(),
        decoy.display(),
        if smoothed { "smoothed" } else { "strict" },
    );
    let mut w = create(&with_suffix(prefix, ".psms.tsv"))?;
    w.write_all(header.as_bytes())?;
    table.write_rows_tsv(&mut w)?;
    w.flush()?;
    let mut w = create(&with_suffix(prefix, ".curve.csv"))?;
    w.write_all(header.as_bytes())?;
    table.write_curve_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Peptides from a plain list or a `digest` table: first column, skipping
/// comments and the header row.
fn read_peptide_list(path: &Path) -> CliResult<Vec<Peptide>> {
    let table = ResidueMassTable::default();
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let seq = line.split('\t').next().unwrap_or_default();
        if seq == "peptide" {
            continue;
        }
        let peptide = Peptide::new(seq, &table)
            .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        out.push(peptide);
    }
    Ok(out)
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let cfg = a.config.resolve()?;
    let params = SynthParams {
        seed: a.seed,
        signal_peaks_fraction: a.signal_fraction,
        noise_peak_count: a.noise_peaks,
        mz_jitter_sd: a.mz_jitter,
        intensity_model: a.intensity_model.parse::<IntensityModel>()?,
        charge: a.charge,
        ambiguous_charge: a.ambiguous,
        delta: cfg.delta,
    };
    params.validate()?;
    let peptides = read_peptide_list(&a.peptides)?;
    let (spectra, key) = synthesize_batch(&peptides, &params)?;
    let header = format!(
        "{}# seed = {}\n# signal_fraction = {}\n# noise_peaks = {}\n# mz_jitter = {}\n# intensity_model = \"{}\"\n# charge = {}\n# ambiguous = {}\n",
        cfg.comment_header("synth"),
        params.seed,
        params.signal_peaks_fraction,
        params.noise_peak_count,
        params.mz_jitter_sd,
        params.intensity_model,
        params.charge,
        params.ambiguous_charge,
    );
    let mut w = create(&with_suffix(&a.out_prefix, ".mgf"))?;
    w.write_all(header.as_bytes())?;
    write_mgf(&mut w, &spectra)?;
    w.flush()?;
    let mut w = create(&with_suffix(&a.out_prefix, ".key.tsv"))?;
    w.write_all(header.as_bytes())?;
    write_key(&mut w, &key)?;
    w.flush()?;
    Ok(())
}

fn cmd_score(
    sequence: &str,
    spectra: &Path,
    id: Option<&str>,
    oracle: bool,
    args: &ConfigArgs,
) -> CliResult {
    let cfg = args.resolve()?;
    let scoring = cfg.scoring();
    let peptide = Peptide::new(sequence, &ResidueMassTable::default())?;
    let all = load_spectra(spectra, &cfg)?;
    let spectrum = match id {
        Some(id) => all.iter().find(|s| s.id == id),
        None => all.first(),
    }
    .ok_or_else(|| CliError::Input(format!("no matching spectrum in {}", spectra.display())))?;

    let score = didea_score_detail(&peptide, spectrum, &scoring)?;
    let model = match score.model {
        ScoredModel::Charge(z) | ScoredModel::MaxOverCharges { best: z } => ChargeModel::Charge(z),
        ScoredModel::Mixture => ChargeModel::Mixture,
    };
    let profile = shift_profile(&peptide, spectrum, model, &scoring)?;

    let mut out = io::stdout().lock();
    writeln!(out, "spectrum\t{}", spectrum.id)?;
    writeln!(out, "peptide\t{peptide}")?;
    writeln!(out, "charges\t{}", spectrum.charge_set)?;
    writeln!(out, "model\t{}", score.model)?;
    writeln!(out, "theta\t{:.6}", score.theta)?;
    if spectrum.charge_set.is_ambiguous() {
        let (p2, p3) = charge_posterior(&peptide, spectrum, &scoring)?;
        writeln!(out, "charge_posterior\t+2={p2:.6}\t+3={p3:.6}")?;
    }
    if oracle {
        let oracle_model = match model {
            ChargeModel::Charge(z) => OracleModel::Charge(z),
            ChargeModel::Mixture => OracleModel::Mixture,
        };
        let result = brute_force_posterior(&peptide, spectrum, oracle_model, &scoring)?;
        writeln!(out, "oracle_theta\t{:.6}", result.log_posterior_zero)?;
        if let Some((p2, p3)) = result.charge_posterior {
            writeln!(out, "oracle_charge_posterior\t+2={p2:.6}\t+3={p3:.6}")?;
        }
    }
    writeln!(out, "tau\ta\tposterior")?;
    for (tau, (a, p)) in profile.shifts().zip(profile.values().iter().zip(profile.posterior())) {
        writeln!(out, "{tau}\t{a:.6}\t{p:.6}")?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Digest { fasta, out, config } => cmd_digest(&fasta, &out, &config),
        Command::Search { spectra, fasta, out_prefix, config } => {
            cmd_search(&spectra, &fasta, &out_prefix, &config)
        }
        Command::Evaluate { target, decoy, out_prefix, smoothed } => {
            cmd_evaluate(&target, &decoy, &out_prefix, smoothed)
        }
        Command::Synth(args) => cmd_synth(&args),
        Command::Score { peptide, spectra, id, oracle, config } => {
            cmd_score(&peptide, &spectra, id.as_deref(), oracle, &config)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::Usage(String::new()).exit_code())
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
