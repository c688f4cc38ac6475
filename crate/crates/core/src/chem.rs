//! Residue masses, peptide ion ladders, tryptic digestion and peptide databases.
//!
//! All masses in this module are integer Daltons: every residue mass is the
//! monoisotopic value rounded to the nearest whole Dalton.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// The twenty standard amino-acid letters.
pub const STANDARD_AMINO_ACIDS: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

/// Mass of water added to the residue sum to form an intact peptide.
pub const WATER_MASS: u32 = 18;

/// Longest peptide accepted anywhere in the pipeline.
pub const MAX_PEPTIDE_LENGTH: usize = 50;

/// Carbamidomethylation of cysteine.
pub const CARBAMIDOMETHYL_C: i32 = 57;

// Monoisotopic residue masses, rounded to the nearest Dalton.
const RESIDUE_MASSES: [(u8, u32); 20] = [
    (b'G', 57),  // 57.02146
    (b'A', 71),  // 71.03711
    (b'S', 87),  // 87.03203
    (b'P', 97),  // 97.05276
    (b'V', 99),  // 99.06841
    (b'T', 101), // 101.04768
    (b'C', 103), // 103.00919
    (b'L', 113), // 113.08406
    (b'I', 113), // 113.08406
    (b'N', 114), // 114.04293
    (b'D', 115), // 115.02694
    (b'Q', 128), // 128.05858
    (b'K', 128), // 128.09496
    (b'E', 129), // 129.04259
    (b'M', 131), // 131.04049
    (b'H', 137), // 137.05891
    (b'F', 147), // 147.06841
    (b'R', 156), // 156.10111
    (b'Y', 163), // 163.06333
    (b'W', 186), // 186.07931
];

#[inline]
fn slot(letter: u8) -> Option<usize> {
    letter
        .is_ascii_uppercase()
        .then(|| (letter - b'A') as usize)
}

/// Integer residue masses with static modifications folded in.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidueMassTable {
    masses: [Option<u32>; 26],
    static_mods: Vec<(u8, i32)>,
}

impl Default for ResidueMassTable {
    /// Standard residues with carbamidomethyl cysteine.
    fn default() -> Self {
        let mut table = Self::unmodified();
        table
            .add_static_mod(b'C', CARBAMIDOMETHYL_C)
            .expect("C+57 is valid");
        table
    }
}

impl ResidueMassTable {
    pub fn unmodified() -> Self {
        let mut masses = [None; 26];
        for &(aa, m) in RESIDUE_MASSES.iter() {
            masses[(aa - b'A') as usize] = Some(m);
        }
        ResidueMassTable {
            masses,
            static_mods: Vec::new(),
        }
    }

    /// Shift the mass of `letter` by `offset` Daltons. Offsets accumulate.
    pub fn add_static_mod(&mut self, letter: u8, offset: i32) -> Result<()> {
        let idx = slot(letter)
            .filter(|&i| self.masses[i].is_some())
            .ok_or_else(|| Error::invalid(format!("unknown residue '{}'", letter as char)))?;
        let current = self.masses[idx].unwrap() as i64;
        let updated = current + offset as i64;
        if updated <= 0 {
            return Err(Error::config(format!(
                "static modification {offset:+} makes '{}' non-positive",
                letter as char
            )));
        }
        self.masses[idx] = Some(updated as u32);
        self.static_mods.push((letter, offset));
        Ok(())
    }

    pub fn static_mods(&self) -> &[(u8, i32)] {
        &self.static_mods
    }

    /// Residue mass of `letter`, including static modifications.
    pub fn residue_mass(&self, letter: u8) -> Result<u32> {
        slot(letter)
            .and_then(|i| self.masses[i])
            .ok_or_else(|| Error::invalid(format!("unknown residue '{}'", letter as char)))
    }

    pub fn is_standard(&self, letter: u8) -> bool {
        slot(letter).and_then(|i| self.masses[i]).is_some()
    }
}

/// A peptide together with its b-ion (prefix) and y-ion (suffix) neutral mass ladders.
///
/// For a sequence of length `n`, `prefix_masses[t]` is the residue mass of the
/// first `t` residues and `suffix_masses[t]` that of the last `n - t`, so
/// `prefix_masses[t] + suffix_masses[t]` is the total residue mass for every `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Peptide {
    sequence: String,
    prefix_masses: Vec<u32>,
    suffix_masses: Vec<u32>,
}

impl Peptide {
    pub fn new(sequence: &str, table: &ResidueMassTable) -> Result<Self> {
        build_ladders(sequence, table)
    }

    pub fn sequence(&self) -> &str {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// `N_0 ..= N_n`.
    pub fn prefix_masses(&self) -> &[u32] {
        &self.prefix_masses
    }

    /// `C_0 ..= C_n`.
    pub fn suffix_masses(&self) -> &[u32] {
        &self.suffix_masses
    }

    pub fn residue_mass(&self) -> u32 {
        self.prefix_masses[self.len()]
    }

    /// Residue sum plus water.
    pub fn neutral_mass(&self) -> u32 {
        self.residue_mass() + WATER_MASS
    }
}

impl fmt::Display for Peptide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.sequence)
    }
}

pub fn residue_mass(letter: u8, table: &ResidueMassTable) -> Result<u32> {
    table.residue_mass(letter)
}

pub fn neutral_peptide_mass(peptide: &Peptide) -> Result<u32> {
    if peptide.is_empty() {
        return Err(Error::invalid("empty peptide has no mass"));
    }
    Ok(peptide.neutral_mass())
}

/// Build the prefix and suffix ladders for `sequence`.
pub fn build_ladders(sequence: &str, table: &ResidueMassTable) -> Result<Peptide> {
    let bytes = sequence.as_bytes();
    if bytes.is_empty() {
        return Err(Error::invalid("empty peptide sequence"));
    }
    if bytes.len() > MAX_PEPTIDE_LENGTH {
        return Err(Error::invalid(format!(
            "peptide {sequence} longer than {MAX_PEPTIDE_LENGTH} residues"
        )));
    }
    let residues = bytes
        .iter()
        .map(|&aa| table.residue_mass(aa))
        .collect::<Result<Vec<_>>>()?;

    let n = residues.len();
    let mut prefix = vec![0u32; n + 1];
    for t in 1..=n {
        prefix[t] = prefix[t - 1] + residues[t - 1];
    }
    let mut suffix = vec![0u32; n + 1];
    for t in (0..n).rev() {
        suffix[t] = suffix[t + 1] + residues[t];
    }
    Ok(Peptide {
        sequence: sequence.to_string(),
        prefix_masses: prefix,
        suffix_masses: suffix,
    })
}

/// Fully-tryptic digestion settings.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DigestRules {
    pub missed_cleavages: usize,
    pub min_length: usize,
    pub max_length: usize,
}

impl Default for DigestRules {
    fn default() -> Self {
        DigestRules {
            missed_cleavages: 0,
            min_length: 1,
            max_length: MAX_PEPTIDE_LENGTH,
        }
    }
}

impl DigestRules {
    pub fn validate(&self) -> Result<()> {
        if self.min_length == 0 || self.min_length > self.max_length {
            return Err(Error::config(format!(
                "peptide length bounds [{}, {}] are empty",
                self.min_length, self.max_length
            )));
        }
        if self.max_length > MAX_PEPTIDE_LENGTH {
            return Err(Error::config(format!(
                "max peptide length {} exceeds {MAX_PEPTIDE_LENGTH}",
                self.max_length
            )));
        }
        Ok(())
    }
}

/// Trypsin: cleave C-terminal to K or R unless the next residue is P.
pub fn digest(protein: &str, rules: &DigestRules) -> Vec<String> {
    let seq = protein.as_bytes();
    if seq.is_empty() {
        return Vec::new();
    }

    // Fragment boundaries: 0, every cleavage site, len.
    let mut bounds = vec![0usize];
    for i in 0..seq.len() - 1 {
        if matches!(seq[i], b'K' | b'R') && seq[i + 1] != b'P' {
            bounds.push(i + 1);
        }
    }
    bounds.push(seq.len());

    let mut out = Vec::new();
    for start in 0..bounds.len() - 1 {
        for missed in 0..=rules.missed_cleavages {
            let end = start + 1 + missed;
            if end >= bounds.len() {
                break;
            }
            let (a, b) = (bounds[start], bounds[end]);
            let len = b - a;
            if len >= rules.min_length && len <= rules.max_length {
                out.push(protein[a..b].to_string());
            }
        }
    }
    out
}

/// One FASTA record with a validated, uppercased sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Protein {
    pub header: String,
    pub sequence: String,
}

/// Parse FASTA from a reader. `source` names the input in error messages.
///
/// Proteins containing `*` or any non-standard letter are skipped with a warning.
pub fn parse_fasta<R: BufRead>(reader: R, source: &str) -> Result<Vec<Protein>> {
    fn finish(current: Option<(String, String, usize)>, out: &mut Vec<Protein>, source: &str) {
        let Some((header, sequence, line)) = current else {
            return;
        };
        if let Some(bad) = sequence
            .bytes()
            .find(|b| !STANDARD_AMINO_ACIDS.contains(b))
        {
            log::warn!(
                "{source}:{line}: skipping protein '{header}' with invalid residue '{}'",
                bad as char
            );
            return;
        }
        out.push(Protein { header, sequence });
    }

    let mut proteins = Vec::new();
    let mut current: Option<(String, String, usize)> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('>') {
            finish(current.take(), &mut proteins, source);
            current = Some((header.trim().to_string(), String::new(), line_no));
        } else {
            let Some((_, seq, _)) = current.as_mut() else {
                return Err(Error::parse(
                    format!("{source}:{line_no}"),
                    "sequence data before the first '>' header",
                ));
            };
            seq.extend(
                trimmed
                    .chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| c.to_ascii_uppercase()),
            );
        }
    }
    finish(current, &mut proteins, source);
    Ok(proteins)
}

pub fn read_fasta(path: &Path) -> Result<Vec<Protein>> {
    let file = File::open(path).map_err(|e| {
        Error::parse(path.display().to_string(), format!("cannot open FASTA: {e}"))
    })?;
    parse_fasta(BufReader::new(file), &path.display().to_string())
}

/// Where a database's peptides came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Target,
    Decoy { seed: u64 },
}

/// Deduplicated peptides sorted by `(neutral mass, sequence)`.
#[derive(Clone, Debug)]
pub struct PeptideDatabase {
    peptides: Vec<Peptide>,
    masses: Vec<u32>,
    provenance: Provenance,
}

impl PeptideDatabase {
    pub fn from_sequences<I, S>(
        sequences: I,
        table: &ResidueMassTable,
        provenance: Provenance,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let unique: BTreeSet<String> = sequences
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        let mut peptides = unique
            .iter()
            .map(|s| build_ladders(s, table))
            .collect::<Result<Vec<_>>>()?;
        peptides.sort_by(|a, b| {
            a.neutral_mass()
                .cmp(&b.neutral_mass())
                .then_with(|| a.sequence.cmp(&b.sequence))
        });
        let masses = peptides.iter().map(Peptide::neutral_mass).collect();
        Ok(PeptideDatabase {
            peptides,
            masses,
            provenance,
        })
    }

    pub fn from_proteins(
        proteins: &[Protein],
        table: &ResidueMassTable,
        rules: &DigestRules,
        provenance: Provenance,
    ) -> Result<Self> {
        rules.validate()?;
        let digested: Vec<Vec<String>> = proteins
            .par_iter()
            .map(|p| digest(&p.sequence, rules))
            .collect();
        Self::from_sequences(digested.into_iter().flatten(), table, provenance)
    }

    pub fn peptides(&self) -> &[Peptide] {
        &self.peptides
    }

    pub fn len(&self) -> usize {
        self.peptides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peptides.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn contains(&self, sequence: &str) -> bool {
        self.peptides.iter().any(|p| p.sequence == sequence)
    }

    /// Peptides with neutral mass in the closed window `[lo, hi]`.
    pub fn mass_range(&self, lo: f64, hi: f64) -> &[Peptide] {
        let start = self.masses.partition_point(|&m| (m as f64) < lo);
        let end = self.masses.partition_point(|&m| (m as f64) <= hi);
        &self.peptides[start..end.max(start)]
    }

    /// Peptides with neutral mass in the open window `(lo, hi)`.
    pub fn mass_range_open(&self, lo: f64, hi: f64) -> &[Peptide] {
        let start = self.masses.partition_point(|&m| (m as f64) <= lo);
        let end = self.masses.partition_point(|&m| (m as f64) < hi);
        &self.peptides[start..end.max(start)]
    }

    /// One `peptide<TAB>neutral_mass` row per peptide, in index order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "peptide\tneutral_mass")?;
        for p in &self.peptides {
            writeln!(w, "{}\t{}", p.sequence, p.neutral_mass())?;
        }
        Ok(())
    }
}

pub fn build_database(
    fasta_path: &Path,
    table: &ResidueMassTable,
    rules: &DigestRules,
) -> Result<PeptideDatabase> {
    let proteins = read_fasta(fasta_path)?;
    PeptideDatabase::from_proteins(&proteins, table, rules, Provenance::Target)
}

/// Per-protein Fisher-Yates shuffle driven by a single seeded stream.
pub fn shuffle_proteome(proteins: &[Protein], seed: u64) -> Vec<Protein> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    proteins
        .iter()
        .map(|p| {
            let mut residues = p.sequence.clone().into_bytes();
            residues.shuffle(&mut rng);
            Protein {
                header: format!("decoy_{}", p.header),
                sequence: String::from_utf8(residues).expect("ASCII residues"),
            }
        })
        .collect()
}

/// Digest a shuffled copy of `proteins` and drop every sequence present in `target`.
pub fn decoys_from_proteins(
    proteins: &[Protein],
    seed: u64,
    table: &ResidueMassTable,
    rules: &DigestRules,
    target: &PeptideDatabase,
) -> Result<PeptideDatabase> {
    rules.validate()?;
    let shuffled = shuffle_proteome(proteins, seed);
    let target_seqs: HashSet<&str> = target.peptides.iter().map(|p| p.sequence()).collect();
    let digested: Vec<String> = shuffled
        .par_iter()
        .flat_map_iter(|p| digest(&p.sequence, rules))
        .collect();
    let kept = digested
        .into_iter()
        .filter(|s| !target_seqs.contains(s.as_str()));
    PeptideDatabase::from_sequences(kept, table, Provenance::Decoy { seed })
}

pub fn generate_decoys(
    fasta_path: &Path,
    seed: u64,
    table: &ResidueMassTable,
    rules: &DigestRules,
    target: &PeptideDatabase,
) -> Result<PeptideDatabase> {
    let proteins = read_fasta(fasta_path)?;
    decoys_from_proteins(&proteins, seed, table, rules, target)
}
