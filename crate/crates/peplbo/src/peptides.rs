//! Peptide sequences and physicochemical descriptors.
//!
//! Sequences are validated strings over the 20 canonical amino acids. The
//! descriptors computed here — Boman index, net charge at a given pH and
//! Kyte-Doolittle hydrophobicity — are the properties used to organize
//! latent spaces and to feed oracles. All operations are pure.

pub mod scales;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;

/// Maximum sequence length accepted by the parser.
pub const MAX_SEQUENCE_LEN: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeptideError {
    #[error("invalid residue '{ch}' at position {position}")]
    InvalidResidue { position: usize, ch: char },
    #[error("empty sequence")]
    EmptySequence,
    #[error("sequence length {0} exceeds maximum {MAX_SEQUENCE_LEN}")]
    TooLong(usize),
    #[error("pH {0} outside (0, 14)")]
    PhOutOfRange(f64),
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
    #[error("feature '{0}' has zero variance")]
    DegenerateFeature(String),
    #[error("duplicate feature name '{0}'")]
    DuplicateFeature(String),
    #[error("non-finite value for feature '{0}'")]
    NonFiniteValue(String),
    #[error("need at least 2 rows to fit normalization, got {0}")]
    TooFewRows(usize),
    #[error("feature names do not match normalization stats")]
    NameMismatch,
}

/// One of the 20 canonical amino acids, in alphabetical one-letter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum AminoAcid {
    Ala, Cys, Asp, Glu, Phe, Gly, His, Ile, Lys, Leu,
    Met, Asn, Pro, Gln, Arg, Ser, Thr, Val, Trp, Tyr,
}

const CODES: [char; 20] = [
    'A', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'K', 'L',
    'M', 'N', 'P', 'Q', 'R', 'S', 'T', 'V', 'W', 'Y',
];

impl AminoAcid {
    pub fn from_code(c: char) -> Option<Self> {
        let upper = c.to_ascii_uppercase();
        CODES
            .iter()
            .position(|&x| x == upper)
            .map(|i| ALL_AMINO_ACIDS[i])
    }

    pub fn code(self) -> char {
        CODES[self as usize]
    }
}

pub const ALL_AMINO_ACIDS: [AminoAcid; 20] = [
    AminoAcid::Ala, AminoAcid::Cys, AminoAcid::Asp, AminoAcid::Glu, AminoAcid::Phe,
    AminoAcid::Gly, AminoAcid::His, AminoAcid::Ile, AminoAcid::Lys, AminoAcid::Leu,
    AminoAcid::Met, AminoAcid::Asn, AminoAcid::Pro, AminoAcid::Gln, AminoAcid::Arg,
    AminoAcid::Ser, AminoAcid::Thr, AminoAcid::Val, AminoAcid::Trp, AminoAcid::Tyr,
];

/// Validated peptide sequence (1 to [`MAX_SEQUENCE_LEN`] canonical residues).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sequence {
    residues: Vec<AminoAcid>,
}

impl Sequence {
    pub fn residues(&self) -> &[AminoAcid] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.residues {
            write!(f, "{}", r.code())?;
        }
        Ok(())
    }
}

impl FromStr for Sequence {
    type Err = PeptideError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sequence(s)
    }
}

impl TryFrom<String> for Sequence {
    type Error = PeptideError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_sequence(&s)
    }
}

impl From<Sequence> for String {
    fn from(s: Sequence) -> String {
        s.to_string()
    }
}

/// Parse a sequence, case-insensitively, rejecting non-canonical residues.
pub fn parse_sequence(text: &str) -> Result<Sequence, PeptideError> {
    if text.is_empty() {
        return Err(PeptideError::EmptySequence);
    }
    let mut residues = Vec::with_capacity(text.len());
    for (position, ch) in text.chars().enumerate() {
        match AminoAcid::from_code(ch) {
            Some(aa) => residues.push(aa),
            None => return Err(PeptideError::InvalidResidue { position, ch }),
        }
    }
    if residues.len() > MAX_SEQUENCE_LEN {
        return Err(PeptideError::TooLong(residues.len()));
    }
    Ok(Sequence { residues })
}

/// Mean Kyte-Doolittle hydropathy over the residues.
pub fn kd_hydrophobicity(seq: &Sequence) -> f64 {
    let sum: f64 = seq
        .residues
        .iter()
        .map(|&r| scales::KYTE_DOOLITTLE[r as usize])
        .sum();
    sum / seq.len() as f64
}

/// Boman index: per-residue solubility values summed and divided by length.
pub fn boman_index(seq: &Sequence) -> f64 {
    let sum: f64 = seq
        .residues
        .iter()
        .map(|&r| scales::BOMAN[r as usize])
        .sum();
    sum / seq.len() as f64
}

/// Net charge via Henderson-Hasselbalch over ionizable side chains plus,
/// by default, the terminal amino and carboxyl groups (Lehninger pKa set).
pub fn net_charge(seq: &Sequence, ph: f64) -> Result<f64, PeptideError> {
    net_charge_with(seq, ph, true)
}

/// Net charge with the terminal contributions toggleable.
pub fn net_charge_with(
    seq: &Sequence,
    ph: f64,
    include_termini: bool,
) -> Result<f64, PeptideError> {
    if !(ph > 0.0 && ph < 14.0) {
        return Err(PeptideError::PhOutOfRange(ph));
    }
    let table = &scales::LEHNINGER_PKA;
    let mut counts = [0usize; 20];
    for &r in &seq.residues {
        counts[r as usize] += 1;
    }
    let mut charge = 0.0;
    for &(idx, pka, sign) in &table.side_chains {
        let n = counts[idx] as f64;
        if n > 0.0 {
            charge += n * sign * fractional_charge(ph, pka, sign);
        }
    }
    if include_termini {
        charge += fractional_charge(ph, table.n_terminus, 1.0);
        charge -= fractional_charge(ph, table.c_terminus, -1.0);
    }
    Ok(charge)
}

/// Degree of protonation relevant to the group's charged form.
fn fractional_charge(ph: f64, pka: f64, sign: f64) -> f64 {
    if sign > 0.0 {
        1.0 / (1.0 + 10f64.powf(ph - pka))
    } else {
        1.0 / (1.0 + 10f64.powf(pka - ph))
    }
}

/// Named numeric feature vector for a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl DescriptorVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self, PeptideError> {
        assert_eq!(names.len(), values.len(), "names/values length mismatch");
        let mut seen = std::collections::BTreeSet::new();
        for (n, v) in names.iter().zip(&values) {
            if !seen.insert(n.clone()) {
                return Err(PeptideError::DuplicateFeature(n.clone()));
            }
            if !v.is_finite() {
                return Err(PeptideError::NonFiniteValue(n.clone()));
            }
        }
        Ok(DescriptorVector { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

type FeatureFn = Arc<dyn Fn(&Sequence) -> Result<f64, PeptideError> + Send + Sync>;

/// Registry of named sequence features.
///
/// Built-ins: `boman`, `hydrophobicity`, and `charge_ph<value>` (for example
/// `charge_ph7.2`). Additional features can be registered with closures;
/// custom registrations shadow built-ins of the same name.
#[derive(Clone, Default)]
pub struct FeatureRegistry {
    custom: BTreeMap<String, FeatureFn>,
}

impl FeatureRegistry {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        id: impl Into<String>,
        f: impl Fn(&Sequence) -> Result<f64, PeptideError> + Send + Sync + 'static,
    ) {
        self.custom.insert(id.into(), Arc::new(f));
    }

    fn eval(&self, id: &str, seq: &Sequence) -> Result<f64, PeptideError> {
        if let Some(f) = self.custom.get(id) {
            return f(seq);
        }
        match id {
            "boman" => Ok(boman_index(seq)),
            "hydrophobicity" => Ok(kd_hydrophobicity(seq)),
            _ => {
                if let Some(rest) = id.strip_prefix("charge_ph") {
                    let ph: f64 = rest
                        .parse()
                        .map_err(|_| PeptideError::UnknownFeature(id.to_string()))?;
                    net_charge(seq, ph)
                } else {
                    Err(PeptideError::UnknownFeature(id.to_string()))
                }
            }
        }
    }

    /// Compute the requested features in order.
    pub fn compute(&self, seq: &Sequence, ids: &[String]) -> Result<DescriptorVector, PeptideError> {
        let mut values = Vec::with_capacity(ids.len());
        for id in ids {
            values.push(self.eval(id, seq)?);
        }
        DescriptorVector::new(ids.to_vec(), values)
    }
}

/// Compute a descriptor vector using the standard registry.
pub fn descriptor_vector(seq: &Sequence, ids: &[String]) -> Result<DescriptorVector, PeptideError> {
    FeatureRegistry::standard().compute(seq, ids)
}

/// Per-feature z-scoring statistics fitted on a training set.
///
/// The standard deviation uses the population convention (divide by N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    names: Vec<String>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl NormalizationStats {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    fn check_names(&self, dv: &DescriptorVector) -> Result<(), PeptideError> {
        if dv.names() != self.names.as_slice() {
            return Err(PeptideError::NameMismatch);
        }
        Ok(())
    }

    /// z-score a vector with the fitted statistics.
    pub fn apply(&self, dv: &DescriptorVector) -> Result<DescriptorVector, PeptideError> {
        self.check_names(dv)?;
        let values = dv
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        DescriptorVector::new(self.names.clone(), values)
    }

    /// Invert [`apply`](Self::apply).
    pub fn invert(&self, dv: &DescriptorVector) -> Result<DescriptorVector, PeptideError> {
        self.check_names(dv)?;
        let values = dv
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect();
        DescriptorVector::new(self.names.clone(), values)
    }
}

/// Fit per-feature mean and population standard deviation.
pub fn fit_normalization(data: &[DescriptorVector]) -> Result<NormalizationStats, PeptideError> {
    if data.len() < 2 {
        return Err(PeptideError::TooFewRows(data.len()));
    }
    let names = data[0].names().to_vec();
    for dv in data {
        if dv.names() != names.as_slice() {
            return Err(PeptideError::NameMismatch);
        }
    }
    let n = data.len() as f64;
    let k = names.len();
    let mut mean = vec![0.0; k];
    for dv in data {
        for (m, v) in mean.iter_mut().zip(dv.values()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; k];
    for dv in data {
        for ((s, v), m) in var.iter_mut().zip(dv.values()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let mut std = Vec::with_capacity(k);
    for (j, s) in var.iter().enumerate() {
        let sd = (s / n).sqrt();
        if sd == 0.0 {
            return Err(PeptideError::DegenerateFeature(names[j].clone()));
        }
        std.push(sd);
    }
    Ok(NormalizationStats { names, mean, std })
}

/// Seeded pool of random sequences for desk-scale experiments.
pub fn random_pool(seed: u64, count: usize, min_len: usize, max_len: usize) -> Vec<Sequence> {
    assert!(min_len >= 1 && min_len <= max_len && max_len <= MAX_SEQUENCE_LEN);
    let mut rng = rng_from_seed(seed);
    let mut pool = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    while pool.len() < count {
        let len = rng.gen_range(min_len..=max_len);
        let residues: Vec<AminoAcid> = (0..len)
            .map(|_| ALL_AMINO_ACIDS[rng.gen_range(0..20)])
            .collect();
        let seq = Sequence { residues };
        if seen.insert(seq.to_string()) {
            pool.push(seq);
        }
    }
    pool
}
