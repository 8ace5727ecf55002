//! Validated amino-acid sequences, residue ranges and step-size regimes.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::structure::StructureModel;

/// The twenty standard residues, in the order used by every table in this crate.
pub const ALPHABET: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("invalid residue {residue:?} at position {position}")]
    InvalidResidue { position: usize, residue: char },
    #[error("empty sequence")]
    EmptySequence,
}

/// Index of a residue letter in [`ALPHABET`].
pub fn residue_index(residue: u8) -> Option<usize> {
    ALPHABET.iter().position(|&r| r == residue)
}

/// A non-empty sequence over the standard 20-letter alphabet.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(String);

impl Sequence {
    /// Validates an already-clean string. Use [`parse_sequence`] for raw text.
    pub fn new(residues: impl Into<String>) -> Result<Self, SequenceError> {
        let residues = residues.into();
        if residues.is_empty() {
            return Err(SequenceError::EmptySequence);
        }
        for (i, c) in residues.chars().enumerate() {
            if !c.is_ascii() || residue_index(c as u8).is_none() {
                return Err(SequenceError::InvalidResidue {
                    position: i + 1,
                    residue: c,
                });
            }
        }
        Ok(Self(residues))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Residue at a 1-based position.
    pub fn residue(&self, position: usize) -> Option<u8> {
        position
            .checked_sub(1)
            .and_then(|i| self.0.as_bytes().get(i).copied())
    }

    /// Returns a copy with the given 0-based positions replaced.
    pub fn with_substitutions(&self, edits: &[(usize, u8)]) -> Sequence {
        let mut bytes = self.0.clone().into_bytes();
        for &(i, r) in edits {
            debug_assert!(residue_index(r).is_some());
            bytes[i] = r;
        }
        Sequence(String::from_utf8(bytes).expect("alphabet is ASCII"))
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence({})", self.0)
    }
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Sequence::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Normalizes free-form proposer output into a sequence.
///
/// Markdown fence lines and FASTA header lines are dropped, whitespace is
/// removed and everything is uppercased before validation.
pub fn parse_sequence(raw: &str) -> Result<Sequence, SequenceError> {
    let mut residues = String::with_capacity(raw.len());
    for line in raw.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("```") || trimmed.starts_with('>') {
            continue;
        }
        residues.extend(
            trimmed
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| c.to_ascii_uppercase()),
        );
    }
    Sequence::new(residues)
}

/// Number of substitutions between two sequences, or the two lengths when
/// they cannot be compared position by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditCount {
    Count(usize),
    LengthMismatch(usize, usize),
}

impl EditCount {
    pub fn count(self) -> Option<usize> {
        match self {
            EditCount::Count(n) => Some(n),
            EditCount::LengthMismatch(..) => None,
        }
    }
}

pub fn hamming_edits(a: &Sequence, b: &Sequence) -> EditCount {
    if a.len() != b.len() {
        return EditCount::LengthMismatch(a.len(), b.len());
    }
    EditCount::Count(
        a.as_bytes()
            .iter()
            .zip(b.as_bytes())
            .filter(|(x, y)| x != y)
            .count(),
    )
}

/// Inclusive 1-based residue interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueRange {
    pub start: usize,
    pub end: usize,
}

impl ResidueRange {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start >= 1 && start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, position: usize) -> bool {
        (self.start..=self.end).contains(&position)
    }

    /// 0-based indices covered by the range.
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start - 1..self.end
    }
}

/// Maximal runs of `true`, as ascending 1-based ranges.
pub fn contiguous_ranges(flags: &[bool]) -> Vec<ResidueRange> {
    let mut ranges = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &flag) in flags.iter().enumerate() {
        match (flag, open) {
            (true, None) => open = Some(i + 1),
            (false, Some(start)) => {
                ranges.push(ResidueRange::new(start, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        ranges.push(ResidueRange::new(start, flags.len()));
    }
    ranges
}

/// Textual cap on how many residues a proposer may change per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSizeRegime {
    Unconstrained,
    Conservative,
    Moderate,
    Aggressive,
    Drastic,
}

impl StepSizeRegime {
    pub const ALL: [StepSizeRegime; 5] = [
        StepSizeRegime::Unconstrained,
        StepSizeRegime::Conservative,
        StepSizeRegime::Moderate,
        StepSizeRegime::Aggressive,
        StepSizeRegime::Drastic,
    ];

    pub fn max_edits(self) -> Option<usize> {
        match self {
            StepSizeRegime::Unconstrained => None,
            StepSizeRegime::Conservative => Some(2),
            StepSizeRegime::Moderate => Some(5),
            StepSizeRegime::Aggressive => Some(10),
            StepSizeRegime::Drastic => Some(20),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepSizeRegime::Unconstrained => "unconstrained",
            StepSizeRegime::Conservative => "conservative",
            StepSizeRegime::Moderate => "moderate",
            StepSizeRegime::Aggressive => "aggressive",
            StepSizeRegime::Drastic => "drastic",
        }
    }

    /// True when `edits` breaks the regime's cap. A length change always does.
    pub fn is_violated_by(self, edits: EditCount) -> bool {
        match edits {
            EditCount::LengthMismatch(..) => true,
            EditCount::Count(n) => self.max_edits().is_some_and(|cap| n > cap),
        }
    }
}

impl fmt::Display for StepSizeRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StepSizeRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StepSizeRegime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown step-size regime {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("desired length {desired} does not match reference structure length {structure}")]
    LengthMismatch { desired: usize, structure: usize },
    #[error("ligand site {0} is outside 1..={1}")]
    LigandSiteOutOfRange(usize, usize),
    #[error("reference sequence length {0} does not match desired length {1}")]
    ReferenceSequenceLength(usize, usize),
}

/// Everything known about the design target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceContext {
    pub reference_sequence: Option<Sequence>,
    pub reference_structure: StructureModel,
    pub ligand_site_residues: Vec<usize>,
    pub desired_length: usize,
}

impl ReferenceContext {
    pub fn new(
        reference_sequence: Option<Sequence>,
        reference_structure: StructureModel,
        mut ligand_site_residues: Vec<usize>,
    ) -> Result<Self, ContextError> {
        let desired_length = reference_structure.len();
        if let Some(seq) = &reference_sequence {
            if seq.len() != desired_length {
                return Err(ContextError::ReferenceSequenceLength(
                    seq.len(),
                    desired_length,
                ));
            }
        }
        ligand_site_residues.sort_unstable();
        ligand_site_residues.dedup();
        if let Some(&bad) = ligand_site_residues
            .iter()
            .find(|&&p| p == 0 || p > desired_length)
        {
            return Err(ContextError::LigandSiteOutOfRange(bad, desired_length));
        }
        Ok(Self {
            reference_sequence,
            reference_structure,
            ligand_site_residues,
            desired_length,
        })
    }
}
