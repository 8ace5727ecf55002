//! Cα-only PDB reading and writing.

use thiserror::Error;

use crate::seq::{Sequence, ALPHABET};
use crate::structure::StructureModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PdbError {
    #[error("no CA atoms found")]
    NoCaAtoms,
    #[error("malformed ATOM record on line {0}")]
    MalformedAtomLine(usize),
}

/// Parsed Cα trace with the residue labels it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PdbStructure {
    pub model: StructureModel,
    pub chain: char,
    /// `(resSeq, insertion code)` per residue, in file order.
    pub residues: Vec<(i32, char)>,
    /// One-letter residue codes; `None` when any residue name is non-standard.
    pub sequence: Option<Sequence>,
    /// Chains present in the file besides the one returned.
    pub skipped_chains: Vec<char>,
}

const THREE_LETTER: [&str; 20] = [
    "ALA", "CYS", "ASP", "GLU", "PHE", "GLY", "HIS", "ILE", "LYS", "LEU", "MET", "ASN", "PRO",
    "GLN", "ARG", "SER", "THR", "VAL", "TRP", "TYR",
];

fn one_letter(name: &str) -> Option<u8> {
    THREE_LETTER
        .iter()
        .position(|&n| n == name)
        .map(|i| ALPHABET[i])
}

fn three_letter(residue: u8) -> &'static str {
    ALPHABET
        .iter()
        .position(|&r| r == residue)
        .map_or("UNK", |i| THREE_LETTER[i])
}

fn column(line: &str, from: usize, to: usize) -> Option<&str> {
    line.get(from - 1..to.min(line.len()))
}

pub fn parse_pdb_ca(bytes: &[u8], bfactor_as_plddt: bool) -> Result<StructureModel, PdbError> {
    parse_pdb_ca_detailed(bytes, bfactor_as_plddt).map(|p| p.model)
}

/// Reads one Cα per residue from the ATOM records of the first chain of the
/// first model. Alternate locations other than blank and `A` are ignored.
/// With `bfactor_as_plddt`, B-factors become pLDDT when all lie in [0, 100].
pub fn parse_pdb_ca_detailed(
    bytes: &[u8],
    bfactor_as_plddt: bool,
) -> Result<PdbStructure, PdbError> {
    let text = String::from_utf8_lossy(bytes);
    let mut chain: Option<char> = None;
    let mut skipped_chains = Vec::new();
    let mut residues: Vec<(i32, char)> = Vec::new();
    let mut coords = Vec::new();
    let mut bfactors: Vec<Option<f64>> = Vec::new();
    let mut names: Vec<Option<u8>> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") || column(line, 13, 16) != Some(" CA ") {
            continue;
        }
        if line.len() < 54 {
            return Err(PdbError::MalformedAtomLine(line_no));
        }
        let alt = line.as_bytes()[16] as char;
        if alt != ' ' && alt != 'A' {
            continue;
        }
        let this_chain = line.as_bytes()[21] as char;
        match chain {
            None => chain = Some(this_chain),
            Some(c) if c != this_chain => {
                if !skipped_chains.contains(&this_chain) {
                    skipped_chains.push(this_chain);
                }
                continue;
            }
            _ => {}
        }
        let res_seq: i32 = column(line, 23, 26)
            .and_then(|s| s.trim().parse().ok())
            .ok_or(PdbError::MalformedAtomLine(line_no))?;
        let icode = line.as_bytes()[26] as char;
        if residues.contains(&(res_seq, icode)) {
            continue;
        }
        let mut xyz = [0.0; 3];
        for (k, v) in xyz.iter_mut().enumerate() {
            *v = column(line, 31 + 8 * k, 38 + 8 * k)
                .and_then(|s| s.trim().parse().ok())
                .filter(|x: &f64| x.is_finite())
                .ok_or(PdbError::MalformedAtomLine(line_no))?;
        }
        residues.push((res_seq, icode));
        coords.push(xyz);
        bfactors.push(column(line, 61, 66).and_then(|s| s.trim().parse().ok()));
        names.push(column(line, 18, 20).and_then(|s| one_letter(s.trim())));
    }

    if coords.is_empty() {
        return Err(PdbError::NoCaAtoms);
    }
    let plddt = if bfactor_as_plddt {
        bfactors
            .iter()
            .map(|b| b.filter(|v| (0.0..=100.0).contains(v)))
            .collect::<Option<Vec<f64>>>()
    } else {
        None
    };
    let sequence = names
        .into_iter()
        .collect::<Option<Vec<u8>>>()
        .and_then(|b| Sequence::new(String::from_utf8(b).ok()?).ok());
    Ok(PdbStructure {
        model: StructureModel {
            ca_coords: coords,
            plddt,
            source_id: "pdb".into(),
        },
        chain: chain.unwrap_or('A'),
        residues,
        sequence,
        skipped_chains,
    })
}

/// Writes a Cα-only PDB, numbering residues from 1 on chain A. pLDDT, when
/// present, goes into the B-factor column.
pub fn write_pdb_ca(model: &StructureModel, sequence: Option<&Sequence>) -> String {
    let mut out = String::new();
    for (i, c) in model.ca_coords.iter().enumerate() {
        let name = sequence
            .and_then(|s| s.as_bytes().get(i))
            .map_or("UNK", |&r| three_letter(r));
        let b = model
            .plddt
            .as_ref()
            .and_then(|p| p.get(i))
            .copied()
            .unwrap_or(0.0);
        out.push_str(&format!(
            "ATOM  {:>5}  CA  {:>3} A{:>4}    {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}           C\n",
            i + 1,
            name,
            i + 1,
            c[0],
            c[1],
            c[2],
            1.0,
            b
        ));
    }
    out.push_str("END\n");
    out
}
