use thiserror::Error;

use crate::seq::{parse_sequence, Sequence, SequenceError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FastaError {
    #[error("empty FASTA file")]
    EmptyFile,
    #[error("sequence data before the first header on line {0}")]
    MissingHeader(usize),
    #[error("record {header:?}: {source}")]
    InvalidRecord {
        header: String,
        source: SequenceError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub header: String,
    pub sequence: Sequence,
}

/// Parses FASTA text. Wrapped sequence lines are joined per record.
pub fn parse_fasta(bytes: &[u8]) -> Result<Vec<FastaRecord>, FastaError> {
    let text = String::from_utf8_lossy(bytes);
    let mut records = Vec::new();
    let mut current: Option<(String, String)> = None;
    let finish = |(header, body): (String, String)| {
        parse_sequence(&body)
            .map(|sequence| FastaRecord {
                header: header.clone(),
                sequence,
            })
            .map_err(|source| FastaError::InvalidRecord { header, source })
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(header) = line.strip_prefix('>') {
            if let Some(done) = current.take() {
                records.push(finish(done)?);
            }
            current = Some((header.trim().to_string(), String::new()));
        } else if !line.is_empty() {
            match &mut current {
                Some((_, body)) => {
                    body.push_str(line);
                    body.push('\n');
                }
                None => return Err(FastaError::MissingHeader(i + 1)),
            }
        }
    }
    if let Some(done) = current.take() {
        records.push(finish(done)?);
    }
    if records.is_empty() {
        return Err(FastaError::EmptyFile);
    }
    Ok(records)
}
