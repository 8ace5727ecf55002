//! File formats and run persistence.

pub mod fasta;
pub mod manifest;
pub mod pdb;
pub mod runlog;

pub use fasta::{parse_fasta, FastaError, FastaRecord};
pub use manifest::{DatasetManifest, ManifestEntry, ManifestError};
pub use pdb::{parse_pdb_ca, parse_pdb_ca_detailed, write_pdb_ca, PdbError, PdbStructure};
pub use runlog::{
    load_run, EventBody, LoadedRun, RunEvent, RunLogError, RunLogSink, RunLogWriter, EVENTS_FILE,
};
