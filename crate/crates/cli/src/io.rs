use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use retromix::augment::{ReactionExample, RecordReader};
use retromix::chem::{parse_smiles, MolGraph};

use crate::error::CliError;

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<ReactionExample>, CliError> {
    RecordReader::new(open(path)?)
        .map(|r| r.map_err(|e| CliError::at(path, e.line, e.message)))
        .collect()
}

pub fn write_records(path: &Path, records: &[ReactionExample]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for r in records {
        writeln!(w, "{}", r.to_record()).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One molecule per non-blank line; the last tab-separated column is the SMILES.
pub fn read_molecules(path: &Path) -> Result<Vec<MolGraph>, CliError> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let smiles = line.rsplit('\t').next().unwrap_or(line);
        out.push(parse_smiles(smiles).map_err(|e| CliError::at(path, n + 1, e))?);
    }
    Ok(out)
}

/// `base` with `ext` appended to its file name.
pub fn sibling(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}
