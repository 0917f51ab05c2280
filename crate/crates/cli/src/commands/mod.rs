pub mod frechet;
pub mod gradcheck;
pub mod predict;
pub mod score;
pub mod toy;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Result;

pub use frechet::FrechetArgs;
pub use gradcheck::GradcheckArgs;
pub use predict::PredictArgs;
pub use score::ScoreArgs;
pub use toy::ToyArgs;

use synacc::datamodel::{ModelRecord, Split};

use crate::manifest::RunManifest;
use crate::output::write_atomic;

pub struct Global {
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Global {
    /// Writes the primary report to `--out`, or to stdout without it.
    pub fn emit(&self, bytes: &[u8]) -> Result<()> {
        match &self.out {
            Some(path) => write_atomic(path, bytes),
            None => {
                std::io::stdout().lock().write_all(bytes)?;
                Ok(())
            }
        }
    }
}

/// Directory that relative paths inside a records file are resolved against.
pub fn base_dir(records: &Path) -> &Path {
    records.parent().unwrap_or(Path::new(""))
}

/// `report.json` -> `report.<extension>`.
pub fn sibling(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}

/// Digests the prediction files a records file points at, for records whose
/// synthetic accuracy comes from a file.
pub fn record_prediction_inputs(manifest: &mut RunManifest, records: &[ModelRecord], base: &Path) -> Result<()> {
    for m in records.iter().filter(|m| m.syn_acc.is_none()) {
        for split in [Split::Train, Split::Syn] {
            if let Some(rel) = m.prediction_ref(split) {
                let path = base.join(rel);
                if path.exists() {
                    manifest.record_input(&path)?;
                }
            }
        }
    }
    Ok(())
}

pub fn csv_bytes<I, R, F>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = F>,
    F: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
