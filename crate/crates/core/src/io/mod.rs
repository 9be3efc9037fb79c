//! File formats of the pipeline: the binary matrix container, TSV
//! sidecars and tables, fixed-format reports, and the run configuration.

mod config;
mod matrix;
mod report;
mod tables;

pub use config::{DesignConfig, FitConfig, RunConfig, SelectConfig, StatsConfig};
pub use matrix::{read_matrix, read_matrix_csv, write_matrix, write_matrix_csv, MAGIC, VERSION};
pub use report::{format_sig, Report};
pub use tables::{
    read_genders, read_ids, read_latent_table, read_trials, read_voxel_coords, write_genders,
    write_ids, write_latent_table, write_table, write_trials, write_voxel_coords,
};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Write a file atomically: stage in a sibling temp file, then rename.
pub(crate) fn atomic_write(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    {
        let mut writer = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut writer)?;
        writer.flush()?;
    }
    tmp.persist(path).map_err(|e| crate::Error::Io(e.error))?;
    Ok(())
}
