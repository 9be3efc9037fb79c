//! Tab-separated tables: trials, voxel coordinates, id sidecars and
//! gender labels.

use std::path::Path;

use crate::design::{Condition, Trial, TrialTable};
use crate::error::{Error, Result};
use crate::latent::LatentTable;
use crate::sim::Gender;

fn parse_f64(path: &Path, lineno: usize, field: &str, cell: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        message: format!("line {lineno}: bad {field} '{cell}': {e}"),
    })
}

/// Write trials as TSV with header `onset_s duration_s condition stim_id`.
pub fn write_trials(path: impl AsRef<Path>, trials: &TrialTable) -> Result<()> {
    super::atomic_write(path.as_ref(), |w| {
        writeln!(w, "onset_s\tduration_s\tcondition\tstim_id")?;
        for t in trials.trials() {
            writeln!(
                w,
                "{:?}\t{:?}\t{}\t{}",
                t.onset_s,
                t.duration_s,
                t.condition.as_str(),
                t.stim_id.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    })
}

/// Read a trials TSV.
pub fn read_trials(path: impl AsRef<Path>) -> Result<TrialTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == "onset_s\tduration_s\tcondition\tstim_id" => {}
        _ => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: "missing trials header".into(),
            })
        }
    }
    let mut trials = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: format!("line {}: expected 4 fields, got {}", i + 1, fields.len()),
            });
        }
        let stim = fields[3].trim();
        trials.push(Trial {
            onset_s: parse_f64(path, i + 1, "onset", fields[0])?,
            duration_s: parse_f64(path, i + 1, "duration", fields[1])?,
            condition: Condition::parse(fields[2].trim())?,
            stim_id: (!stim.is_empty()).then(|| stim.to_string()),
        });
    }
    TrialTable::new(trials)
}

/// Write a generic TSV table with a header row.
pub fn write_table(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let rows: Vec<Vec<String>> = rows.into_iter().collect();
    super::atomic_write(path.as_ref(), |w| {
        writeln!(w, "{}", header.join("\t"))?;
        for row in &rows {
            writeln!(w, "{}", row.join("\t"))?;
        }
        Ok(())
    })
}

/// Write one id per line.
pub fn write_ids(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    super::atomic_write(path.as_ref(), |w| {
        for id in ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })
}

/// Read one id per line, skipping blank lines.
pub fn read_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Latent table = matrix container + id sidecar.
pub fn write_latent_table(
    matrix_path: impl AsRef<Path>,
    ids_path: impl AsRef<Path>,
    table: &LatentTable,
) -> Result<()> {
    super::write_matrix(matrix_path, table.codes())?;
    write_ids(ids_path, table.stim_ids())
}

/// Load a latent table from a matrix container and its id sidecar.
pub fn read_latent_table(
    matrix_path: impl AsRef<Path>,
    ids_path: impl AsRef<Path>,
) -> Result<LatentTable> {
    let codes = super::read_matrix(matrix_path)?;
    let ids = read_ids(ids_path)?;
    if ids.len() != codes.nrows() {
        return Err(Error::CountMismatch {
            context: "latent ids vs matrix rows".into(),
            left: ids.len(),
            right: codes.nrows(),
        });
    }
    LatentTable::new(ids, codes)
}

/// Write voxel coordinates as TSV with header `voxel_id x_mm y_mm z_mm`.
pub fn write_voxel_coords(
    path: impl AsRef<Path>,
    ids: &[String],
    coords: &[[f64; 3]],
) -> Result<()> {
    if ids.len() != coords.len() {
        return Err(Error::CountMismatch {
            context: "voxel ids vs coords".into(),
            left: ids.len(),
            right: coords.len(),
        });
    }
    super::atomic_write(path.as_ref(), |w| {
        writeln!(w, "voxel_id\tx_mm\ty_mm\tz_mm")?;
        for (id, c) in ids.iter().zip(coords) {
            writeln!(w, "{id}\t{:?}\t{:?}\t{:?}", c[0], c[1], c[2])?;
        }
        Ok(())
    })
}

/// Read a voxel coordinate TSV.
pub fn read_voxel_coords(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<[f64; 3]>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == "voxel_id\tx_mm\ty_mm\tz_mm" => {}
        _ => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: "missing voxel header".into(),
            })
        }
    }
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: format!("line {}: expected 4 fields", i + 1),
            });
        }
        ids.push(fields[0].trim().to_string());
        coords.push([
            parse_f64(path, i + 1, "x_mm", fields[1])?,
            parse_f64(path, i + 1, "y_mm", fields[2])?,
            parse_f64(path, i + 1, "z_mm", fields[3])?,
        ]);
    }
    Ok((ids, coords))
}

/// Write gender labels as TSV with header `stim_id gender`.
pub fn write_genders(
    path: impl AsRef<Path>,
    ids: &[String],
    genders: &[Gender],
) -> Result<()> {
    if ids.len() != genders.len() {
        return Err(Error::CountMismatch {
            context: "label ids vs genders".into(),
            left: ids.len(),
            right: genders.len(),
        });
    }
    super::atomic_write(path.as_ref(), |w| {
        writeln!(w, "stim_id\tgender")?;
        for (id, g) in ids.iter().zip(genders) {
            writeln!(w, "{id}\t{}", g.as_str())?;
        }
        Ok(())
    })
}

/// Read a gender label TSV.
pub fn read_genders(path: impl AsRef<Path>) -> Result<Vec<(String, Gender)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == "stim_id\tgender" => {}
        _ => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: "missing gender header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: format!("line {}: expected 2 fields", i + 1),
            });
        }
        out.push((fields[0].trim().to_string(), Gender::parse(fields[1].trim())?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;

    #[test]
    fn trials_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.tsv");
        let trials = TrialTable::new(vec![
            Trial {
                onset_s: 6.0,
                duration_s: 1.0,
                condition: Condition::TrainFace,
                stim_id: Some("train_0001".into()),
            },
            Trial {
                onset_s: 9.0,
                duration_s: 3.0,
                condition: Condition::Fixation,
                stim_id: None,
            },
            Trial {
                onset_s: 12.0,
                duration_s: 12.0,
                condition: Condition::Imagery,
                stim_id: Some("imag_01".into()),
            },
        ])
        .unwrap();
        write_trials(&path, &trials).unwrap();
        let back = read_trials(&path).unwrap();
        assert_eq!(trials, back);
    }

    #[test]
    fn latent_table_round_trip_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("codes.ldmx");
        let ids = dir.path().join("codes.ids.tsv");
        let table = LatentTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
        write_latent_table(&m, &ids, &table).unwrap();
        let back = read_latent_table(&m, &ids).unwrap();
        assert_eq!(table, back);

        write_ids(&ids, &["a".into(), "b".into()]).unwrap();
        assert!(matches!(
            read_latent_table(&m, &ids),
            Err(Error::CountMismatch { .. })
        ));
        write_ids(&ids, &["a".into(), "a".into(), "c".into()]).unwrap();
        assert!(matches!(
            read_latent_table(&m, &ids),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn voxel_and_gender_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let vp = dir.path().join("voxels.tsv");
        let ids = vec!["v1".to_string(), "v2".to_string()];
        let coords = vec![[0.0, 3.0, -6.0], [1.5, -2.0, 4.0]];
        write_voxel_coords(&vp, &ids, &coords).unwrap();
        let (rids, rcoords) = read_voxel_coords(&vp).unwrap();
        assert_eq!(rids, ids);
        assert_eq!(rcoords, coords);

        let gp = dir.path().join("genders.tsv");
        let genders = vec![Gender::Male, Gender::Female];
        write_genders(&gp, &ids, &genders).unwrap();
        let back = read_genders(&gp).unwrap();
        assert_eq!(back[0], ("v1".to_string(), Gender::Male));
        assert_eq!(back[1], ("v2".to_string(), Gender::Female));
    }
}
