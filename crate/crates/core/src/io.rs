//! File helpers shared by the commands: atomic writes and cube files.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::spike::{read_cube, write_cube, SpikeCube};

/// Maps a failed open to [`Error::MissingFile`] when the file is absent.
pub fn open_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::NotFound {
        Error::MissingFile(path.to_path_buf())
    } else {
        Error::Io(e)
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a half-written file.
pub fn write_atomic_with(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = parent_dir(path);
    std::fs::create_dir_all(&dir)?;
    let tmp = NamedTempFile::new_in(&dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        fill(&mut out)?;
        out.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |out| Ok(out.write_all(bytes)?))
}

pub fn save_cube(path: &Path, cube: &SpikeCube) -> Result<()> {
    write_atomic_with(path, |out| Ok(write_cube(out, cube)?))
}

pub fn load_cube(path: &Path) -> Result<SpikeCube> {
    let file = File::open(path).map_err(|e| open_error(path, e))?;
    read_cube(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/c.vdr");
        let cube = SpikeCube::from_bit_rows(2, 1, &["0110", "1010"]).unwrap();
        save_cube(&path, &cube).unwrap();
        assert_eq!(load_cube(&path).unwrap(), cube);
        // no stray temporaries left behind
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn missing_file_is_reported_as_such() {
        let err = load_cube(Path::new("/definitely/not/here.vdr")).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }
}
