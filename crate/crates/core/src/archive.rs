//! Binary field archives.
//!
//! Fields and sampled environments are stored in a small fixed
//! little-endian format with a magic tag, so runs can be reproduced and
//! inspected without re-sampling.  The layout is: magic, grid header
//! (side, points per side, boundary), payload-specific metadata, then
//! the raw f64 cell data in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{LabError, Result};
use crate::grid::{Boundary, Field, GridSpec};

pub const FIELD_MAGIC: &[u8; 8] = b"RPFLD001";
pub const ENV_MAGIC: &[u8; 8] = b"RPENV001";

pub(crate) fn write_magic(w: &mut impl Write, magic: &[u8; 8]) -> Result<()> {
    w.write_all(magic)?;
    Ok(())
}

pub(crate) fn check_magic(r: &mut impl Read, magic: &[u8; 8], what: &str) -> Result<()> {
    let mut buf = [0_u8; 8];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(LabError::Format(format!(
            "not a {what} archive: expected tag {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

pub(crate) fn write_grid(w: &mut impl Write, spec: &GridSpec) -> Result<()> {
    w.write_f64::<LittleEndian>(spec.side())?;
    w.write_u32::<LittleEndian>(spec.n() as u32)?;
    w.write_u8(match spec.boundary() {
        Boundary::Periodic => 0,
        Boundary::Dirichlet => 1,
    })?;
    Ok(())
}

pub(crate) fn read_grid(r: &mut impl Read) -> Result<GridSpec> {
    let side = r.read_f64::<LittleEndian>()?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let boundary = match r.read_u8()? {
        0 => Boundary::Periodic,
        1 => Boundary::Dirichlet,
        other => {
            return Err(LabError::Format(format!(
                "unknown boundary tag {other} in archive"
            )))
        }
    };
    GridSpec::new(side, n, boundary)
}

pub(crate) fn write_cells(w: &mut impl Write, data: &[f64]) -> Result<()> {
    for &v in data {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub(crate) fn read_cells(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut data = vec![0.0; len];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    Ok(data)
}

/// Write one field to `path`.
pub fn save_field(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_magic(&mut w, FIELD_MAGIC)?;
    write_grid(&mut w, field.spec())?;
    write_cells(&mut w, field.data())?;
    w.flush()?;
    Ok(())
}

/// Read a field written by [`save_field`].
pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, FIELD_MAGIC, "field")?;
    let spec = read_grid(&mut r)?;
    let data = read_cells(&mut r, spec.len())?;
    Field::from_data(spec, data)
}
