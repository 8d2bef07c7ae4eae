//! Little-endian helpers shared by the binary file formats.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) fn truncated(what: &str) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::Truncated(what.to_string())
        } else {
            Error::Io(e)
        }
    }
}

pub(crate) fn expect_magic<R: Read>(r: &mut R, expected: [u8; 4]) -> Result<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(truncated("magic"))?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

pub(crate) fn expect_version<R: Read>(r: &mut R, supported: u16) -> Result<()> {
    let v = read_u16(r, "version")?;
    if v != supported {
        return Err(Error::UnsupportedVersion(v));
    }
    Ok(())
}

pub(crate) fn read_u8<R: Read>(r: &mut R, what: &str) -> Result<u8> {
    r.read_u8().map_err(truncated(what))
}

pub(crate) fn read_u16<R: Read>(r: &mut R, what: &str) -> Result<u16> {
    r.read_u16::<LittleEndian>().map_err(truncated(what))
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    r.read_u32::<LittleEndian>().map_err(truncated(what))
}

pub(crate) fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    r.read_u64::<LittleEndian>().map_err(truncated(what))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out).map_err(truncated(what))?;
    Ok(out)
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, data: &[f64]) -> Result<()> {
    for &x in data {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

pub(crate) fn checked_u16(value: usize, what: &str) -> Result<u16> {
    u16::try_from(value).map_err(|_| Error::Config(format!("{what} = {value} does not fit in u16")))
}

pub(crate) fn checked_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::Config(format!("{what} = {value} does not fit in u32")))
}

/// Fails unless the reader is exhausted.
pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Inconsistent("trailing bytes after payload".into())),
    }
}
