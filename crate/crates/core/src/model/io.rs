//! Flat binary parameter files: the 6-byte magic `QAMLP1`, then `d`, `H`,
//! `K` as little-endian `u32`, then `w1`, `b1`, `w2`, `b2` as row-major
//! little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::MlpParams;
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 6] = b"QAMLP1";

pub fn write_params(path: &Path, params: &MlpParams) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(PARAMS_MAGIC)?;
    for dim in [params.input_dim(), params.hidden(), params.classes()] {
        let dim = u32::try_from(dim)
            .map_err(|_| Error::InvalidArgument("dimension exceeds u32".into()))?;
        out.write_all(&dim.to_le_bytes())?;
    }
    for v in params.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<MlpParams> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 18 || &bytes[..6] != PARAMS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "missing QAMLP1 header".into(),
        });
    }
    let dim =
        |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (d, h, k) = (dim(6), dim(10), dim(14));
    let body = &bytes[18..];
    let expected = (d * h + h + h * k + k) * 8;
    if body.len() != expected {
        return Err(Error::Format {
            offset: 18 + body.len().min(expected) as u64,
            message: format!("expected {expected} parameter bytes, found {}", body.len()),
        });
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    MlpParams::from_parts(d, h, k, data)
}
