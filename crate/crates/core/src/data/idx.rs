//! IDX files as distributed with MNIST and its drop-in replacements.
//!
//! Images: magic `0x00000803`, then `n`, `rows`, `cols` as big-endian
//! `u32`, then `n * rows * cols` unsigned bytes. Labels: magic
//! `0x00000801`, `n`, then `n` bytes. Either file may be gzip-compressed;
//! compression is detected from the first two bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array2;

use super::{DatasetMeta, ImageDataset};
use crate::combinatorics::ClassSpace;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Raw contents of an image file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn format_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Format {
        offset: offset as u64,
        message: message.into(),
    })
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes(b.try_into().expect("four bytes"))),
        None => format_err(
            bytes.len(),
            format!("truncated header, expected 4 bytes at offset {offset}"),
        ),
    }
}

fn check_body(bytes: &[u8], start: usize, len: usize) -> Result<()> {
    let end = start + len;
    if bytes.len() < end {
        return format_err(bytes.len(), format!("truncated data, expected {end} bytes"));
    }
    if bytes.len() > end {
        return format_err(end, format!("{} trailing bytes", bytes.len() - end));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return format_err(0, format!("bad image magic {magic:#010x}"));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format {
            offset: 4,
            message: "image dimensions overflow".into(),
        })?;
    check_body(bytes, 16, len)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return format_err(0, format!("bad label magic {magic:#010x}"));
    }
    let count = read_u32(bytes, 4)? as usize;
    check_body(bytes, 8, count)?;
    Ok(bytes[8..].to_vec())
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads an image/label file pair. Pixels are scaled by `1/255` and
/// digit labels `0..K-1` become classes `1..K`, where `K` is one more
/// than the largest label present (at least 2).
pub fn load_idx(images: &Path, labels: &Path) -> Result<ImageDataset> {
    let img = parse_idx_images(&read_maybe_gzip(images)?)?;
    let lab = parse_idx_labels(&read_maybe_gzip(labels)?)?;
    if img.count != lab.len() {
        return format_err(
            4,
            format!(
                "label file has {} entries, image file {}",
                lab.len(),
                img.count
            ),
        );
    }
    let k = lab
        .iter()
        .copied()
        .max()
        .map_or(2, |m| (m as usize + 1).max(2));
    let d = img.rows * img.cols;
    let features = Array2::from_shape_vec(
        (img.count, d),
        img.pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )
    .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    ImageDataset::new(
        features,
        lab.iter().map(|&y| y as usize + 1).collect(),
        ClassSpace::new(k)?,
        DatasetMeta {
            source: images.display().to_string(),
            image_shape: Some((img.rows, img.cols)),
        },
    )
}

/// Writes an uncompressed image file; `pixels` holds `count * rows * cols` bytes.
pub fn write_idx_images<W: Write>(
    mut out: W,
    rows: usize,
    cols: usize,
    pixels: &[u8],
) -> Result<()> {
    let per = rows * cols;
    if per == 0 || !pixels.len().is_multiple_of(per) {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels do not divide into {rows}x{cols} images",
            pixels.len()
        )));
    }
    out.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for v in [pixels.len() / per, rows, cols] {
        out.write_all(&(v as u32).to_be_bytes())?;
    }
    out.write_all(pixels)?;
    Ok(())
}

/// Writes an uncompressed label file of 0-based digits.
pub fn write_idx_labels<W: Write>(mut out: W, labels: &[u8]) -> Result<()> {
    out.write_all(&LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;

    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let pixels: Vec<u8> = (0..4 * 2 * 3).map(|i| (i * 11) as u8).collect();
        let mut img = Vec::new();
        write_idx_images(&mut img, 2, 3, &pixels).unwrap();
        let mut lab = Vec::new();
        write_idx_labels(&mut lab, &[0, 3, 1, 0]).unwrap();
        (img, lab)
    }

    #[test]
    fn header_layout() {
        let (img, lab) = fixture();
        assert_eq!(
            &img[..16],
            &[0, 0, 8, 3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 3]
        );
        assert_eq!(img.len(), 16 + 24);
        assert_eq!(lab, vec![0, 0, 8, 1, 0, 0, 0, 4, 0, 3, 1, 0]);
    }

    #[test]
    fn byte_exact_round_trip() {
        let (img, lab) = fixture();
        let parsed = parse_idx_images(&img).unwrap();
        let mut again = Vec::new();
        write_idx_images(&mut again, parsed.rows, parsed.cols, &parsed.pixels).unwrap();
        assert_eq!(again, img);
        let mut again = Vec::new();
        write_idx_labels(&mut again, &parse_idx_labels(&lab).unwrap()).unwrap();
        assert_eq!(again, lab);
    }

    #[test]
    fn load_plain_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = fixture();
        let img_path = dir.path().join("images.idx");
        let lab_path = dir.path().join("labels.idx");
        fs::write(&img_path, &img).unwrap();
        fs::write(&lab_path, &lab).unwrap();
        let ds = load_idx(&img_path, &lab_path).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 6);
        assert_eq!(ds.space.k(), 4);
        assert_eq!(ds.labels, vec![1, 4, 2, 1]);
        assert_eq!(ds.features[[1, 2]], (8 * 11) as f64 / 255.0);
        assert_eq!(
            ds.pixels(3),
            (18..24).map(|i| (i * 11) as u8).collect::<Vec<_>>()
        );

        // compressed file with a misleading name
        let gz_path = dir.path().join("images.idx.raw");
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&img).unwrap();
        fs::write(&gz_path, enc.finish().unwrap()).unwrap();
        assert_eq!(load_idx(&gz_path, &lab_path).unwrap().features, ds.features);
    }

    #[test]
    fn format_errors_carry_offsets() {
        let (img, lab) = fixture();
        let offset = |r: Result<IdxImages>| match r {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("expected format error, got {other:?}"),
        };
        assert_eq!(offset(parse_idx_images(&img[..30])), 30);
        assert_eq!(offset(parse_idx_images(&img[..10])), 10);
        let mut bad = img.clone();
        bad[3] = 1;
        assert_eq!(offset(parse_idx_images(&bad)), 0);
        let mut long = img.clone();
        long.push(0);
        assert_eq!(offset(parse_idx_images(&long)), 40);
        assert!(matches!(
            parse_idx_labels(&img),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            parse_idx_labels(&lab[..9]),
            Err(Error::Format { offset: 9, .. })
        ));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = fixture();
        let mut lab = Vec::new();
        write_idx_labels(&mut lab, &[0, 1, 2]).unwrap();
        fs::write(dir.path().join("i"), img).unwrap();
        fs::write(dir.path().join("l"), lab).unwrap();
        let err = load_idx(&dir.path().join("i"), &dir.path().join("l")).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 4, .. }), "{err}");
    }
}
