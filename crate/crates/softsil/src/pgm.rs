//! Binary PGM (P5, maxval 255) image I/O.
//!
//! PGM is the crate's only image format: byte-exact, line-oriented header,
//! no compression. Soft silhouettes are quantized as `round(255 * value)`
//! (half away from zero); masks threshold at byte value 128.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, SoftSilhouette};

/// 8-bit grayscale image in scan-line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayscaleImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

impl GrayscaleImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} image", width, height),
                got: format!("{} bytes", values.len()),
            });
        }
        Ok(GrayscaleImage {
            width,
            height,
            values,
        })
    }

    pub fn from_soft(soft: &SoftSilhouette) -> Self {
        GrayscaleImage {
            width: soft.width(),
            height: soft.height(),
            values: soft
                .values()
                .iter()
                .map(|&v| (255.0 * v + 0.5).floor().clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        GrayscaleImage {
            width: mask.width(),
            height: mask.height(),
            values: mask.values().iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    /// Threshold at 128: bytes >= 128 are solid.
    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| v >= 128).collect(),
        )
        .expect("image shape is already validated")
    }
}

pub fn write_pgm(image: &GrayscaleImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(32 + image.values.len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", image.width, image.height).as_bytes());
    out.extend_from_slice(&image.values);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayscaleImage> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: &str| Error::PgmFormat {
        path: path.to_path_buf(),
        message: message.to_string(),
    };

    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err(bad("expected binary PGM magic 'P5'"));
    }

    // Header tokens (width, height, maxval) separated by whitespace, with
    // '#' comments running to end of line.
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        while pos < data.len() {
            match data[pos] {
                b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
                b'#' => {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < data.len() && data[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated or malformed header"));
        }
        *field = std::str::from_utf8(&data[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header field is not a number"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(bad(&format!("maxval must be 255, got {maxval}")));
    }
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(bad("missing whitespace after header"));
    }
    pos += 1;

    let expected = width * height;
    let payload = &data[pos..];
    if payload.len() < expected {
        return Err(bad(&format!(
            "truncated payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    GrayscaleImage::new(width, height, payload[..expected].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.pgm");
        let values: Vec<u8> = (0..64 * 64).map(|i| (i % 256) as u8).collect();
        let image = GrayscaleImage::new(64, 64, values).unwrap();
        write_pgm(&image, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), image);
    }

    #[test]
    fn half_gray_rounds_up_to_128() {
        let soft = SoftSilhouette::new(2, 2, vec![0.5; 4]).unwrap();
        let image = GrayscaleImage::from_soft(&soft);
        assert!(image.values.iter().all(|&v| v == 128));
        assert!(image.to_mask().values().iter().all(|&b| b));
    }

    #[test]
    fn ascii_pgm_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ascii.pgm");
        std::fs::write(&path, b"P2\n2 2\n255\n0 0 0 0\n").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::PgmFormat { .. })));
    }

    #[test]
    fn wrong_maxval_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("maxval.pgm");
        std::fs::write(&path, b"P5\n1 1\n65535\n\0\0").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::PgmFormat { .. })));
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.pgm");
        std::fs::write(&path, b"P5\n4 4\n255\n\0\0\0").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::PgmFormat { .. })));
    }

    #[test]
    fn header_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comment.pgm");
        std::fs::write(&path, b"P5\n# made by hand\n2 1\n255\n\x10\xF0").unwrap();
        let image = read_pgm(&path).unwrap();
        assert_eq!((image.width, image.height), (2, 1));
        assert_eq!(image.values, vec![0x10, 0xF0]);
        let mask = image.to_mask();
        assert_eq!(mask.values(), &[false, true]);
    }
}
