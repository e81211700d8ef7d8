use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{ImageKind, Mask, PolarimetricImage};

// PFM: "Pf" (1 channel) or "PF" (3 channels), dimensions, scale (negative
// means little-endian), then raw f32 rows bottom-up. Values are narrowed to
// f32 on write and widened back on read.

/// Write an image as PFM. Three-channel kinds use the color variant.
pub fn write_pfm(path: &Path, image: &PolarimetricImage) -> Result<()> {
    let channels = image.channels();
    if channels != 1 && channels != 3 {
        return Err(Error::ShapeMismatch(format!(
            "pfm supports 1 or 3 channels, got {channels}"
        )));
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| annotate(path, &e))?);
    let header = if channels == 3 { "PF" } else { "Pf" };
    write!(w, "{header}\n{} {}\n-1.0\n", image.width, image.height)?;
    for row in (0..image.height).rev() {
        for col in 0..image.width {
            for c in 0..channels {
                let v = image.get(col, row, c) as f32;
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a PFM file. The validity mask marks non-NaN pixels (NaN in any
/// channel masks the pixel out); `kind` tells the caller's interpretation.
pub fn read_pfm(path: &Path, kind: ImageKind) -> Result<PolarimetricImage> {
    let mut r = BufReader::new(File::open(path).map_err(|e| annotate(path, &e))?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse(format!("{}: truncated pfm header", path.display())));
        }
        let t = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
        Ok(t)
    };

    let magic = token()?;
    let channels = match magic.as_str() {
        "PF" => 3usize,
        "Pf" => 1usize,
        other => {
            return Err(Error::Parse(format!(
                "{}: not a pfm file (magic {other:?})",
                path.display()
            )))
        }
    };
    if channels != kind.channels() {
        return Err(Error::ShapeMismatch(format!(
            "{}: {channels}-channel pfm read as {}-channel kind",
            path.display(),
            kind.channels()
        )));
    }
    let width: usize = token()?
        .parse()
        .map_err(|_| Error::Parse(format!("{}: bad width", path.display())))?;
    let height: usize = token()?
        .parse()
        .map_err(|_| Error::Parse(format!("{}: bad height", path.display())))?;
    let scale: f64 = token()?
        .parse()
        .map_err(|_| Error::Parse(format!("{}: bad scale", path.display())))?;
    let little_endian = scale < 0.0;
    pos += 1; // single whitespace after the scale token

    let needed = width * height * channels * 4;
    if bytes.len() < pos + needed {
        return Err(Error::Parse(format!(
            "{}: pfm data truncated ({} of {} bytes)",
            path.display(),
            bytes.len() - pos,
            needed
        )));
    }

    let mut img = PolarimetricImage::new_masked(kind, width, height);
    let data = &bytes[pos..pos + needed];
    for file_row in 0..height {
        let row = height - 1 - file_row; // bottom-up storage
        for col in 0..width {
            let mut all_finite = true;
            for c in 0..channels {
                let o = ((file_row * width + col) * channels + c) * 4;
                let raw: [u8; 4] = data[o..o + 4].try_into().unwrap();
                let v = if little_endian {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                img.set(col, row, c, v as f64);
                all_finite &= !v.is_nan();
            }
            img.mask.set(col, row, all_finite);
        }
    }
    // Masked pixels carry NaN across all channels by convention.
    for row in 0..height {
        for col in 0..width {
            if !img.mask.get(col, row) {
                for c in 0..channels {
                    img.set(col, row, c, f64::NAN);
                }
            }
        }
    }
    Ok(img)
}

pub(crate) fn annotate(path: &Path, e: &std::io::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Write a mask as a binary PGM (P5), 255 inside / 0 outside.
pub fn write_pgm(path: &Path, mask: &Mask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| annotate(path, &e))?);
    write!(w, "P5\n{} {}\n255\n", mask.width, mask.height)?;
    for row in 0..mask.height {
        for col in 0..mask.width {
            w.write_all(&[if mask.get(col, row) { 255 } else { 0 }])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<Mask> {
    let mut r = BufReader::new(File::open(path).map_err(|e| annotate(path, &e))?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let header = String::from_utf8_lossy(&bytes[..bytes.len().min(64)]);
    let mut parts = header.split_ascii_whitespace();
    if parts.next() != Some("P5") {
        return Err(Error::Parse(format!("{}: not a binary pgm", path.display())));
    }
    let width: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: bad width", path.display())))?;
    let height: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: bad height", path.display())))?;
    let maxval: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: bad maxval", path.display())))?;
    if maxval != 255 {
        return Err(Error::Parse(format!("{}: expected maxval 255", path.display())));
    }
    // Data starts one byte after the maxval token.
    let header_len = header
        .find("255")
        .map(|i| i + 4)
        .ok_or_else(|| Error::Parse(format!("{}: malformed header", path.display())))?;
    if bytes.len() < header_len + width * height {
        return Err(Error::Parse(format!("{}: pgm data truncated", path.display())));
    }
    let mut mask = Mask::new(width, height, false);
    for row in 0..height {
        for col in 0..width {
            mask.set(col, row, bytes[header_len + row * width + col] > 127);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn pfm_round_trip_preserves_f32_values() {
        let dir = tempdir().unwrap();
        let mut img = PolarimetricImage::new_masked(ImageKind::Stokes3, 5, 4);
        for row in 0..4 {
            for col in 0..5 {
                if (col + row) % 3 == 0 {
                    continue; // leave some pixels masked (NaN)
                }
                img.mask.set(col, row, true);
                for c in 0..3 {
                    img.set(col, row, c, (col as f64 - 2.0) * 0.37 + c as f64 + row as f64 * 0.01);
                }
            }
        }
        let path = dir.path().join("x.pfm");
        write_pfm(&path, &img).unwrap();
        let back = read_pfm(&path, ImageKind::Stokes3).unwrap();
        assert_eq!(back.width, 5);
        assert_eq!(back.height, 4);
        for row in 0..4 {
            for col in 0..5 {
                assert_eq!(back.mask.get(col, row), img.mask.get(col, row));
                for c in 0..3 {
                    let (a, b) = (img.get(col, row, c), back.get(col, row, c));
                    if a.is_nan() {
                        assert!(b.is_nan());
                    } else {
                        assert_eq!(a as f32, b as f32);
                    }
                }
            }
        }
    }

    #[test]
    fn pfm_write_is_deterministic() {
        let dir = tempdir().unwrap();
        let mut img = PolarimetricImage::new_masked(ImageKind::Dolp, 7, 3);
        img.mask = Mask::new(7, 3, true);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.731).sin().abs() * 0.5;
        }
        let p1 = dir.path().join("a.pfm");
        let p2 = dir.path().join("b.pfm");
        write_pfm(&p1, &img).unwrap();
        write_pfm(&p2, &img).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempdir().unwrap();
        let mut mask = Mask::new(6, 5, false);
        mask.set(0, 0, true);
        mask.set(5, 4, true);
        mask.set(2, 3, true);
        let path = dir.path().join("m.pgm");
        write_pgm(&path, &mask).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), mask);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_pfm(Path::new("/nonexistent/foo.pfm"), ImageKind::Aolp).unwrap_err();
        assert!(err.to_string().contains("foo.pfm"));
    }
}
