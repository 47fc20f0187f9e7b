//! Binary 8-bit PGM (P5) images.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::Image;

/// Parses a P5 file with maxval 255; samples are scaled by `1/255`.
pub fn parse_pgm(bytes: &[u8], origin: &Path) -> Result<Image> {
    let bad = |m: &str| Error::format(origin, m.to_string());
    let mut pos = 0;
    let token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos).as_deref() != Some("P5") {
        return Err(bad("not a binary PGM (expected P5 magic)"));
    }
    let mut num = |what: &str| -> Result<usize> {
        token(&mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(&format!("malformed header: bad {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(bad(&format!("unsupported depth: maxval {maxval} (only 255 is supported)")));
    }
    if width == 0 || height == 0 {
        return Err(bad("malformed header: zero dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("malformed header: missing raster separator"));
    }
    let raster = &bytes[pos + 1..];
    if raster.len() != width * height {
        return Err(bad(&format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            width * height
        )));
    }
    Image::new(height, width, raster.iter().map(|&b| f64::from(b) / 255.0).collect())
}

pub fn load_pgm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

/// Encodes with `round(255 v)`; inverse of [`parse_pgm`] on 8-bit data.
pub fn encode_pgm(image: &Image) -> Result<Vec<u8>> {
    image.validate_unit_range()?;
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| (v * 255.0).round() as u8));
    Ok(out)
}

pub fn save_pgm(path: &Path, image: &Image) -> Result<()> {
    fs::write(path, encode_pgm(image)?).map_err(|e| Error::io(path, e))
}

/// Loads one file, or every `*.pgm` in a directory in lexicographic order.
/// All images must share one size.
pub fn load_images(path: &Path) -> Result<Vec<(PathBuf, Image)>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::invalid(format!("no .pgm files in {}", path.display())));
    }
    let mut out: Vec<(PathBuf, Image)> = Vec::with_capacity(files.len());
    for f in files {
        let im = load_pgm(&f)?;
        if let Some((_, first)) = out.first() {
            if (first.height(), first.width()) != (im.height(), im.width()) {
                return Err(Error::format(
                    &f,
                    format!(
                        "size {}x{} differs from {}x{}",
                        im.height(),
                        im.width(),
                        first.height(),
                        first.width()
                    ),
                ));
            }
        }
        out.push((f, im));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_by_255() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        let im = parse_pgm(&bytes, Path::new("t")).unwrap();
        assert_eq!(im.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        assert_eq!(encode_pgm(&im).unwrap(), bytes);
    }

    #[test]
    fn comments_and_errors() {
        let mut bytes = b"P5 # c\n# more\n1 1 255\n".to_vec();
        bytes.push(7);
        assert!(parse_pgm(&bytes, Path::new("t")).is_ok());
        assert!(parse_pgm(b"P2\n1 1\n255\n7", Path::new("t")).is_err());
        assert!(parse_pgm(b"P5\n1 1\n65535\n\x00\x07", Path::new("t")).is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x00", Path::new("t")).is_err());
        assert!(parse_pgm(b"P5\nx 2\n255\n\x00", Path::new("t")).is_err());
    }
}
