//! Binary (P5) portable graymap with 8-bit samples.

use std::fs;
use std::path::Path;

use super::{GrayImage, ImageError, Result};

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    if bytes.get(..2) != Some(b"P5") {
        return Err(ImageError::Pgm("missing P5 magic".into()));
    }
    pos += 2;
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(ImageError::Pgm("truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Pgm(format!("bad header field at byte {start}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(ImageError::Pgm(format!("unsupported maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(ImageError::Pgm("missing separator before raster".into()));
    }
    pos += 1;
    let raster = &bytes[pos..];
    let n = width * height;
    if raster.len() < n {
        return Err(ImageError::Pgm(format!("raster has {} of {n} bytes", raster.len())));
    }
    let pixels = if maxval == 255 {
        raster[..n].to_vec()
    } else {
        raster[..n]
            .iter()
            .map(|&p| ((p as usize * 255 + maxval / 2) / maxval).min(255) as u8)
            .collect()
    };
    GrayImage::new(width, height, pixels)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let img = GrayImage::from_fn(7, 3, |x, y| (x * 30 + y) as u8);
        assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn comments_and_errors() {
        let bytes = b"P5 # note\n2 1\n# more\n255\n\x01\x02";
        assert_eq!(decode_pgm(bytes).unwrap().pixels(), &[1, 2]);
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }
}
