//! Grayscale PFM and binary PGM readers and writers.
//!
//! PFM files are written as `Pf` with scale `-1.0` (little endian), rows
//! stored bottom to top as the format requires. Invalid pixels are written as
//! NaN and read back as invalid. PGM input may be 8 or 16 bit; masks are 8-bit
//! PGM with 0 meaning invalid.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ImageRaster, ImagingError};

fn format_err(msg: impl Into<String>) -> ImagingError {
    ImagingError::Format(msg.into())
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn header_token<R: BufRead>(r: &mut R) -> Result<String, ImagingError> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            let mut line = Vec::new();
            r.read_until(b'\n', &mut line)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b);
    }
    if tok.is_empty() {
        return Err(format_err("unexpected end of header"));
    }
    String::from_utf8(tok).map_err(|_| format_err("non-ASCII header"))
}

fn parse_dim(tok: &str) -> Result<usize, ImagingError> {
    tok.parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| format_err(format!("invalid dimension `{tok}`")))
}

pub fn read_pfm_from<R: BufRead>(mut r: R) -> Result<ImageRaster, ImagingError> {
    let magic = header_token(&mut r)?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => return Err(format_err("color PFM is not supported")),
        other => return Err(format_err(format!("not a PFM file (magic `{other}`)"))),
    }
    let width = parse_dim(&header_token(&mut r)?)?;
    let height = parse_dim(&header_token(&mut r)?)?;
    let scale_tok = header_token(&mut r)?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| format_err(format!("invalid PFM scale `{scale_tok}`")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err("PFM scale must be nonzero"));
    }
    let little_endian = scale < 0.0;

    let mut buf = vec![0u8; width * height * 4];
    r.read_exact(&mut buf)
        .map_err(|e| format_err(format!("truncated PFM data: {e}")))?;
    let mut samples = vec![0f32; width * height];
    for (i, chunk) in buf.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        let (row, col) = (i / width, i % width);
        samples[(height - 1 - row) * width + col] = v;
    }
    ImageRaster::new(width, height, samples)
}

pub fn write_pfm_to<W: Write>(mut w: W, img: &ImageRaster) -> io::Result<()> {
    let (width, height) = img.dims();
    write!(w, "Pf\n{width} {height}\n-1.0\n")?;
    let mut row_buf = Vec::with_capacity(width * 4);
    for y in (0..height).rev() {
        row_buf.clear();
        for x in 0..width {
            let v = img.get(x, y).unwrap_or(f32::NAN);
            row_buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&row_buf)?;
    }
    w.flush()
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ImageRaster, ImagingError> {
    read_pfm_from(BufReader::new(File::open(path)?))
}

pub fn write_pfm(path: impl AsRef<Path>, img: &ImageRaster) -> Result<(), ImagingError> {
    write_pfm_to(BufWriter::new(File::create(path)?), img)?;
    Ok(())
}

/// Reads a binary (`P5`) PGM of 8 or 16 bits per sample. Samples keep their
/// raw integer values.
pub fn read_pgm_from<R: BufRead>(mut r: R) -> Result<ImageRaster, ImagingError> {
    let magic = header_token(&mut r)?;
    if magic != "P5" {
        return Err(format_err(format!("only binary PGM (P5) is supported, got `{magic}`")));
    }
    let width = parse_dim(&header_token(&mut r)?)?;
    let height = parse_dim(&header_token(&mut r)?)?;
    let maxval_tok = header_token(&mut r)?;
    let maxval: u32 = maxval_tok
        .parse()
        .ok()
        .filter(|&m| (1..=65535).contains(&m))
        .ok_or_else(|| format_err(format!("invalid PGM maxval `{maxval_tok}`")))?;
    let n = width * height;
    let samples: Vec<f32> = if maxval < 256 {
        let mut buf = vec![0u8; n];
        r.read_exact(&mut buf)
            .map_err(|e| format_err(format!("truncated PGM data: {e}")))?;
        buf.into_iter().map(f32::from).collect()
    } else {
        let mut buf = vec![0u8; n * 2];
        r.read_exact(&mut buf)
            .map_err(|e| format_err(format!("truncated PGM data: {e}")))?;
        buf.chunks_exact(2)
            .map(|c| f32::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    };
    ImageRaster::new(width, height, samples)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ImageRaster, ImagingError> {
    read_pgm_from(BufReader::new(File::open(path)?))
}

pub fn write_pgm8_to<W: Write>(mut w: W, width: usize, height: usize, data: &[u8]) -> io::Result<()> {
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(data)?;
    w.flush()
}

pub fn write_pgm16_to<W: Write>(mut w: W, width: usize, height: usize, data: &[u16]) -> io::Result<()> {
    write!(w, "P5\n{width} {height}\n65535\n")?;
    for v in data {
        w.write_all(&v.to_be_bytes())?;
    }
    w.flush()
}

/// Writes the validity mask as an 8-bit PGM (0 invalid, 255 valid).
pub fn write_mask(path: impl AsRef<Path>, img: &ImageRaster) -> Result<(), ImagingError> {
    let data: Vec<u8> = img.valid_mask().iter().map(|&v| if v { 255 } else { 0 }).collect();
    write_pgm8_to(BufWriter::new(File::create(path)?), img.width(), img.height(), &data)?;
    Ok(())
}

/// Reads an 8-bit PGM mask; any nonzero sample is valid.
pub fn read_mask(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>), ImagingError> {
    let m = read_pgm(path)?;
    Ok((m.width(), m.height(), m.samples().iter().map(|&v| v != 0.0).collect()))
}

/// 8-bit preview with linear min-max normalization over the valid region.
/// Invalid pixels are black.
pub fn preview_bytes(img: &ImageRaster) -> Vec<u8> {
    let (lo, hi) = img.valid_range().unwrap_or((0.0, 0.0));
    let span = hi - lo;
    img.samples()
        .iter()
        .zip(img.valid_mask())
        .map(|(&s, &v)| {
            if !v {
                0
            } else if span > 0.0 {
                (((s - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                128
            }
        })
        .collect()
}

pub fn write_preview(path: impl AsRef<Path>, img: &ImageRaster) -> Result<(), ImagingError> {
    write_pgm8_to(
        BufWriter::new(File::create(path)?),
        img.width(),
        img.height(),
        &preview_bytes(img),
    )?;
    Ok(())
}

/// Loads an image by extension: `.pfm` or `.pgm`.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageRaster, ImagingError> {
    let path = path.as_ref();
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
    {
        Some(e) if e == "pfm" => read_pfm(path),
        Some(e) if e == "pgm" => read_pgm(path),
        _ => Err(format_err(format!("unsupported image extension: {}", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_roundtrip_keeps_orientation_and_mask() {
        let mut img = ImageRaster::from_fn(3, 2, |x, y| (x + 10 * y) as f32 + 0.25);
        img.invalidate(1, 1);
        let mut buf = Vec::new();
        write_pfm_to(&mut buf, &img).unwrap();
        assert!(buf.starts_with(b"Pf\n3 2\n-1.0\n"));
        // First stored row is the bottom row.
        let first = f32::from_le_bytes(buf[12..16].try_into().unwrap());
        assert_eq!(first, 10.25);
        let back = read_pfm_from(&buf[..]).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pfm_big_endian_input() {
        let mut buf = b"Pf\n2 1\n1.0\n".to_vec();
        buf.extend_from_slice(&1.5f32.to_be_bytes());
        buf.extend_from_slice(&(-2.0f32).to_be_bytes());
        let img = read_pfm_from(&buf[..]).unwrap();
        assert_eq!(img.samples(), &[1.5, -2.0]);
    }

    #[test]
    fn pfm_rejects_bad_input() {
        assert!(read_pfm_from(&b"PF\n1 1\n-1.0\n\0\0\0\0"[..]).is_err());
        assert!(read_pfm_from(&b"Pf\n2 2\n-1.0\n\0\0\0\0"[..]).is_err());
        assert!(read_pfm_from(&b"P5\n1 1\n255\n\0"[..]).is_err());
    }

    #[test]
    fn pgm16_with_comment() {
        let mut buf = b"P5\n# thermal frame\n2 2\n65535\n".to_vec();
        for v in [0u16, 1000, 40000, 65535] {
            buf.extend_from_slice(&v.to_be_bytes());
        }
        let img = read_pgm_from(&buf[..]).unwrap();
        assert_eq!(img.samples(), &[0.0, 1000.0, 40000.0, 65535.0]);

        let mut out = Vec::new();
        write_pgm16_to(&mut out, 2, 2, &[0, 1000, 40000, 65535]).unwrap();
        assert_eq!(read_pgm_from(&out[..]).unwrap(), img);
    }

    #[test]
    fn preview_is_min_max() {
        let mut img = ImageRaster::from_fn(4, 1, |x, _| x as f32 * 2.0 + 5.0);
        img.invalidate(3, 0);
        assert_eq!(preview_bytes(&img), vec![0, 128, 255, 0]);
    }
}
