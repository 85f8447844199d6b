//! Reading and writing 8-bit RGB images (binary PPM, and PNG when the `png`
//! feature is enabled).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::plane::Plane;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl ImageFormat {
    /// Format implied by a file extension; PPM for anything unrecognised.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if e == "png" => ImageFormat::Png,
            _ => ImageFormat::Ppm,
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Plane> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Unsupported(m) => Error::Unsupported(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Sniffs the format from the first bytes.
pub fn decode_image(bytes: &[u8]) -> Result<Plane> {
    if bytes.starts_with(b"P6") {
        read_ppm(bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        read_png(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::Unsupported(format!(
            "PNM variant P{} (only binary P6 is read)",
            bytes[1] as char
        )))
    } else {
        Err(Error::Unsupported("unrecognised image format".into()))
    }
}

pub fn write_image(path: impl AsRef<Path>, image: &Plane) -> Result<()> {
    let path = path.as_ref();
    let bytes = match ImageFormat::from_path(path) {
        ImageFormat::Ppm => encode_ppm(image)?,
        ImageFormat::Png => encode_png(image)?,
    };
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn ppm_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = String::new();
    loop {
        let buf = r.fill_buf().map_err(|e| Error::Format(e.to_string()))?;
        let Some(&b) = buf.first() else {
            break;
        };
        if b == b'#' && tok.is_empty() {
            let mut line = Vec::new();
            r.read_until(b'\n', &mut line)
                .map_err(|e| Error::Format(e.to_string()))?;
            continue;
        }
        r.consume(1);
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b as char);
    }
    if tok.is_empty() {
        return Err(Error::Format("PPM header truncated".into()));
    }
    Ok(tok)
}

pub fn read_ppm(bytes: &[u8]) -> Result<Plane> {
    let mut r = BufReader::new(bytes);
    if ppm_token(&mut r)? != "P6" {
        return Err(Error::Format("not a binary PPM".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = ppm_token(&mut r)?;
        t.parse()
            .map_err(|_| Error::Format(format!("PPM {what} {t:?} is not a number")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval > 255 {
        return Err(Error::Unsupported(format!("{}-bit PPM (maxval {maxval})", 16)));
    }
    if maxval != 255 {
        return Err(Error::Unsupported(format!("PPM maxval {maxval} (only 255)")));
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or_else(|| Error::Format("PPM size overflows".into()))?;
    let mut data = Vec::with_capacity(n);
    r.read_to_end(&mut data)
        .map_err(|e| Error::Format(e.to_string()))?;
    if data.len() < n {
        return Err(Error::Format(format!("PPM pixel data truncated ({} of {n} bytes)", data.len())));
    }
    data.truncate(n);
    Plane::from_rgb8(height, width, &data)
}

pub fn encode_ppm(image: &Plane) -> Result<Vec<u8>> {
    let rgb = image.to_rgb8()?;
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(&rgb);
    Ok(out)
}

#[cfg(feature = "png")]
fn read_png(bytes: &[u8]) -> Result<Plane> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    let info = reader.info();
    if info.bit_depth == png::BitDepth::Sixteen {
        return Err(Error::Unsupported("16-bit PNG (only 8-bit RGB is supported)".into()));
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let data = &buf[..frame.buffer_size()];
    let rgb: Vec<u8> = match frame.color_type {
        png::ColorType::Rgb => data.to_vec(),
        png::ColorType::Rgba => data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => data.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => data.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        other => return Err(Error::Unsupported(format!("PNG color type {other:?}"))),
    };
    Plane::from_rgb8(h, w, &rgb)
}

#[cfg(not(feature = "png"))]
fn read_png(_: &[u8]) -> Result<Plane> {
    Err(Error::Unsupported("PNG support not compiled in".into()))
}

#[cfg(feature = "png")]
pub fn encode_png(image: &Plane) -> Result<Vec<u8>> {
    let rgb = image.to_rgb8()?;
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::Format(format!("PNG: {e}")))?;
        w.write_image_data(&rgb)
            .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    }
    Ok(out)
}

#[cfg(not(feature = "png"))]
pub fn encode_png(_: &Plane) -> Result<Vec<u8>> {
    Err(Error::Unsupported("PNG support not compiled in".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_with_comments() {
        let img = Plane::from_rgb8(2, 3, &(0..18).map(|i| i * 10).collect::<Vec<u8>>()).unwrap();
        let bytes = encode_ppm(&img).unwrap();
        assert_eq!(read_ppm(&bytes).unwrap(), img);
        let mut commented = b"P6 # made by hand\n3 2\n# max\n255\n".to_vec();
        commented.extend_from_slice(&img.to_rgb8().unwrap());
        assert_eq!(read_ppm(&commented).unwrap(), img);
    }

    #[test]
    fn ppm_errors() {
        assert!(matches!(read_ppm(b"P6\n2 2\n255\n\0\0"), Err(Error::Format(_))));
        assert!(matches!(read_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0"), Err(Error::Unsupported(_))));
        assert!(matches!(decode_image(b"P3\n1 1\n255\n0 0 0"), Err(Error::Unsupported(_))));
        assert!(matches!(decode_image(b"GIF89a"), Err(Error::Unsupported(_))));
    }

    #[cfg(feature = "png")]
    #[test]
    fn png_round_trip_and_sixteen_bit() {
        let img = Plane::from_rgb8(3, 2, &(0..18).map(|i| 255 - i * 7).collect::<Vec<u8>>()).unwrap();
        let bytes = encode_png(&img).unwrap();
        assert_eq!(decode_image(&bytes).unwrap(), img);

        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Sixteen);
            enc.write_header().unwrap().write_image_data(&[0; 6]).unwrap();
        }
        assert!(matches!(decode_image(&out), Err(Error::Unsupported(_))));
    }
}
