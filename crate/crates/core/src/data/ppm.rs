//! Binary (P6) portable pixel-map reader and writer, the only image codec
//! this workspace uses.

use super::image::RgbImage;
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(file, "P6\n{} {}\n255\n", image.width, image.height)?;
    file.write_all(&image.pixels)?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let file = std::fs::File::open(path)
        .map_err(|_| Error::MissingImage(path.display().to_string()))?;
    let mut reader = BufReader::new(file);
    let magic = next_token(&mut reader)?;
    if magic != "P6" {
        return Err(Error::BadImage(format!(
            "{}: expected P6 magic, got {magic:?}",
            path.display()
        )));
    }
    let width: usize = parse_token(&mut reader, path)?;
    let height: usize = parse_token(&mut reader, path)?;
    let maxval: usize = parse_token(&mut reader, path)?;
    if maxval != 255 {
        return Err(Error::BadImage(format!(
            "{}: only maxval 255 supported, got {maxval}",
            path.display()
        )));
    }
    let mut pixels = vec![0u8; width * height * 3];
    reader.read_exact(&mut pixels).map_err(|e| {
        Error::BadImage(format!("{}: truncated pixel data ({e})", path.display()))
    })?;
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

fn parse_token<T: std::str::FromStr>(reader: &mut impl BufRead, path: &Path) -> Result<T> {
    next_token(reader)?
        .parse()
        .map_err(|_| Error::BadImage(format!("{}: malformed header", path.display())))
}

/// Next whitespace-delimited header token, skipping `#` comments. Consumes
/// exactly one byte of whitespace after the token, per the PPM grammar.
fn next_token(reader: &mut impl BufRead) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            break;
        }
        match byte[0] {
            b'#' => {
                let mut comment = String::new();
                reader.read_line(&mut comment)?;
            }
            b if b.is_ascii_whitespace() => {
                if !token.is_empty() {
                    break;
                }
            }
            b => token.push(b),
        }
    }
    if token.is_empty() {
        return Err(Error::BadImage("unexpected end of PPM header".into()));
    }
    Ok(String::from_utf8_lossy(&token).into_owned())
}
