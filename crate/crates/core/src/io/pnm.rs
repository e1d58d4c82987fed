//! Binary PGM (P5) and PPM (P6) images, 8-bit only.

use std::io::{BufRead, Write};

use crate::controller::InputFrame;
use crate::error::{Error, Result};
use crate::motion::Frame;

/// A decoded image. `pixels` is row-major, interleaved when `channels == 3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn gray(frame: &Frame) -> Self {
        Self {
            height: frame.height(),
            width: frame.width(),
            channels: 1,
            pixels: frame.luma().to_vec(),
        }
    }

    pub fn into_input_frame(self, channels: usize) -> Result<InputFrame> {
        match self.channels {
            1 => InputFrame::from_gray(self.height, self.width, &self.pixels, channels),
            _ => InputFrame::from_rgb(self.height, self.width, &self.pixels, channels),
        }
    }
}

fn token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = Vec::new();
    loop {
        let mut byte = [0u8];
        if r.read(&mut byte)? == 0 {
            break;
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            b if b.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            b => tok.push(b),
        }
    }
    if tok.is_empty() {
        return Err(Error::Format("truncated PNM header".into()));
    }
    String::from_utf8(tok).map_err(|_| Error::Format("non-ASCII PNM header".into()))
}

fn number(r: &mut impl BufRead, what: &str) -> Result<usize> {
    let t = token(r)?;
    t.parse()
        .map_err(|_| Error::Format(format!("PNM {what} is not a number: {t:?}")))
}

/// Reads a P5 or P6 image with maxval 255.
pub fn read_pnm(mut r: impl BufRead) -> Result<Image> {
    let channels = match token(&mut r)?.as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::Format(format!("unsupported PNM magic {m:?}"))),
    };
    let width = number(&mut r, "width")?;
    let height = number(&mut r, "height")?;
    let maxval = number(&mut r, "maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "only maxval 255 is supported, got {maxval}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("PNM image has zero extent".into()));
    }
    let mut pixels = vec![0u8; width * height * channels];
    r.read_exact(&mut pixels)
        .map_err(|_| Error::Format("PNM pixel data is truncated".into()))?;
    Ok(Image {
        height,
        width,
        channels,
        pixels,
    })
}

/// Writes an 8-bit grayscale P5 image.
pub fn write_pgm(mut w: impl Write, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != height * width {
        return Err(Error::Format(format!(
            "PGM needs {} pixels, got {}",
            height * width,
            pixels.len()
        )));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    Ok(())
}
