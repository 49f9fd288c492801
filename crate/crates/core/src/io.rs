//! Binary PGM/PPM (P5/P6, maxval <= 255) and plain-text kernel files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, PointSpreadFunction};

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, &path.display().to_string())
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    save_image_annotated(img, path, &[])
}

/// Writes a P5/P6 file, adding each entry of `comments` as a `#` header line.
pub fn save_image_annotated(img: &Image, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pnm(img, comments)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Clamps to `[0, 255]` and rounds half-up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5).floor().min(255.0) as u8
}

pub fn encode_pnm(img: &Image, comments: &[String]) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::UnsupportedChannels(c)),
    };
    let mut out = Vec::with_capacity(img.data().len() + 64);
    out.extend_from_slice(magic.as_bytes());
    out.push(b'\n');
    for c in comments {
        for line in c.lines() {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", img.width(), img.height()).as_bytes());
    out.extend(img.to_interleaved().into_iter().map(quantize));
    Ok(out)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl<'a> HeaderReader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            context: self.context.to_string(),
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("{what} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8], context: &str) -> Result<Image> {
    let mut rd = HeaderReader {
        bytes,
        pos: 0,
        context,
    };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(rd.err("not a binary PGM (P5) or PPM (P6) file")),
    };
    rd.pos = 2;
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(rd.err("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(rd.err(format!("unsupported maxval {maxval}; only 8-bit files are read")));
    }
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(rd.err("expected a single whitespace byte after maxval")),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| rd.err("image dimensions overflow"))?;
    let payload = &bytes[rd.pos..];
    if payload.len() < needed {
        rd.pos = bytes.len();
        return Err(rd.err(format!(
            "truncated payload: expected {needed} bytes, found {}",
            payload.len()
        )));
    }
    let samples: Vec<f64> = payload[..needed].iter().map(|&b| f64::from(b)).collect();
    Image::from_interleaved(width, height, channels, &samples)
}

/// Loads a kernel from a plain-text grid or from a P5 image.
pub fn load_psf(path: impl AsRef<Path>) -> Result<PointSpreadFunction> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    if bytes.starts_with(b"P5") {
        let img = decode_pnm(&bytes, &context)?;
        return PointSpreadFunction::new(img.width(), img.height(), img.into_data());
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format {
        context: context.clone(),
        offset: e.valid_up_to(),
        message: "kernel file is neither P5 nor UTF-8 text".into(),
    })?;
    parse_psf_text(text, &context)
}

/// Parses rows of whitespace-separated nonnegative decimals. Rows end at a
/// newline (or `/`); blank lines and `#` comment lines are skipped.
pub fn parse_psf_text(text: &str, context: &str) -> Result<PointSpreadFunction> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut seg_start = line_start;
        for segment in line.split('/') {
            let seg_offset = seg_start;
            seg_start += segment.len() + 1;
            let mut row = Vec::new();
            for token in segment.split_whitespace() {
                let v: f64 = token.parse().map_err(|_| Error::Format {
                    context: context.to_string(),
                    offset: seg_offset,
                    message: format!("invalid kernel entry {token:?}"),
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Format {
                        context: context.to_string(),
                        offset: seg_offset,
                        message: format!("kernel entries must be finite and nonnegative, found {v}"),
                    });
                }
                row.push(v);
            }
            if row.is_empty() {
                continue;
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Format {
                        context: context.to_string(),
                        offset: seg_offset,
                        message: format!(
                            "row has {} entries, expected {}",
                            row.len(),
                            first.len()
                        ),
                    });
                }
            }
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateKernel("kernel file is empty".into()));
    }
    let (width, height) = (rows[0].len(), rows.len());
    PointSpreadFunction::new(width, height, rows.concat())
}
