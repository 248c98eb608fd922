//! Binary netpbm readers and writers: P5 grayscale frames, P4 bitmaps.
//!
//! Only the binary variants are supported, and only 8-bit grayscale. The
//! writers emit a canonical header (`P5\n<w> <h>\n255\n`); the readers accept
//! any legal whitespace and `#` comments in the header.

use crate::bitmap::MotionBitmap;
use crate::error::{Error, Result};
use crate::sensor::GrayFrame;
use std::fs;
use std::io::Write;
use std::path::Path;

const MAX_DIM: usize = 1 << 15;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Netpbm("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        let s = std::str::from_utf8(tok)
            .map_err(|_| Error::Netpbm(format!("non-ascii {what} in header")))?;
        let v: usize = s
            .parse()
            .map_err(|_| Error::Netpbm(format!("bad {what} {s:?}")))?;
        if v == 0 || v > MAX_DIM {
            return Err(Error::Netpbm(format!("{what} {v} out of range")));
        }
        Ok(v)
    }

    /// Exactly one whitespace byte separates the header from the raster.
    fn raster(&mut self) -> Result<&'a [u8]> {
        if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
            return Err(Error::Netpbm("missing separator before raster".into()));
        }
        self.pos += 1;
        Ok(&self.bytes[self.pos..])
    }
}

/// Parse a binary 8-bit PGM (`P5`).
pub fn read_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.token()?;
    if magic != b"P5" {
        return Err(Error::Netpbm(format!(
            "unsupported magic {:?}, want P5",
            String::from_utf8_lossy(magic)
        )));
    }
    let cols = cur.number("width")?;
    let rows = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval > 255 {
        return Err(Error::Netpbm(format!(
            "maxval {maxval} needs 16-bit samples, only 8-bit supported"
        )));
    }
    let raster = cur.raster()?;
    let need = rows * cols;
    if raster.len() < need {
        return Err(Error::Netpbm(format!(
            "raster truncated: need {need} bytes, have {}",
            raster.len()
        )));
    }
    Ok(GrayFrame::from_pixels(rows, cols, raster[..need].to_vec()))
}

/// Write a binary 8-bit PGM (`P5`).
pub fn write_pgm<W: Write>(frame: &GrayFrame, w: &mut W) -> std::io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", frame.cols(), frame.rows())?;
    w.write_all(frame.pixels())
}

/// Parse a binary PBM (`P4`). Set bits become hot pixels.
pub fn read_pbm(bytes: &[u8]) -> Result<MotionBitmap> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.token()?;
    if magic != b"P4" {
        return Err(Error::Netpbm(format!(
            "unsupported magic {:?}, want P4",
            String::from_utf8_lossy(magic)
        )));
    }
    let cols = cur.number("width")?;
    let rows = cur.number("height")?;
    let raster = cur.raster()?;
    let stride = cols.div_ceil(8);
    if raster.len() < rows * stride {
        return Err(Error::Netpbm(format!(
            "raster truncated: need {} bytes, have {}",
            rows * stride,
            raster.len()
        )));
    }
    let mut bm = MotionBitmap::with_dims(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let byte = raster[r * stride + c / 8];
            // Bits are packed MSB-first within each row byte.
            if byte & (0x80 >> (c % 8)) != 0 {
                bm.set(r, c, true);
            }
        }
    }
    Ok(bm)
}

/// Write a binary PBM (`P4`). Rows are padded to whole bytes.
pub fn write_pbm<W: Write>(bm: &MotionBitmap, w: &mut W) -> std::io::Result<()> {
    write!(w, "P4\n{} {}\n", bm.cols(), bm.rows())?;
    let stride = bm.cols().div_ceil(8);
    let mut row = vec![0u8; stride];
    for r in 0..bm.rows() {
        row.fill(0);
        for c in 0..bm.cols() {
            if bm.get(r, c) {
                row[c / 8] |= 0x80 >> (c % 8);
            }
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn read_pgm_file(path: &Path) -> Result<GrayFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pgm(&bytes)
}

pub fn write_pgm_file(frame: &GrayFrame, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_pgm(frame, &mut buf).expect("vec write cannot fail");
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_pbm_file(path: &Path) -> Result<MotionBitmap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pbm(&bytes)
}

pub fn write_pbm_file(bm: &MotionBitmap, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_pbm(bm, &mut buf).expect("vec write cannot fail");
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
