//! 8-bit grayscale frames and binary PGM (P5) I/O.

use std::io::{Read, Write};
use std::path::Path;

use crate::VisionError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, VisionError> {
        if data.len() != width * height {
            return Err(VisionError::Dimension(format!(
                "{}x{} frame needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Frame) -> Result<(), VisionError> {
        if self.width != other.width || self.height != other.height {
            return Err(VisionError::Dimension(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, VisionError> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while pos < bytes.len() && bytes[pos] != b'\n' {
                            pos += 1;
                        }
                    }
                    _ => break,
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err(VisionError::Pgm("truncated header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| VisionError::Pgm("non-ascii header".into()))?);
        }
        if fields[0] != "P5" {
            return Err(VisionError::Pgm(format!("expected P5, found {}", fields[0])));
        }
        let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| VisionError::Pgm(format!("bad {what} `{s}`")));
        let (w, h, maxval) = (num(fields[1], "width")?, num(fields[2], "height")?, num(fields[3], "maxval")?);
        if maxval != 255 {
            return Err(VisionError::Pgm(format!("only maxval 255 is supported, found {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(VisionError::Pgm("missing raster separator".into()));
        }
        pos += 1;
        let raster = &bytes[pos..];
        if raster.len() < w * h {
            return Err(VisionError::Pgm(format!("raster holds {} bytes, need {}", raster.len(), w * h)));
        }
        Frame::new(w, h, raster[..w * h].to_vec())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self, VisionError> {
        let mut buf = Vec::new();
        std::fs::File::open(path.as_ref())?.read_to_end(&mut buf)?;
        Self::from_pgm(&buf)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), VisionError> {
        std::fs::File::create(path.as_ref())?.write_all(&self.to_pgm())?;
        Ok(())
    }

    /// Binary mask as a {0, 255} frame.
    pub fn from_mask(width: usize, height: usize, mask: &[bool]) -> Result<Self, VisionError> {
        Frame::new(width, height, mask.iter().map(|&m| if m { 255 } else { 0 }).collect())
    }

    /// Nearest-neighbour downscale by an integer factor.
    pub fn downscale(&self, factor: usize) -> Frame {
        let factor = factor.max(1);
        let (w, h) = (self.width / factor, self.height / factor);
        Frame::from_fn(w, h, |x, y| self.get(x * factor, y * factor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_roundtrip_is_bit_exact() {
        let f = Frame::from_fn(7, 5, |x, y| (x * 31 + y * 17) as u8);
        let bytes = f.to_pgm();
        assert_eq!(&bytes[..11], b"P5\n7 5\n255\n");
        let g = Frame::from_pgm(&bytes).unwrap();
        assert_eq!(f, g);
        assert_eq!(g.to_pgm(), bytes);
    }

    #[test]
    fn pgm_comments_and_errors() {
        let mut bytes = b"P5 # comment\n2 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20]);
        assert_eq!(Frame::from_pgm(&bytes).unwrap().data(), &[10, 20]);
        assert!(Frame::from_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(Frame::from_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(Frame::from_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(Frame::from_pgm(b"P5\n1").is_err());
    }

    #[test]
    fn shape_checks() {
        assert!(Frame::new(2, 2, vec![0; 3]).is_err());
        assert!(Frame::filled(2, 2, 0).same_shape(&Frame::filled(2, 3, 0)).is_err());
    }
}
