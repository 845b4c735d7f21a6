//! Fixed-resolution grayscale silhouette images and their file formats
//! (8-bit grayscale PNG and plain PGM/P5).
//!
//! Pixel values live in [0,1]. Files are loaded by /255 and written by
//! round(255*v); when loading a target silhouette, values >= 128 count as
//! foreground.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SilhouetteImage {
    pub width: usize,
    pub height: usize,
    /// Row-major scalars in [0,1].
    pub data: Vec<f64>,
}

impl SilhouetteImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        Ok(SilhouetteImage { width, height, data: vec![0.0; width * height] })
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidArgument("image data does not match dimensions".into()));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("pixel values must lie in [0,1]".into()));
        }
        Ok(SilhouetteImage { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_resolution(&self, other: &SilhouetteImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ResolutionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// Thresholds at 0.5 to an exact {0,1} image.
    pub fn binarize(&self) -> SilhouetteImage {
        SilhouetteImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Mean position of foreground pixel centers (values >= 0.5), or `None`
    /// for an image with no foreground.
    pub fn foreground_centroid(&self) -> Option<[f64; 2]> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.data[y * self.width + x] >= 0.5 {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1;
                }
            }
        }
        if n == 0 {
            None
        } else {
            Some([sx / n as f64, sy / n as f64])
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v * 255.0).round() as u8).collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height {
            return Err(Error::InvalidArgument("byte buffer does not match dimensions".into()));
        }
        Ok(SilhouetteImage {
            width,
            height,
            data: bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        })
    }

    /// Loads a PNG or PGM silhouette, picking the format by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => Self::load_pgm(path),
            _ => Self::load_png(path),
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image(e.to_string()))?.into_luma8();
        Self::from_bytes(img.width() as usize, img.height() as usize, img.as_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_bytes())
            .expect("buffer size matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let mut raw = Vec::new();
        File::open(path)?.read_to_end(&mut raw)?;
        let mut fields = Vec::new();
        let mut i = 0;
        // Header: magic, width, height, maxval, separated by whitespace with
        // optional '#' comments.
        while fields.len() < 4 && i < raw.len() {
            while i < raw.len() && (raw[i].is_ascii_whitespace() || raw[i] == b'#') {
                if raw[i] == b'#' {
                    while i < raw.len() && raw[i] != b'\n' {
                        i += 1;
                    }
                } else {
                    i += 1;
                }
            }
            let start = i;
            while i < raw.len() && !raw[i].is_ascii_whitespace() {
                i += 1;
            }
            if start < i {
                fields.push(String::from_utf8_lossy(&raw[start..i]).into_owned());
            }
        }
        if fields.len() < 4 || fields[0] != "P5" {
            return Err(Error::Image("not a P5 PGM file".into()));
        }
        let width: usize = fields[1].parse().map_err(|_| Error::Image("bad PGM width".into()))?;
        let height: usize = fields[2].parse().map_err(|_| Error::Image("bad PGM height".into()))?;
        let maxval: usize = fields[3].parse().map_err(|_| Error::Image("bad PGM maxval".into()))?;
        if maxval != 255 {
            return Err(Error::Image(format!("unsupported PGM maxval {maxval}")));
        }
        i += 1; // single whitespace after maxval
        let pixels = raw.get(i..i + width * height).ok_or_else(|| Error::Image("truncated PGM".into()))?;
        Self::from_bytes(width, height, pixels)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    /// Loads a target silhouette as an exact binary image (>= 128 is
    /// foreground).
    pub fn load_target(path: &Path) -> Result<Self> {
        Ok(Self::load(path)?.binarize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(w: usize, h: usize) -> SilhouetteImage {
        let data = (0..w * h).map(|i| if (i / w + i % w) % 2 == 0 { 1.0 } else { 0.25 }).collect();
        SilhouetteImage::from_data(w, h, data).unwrap()
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img = checker(9, 7);
        img.save_png(&path).unwrap();
        let back = SilhouetteImage::load(&path).unwrap();
        assert_eq!(back.to_bytes(), img.to_bytes());
    }

    #[test]
    fn pgm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = checker(5, 4);
        img.save_pgm(&path).unwrap();
        let back = SilhouetteImage::load(&path).unwrap();
        assert_eq!(back.to_bytes(), img.to_bytes());
    }

    #[test]
    fn binarize_threshold() {
        let img = SilhouetteImage::from_data(2, 1, vec![0.4999, 0.5]).unwrap();
        assert_eq!(img.binarize().data, vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(SilhouetteImage::from_data(1, 1, vec![1.5]).is_err());
        assert!(SilhouetteImage::new(0, 4).is_err());
    }
}
