//! Owned 8-bit raster images (1 or 3 channels) plus the small set of
//! raster operations the pipeline needs: load/save, grayscale conversion,
//! bilinear resize, crop, horizontal flip, gaussian blur.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit image, interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Raster({}x{}x{})", self.width, self.height, self.channels)
    }
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("raster dimensions must be >= 1".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument("raster must have 1 or 3 channels".into()));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "raster data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Self {
        Raster::new(
            width,
            height,
            channels,
            vec![value; width as usize * height as usize * channels as usize],
        )
        .expect("valid fill dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn channels(&self) -> u8 {
        self.channels
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize
            + c as usize;
        self.data[idx]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, v: u8) {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize
            + c as usize;
        self.data[idx] = v;
    }

    /// Load from disk; grayscale inputs are replicated to 3 channels.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Raster::new(w, h, 3, rgb.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let as_io = |e: image::ImageError| Error::Image {
            path: path.to_path_buf(),
            source: e,
        };
        match self.channels {
            3 => image::RgbImage::from_raw(self.width, self.height, self.data.clone())
                .expect("length checked at construction")
                .save(path)
                .map_err(as_io),
            _ => image::GrayImage::from_raw(self.width, self.height, self.data.clone())
                .expect("length checked at construction")
                .save(path)
                .map_err(as_io),
        }
    }

    /// Luma conversion 0.299R + 0.587G + 0.114B; identity on 1-channel input.
    pub fn to_grayscale(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.width as usize * self.height as usize);
        for px in self.data.chunks_exact(3) {
            let v = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
        Raster::new(self.width, self.height, 1, out).expect("same dimensions")
    }

    /// 1-channel raster replicated to RGB; identity on 3-channel input.
    pub fn to_rgb(&self) -> Raster {
        if self.channels == 3 {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.data.len() * 3);
        for &v in &self.data {
            out.extend_from_slice(&[v, v, v]);
        }
        Raster::new(self.width, self.height, 3, out).expect("same dimensions")
    }

    pub fn flip_horizontal(&self) -> Raster {
        let mut out = self.clone();
        let w = self.width as usize;
        let ch = self.channels as usize;
        for y in 0..self.height as usize {
            let row = &self.data[y * w * ch..(y + 1) * w * ch];
            let out_row = &mut out.data[y * w * ch..(y + 1) * w * ch];
            for x in 0..w {
                let src = &row[(w - 1 - x) * ch..(w - x) * ch];
                out_row[x * ch..(x + 1) * ch].copy_from_slice(src);
            }
        }
        out
    }

    /// Copy of the sub-image at (x, y) with size w x h; caller guarantees bounds.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Raster {
        assert!(x + w <= self.width && y + h <= self.height, "crop out of bounds");
        let ch = self.channels as usize;
        let mut data = Vec::with_capacity(w as usize * h as usize * ch);
        for row in y..y + h {
            let start = (row as usize * self.width as usize + x as usize) * ch;
            data.extend_from_slice(&self.data[start..start + w as usize * ch]);
        }
        Raster::new(w, h, self.channels, data).expect("valid crop dimensions")
    }

    /// Bilinear resize. Sample positions map pixel centers of the output to
    /// source coordinates by the width/height ratio.
    pub fn resize_bilinear(&self, new_w: u32, new_h: u32) -> Raster {
        assert!(new_w >= 1 && new_h >= 1);
        let ch = self.channels as usize;
        let sx = self.width as f64 / new_w as f64;
        let sy = self.height as f64 / new_h as f64;
        let mut data = vec![0u8; new_w as usize * new_h as usize * ch];
        for oy in 0..new_h {
            let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as u32;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = fy - y0 as f64;
            for ox in 0..new_w {
                let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as u32;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = fx - x0 as f64;
                for c in 0..ch {
                    let c = c as u8;
                    let top = self.get(x0, y0, c) as f64 * (1.0 - wx)
                        + self.get(x1, y0, c) as f64 * wx;
                    let bot = self.get(x0, y1, c) as f64 * (1.0 - wx)
                        + self.get(x1, y1, c) as f64 * wx;
                    let v = top * (1.0 - wy) + bot * wy;
                    let idx = (oy as usize * new_w as usize + ox as usize) * ch + c as usize;
                    data[idx] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        Raster::new(new_w, new_h, self.channels, data).expect("valid resize dimensions")
    }

    /// Separable gaussian blur, kernel radius ceil(3*sigma), reflected borders.
    pub fn gaussian_blur(&self, sigma: f64) -> Raster {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as i64;
        let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
        let denom = 2.0 * sigma * sigma;
        for i in -radius..=radius {
            kernel.push((-(i * i) as f64 / denom).exp());
        }
        let sum: f64 = kernel.iter().sum();
        for k in &mut kernel {
            *k /= sum;
        }

        let ch = self.channels as usize;
        let w = self.width as i64;
        let h = self.height as i64;
        let reflect = |v: i64, n: i64| -> i64 {
            // reflect-101 style without repeating the edge sample twice
            let mut v = v;
            while v < 0 || v >= n {
                if v < 0 {
                    v = -v;
                }
                if v >= n {
                    v = 2 * (n - 1) - v;
                }
            }
            v
        };

        // horizontal pass into f64 buffer
        let mut tmp = vec![0f64; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for (ki, k) in kernel.iter().enumerate() {
                        let sx = reflect(x + ki as i64 - radius, w);
                        acc += k * self.get(sx as u32, y as u32, c as u8) as f64;
                    }
                    tmp[(y as usize * w as usize + x as usize) * ch + c] = acc;
                }
            }
        }
        // vertical pass
        let mut data = vec![0u8; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for (ki, k) in kernel.iter().enumerate() {
                        let sy = reflect(y + ki as i64 - radius, h);
                        acc += k * tmp[(sy as usize * w as usize + x as usize) * ch + c];
                    }
                    data[(y as usize * w as usize + x as usize) * ch + c] =
                        acc.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        Raster::new(self.width, self.height, self.channels, data).expect("same dimensions")
    }
}
