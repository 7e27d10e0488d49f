//! In-memory 8-bit RGB images with the two geometry operations the loader
//! needs: center crop and bilinear resize.

use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB rows, `height * width * 3` bytes.
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height * 3],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let off = (y * self.width + x) * 3;
        [self.pixels[off], self.pixels[off + 1], self.pixels[off + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let off = (y * self.width + x) * 3;
        self.pixels[off..off + 3].copy_from_slice(&rgb);
    }

    /// Largest centered square.
    pub fn center_crop_square(&self) -> RgbImage {
        let side = self.width.min(self.height);
        let x0 = (self.width - side) / 2;
        let y0 = (self.height - side) / 2;
        let mut out = RgbImage::new(side, side);
        for y in 0..side {
            for x in 0..side {
                out.set(x, y, self.get(x0 + x, y0 + y));
            }
        }
        out
    }

    /// Bilinear resize.
    pub fn resize(&self, width: usize, height: usize) -> RgbImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut out = RgbImage::new(width, height);
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        for y in 0..height {
            // Sample at pixel centers.
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, self.height as f64 - 1.0);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, self.width as f64 - 1.0);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = fx - x0 as f64;
                let mut rgb = [0u8; 3];
                for c in 0..3 {
                    let p00 = self.get(x0, y0)[c] as f64;
                    let p01 = self.get(x1, y0)[c] as f64;
                    let p10 = self.get(x0, y1)[c] as f64;
                    let p11 = self.get(x1, y1)[c] as f64;
                    let top = p00 * (1.0 - wx) + p01 * wx;
                    let bottom = p10 * (1.0 - wx) + p11 * wx;
                    rgb[c] = (top * (1.0 - wy) + bottom * wy).round().clamp(0.0, 255.0) as u8;
                }
                out.set(x, y, rgb);
            }
        }
        out
    }

    /// `[3, H, W]` tensor with values in [0, 1].
    pub fn to_tensor(&self) -> Result<Tensor> {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; 3 * h * w];
        for y in 0..h {
            for x in 0..w {
                let rgb = self.get(x, y);
                for c in 0..3 {
                    data[c * h * w + y * w + x] = rgb[c] as f64 / 255.0;
                }
            }
        }
        Tensor::new(vec![3, h, w], data)
    }

    /// Quantize a `[3, H, W]` tensor in [0, 1] back to 8-bit pixels.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (h, w) = match t.shape()[..] {
            [3, h, w] => (h, w),
            _ => {
                return Err(crate::error::Error::ShapeMismatch {
                    op: "image_from_tensor",
                    lhs: t.shape().to_vec(),
                    rhs: vec![3, 0, 0],
                })
            }
        };
        let mut out = RgbImage::new(w, h);
        let data = t.data();
        for y in 0..h {
            for x in 0..w {
                let mut rgb = [0u8; 3];
                for c in 0..3 {
                    let v = data[c * h * w + y * w + x];
                    rgb[c] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
                }
                out.set(x, y, rgb);
            }
        }
        Ok(out)
    }
}
