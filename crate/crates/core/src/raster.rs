//! Raster buffer types shared by the pipeline stages.
//!
//! All buffers are row-major with the origin at the top-left corner.

use std::io::BufWriter;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("buffer length {got} does not match {width}x{height} ({expect} expected)")]
    LengthMismatch {
        width: usize,
        height: usize,
        got: usize,
        expect: usize,
    },
    #[error("failed to read image {path}: {source}")]
    Read {
        path: String,
        source: image::ImageError,
    },
    #[error("failed to write image {path}: {source}")]
    Write {
        path: String,
        source: image::ImageError,
    },
    #[error("failed to write mask {path}: {source}")]
    WriteMask { path: String, source: png::EncodingError },
}

/// 8-bit RGB raster, interleaved `[r, g, b, r, g, b, ...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbRaster {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        let expect = width * height * 3;
        if data.len() != expect {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                got: data.len(),
                expect,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Solid-color raster.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
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

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies the `size`x`size` window with top-left corner `(x, y)`.
    /// The window must lie fully inside the raster.
    pub fn crop_square(&self, x: usize, y: usize, size: usize) -> RgbRaster {
        assert!(x + size <= self.width && y + size <= self.height);
        let mut data = Vec::with_capacity(size * size * 3);
        for row in y..y + size {
            let start = (row * self.width + x) * 3;
            data.extend_from_slice(&self.data[start..start + size * 3]);
        }
        RgbRaster {
            width: size,
            height: size,
            data,
        }
    }

    /// Box-filter downsample by an integer factor; trailing partial blocks are
    /// dropped. Used by the synthetic corpus generator to build pyramid levels.
    pub fn box_downsample(&self, factor: usize) -> RgbRaster {
        assert!(factor >= 1);
        let w = self.width / factor;
        let h = self.height / factor;
        let mut data = Vec::with_capacity(w * h * 3);
        for oy in 0..h {
            for ox in 0..w {
                let mut acc = [0u32; 3];
                for dy in 0..factor {
                    for dx in 0..factor {
                        let p = self.pixel(ox * factor + dx, oy * factor + dy);
                        acc[0] += u32::from(p[0]);
                        acc[1] += u32::from(p[1]);
                        acc[2] += u32::from(p[2]);
                    }
                }
                let n = (factor * factor) as u32;
                // round-to-nearest average
                data.push(((acc[0] + n / 2) / n) as u8);
                data.push(((acc[1] + n / 2) / n) as u8);
                data.push(((acc[2] + n / 2) / n) as u8);
            }
        }
        RgbRaster {
            width: w,
            height: h,
            data,
        }
    }

    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)
            .map_err(|source| RasterError::Read {
                path: path.display().to_string(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            data: img.into_raw(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| RasterError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        let expect = width * height;
        if data.len() != expect {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                got: data.len(),
                expect,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Binary mask; `true` marks tissue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, RasterError> {
        let expect = width * height;
        if data.len() != expect {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                got: data.len(),
                expect,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Writes the mask as a 1-bit grayscale PNG (1 = tissue).
    pub fn save_png_1bit(&self, path: &Path) -> Result<(), RasterError> {
        let wrap = |source| RasterError::WriteMask {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(|e| RasterError::WriteMask {
            path: path.display().to_string(),
            source: png::EncodingError::IoError(e),
        })?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::One);
        let mut writer = encoder.write_header().map_err(wrap)?;
        let row_bytes = self.width.div_ceil(8);
        let mut packed = vec![0u8; row_bytes * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    packed[y * row_bytes + x / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        writer.write_image_data(&packed).map_err(wrap)?;
        Ok(())
    }

    /// Reads a mask from any grayscale-decodable PNG; nonzero means tissue.
    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)
            .map_err(|source| RasterError::Read {
                path: path.display().to_string(),
                source,
            })?
            .to_luma8();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(|v| v != 0).collect();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            data,
        })
    }
}
