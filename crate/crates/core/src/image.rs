//! Image tensors and deterministic resampling.
//!
//! All pipeline images are H×W×3 tensors with values in [0, 1]; the canonical
//! size after preprocessing is 75×75. Resampling is bilinear and implemented
//! here rather than delegated, so that a same-size resize is value-identical
//! and outputs are reproducible across platforms.

use ndarray::Array3;
use std::path::Path;
use thiserror::Error;

/// Canonical side length, in pixels, of preprocessed images.
pub const CANONICAL_SIZE: usize = 75;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("empty image ({height}x{width})")]
    EmptyImage { height: usize, width: usize },
    #[error("crop box ({x},{y}) {width}x{height} exceeds image bounds {image_width}x{image_height}")]
    CropOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        image_width: usize,
        image_height: usize,
    },
    #[error("expected {expected} channels, got {got}")]
    BadChannelCount { expected: usize, got: usize },
    #[error("pixel value {value} at ({row},{col},{channel}) outside [0,1]")]
    ValueOutOfRange {
        value: f32,
        row: usize,
        col: usize,
        channel: usize,
    },
    #[error("image decode failed: {0}")]
    Decode(#[from] image::ImageError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// An RGB image with values in [0, 1], stored H×W×3.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Array3<f32>,
}

impl ImageTensor {
    /// Wrap an H×W×3 array, validating shape and value range.
    pub fn new(data: Array3<f32>) -> Result<Self, ImageError> {
        let (h, w, c) = data.dim();
        if c != 3 {
            return Err(ImageError::BadChannelCount { expected: 3, got: c });
        }
        if h == 0 || w == 0 {
            return Err(ImageError::EmptyImage { height: h, width: w });
        }
        for ((row, col, channel), &value) in data.indexed_iter() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ImageError::ValueOutOfRange { value, row, col, channel });
            }
        }
        Ok(Self { data })
    }

    /// Build from a per-pixel closure, clamping into [0, 1].
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let data = Array3::from_shape_fn((height, width, 3), |(r, c, ch)| f(r, c, ch).clamp(0.0, 1.0));
        Self { data }
    }

    /// A constant-valued image.
    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        Self::from_fn(height, width, |_, _, _| value)
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn is_canonical(&self) -> bool {
        self.height() == CANONICAL_SIZE && self.width() == CANONICAL_SIZE
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f32> {
        self.data
    }

    /// Luminance plane: the per-pixel channel mean, H×W.
    pub fn luminance(&self) -> ndarray::Array2<f32> {
        let (h, w, _) = self.data.dim();
        ndarray::Array2::from_shape_fn((h, w), |(r, c)| {
            (self.data[[r, c, 0]] + self.data[[r, c, 1]] + self.data[[r, c, 2]]) / 3.0
        })
    }
}

/// A crop rectangle in pixel coordinates, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CropBox {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Sample a channel at fractional coordinates with bilinear weights,
/// replicating edge pixels for out-of-range coordinates.
pub(crate) fn bilinear_sample(data: &Array3<f32>, y: f32, x: f32, channel: usize) -> f32 {
    let (h, w, _) = data.dim();
    let xc = x.clamp(0.0, (w - 1) as f32);
    let yc = y.clamp(0.0, (h - 1) as f32);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = xc - x0 as f32;
    let ty = yc - y0 as f32;
    let top = data[[y0, x0, channel]] * (1.0 - tx) + data[[y0, x1, channel]] * tx;
    let bottom = data[[y1, x0, channel]] * (1.0 - tx) + data[[y1, x1, channel]] * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Crop (optionally) and bilinearly resize an image to the canonical
/// 75×75×3 shape. A same-size full-frame input passes through value-identical.
pub fn crop_resize(image: &ImageTensor, crop: Option<CropBox>) -> Result<ImageTensor, ImageError> {
    resize_to(image, crop, CANONICAL_SIZE, CANONICAL_SIZE)
}

/// Crop and resize to an arbitrary target size. Used by `crop_resize` and by
/// tests that exercise non-canonical shapes.
pub fn resize_to(
    image: &ImageTensor,
    crop: Option<CropBox>,
    out_height: usize,
    out_width: usize,
) -> Result<ImageTensor, ImageError> {
    let (h, w, _) = image.data.dim();
    let (cx, cy, cw, ch) = match crop {
        Some(b) => {
            if b.width == 0 || b.height == 0 {
                return Err(ImageError::EmptyImage { height: b.height, width: b.width });
            }
            if b.x + b.width > w || b.y + b.height > h {
                return Err(ImageError::CropOutOfBounds {
                    x: b.x,
                    y: b.y,
                    width: b.width,
                    height: b.height,
                    image_width: w,
                    image_height: h,
                });
            }
            (b.x, b.y, b.width, b.height)
        }
        None => (0, 0, w, h),
    };
    let sx = cw as f32 / out_width as f32;
    let sy = ch as f32 / out_height as f32;
    let data = Array3::from_shape_fn((out_height, out_width, 3), |(r, c, chan)| {
        // Pixel-center mapping: a same-size resize lands exactly on the grid.
        let src_x = cx as f32 + (c as f32 + 0.5) * sx - 0.5;
        let src_y = cy as f32 + (r as f32 + 0.5) * sy - 0.5;
        bilinear_sample(&image.data, src_y, src_x, chan).clamp(0.0, 1.0)
    });
    Ok(ImageTensor { data })
}

/// Decode a JPEG/PNG file into an [0,1] RGB tensor.
pub fn decode_image(path: &Path) -> Result<ImageTensor, ImageError> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(ImageError::EmptyImage { height: h as usize, width: w as usize });
    }
    let data = Array3::from_shape_fn((h as usize, w as usize, 3), |(r, c, ch)| {
        f32::from(img.get_pixel(c as u32, r as u32).0[ch]) / 255.0
    });
    Ok(ImageTensor { data })
}

/// Write an image tensor as an 8-bit PNG.
pub fn save_png(image: &ImageTensor, path: &Path) -> Result<(), ImageError> {
    let (h, w, _) = image.data.dim();
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for (r, c, ch) in itertools_free_indices(h, w) {
        buf.get_pixel_mut(c as u32, r as u32).0[ch] =
            (image.data[[r, c, ch]] * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    buf.save(path)?;
    Ok(())
}

fn itertools_free_indices(h: usize, w: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..h).flat_map(move |r| (0..w).flat_map(move |c| (0..3).map(move |ch| (r, c, ch))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, |r, c, ch| {
            (r as f32 + 2.0 * c as f32 + 3.0 * ch as f32) / (h as f32 + 2.0 * w as f32 + 9.0)
        })
    }

    #[test]
    fn resize_200_to_canonical() {
        let out = crop_resize(&ramp(200, 200), None).unwrap();
        assert_eq!((out.height(), out.width()), (75, 75));
    }

    #[test]
    fn same_size_resize_is_value_identical() {
        let img = ramp(75, 75);
        let out = crop_resize(&img, None).unwrap();
        assert_eq!(img.data(), out.data());
    }

    #[test]
    fn crop_out_of_bounds_rejected() {
        let img = ramp(50, 50);
        let err = crop_resize(&img, Some(CropBox { x: 10, y: 10, width: 50, height: 20 })).unwrap_err();
        assert!(matches!(err, ImageError::CropOutOfBounds { .. }));
    }

    #[test]
    fn crop_selects_subregion() {
        // Constant-valued subregion crops to a constant image.
        let img = ImageTensor::from_fn(40, 40, |r, c, _| if r < 20 && c < 20 { 0.25 } else { 0.75 });
        let out = crop_resize(&img, Some(CropBox { x: 0, y: 0, width: 20, height: 20 })).unwrap();
        for &v in out.data().iter() {
            assert!((v - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn values_validated_on_construction() {
        let mut arr = Array3::<f32>::zeros((4, 4, 3));
        arr[[1, 2, 0]] = 1.5;
        assert!(matches!(
            ImageTensor::new(arr),
            Err(ImageError::ValueOutOfRange { .. })
        ));
        let arr = Array3::<f32>::zeros((0, 4, 3));
        assert!(matches!(ImageTensor::new(arr), Err(ImageError::EmptyImage { .. })));
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img = ramp(16, 16);
        save_png(&img, &path).unwrap();
        let back = decode_image(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data().iter()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}
