//! Observation to model input: drop the sky half, resize to the square
//! network resolution, normalize to [0, 1], stack channels R,G,B,D.

use super::{DataError, Sample};
use ndarray::{Array2, Array3, ArrayView2};

/// Bilinear resize of one plane to (out_h, out_w).
fn resize_bilinear(src: ArrayView2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    Array2::from_shape_fn((out_h, out_w), |(oy, ox)| {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
        let y0 = fy.floor() as usize;
        let x0 = fx.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let ty = fy - y0 as f64;
        let tx = fx - x0 as f64;
        let a = src[(y0, x0)] * (1.0 - tx) + src[(y0, x1)] * tx;
        let b = src[(y1, x0)] * (1.0 - tx) + src[(y1, x1)] * tx;
        a * (1.0 - ty) + b * ty
    })
}

/// Nearest-neighbor resize for label planes.
fn resize_nearest(src: ArrayView2<u8>, out_h: usize, out_w: usize) -> Array2<u8> {
    let (h, w) = src.dim();
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    Array2::from_shape_fn((out_h, out_w), |(oy, ox)| {
        let y = (((oy as f64 + 0.5) * sy) as usize).min(h - 1);
        let x = (((ox as f64 + 0.5) * sx) as usize).min(w - 1);
        src[(y, x)]
    })
}

/// Float-plane variant: rgb (H, W, 3) and depth (H, W) in [0, 1] to a
/// (C, size, size) tensor, C = 4 with depth or 3 without.
pub fn preprocess_planes(
    rgb: &Array3<f64>,
    depth: &Array2<f64>,
    size: usize,
    include_depth: bool,
) -> Result<Array3<f64>, DataError> {
    let (h, w, c) = rgb.dim();
    if c != 3 || depth.dim() != (h, w) {
        return Err(DataError::ShapeMismatch {
            context: format!("rgb {:?} vs depth {:?}", rgb.dim(), depth.dim()),
        });
    }
    if h < 2 {
        return Err(DataError::ShapeMismatch {
            context: format!("image height {h} too small to crop"),
        });
    }
    let top = h / 2;
    let channels = if include_depth { 4 } else { 3 };
    let mut out = Array3::zeros((channels, size, size));
    for ch in 0..3 {
        let plane = rgb.slice(ndarray::s![top.., .., ch]);
        let resized = resize_bilinear(plane, size, size);
        out.slice_mut(ndarray::s![ch, .., ..]).assign(&resized);
    }
    if include_depth {
        let plane = depth.slice(ndarray::s![top.., ..]);
        let resized = resize_bilinear(plane, size, size);
        out.slice_mut(ndarray::s![3, .., ..]).assign(&resized);
    }
    Ok(out)
}

/// Semantic labels through the same geometry: crop the top half, then
/// nearest-neighbor resize so ids stay valid.
pub fn preprocess_semantic(semantic: &Array2<u8>, size: usize) -> Result<Array2<u8>, DataError> {
    let (h, _) = semantic.dim();
    if h < 2 {
        return Err(DataError::ShapeMismatch {
            context: format!("semantic height {h} too small to crop"),
        });
    }
    let top = h / 2;
    Ok(resize_nearest(semantic.slice(ndarray::s![top.., ..]), size, size))
}

/// Stored sample to (input tensor, semantic target).
pub fn preprocess_sample(
    sample: &Sample,
    size: usize,
    include_depth: bool,
) -> Result<(Array3<f64>, Array2<u8>), DataError> {
    let input = preprocess_planes(&sample.rgb_f64(), &sample.depth_f64(), size, include_depth)?;
    let target = preprocess_semantic(&sample.semantic, size)?;
    Ok((input, target))
}
