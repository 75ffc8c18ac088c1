//! Browser bindings: render toy scenes, run the filter pipeline on canvas
//! pixels, and score the result against a reference.

use wasm_bindgen::prelude::*;

use retouch_core::filters::{apply_pipeline, filter_specs, ActionVector};
use retouch_core::image::{psnr, ssim, Image};
use retouch_core::synth::{distort, SceneGenerator};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Canvas `ImageData` bytes (RGBA) to an RGB image; alpha is ignored.
fn from_rgba(rgba: &[u8], width: usize, height: usize) -> Result<Image, JsValue> {
    if rgba.len() != width * height * 4 {
        return Err(js_err(format!(
            "expected {} RGBA bytes for {width}x{height}, got {}",
            width * height * 4,
            rgba.len()
        )));
    }
    let data = rgba
        .chunks_exact(4)
        .flat_map(|p| [p[0], p[1], p[2]])
        .map(|v| f32::from(v) / 255.0)
        .collect();
    Image::new(width, height, data).map_err(js_err)
}

fn to_rgba(image: &Image) -> Vec<u8> {
    image
        .pixels()
        .flat_map(|px| {
            let [r, g, b] = px.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
            [r, g, b, 255]
        })
        .collect()
}

/// Filter names in pipeline order, for labelling the sliders.
#[wasm_bindgen]
pub fn filter_names() -> Vec<String> {
    filter_specs().iter().map(|s| s.name.to_string()).collect()
}

/// Scene `index` as RGBA, optionally with the toy darken-and-desaturate
/// distortion applied.
#[wasm_bindgen]
pub fn render_scene(seed: u32, index: u32, size: usize, distorted: bool) -> Result<Vec<u8>, JsValue> {
    if size == 0 || size > 1024 {
        return Err(js_err("size must be in 1..=1024"));
    }
    let img = SceneGenerator::new(u64::from(seed)).render(u64::from(index), size);
    Ok(to_rgba(&if distorted { distort(&img) } else { img }))
}

/// Apply the twelve filters with `params` (each in [-1, 1]) to RGBA pixels.
#[wasm_bindgen]
pub fn apply_filters(rgba: &[u8], width: usize, height: usize, params: &[f64]) -> Result<Vec<u8>, JsValue> {
    let img = from_rgba(rgba, width, height)?;
    let action = ActionVector::from_slice(params).map_err(js_err)?;
    Ok(to_rgba(&apply_pipeline(&img, &action).map_err(js_err)?))
}

/// `[psnr, ssim]` of two same-sized RGBA buffers.
#[wasm_bindgen]
pub fn compare(a: &[u8], b: &[u8], width: usize, height: usize) -> Result<Vec<f64>, JsValue> {
    let a = from_rgba(a, width, height)?;
    let b = from_rgba(b, width, height)?;
    Ok(vec![psnr(&a, &b).map_err(js_err)?, ssim(&a, &b).map_err(js_err)?])
}
