//! The editing pipeline: twelve retouch filters driven by parameters in
//! `[-1, 1]` and applied in a fixed order, each followed by clamping.
//!
//! Pointwise filters only look at the pixel itself. Clarity and Dehaze use
//! neighborhoods whose radius is a fixed fraction of the short image side,
//! so one parameter vector edits a thumbnail and a full-size photo alike.

mod kernels;

use std::fmt;

use crate::error::{Error, Result};
use crate::image::{luminance, Image};

pub const NUM_FILTERS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Filter {
    Dehaze,
    Clarity,
    Contrast,
    Exposure,
    Temp,
    Tint,
    Whites,
    Blacks,
    Highlights,
    Shadows,
    Vibrance,
    Saturation,
}

/// Canonical application order.
pub const FILTERS: [Filter; NUM_FILTERS] = [
    Filter::Dehaze,
    Filter::Clarity,
    Filter::Contrast,
    Filter::Exposure,
    Filter::Temp,
    Filter::Tint,
    Filter::Whites,
    Filter::Blacks,
    Filter::Highlights,
    Filter::Shadows,
    Filter::Vibrance,
    Filter::Saturation,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    /// 1-based position in the pipeline.
    pub index: usize,
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub pointwise: bool,
}

impl Filter {
    /// Look up by 1-based pipeline position.
    pub fn from_index(k: usize) -> Result<Filter> {
        k.checked_sub(1)
            .and_then(|i| FILTERS.get(i).copied())
            .ok_or_else(|| Error::invalid(format!("unknown filter index {k} (expected 1..={NUM_FILTERS})")))
    }

    pub fn from_name(name: &str) -> Option<Filter> {
        FILTERS.iter().copied().find(|f| f.name().eq_ignore_ascii_case(name))
    }

    pub fn position(self) -> usize {
        FILTERS.iter().position(|&f| f == self).expect("listed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Filter::Dehaze => "Dehaze",
            Filter::Clarity => "Clarity",
            Filter::Contrast => "Contrast",
            Filter::Exposure => "Exposure",
            Filter::Temp => "Temp",
            Filter::Tint => "Tint",
            Filter::Whites => "Whites",
            Filter::Blacks => "Blacks",
            Filter::Highlights => "Highlights",
            Filter::Shadows => "Shadows",
            Filter::Vibrance => "Vibrance",
            Filter::Saturation => "Saturation",
        }
    }

    pub fn spec(self) -> FilterSpec {
        FilterSpec {
            index: self.position() + 1,
            name: self.name(),
            min: -1.0,
            max: 1.0,
            pointwise: !matches!(self, Filter::Dehaze | Filter::Clarity),
        }
    }

    /// Apply this filter with parameter `value` and clamp to `[0, 1]`.
    pub fn apply(self, image: &Image, value: f64) -> Result<Image> {
        let spec = self.spec();
        if !value.is_finite() || value < spec.min || value > spec.max {
            return Err(Error::invalid(format!(
                "{} parameter {value} outside [{}, {}]",
                spec.name, spec.min, spec.max
            )));
        }
        if value == 0.0 {
            return Ok(image.clone());
        }
        let p = value as f32;
        let out = match self {
            Filter::Dehaze => dehaze(image, p),
            Filter::Clarity => clarity(image, p),
            _ => image.map_pixels(|px| self.pointwise(px, p)),
        };
        Ok(out)
    }

    /// Pointwise filters as a pixel function. Panics for neighborhood filters.
    fn pointwise(self, px: [f32; 3], p: f32) -> [f32; 3] {
        let [r, g, b] = px;
        match self {
            Filter::Contrast => px.map(|v| contrast_curve(v, p)),
            Filter::Exposure => {
                let gain = (2.0 * p).exp2();
                px.map(|v| v * gain)
            }
            Filter::Temp => [r * (0.3 * p).exp2(), g, b * (-0.3 * p).exp2()],
            Filter::Tint => [r, g * (-0.3 * p).exp2(), b],
            Filter::Whites => px.map(|v| v + 0.3 * p * v * v),
            Filter::Blacks => px.map(|v| v + 0.3 * p * (1.0 - v) * (1.0 - v)),
            Filter::Highlights => {
                let mask = smoothstep(0.5, 1.0, luminance(px));
                let gain = (p * mask).exp2();
                px.map(|v| v * gain)
            }
            Filter::Shadows => {
                let mask = 1.0 - smoothstep(0.0, 0.5, luminance(px));
                let gain = (p * mask).exp2();
                px.map(|v| v * gain)
            }
            Filter::Vibrance => {
                let max = r.max(g).max(b);
                let min = r.min(g).min(b);
                let sat = if max > 0.0 { (max - min) / max } else { 0.0 };
                scale_chroma(px, 1.0 + p * (1.0 - sat))
            }
            Filter::Saturation => scale_chroma(px, 1.0 + p),
            Filter::Dehaze | Filter::Clarity => unreachable!("{self} is not pointwise"),
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn filter_specs() -> [FilterSpec; NUM_FILTERS] {
    FILTERS.map(Filter::spec)
}

fn smoothstep(lo: f32, hi: f32, x: f32) -> f32 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Move each channel away from (or toward) the pixel's luminance.
fn scale_chroma(px: [f32; 3], s: f32) -> [f32; 3] {
    let l = luminance(px);
    px.map(|v| l + (v - l) * s)
}

/// S-curve around mid-gray for positive `p`, linear flattening for negative.
fn contrast_curve(v: f32, p: f32) -> f32 {
    if p > 0.0 {
        let c = 5.0 * p as f64;
        let x = v as f64 - 0.5;
        (0.5 + 0.5 * (c * x).tanh() / (0.5 * c).tanh()) as f32
    } else {
        0.5 + (v - 0.5) * (1.0 + 0.75 * p)
    }
}

/// Neighborhood radius: a fraction of the short side, at least one pixel.
pub fn scaled_radius(image: &Image, fraction: f64) -> usize {
    let short = image.width().min(image.height()) as f64;
    ((fraction * short).round() as usize).max(1)
}

pub const CLARITY_RADIUS_FRACTION: f64 = 0.02;
pub const DEHAZE_RADIUS_FRACTION: f64 = 0.03;

/// Unsharp mask on luminance, concentrated in the midtones.
fn clarity(image: &Image, p: f32) -> Image {
    let (w, h) = image.dims();
    let radius = scaled_radius(image, CLARITY_RADIUS_FRACTION);
    let luma = image.luma();
    let blurred = kernels::gaussian_blur(&luma, w, h, radius as f32);
    let mut i = 0;
    image.map_pixels(|px| {
        let l = luma[i];
        let detail = l - blurred[i];
        i += 1;
        let midtone = 1.0 - (2.0 * l - 1.0).powi(2);
        let delta = 1.5 * p * detail * midtone;
        px.map(|v| v + delta)
    })
}

/// Dark-channel haze removal (positive) or haze addition (negative).
fn dehaze(image: &Image, p: f32) -> Image {
    let (w, h) = image.dims();
    let radius = scaled_radius(image, DEHAZE_RADIUS_FRACTION);
    let dark: Vec<f32> = image.pixels().map(|[r, g, b]| r.min(g).min(b)).collect();
    let dark = kernels::min_filter(&dark, w, h, radius);
    let haze = kernels::box_blur(&dark, w, h, radius);
    let mut i = 0;
    image.map_pixels(|px| {
        let d = haze[i];
        i += 1;
        if p > 0.0 {
            let offset = 0.9 * p * d;
            let transmission = (1.0 - offset).max(0.1);
            px.map(|v| (v - offset) / transmission)
        } else {
            let veil = -0.5 * p * (1.0 - d);
            px.map(|v| v + veil * (1.0 - v))
        }
    })
}

/// Parameters for one full edit, one per filter in [`FILTERS`] order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionVector([f64; NUM_FILTERS]);

impl Default for ActionVector {
    fn default() -> Self {
        Self::neutral()
    }
}

impl ActionVector {
    pub fn new(values: [f64; NUM_FILTERS]) -> Result<Self> {
        for (f, &v) in FILTERS.iter().zip(&values) {
            let s = f.spec();
            if !v.is_finite() || v < s.min || v > s.max {
                return Err(Error::invalid(format!("{} parameter {v} outside [{}, {}]", s.name, s.min, s.max)));
            }
        }
        Ok(ActionVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_FILTERS] = values
            .try_into()
            .map_err(|_| Error::invalid(format!("expected {NUM_FILTERS} parameters, got {}", values.len())))?;
        Self::new(arr)
    }

    /// All zeros: the identity edit.
    pub fn neutral() -> Self {
        ActionVector([0.0; NUM_FILTERS])
    }

    /// Only `filter` set to `value`.
    pub fn single(filter: Filter, value: f64) -> Result<Self> {
        let mut v = [0.0; NUM_FILTERS];
        v[filter.position()] = value;
        Self::new(v)
    }

    pub fn get(&self, filter: Filter) -> f64 {
        self.0[filter.position()]
    }

    pub fn values(&self) -> &[f64; NUM_FILTERS] {
        &self.0
    }

    /// Componentwise sum; fails if any component leaves its range.
    pub fn try_add(&self, other: &ActionVector) -> Result<Self> {
        let mut v = self.0;
        for (a, b) in v.iter_mut().zip(&other.0) {
            *a += b;
        }
        Self::new(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Filter, f64)> + '_ {
        FILTERS.iter().copied().zip(self.0.iter().copied())
    }
}

/// Apply filter `k` (1-based pipeline position) with parameter `value`.
pub fn apply_filter(image: &Image, k: usize, value: f64) -> Result<Image> {
    Filter::from_index(k)?.apply(image, value)
}

/// Run every filter in canonical order; zero parameters are skipped.
pub fn apply_pipeline(image: &Image, action: &ActionVector) -> Result<Image> {
    let mut out = image.clone();
    for (filter, value) in action.iter() {
        if value != 0.0 {
            out = filter.apply(&out, value)?;
        }
    }
    Ok(out)
}

/// The image after each stage of the pipeline, useful for explaining an edit.
pub fn pipeline_stages(image: &Image, action: &ActionVector) -> Result<Vec<(Filter, Image)>> {
    let mut out = Vec::with_capacity(NUM_FILTERS);
    let mut cur = image.clone();
    for (filter, value) in action.iter() {
        cur = filter.apply(&cur, value)?;
        out.push((filter, cur.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
