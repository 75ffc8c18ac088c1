use super::*;
use crate::image::resize_bicubic;

/// A continuous scene sampled at `size x size`, so different resolutions
/// show the same content.
fn scene(size: usize) -> Image {
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let u = (x as f32 + 0.5) / size as f32;
            let v = (y as f32 + 0.5) / size as f32;
            let wave = (u * 6.0 * std::f32::consts::PI).sin() * (v * 4.0 * std::f32::consts::PI).cos();
            let r = 0.45 + 0.3 * wave + 0.2 * (u - 0.5);
            let g = 0.5 + 0.25 * (v - 0.5) + 0.15 * wave;
            let b = 0.4 + 0.3 * (1.0 - u * v) - 0.1 * wave;
            data.extend([r, g, b]);
        }
    }
    Image::from_clamped(size, size, data).unwrap()
}

fn gradient(w: usize, h: usize) -> Image {
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let t = i as f32 / (w * h - 1).max(1) as f32;
        data.extend([t, 1.0 - t, (t * 7.0).fract()]);
    }
    Image::new(w, h, data).unwrap()
}

fn max_abs_diff(a: &Image, b: &Image) -> f32 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

#[test]
fn twelve_unique_filters_in_order() {
    let specs = filter_specs();
    assert_eq!(specs.len(), 12);
    let names: Vec<_> = specs.iter().map(|s| s.name).collect();
    assert_eq!(
        names,
        [
            "Dehaze", "Clarity", "Contrast", "Exposure", "Temp", "Tint", "Whites", "Blacks", "Highlights",
            "Shadows", "Vibrance", "Saturation"
        ]
    );
    for (i, s) in specs.iter().enumerate() {
        assert_eq!(s.index, i + 1);
        assert!(s.min < s.max);
        assert_eq!(s.pointwise, i >= 2);
    }
    assert_eq!(Filter::from_name("exposure"), Some(Filter::Exposure));
}

#[test]
fn neutral_is_identity() {
    let img = scene(32);
    assert_eq!(ActionVector::neutral().values(), &[0.0; 12]);
    assert_eq!(apply_pipeline(&img, &ActionVector::neutral()).unwrap(), img);
    for k in 1..=12 {
        assert_eq!(apply_filter(&img, k, 0.0).unwrap(), img);
    }
}

#[test]
fn exposure_doubles_gray() {
    let gray = Image::filled(4, 4, [0.25; 3]).unwrap();
    let out = Filter::Exposure.apply(&gray, 0.5).unwrap();
    assert!(out.data().iter().all(|&v| (v - 0.5).abs() < 1e-6));
    let out = Filter::Exposure.apply(&gray, 1.0).unwrap();
    assert!(out.data().iter().all(|&v| (v - 1.0).abs() < 1e-6));
}

#[test]
fn saturation_minus_one_gives_luminance() {
    let img = gradient(9, 5);
    let out = Filter::Saturation.apply(&img, -1.0).unwrap();
    for (src, dst) in img.pixels().zip(out.pixels()) {
        let l = luminance(src);
        for c in dst {
            assert!((c - l).abs() < 1e-6);
        }
    }
}

#[test]
fn rejects_bad_index_and_value() {
    let img = gradient(3, 3);
    assert!(apply_filter(&img, 0, 0.1).is_err());
    assert!(apply_filter(&img, 13, 0.1).is_err());
    assert!(apply_filter(&img, 4, 1.01).is_err());
    assert!(apply_filter(&img, 4, f64::NAN).is_err());
    assert!(ActionVector::from_slice(&[0.0; 11]).is_err());
    assert!(ActionVector::single(Filter::Tint, -1.5).is_err());
}

#[test]
fn single_component_matches_apply_filter() {
    let img = scene(24);
    for (i, f) in FILTERS.iter().enumerate() {
        let a = ActionVector::single(*f, 0.6).unwrap();
        assert_eq!(apply_pipeline(&img, &a).unwrap(), apply_filter(&img, i + 1, 0.6).unwrap());
    }
}

#[test]
fn pipeline_is_not_additive() {
    let bright = Image::filled(2, 2, [0.5; 3]).unwrap();
    let up = ActionVector::single(Filter::Exposure, 1.0).unwrap();
    let down = ActionVector::single(Filter::Exposure, -1.0).unwrap();
    let combined = apply_pipeline(&bright, &up.try_add(&down).unwrap()).unwrap();
    let sequential = apply_pipeline(&apply_pipeline(&bright, &up).unwrap(), &down).unwrap();
    assert!((combined.data()[0] - 0.5).abs() < 1e-6);
    assert!((sequential.data()[0] - 0.25).abs() < 1e-6);
}

#[test]
fn pointwise_filters_ignore_neighbors() {
    let img = gradient(7, 6);
    for f in FILTERS.iter().filter(|f| f.spec().pointwise) {
        for p in [-1.0, -0.35, 0.7, 1.0] {
            let out = f.apply(&img, p).unwrap();
            for (i, px) in img.pixels().enumerate() {
                let single = f.apply(&Image::new(1, 1, px.to_vec()).unwrap(), p).unwrap();
                let got = &out.data()[i * 3..i * 3 + 3];
                assert_eq!(single.data(), got, "{f} at {p}");
            }
        }
    }
}

#[test]
fn neighborhood_filters_scale_with_resolution() {
    let small = scene(128);
    let large = scene(512);
    for f in [Filter::Clarity, Filter::Dehaze] {
        for p in [-1.0, 1.0] {
            let a = f.apply(&small, p).unwrap();
            let b = resize_bicubic(&f.apply(&large, p).unwrap(), 128, 128).unwrap();
            let base = mean_abs(&small, &resize_bicubic(&large, 128, 128).unwrap());
            let diff = mean_abs(&a, &b);
            assert!(diff < 2.0 / 255.0, "{f} {p}: {diff} (baseline {base})");
        }
    }
}

fn mean_abs(a: &Image, b: &Image) -> f64 {
    let n = a.data().len() as f64;
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / n
}

#[test]
fn clarity_and_dehaze_change_the_image() {
    let img = scene(64);
    for f in [Filter::Clarity, Filter::Dehaze] {
        for p in [-1.0, 1.0] {
            assert!(max_abs_diff(&img, &f.apply(&img, p).unwrap()) > 0.01, "{f} {p}");
        }
    }
}

#[test]
fn exposure_is_monotone() {
    let img = scene(32);
    let means: Vec<f64> = (-10..=10)
        .map(|i| Filter::Exposure.apply(&img, i as f64 / 10.0).unwrap().mean_luminance())
        .collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn directions_match_control_names() {
    let img = scene(32);
    let lum = img.mean_luminance();
    let chroma = |im: &Image| {
        im.pixels().map(|[r, g, b]| (r.max(g).max(b) - r.min(g).min(b)) as f64).sum::<f64>()
    };
    let red_blue = |im: &Image| im.pixels().map(|[r, _, b]| (r - b) as f64).sum::<f64>();
    let green = |im: &Image| im.pixels().map(|[_, g, _]| g as f64).sum::<f64>();
    let at = |f: Filter, p: f64| f.apply(&img, p).unwrap();

    assert!(at(Filter::Exposure, 0.3).mean_luminance() > lum);
    assert!(at(Filter::Whites, 0.8).mean_luminance() > lum);
    assert!(at(Filter::Blacks, -0.8).mean_luminance() < lum);
    assert!(at(Filter::Shadows, 0.8).mean_luminance() > lum);
    assert!(at(Filter::Highlights, -0.8).mean_luminance() < lum);
    assert!(chroma(&at(Filter::Saturation, 0.5)) > chroma(&img));
    assert!(chroma(&at(Filter::Vibrance, 0.5)) > chroma(&img));
    assert!(chroma(&at(Filter::Vibrance, -0.5)) < chroma(&img));
    assert!(red_blue(&at(Filter::Temp, 0.5)) > red_blue(&img));
    assert!(green(&at(Filter::Tint, 0.5)) < green(&img));
    assert!(at(Filter::Dehaze, -0.8).mean_luminance() > lum);
}

#[test]
fn contrast_spreads_and_flattens() {
    let img = gradient(16, 16);
    let spread = |im: &Image| {
        let m = im.mean_luminance();
        im.luma().iter().map(|&l| (l as f64 - m).powi(2)).sum::<f64>()
    };
    assert!(spread(&Filter::Contrast.apply(&img, 0.8).unwrap()) > spread(&img));
    assert!(spread(&Filter::Contrast.apply(&img, -0.8).unwrap()) < spread(&img));
    // Endpoints of the S-curve stay fixed.
    let ends = Image::new(2, 1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let out = Filter::Contrast.apply(&ends, 1.0).unwrap();
    assert!(max_abs_diff(&ends, &out) < 1e-6);
}

#[test]
fn stages_end_at_pipeline_output() {
    let img = scene(16);
    let a = ActionVector::new([0.2, -0.3, 0.4, 0.1, -0.2, 0.3, 0.1, -0.1, 0.5, -0.5, 0.2, 0.3]).unwrap();
    let stages = pipeline_stages(&img, &a).unwrap();
    assert_eq!(stages.len(), 12);
    assert_eq!(stages.last().unwrap().1, apply_pipeline(&img, &a).unwrap());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_image() -> impl Strategy<Value = Image> {
        (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f32..=1.0, w * h * 3).prop_map(move |d| Image::new(w, h, d).unwrap())
        })
    }

    fn arb_action() -> impl Strategy<Value = ActionVector> {
        proptest::array::uniform12(-1.0f64..=1.0).prop_map(|v| ActionVector::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn output_stays_in_range(img in arb_image(), a in arb_action()) {
            let out = apply_pipeline(&img, &a).unwrap();
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(out.dims(), img.dims());
        }

        #[test]
        fn zero_action_is_identity(img in arb_image()) {
            let out = apply_pipeline(&img, &ActionVector::neutral()).unwrap();
            prop_assert!(max_abs_diff(&img, &out) < 1e-6);
        }

        #[test]
        fn exposure_monotone_per_pixel(img in arb_image(), p in -1.0f64..0.9, dp in 0.01f64..0.1) {
            let lo = Filter::Exposure.apply(&img, p).unwrap();
            let hi = Filter::Exposure.apply(&img, p + dp).unwrap();
            prop_assert!(lo.data().iter().zip(hi.data()).all(|(a, b)| b >= a));
        }
    }
}
