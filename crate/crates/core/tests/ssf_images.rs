use std::time::Instant;

use focusfuse::filter::gaussian_blur;
use focusfuse::io::load_image;
use focusfuse::ssf::{decompose, ssf_energy, ssf_smooth, SsfParams, L0_ZERO_SQ};
use focusfuse::GrayImage;

const IMAGES: [&str; 6] = ["camera", "astronaut", "coffee", "chelsea", "brick", "gravel"];

fn load(name: &str) -> GrayImage {
    load_image(format!("{}/tests/data/{name}.png", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn step() -> GrayImage {
    GrayImage::from_fn(64, 64, |x, _| if x >= 32 { 1.0 } else { 0.0 }).unwrap()
}

fn energy(u: &GrayImage, f: &GrayImage, p: &SsfParams) -> f64 {
    ssf_energy(u, f, p, L0_ZERO_SQ).unwrap()
}

fn binade(x: f64) -> i32 {
    if x == 0.0 {
        i32::MIN
    } else {
        x.abs().log2().floor() as i32
    }
}

#[test]
fn structure_plus_texture_reconstructs_natural_images() {
    let p = SsfParams::default();
    for name in IMAGES {
        let f = load(name);
        let d = decompose(&f, &p).unwrap();
        let sum = d.structure.add(&d.texture).unwrap();
        let mut inexact = 0;
        for i in 0..f.len() {
            let (fv, s, t) = (f.data()[i], d.structure.data()[i], d.texture.data()[i]);
            if sum.data()[i] != fv {
                // Only cancellation pixels, where both layers sit in a coarser
                // binade than the input, may miss by one ulp.
                assert!(binade(s) > binade(fv) && binade(t) > binade(fv), "{name} pixel {i}");
                assert!((sum.data()[i] - fv).abs() <= f64::EPSILON * s.abs().max(t.abs()));
                inexact += 1;
            }
        }
        assert!(inexact * 20 < f.len(), "{name}: {inexact}");
    }
}

#[test]
fn output_energy_beats_input_and_blur() {
    let p = SsfParams::default();
    let mut cases: Vec<(String, GrayImage)> = IMAGES.iter().map(|n| (n.to_string(), load(n))).collect();
    cases.push(("step".into(), step()));
    for (name, f) in cases {
        let u = ssf_smooth(&f, &p).unwrap();
        let blur = gaussian_blur(&f, 2.0).unwrap();
        let (eu, ef, eb) = (energy(&u, &f, &p), energy(&f, &f, &p), energy(&blur, &f, &p));
        assert!(eu <= ef, "{name}: output {eu} > input {ef}");
        assert!(eu <= eb, "{name}: output {eu} > blur {eb}");
    }
}

#[test]
fn step_edge_survives_smoothing() {
    let f = step();
    let u = ssf_smooth(&f, &SsfParams::default()).unwrap();
    assert!(u.get(10, 30) < 0.05 && u.get(53, 30) > 0.95);
}

#[test]
fn runtime_at_64_is_small() {
    let f = load("camera");
    let crop = GrayImage::from_fn(64, 64, |x, y| f.get(x + 32, y + 32)).unwrap();
    let t = Instant::now();
    decompose(&crop, &SsfParams::default()).unwrap();
    assert!(t.elapsed().as_secs_f64() < 5.0);
}
