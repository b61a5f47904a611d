mod common;

use std::collections::BTreeMap;
use std::fs;

use relief_core::io::{self, Depth};
use relief_core::pipeline::{load_config, run_pipeline, Artifact, PipelineConfig};
use relief_core::{nlerp, oplus, Grid, Mask};

use common::*;

#[test]
fn decompose_only_writes_both_layers() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(41);
    let normals = random_normals(&mut rng, 24, 20, 0.6);
    fs::write(
        dir.path().join("in.png"),
        io::encode_normal_png(&normals, None, Depth::Sixteen).unwrap(),
    )
    .unwrap();
    fs::write(
        dir.path().join("run.toml"),
        r#"
[inputs.normals]
path = "in.png"
kind = "normals"

[[stages]]
op = "decompose"
sigma_c = 3.0
sigma_s = 0.9

[outputs]
detail = "layers/detail.png"
base = "layers/base.png"
"#,
    )
    .unwrap();

    let (config, base) = load_config(&dir.path().join("run.toml")).unwrap();
    run_pipeline(&config, &base).unwrap();

    let decoded = |name: &str| io::decode_normal_png(&fs::read(dir.path().join("layers").join(name)).unwrap()).unwrap();
    let detail = decoded("detail.png");
    let base_layer = decoded("base.png");
    assert_eq!(detail.depth, Depth::Sixteen);
    assert_eq!(detail.normals.dims(), (24, 20));

    // Recomposing the written layers gives back the input up to 16-bit quantization.
    let input = io::decode_normal_png(&fs::read(dir.path().join("in.png")).unwrap()).unwrap();
    let worst = detail
        .normals
        .iter()
        .zip(base_layer.normals.iter())
        .zip(input.normals.iter())
        .map(|((d, b), n)| oplus(d, b).angle_to(n))
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

fn write_inputs(dir: &std::path::Path) {
    let (w, h) = (48, 40);
    // Textured disc on a dark background.
    let rgb = Grid::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - 23.5, y as f64 - 19.5);
        let inside = dx * dx + dy * dy < 15.0 * 15.0;
        let stripe = 0.15 * ((x as f64) / 2.0).sin();
        let v = if inside { 0.7 + stripe } else { 0.1 };
        [v, v * 0.9, v * 0.8]
    });
    fs::write(dir.join("photo.png"), io::encode_rgb_png(&rgb).unwrap()).unwrap();
    let labels = Grid::from_fn(w, h, |x, _| if x < w / 2 { 0 } else { 1 });
    fs::write(dir.join("labels.png"), io::encode_label_png(&labels).unwrap()).unwrap();
    let offsets = BTreeMap::from([(0, 0.0), (1, 0.4)]);
    fs::write(dir.join("labels.json"), io::write_label_offsets(&offsets)).unwrap();
    let mask = Mask::from_fn(w, h, |x, y| f64::from(x > 2 && y > 2 && x < w - 3 && y < h - 3));
    fs::write(dir.join("mask.png"), io::encode_mask_png(&mask).unwrap()).unwrap();
}

const WORKFLOW: &str = r#"
[inputs.photo]
path = "photo.png"
kind = "rgb"

[inputs.labels]
path = "labels.png"
kind = "labels"
offsets = "labels.json"

[inputs.domain]
path = "mask.png"
kind = "mask"

[[stages]]
op = "grayscale"
input = "photo"

[[stages]]
op = "img2normal"
input = "gray"

[[stages]]
op = "canny"
input = "gray"

[[stages]]
op = "sketch2base"
iterations = 200

[[stages]]
op = "tune"
beta = 1.5
gamma = 0.8

[[stages]]
op = "compose"

[[stages]]
op = "solve"
lambda = 0.5
mask = "domain"
h = { type = "layered", labels = "labels" }

[[stages]]
op = "mesh"

[[stages]]
op = "preview"

[outputs]
composite = "out/composite.png"
height = "out/height.png"
mesh = "out/relief.obj"
preview = "out/preview.png"
"#;

#[test]
fn single_image_workflow_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    fs::write(dir.path().join("run.toml"), WORKFLOW).unwrap();
    let (config, base) = load_config(&dir.path().join("run.toml")).unwrap();
    let artifacts = run_pipeline(&config, &base).unwrap();

    for name in ["composite.png", "height.png", "relief.obj", "preview.png"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }
    let Some(Artifact::Height(z)) = artifacts.get("height") else {
        panic!("height artifact missing");
    };
    assert!(z.heights().iter().all(|v| v.is_finite()));
    assert_eq!(z.get(0, 0), 0.0);

    // The layered auxiliary surface lifts the right half.
    let mean = |xs: std::ops::Range<usize>| {
        let values: Vec<f64> = (5..35)
            .flat_map(|y| xs.clone().map(move |x| (x, y)))
            .map(|(x, y)| z.get(x, y))
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    };
    assert!(mean(30..44) > mean(4..18) + 0.05);

    let written = io::decode_height_png(&fs::read(dir.path().join("out/height.png")).unwrap()).unwrap();
    let worst = written
        .iter()
        .zip(z.heights().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let range = z.heights().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 2.0 * range / 65535.0 + 1e-12, "{worst}");

    let obj = fs::read_to_string(dir.path().join("out/relief.obj")).unwrap();
    let vertices = obj.lines().filter(|l| l.starts_with("v ")).count();
    assert_eq!(vertices, z.domain().foreground_count());
}

#[test]
fn workflow_is_reproducible() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        write_inputs(dir.path());
        let config = PipelineConfig::from_toml(WORKFLOW).unwrap();
        run_pipeline(&config, dir.path()).unwrap();
        ["composite.png", "height.png", "relief.obj", "preview.png"]
            .map(|n| fs::read(dir.path().join("out").join(n)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn region_edits_only_touch_the_masked_area() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(42);
    let normals = random_normals(&mut rng, 20, 20, 0.5);
    fs::write(
        dir.path().join("n.png"),
        io::encode_normal_png(&normals, None, Depth::Sixteen).unwrap(),
    )
    .unwrap();
    let region = Mask::from_fn(20, 20, |x, _| f64::from(x >= 10));
    fs::write(dir.path().join("m.png"), io::encode_mask_png(&region).unwrap()).unwrap();
    let config = PipelineConfig::from_toml(
        r#"
[inputs.base]
path = "n.png"
kind = "normals"

[inputs.region]
path = "m.png"
kind = "mask"

[[stages]]
op = "flatten"
mask = "region"

[[stages]]
op = "smooth"
input = "base"
mask = "region"
output = "soft"
"#,
    )
    .unwrap();
    let artifacts = run_pipeline(&config, dir.path()).unwrap();
    let (input, _) = artifacts.normals("base").unwrap();
    for name in ["flattened", "soft"] {
        let (edited, _) = artifacts.normals(name).unwrap();
        for y in 0..20 {
            for x in 0..10 {
                assert_eq!(edited.get(x, y), input.get(x, y), "{name} ({x}, {y})");
            }
        }
    }
    let (flat, _) = artifacts.normals("flattened").unwrap();
    for y in 0..20 {
        for x in 10..20 {
            let expected = nlerp(input.get(x, y), &relief_core::UnitNormal::UP, 1.0);
            assert!(flat.get(x, y).angle_to(&expected) < 1e-9);
        }
    }
}
