use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relief_core::io::{self, Depth};
use relief_core::{oplus, Grid, Mask, UnitNormal};

fn relief(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relief"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(output: &Output) -> i32 {
    output.status.code().unwrap()
}

fn write_dome(dir: &Path, name: &str, n: usize) {
    let c = (n as f64 - 1.0) / 2.0;
    let normals = Grid::from_fn(n, n, |x, y| {
        let ripple = 0.15 * (x as f64 * 0.9).sin() * (y as f64 * 0.7).cos();
        UnitNormal::new((c - x as f64) / n as f64 + ripple, (c - y as f64) / n as f64, 1.0).unwrap()
    });
    let mask = Mask::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        f64::from(dx * dx + dy * dy < (0.45 * n as f64).powi(2))
    });
    fs::write(
        dir.join(name),
        io::encode_normal_png(&normals, Some(&mask), Depth::Sixteen).unwrap(),
    )
    .unwrap();
}

fn normals(dir: &Path, name: &str) -> Grid<UnitNormal> {
    io::decode_normal_png(&fs::read(dir.join(name)).unwrap())
        .unwrap()
        .normals
}

#[test]
fn layer_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_dome(d, "in.png", 32);

    let out = relief(
        d,
        &[
            "decompose",
            "in.png",
            "--sigma-c",
            "3",
            "--sigma-s",
            "0.9",
            "--detail",
            "detail.png",
            "--base",
            "base.png",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = relief(
        d,
        &["tune", "detail.png", "--beta", "2", "--gamma", "0.7", "-o", "tuned.png"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = relief(d, &["smooth", "base.png", "--sigma-c", "2", "-o", "smooth.png"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = relief(
        d,
        &[
            "compose",
            "--detail",
            "tuned.png",
            "--base",
            "smooth.png",
            "-o",
            "composite.png",
            "--depth",
            "8",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = relief(
        d,
        &[
            "transfer",
            "--patch",
            "tuned.png",
            "--base",
            "base.png",
            "--offset",
            "-8,4",
            "-o",
            "pasted.png",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let recomposed = Grid::from_fn(32, 32, |x, y| {
        oplus(normals(d, "detail.png").get(x, y), normals(d, "base.png").get(x, y))
    });
    let input = normals(d, "in.png");
    let worst = recomposed
        .iter()
        .zip(input.iter())
        .map(|(a, b)| a.angle_to(b))
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn solve_writes_height_mesh_and_preview() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_dome(d, "n.png", 40);
    let labels = Grid::from_fn(40, 40, |_, y| u32::from(y >= 20));
    fs::write(d.join("labels.png"), io::encode_label_png(&labels).unwrap()).unwrap();
    fs::write(d.join("labels.json"), r#"{"0": 0.0, "1": 0.3}"#).unwrap();

    let out = relief(
        d,
        &[
            "solve",
            "n.png",
            "--lambda",
            "1",
            "--labels",
            "labels.png",
            "--offsets",
            "labels.json",
            "-o",
            "out/z.png",
            "--mesh",
            "out/z.obj",
            "--preview",
            "out/shade.png",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let z = io::decode_height_png(&fs::read(d.join("out/z.png")).unwrap()).unwrap();
    assert_eq!(z.dims(), (40, 40));
    assert!(fs::read_to_string(d.join("out/z.obj"))
        .unwrap()
        .starts_with("# bas-relief"));

    let out = relief(d, &["mesh", "out/z.png", "--xy-scale", "0.5", "-o", "again.obj"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let vertices = fs::read_to_string(d.join("again.obj"))
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("v "))
        .count();
    assert_eq!(vertices, 40 * 40);
}

#[test]
fn image_commands_produce_normals() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let photo = Grid::from_fn(36, 30, |x, y| {
        let (dx, dy) = (x as f64 - 17.5, y as f64 - 14.5);
        let v = if dx * dx + dy * dy < 100.0 { 0.8 } else { 0.2 };
        [v, v, v * 0.5]
    });
    fs::write(d.join("photo.png"), io::encode_rgb_png(&photo).unwrap()).unwrap();

    let out = relief(d, &["img2normal", "photo.png", "--alpha2", "0.3", "-o", "detail.png"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = relief(
        d,
        &[
            "sketch2base",
            "photo.png",
            "--canny",
            "--edges",
            "edges.png",
            "--iterations",
            "100",
            "-o",
            "base.png",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(normals(d, "detail.png").dims(), (36, 30));
    assert_eq!(normals(d, "base.png").dims(), (36, 30));
    assert!(d.join("edges.png").is_file());
}

#[test]
fn run_executes_a_config_relative_to_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("job")).unwrap();
    write_dome(d, "job/in.png", 24);
    fs::write(
        d.join("job/run.toml"),
        r#"
[inputs.normals]
path = "in.png"
kind = "normals"

[[stages]]
op = "decompose"

[[stages]]
op = "compose"

[[stages]]
op = "solve"
lambda = 0.2
h = { type = "radial", scale = 0.5 }

[outputs]
height = "out/height.png"
"#,
    )
    .unwrap();
    let out = relief(d, &["run", "job/run.toml"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = fs::read(d.join("job/out/height.png")).unwrap();
    assert_eq!(code(&relief(d, &["run", "job/run.toml"])), 0);
    assert_eq!(first, fs::read(d.join("job/out/height.png")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_dome(d, "n.png", 16);

    // Bad flags and bad parameters are validation errors.
    assert_eq!(code(&relief(d, &["tune"])), 2);
    assert_eq!(
        code(&relief(
            d,
            &[
                "decompose",
                "n.png",
                "--sigma-c",
                "0",
                "--detail",
                "a.png",
                "--base",
                "b.png"
            ]
        )),
        2
    );
    assert_eq!(
        code(&relief(d, &["solve", "n.png", "--lambda", "-1", "-o", "z.png"])),
        2
    );
    assert_eq!(code(&relief(d, &["tune", "n.png", "--gamma", "0", "-o", "t.png"])), 2);
    assert_eq!(code(&relief(d, &["solve", "missing.png", "-o", "z.png"])), 2);
    assert_eq!(code(&relief(d, &["run", "nowhere.toml"])), 2);
    fs::write(d.join("bad.toml"), "[[stages]]\nop = \"solve\"\nlamda = 1\n").unwrap();
    assert_eq!(code(&relief(d, &["run", "bad.toml"])), 2);
    assert!(!d.join("a.png").exists());

    // Failing computations on valid input are runtime errors.
    let out = relief(d, &["solve", "n.png", "--max-iterations", "1", "-o", "z.png"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("converge"));
}

#[test]
fn empty_pipeline_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.toml"), "").unwrap();
    assert_eq!(code(&relief(dir.path(), &["run", "empty.toml"])), 0);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}
