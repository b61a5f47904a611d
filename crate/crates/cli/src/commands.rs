//! Subcommands. Each one builds a small [`PipelineConfig`] from its flags
//! and runs it, so the command line and config files share one code path.

use std::collections::BTreeMap;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use relief_core::bandpass::BilateralParams;
use relief_core::io::Depth;
use relief_core::pipeline::{AuxSpec, InputKind, InputSpec, PipelineConfig, Stage};

#[derive(Debug, Parser)]
#[command(name = "relief", version, about = "Bas-relief generation from normal images")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a normal image into detail and base layers.
    Decompose(DecomposeArgs),
    /// Attach a detail layer to a base layer.
    Compose(ComposeArgs),
    /// Boost or attenuate a detail layer.
    Tune(TuneArgs),
    /// Paste a detail patch onto a base at an offset.
    Transfer(TransferArgs),
    /// Bilateral smoothing, optionally restricted by a mask.
    Smooth(SmoothArgs),
    /// Detail normals from an RGB or gray image.
    Img2normal(Img2normalArgs),
    /// Base normals from a sketch by gradient vector flow.
    Sketch2base(Sketch2baseArgs),
    /// Reconstruct a height field from a normal image.
    Solve(SolveArgs),
    /// Triangulate a height PNG into an OBJ mesh.
    Mesh(MeshArgs),
    /// Run a pipeline config file.
    Run { config: PathBuf },
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DepthArg {
    /// Bit depth of written normal maps (8 or 16).
    #[arg(long, default_value = "16", value_parser = parse_depth)]
    pub depth: Depth,
}

fn parse_depth(s: &str) -> Result<Depth, String> {
    match s {
        "8" => Ok(Depth::Eight),
        "16" => Ok(Depth::Sixteen),
        _ => Err("expected 8 or 16".into()),
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<[T; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    let parse = |v: &str| v.trim().parse::<T>().map_err(|_| format!("not a number: {v:?}"));
    Ok([parse(a)?, parse(b)?])
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Normal image (PNG).
    pub input: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub sigma_c: f64,
    #[arg(long, default_value_t = 0.9)]
    pub sigma_s: f64,
    /// Denoise the input with this spatial sigma before splitting.
    #[arg(long)]
    pub pre_sigma_c: Option<f64>,
    #[arg(long, default_value_t = 0.9, requires = "pre_sigma_c")]
    pub pre_sigma_s: f64,
    #[arg(long)]
    pub detail: PathBuf,
    #[arg(long)]
    pub base: PathBuf,
    #[command(flatten)]
    pub depth: DepthArg,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub detail: PathBuf,
    #[arg(long)]
    pub base: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub depth: DepthArg,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Detail layer (PNG).
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub depth: DepthArg,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub patch: PathBuf,
    /// Pixels of the patch to keep; the patch's alpha when absent.
    #[arg(long)]
    pub patch_mask: Option<PathBuf>,
    #[arg(long)]
    pub base: PathBuf,
    /// Patch origin on the base, `x,y`.
    #[arg(long, value_parser = parse_pair::<i64>, allow_hyphen_values = true, default_value = "0,0")]
    pub offset: [i64; 2],
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub depth: DepthArg,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    pub input: PathBuf,
    /// Gray PNG blending the smoothed result in (white = fully smoothed).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub sigma_c: f64,
    #[arg(long, default_value_t = 0.9)]
    pub sigma_s: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub depth: DepthArg,
}

#[derive(Debug, Args)]
pub struct Img2normalArgs {
    /// RGB or gray image.
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha2: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub depth: DepthArg,
}

#[derive(Debug, Args)]
pub struct Sketch2baseArgs {
    /// Sketch or photo; white strokes are edges.
    pub input: PathBuf,
    /// Run edge detection on the input first.
    #[arg(long)]
    pub canny: bool,
    #[arg(long, default_value_t = 0.05)]
    pub low: f64,
    #[arg(long, default_value_t = 0.1)]
    pub high: f64,
    /// Also write the detected edges.
    #[arg(long, requires = "canny")]
    pub edges: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub z_const: f64,
    #[arg(long, default_value_t = 0.2)]
    pub step_size: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub depth: DepthArg,
}

#[derive(Debug, Args)]
#[group(id = "aux", multiple = false)]
pub struct AuxArgs {
    /// Constant auxiliary surface.
    #[arg(long, group = "aux")]
    pub h_const: Option<f64>,
    /// Linear ramp along x, `from,to`.
    #[arg(long, group = "aux", value_parser = parse_pair::<f64>, allow_hyphen_values = true)]
    pub h_ramp: Option<[f64; 2]>,
    /// Centered spherical cap scaled by this factor.
    #[arg(long, group = "aux")]
    pub h_radial: Option<f64>,
    /// Step surface from a label PNG.
    #[arg(long, group = "aux")]
    pub labels: Option<PathBuf>,
    /// Any height or gray PNG used as is.
    #[arg(long, group = "aux")]
    pub h_field: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Composite normal image (PNG); transparent pixels are background.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Gradient attenuation exponent.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub aux: AuxArgs,
    /// JSON object mapping label to height offset.
    #[arg(long, requires = "labels")]
    pub offsets: Option<PathBuf>,
    /// Foreground mask; the input's alpha when absent.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Stretch foreground heights onto [0, RESCALE].
    #[arg(long)]
    pub rescale: Option<f64>,
    /// Height PNG.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write an OBJ mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub xy_scale: f64,
    /// Also write a shaded preview.
    #[arg(long)]
    pub preview: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// Height PNG.
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub xy_scale: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Where sessions are kept.
    #[arg(long, default_value = "relief-state")]
    pub state_dir: PathBuf,
}

#[derive(Default)]
struct Builder {
    config: PipelineConfig,
}

impl Builder {
    fn new(depth: Depth) -> Self {
        let mut b = Builder::default();
        b.config.normal_depth = depth;
        b
    }

    fn input(mut self, name: &str, path: &Path, kind: InputKind) -> Self {
        self.config.inputs.insert(
            name.into(),
            InputSpec {
                path: path.to_path_buf(),
                kind,
                offsets: None,
            },
        );
        self
    }

    fn stage(mut self, stage: Stage) -> Self {
        self.config.stages.push(stage);
        self
    }

    fn output(mut self, name: &str, path: &Path) -> Self {
        self.config.outputs.insert(name.into(), path.to_path_buf());
        self
    }
}

fn s(name: &str) -> String {
    name.to_string()
}

impl Command {
    /// The pipeline this command runs; `None` for `run` and `serve`.
    pub fn to_config(&self) -> Option<PipelineConfig> {
        let b = match self {
            Command::Decompose(a) => Builder::new(a.depth.depth)
                .input("normals", &a.input, InputKind::Normals)
                .stage(Stage::Decompose {
                    input: s("normals"),
                    sigma_c: a.sigma_c,
                    sigma_s: a.sigma_s,
                    pre: a.pre_sigma_c.map(|c| BilateralParams::new(c, a.pre_sigma_s)),
                    detail: s("detail"),
                    base: s("base"),
                })
                .output("detail", &a.detail)
                .output("base", &a.base),
            Command::Compose(a) => Builder::new(a.depth.depth)
                .input("detail", &a.detail, InputKind::Normals)
                .input("base", &a.base, InputKind::Normals)
                .stage(Stage::Compose {
                    detail: s("detail"),
                    base: s("base"),
                    output: s("composite"),
                })
                .output("composite", &a.output),
            Command::Tune(a) => Builder::new(a.depth.depth)
                .input("detail", &a.input, InputKind::Normals)
                .stage(Stage::Tune {
                    input: s("detail"),
                    beta: a.beta,
                    gamma: a.gamma,
                    output: s("tuned"),
                })
                .output("tuned", &a.output),
            Command::Transfer(a) => {
                let mut b = Builder::new(a.depth.depth)
                    .input("patch", &a.patch, InputKind::Normals)
                    .input("base", &a.base, InputKind::Normals);
                if let Some(m) = &a.patch_mask {
                    b = b.input("patch_mask", m, InputKind::Mask);
                }
                b.stage(Stage::Transfer {
                    patch: s("patch"),
                    patch_mask: a.patch_mask.as_ref().map(|_| s("patch_mask")),
                    base: s("base"),
                    offset: a.offset,
                    output: s("composite"),
                })
                .output("composite", &a.output)
            }
            Command::Smooth(a) => {
                let mut b = Builder::new(a.depth.depth).input("normals", &a.input, InputKind::Normals);
                if let Some(m) = &a.mask {
                    b = b.input("mask", m, InputKind::Mask);
                }
                b.stage(Stage::Smooth {
                    input: s("normals"),
                    mask: a.mask.as_ref().map(|_| s("mask")),
                    sigma_c: a.sigma_c,
                    sigma_s: a.sigma_s,
                    output: s("smoothed"),
                })
                .output("smoothed", &a.output)
            }
            Command::Img2normal(a) => Builder::new(a.depth.depth)
                .input("image", &a.input, InputKind::Rgb)
                .stage(Stage::Img2normal {
                    input: s("image"),
                    alpha1: a.alpha1,
                    alpha2: a.alpha2,
                    output: s("detail"),
                })
                .output("detail", &a.output),
            Command::Sketch2base(a) => {
                let mut b = Builder::new(a.depth.depth).input("sketch", &a.input, InputKind::Gray);
                if a.canny {
                    b = b.stage(Stage::Canny {
                        input: s("sketch"),
                        low: a.low,
                        high: a.high,
                        output: s("edges"),
                    });
                    if let Some(e) = &a.edges {
                        b = b.output("edges", e);
                    }
                }
                b.stage(Stage::Sketch2base {
                    input: s(if a.canny { "edges" } else { "sketch" }),
                    omega: a.omega,
                    iterations: a.iterations,
                    z_const: a.z_const,
                    step_size: a.step_size,
                    output: s("base"),
                })
                .output("base", &a.output)
            }
            Command::Solve(a) => solve_config(a),
            Command::Mesh(a) => Builder::new(Depth::default())
                .input("height", &a.input, InputKind::Height)
                .stage(Stage::Mesh {
                    input: s("height"),
                    xy_scale: a.xy_scale,
                    output: s("mesh"),
                })
                .output("mesh", &a.output),
            Command::Run { .. } | Command::Serve(_) => return None,
        };
        Some(b.config)
    }
}

fn solve_config(a: &SolveArgs) -> Builder {
    let mut b = Builder::new(Depth::default()).input("normals", &a.input, InputKind::Normals);
    if let Some(m) = &a.mask {
        b = b.input("mask", m, InputKind::Mask);
    }
    let h = if let Some(value) = a.aux.h_const {
        AuxSpec::Constant { value }
    } else if let Some(r) = &a.aux.h_ramp {
        AuxSpec::Ramp {
            from: r[0],
            to: r[1],
            direction: [1.0, 0.0],
        }
    } else if let Some(scale) = a.aux.h_radial {
        AuxSpec::Radial {
            center: None,
            radius: None,
            scale,
        }
    } else if let Some(labels) = &a.aux.labels {
        b.config.inputs.insert(
            s("labels"),
            InputSpec {
                path: labels.clone(),
                kind: InputKind::Labels,
                offsets: a.offsets.clone(),
            },
        );
        AuxSpec::Layered {
            labels: s("labels"),
            offsets: None::<BTreeMap<String, f64>>,
        }
    } else if let Some(field) = &a.aux.h_field {
        b = b.input("h", field, InputKind::Height);
        AuxSpec::Field { input: s("h") }
    } else {
        AuxSpec::default()
    };
    b = b
        .stage(Stage::Solve {
            input: s("normals"),
            lambda: a.lambda,
            alpha: a.alpha,
            h,
            mask: a.mask.as_ref().map(|_| s("mask")),
            tolerance: a.tolerance,
            max_iterations: a.max_iterations,
            rescale: a.rescale,
            output: s("height"),
        })
        .output("height", &a.output);
    if let Some(mesh) = &a.mesh {
        b = b
            .stage(Stage::Mesh {
                input: s("height"),
                xy_scale: a.xy_scale,
                output: s("mesh"),
            })
            .output("mesh", mesh);
    }
    if let Some(preview) = &a.preview {
        b = b
            .stage(Stage::Preview {
                input: s("height"),
                output: s("preview"),
            })
            .output("preview", preview);
    }
    b
}
