//! The `sliceparse` command line: shape bundles, corners, demonstrations,
//! training, reconstruction and evaluation.
//!
//! A bundle is a directory with `manifest.json` and one subdirectory per
//! shape holding `grid.bin`, `meta.json`, the three projection PGMs,
//! per-slice PGMs, `corners.csv` and the ground-truth `gt.obj`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corners::{detect_all, write_corners_csv};
use crate::env::{run_episode, write_trace, EpisodeMetrics, EpisodeResult, Policy};
use crate::error::{Error, Result};
use crate::expert::{generate_demonstrations, ExpertPolicy};
use crate::geom::dump::{read_grid, write_grid};
use crate::geom::{extract_slices, project, slice_layers, voxelize, TriMesh, View, VoxelGrid};
use crate::neural::Checkpoint;
use crate::shapes;
use crate::trainer::replay::{read_demonstrations, write_demonstrations};
use crate::trainer::{run_training, write_report_csv, ActorPolicy, Mode, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "sliceparse", version, about = "Reconstruct solids from cross-sections by learned sequential cuts")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Seed for every random stream.
    #[arg(long, global = true, env = "SLICEPARSE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// TOML file with [env], [net] and [trainer] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the number of cross-sections.
    #[arg(long, global = true)]
    pub slices: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Voxelize meshes (.obj/.off) or built-in shapes into a bundle.
    Prepare {
        /// Mesh files or built-in shape names (box, l, t, plus, u, dumbbell,
        /// cylinder, optionally with an axis suffix such as l@xzy).
        inputs: Vec<String>,
        /// Add the ten-shape ordering set.
        #[arg(long)]
        ordering_set: bool,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Harris corners of the three projections of one shape, as CSV.
    Corners {
        /// A bundle shape directory or a built-in shape name.
        shape: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Expert demonstrations over every shape of a bundle.
    Demos {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
    },
    /// Train actor and critic (modes: ddpg, il, il+rl).
    Train {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long, default_value = "il+rl")]
        mode: Mode,
        /// Checkpoint output.
        #[arg(long, short)]
        out: PathBuf,
        /// Training report CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// One greedy episode on a bundle shape; writes the merged OBJ and a
    /// metrics JSON.
    Reconstruct {
        /// A bundle shape directory or a built-in shape name.
        shape: String,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Per-step JSON lines trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Per-shape, per-variant metrics table with a mean row per variant.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        /// Variants: `expert`, `ckpt=PATH` or `noproj=PATH`. Repeatable.
        #[arg(long = "variant", required = true)]
        variants: Vec<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct PolicyArgs {
    #[arg(long, conflicts_with = "expert")]
    pub checkpoint: Option<PathBuf>,
    /// Use the heuristic expert instead of a network.
    #[arg(long)]
    pub expert: bool,
    /// Baseline: blank silhouette inputs and no corner snapping.
    #[arg(long, requires = "checkpoint")]
    pub no_projections: bool,
}

/// How an episode's actions are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum Variant {
    Expert,
    Checkpoint(PathBuf),
    NoProjections(PathBuf),
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once('=') {
            None if s == "expert" => Ok(Variant::Expert),
            Some(("ckpt", p)) => Ok(Variant::Checkpoint(p.into())),
            Some(("noproj", p)) => Ok(Variant::NoProjections(p.into())),
            _ => Err(Error::invalid(format!("bad variant {s:?}; use expert, ckpt=PATH or noproj=PATH"))),
        }
    }

    fn from_args(a: &PolicyArgs) -> Result<Self> {
        match (&a.checkpoint, a.expert, a.no_projections) {
            (None, true, _) => Ok(Variant::Expert),
            (Some(p), false, false) => Ok(Variant::Checkpoint(p.clone())),
            (Some(p), false, true) => Ok(Variant::NoProjections(p.clone())),
            _ => Err(Error::invalid("choose --expert or --checkpoint PATH")),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Variant::Expert => "expert".into(),
            Variant::Checkpoint(p) => format!("ckpt:{}", p.display()),
            Variant::NoProjections(p) => format!("noproj:{}", p.display()),
        }
    }
}

/// A loaded shape: occupancy plus the mesh it is compared against.
#[derive(Clone, Debug)]
pub struct BundleShape {
    pub name: String,
    pub grid: VoxelGrid,
    pub ground_truth: TriMesh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeMeta {
    pub name: String,
    pub source: String,
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub origin: [f64; 3],
    pub slice_axis: crate::geom::Axis,
    pub slice_planes: Vec<usize>,
    pub occupied: usize,
}

/// Everything needed to reproduce a command's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    /// SHA-256 of the effective configuration as TOML.
    pub config_hash: String,
    pub seed: u64,
    pub shapes: Vec<String>,
    pub output: PathBuf,
}

fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Effective configuration: defaults, then the config file, then the
/// `--seed` and `--slices` flags.
pub fn load_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(n) = g.slices {
        cfg.env.slice_count = n;
    }
    cfg = cfg.with_seed(g.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// A built-in name or a mesh file, voxelized at `resolution`.
fn source_shape(input: &str, resolution: usize) -> Result<(String, BundleShape)> {
    let path = Path::new(input);
    if path.is_file() {
        let mesh = TriMesh::load(path)?;
        let grid = voxelize(&mesh, resolution)?;
        let name = path.file_stem().map_or("shape".into(), |s| s.to_string_lossy().into_owned());
        return Ok((
            input.to_string(),
            BundleShape {
                name,
                grid,
                ground_truth: mesh,
            },
        ));
    }
    let looks_like_path = input.contains('/') || input.contains('.');
    match shapes::named(input, resolution) {
        Ok(grid) => Ok((
            format!("builtin:{input}"),
            BundleShape {
                name: input.replace('@', "-"),
                ground_truth: TriMesh::from_voxels(&grid),
                grid,
            },
        )),
        Err(_) if looks_like_path => Err(Error::invalid(format!("{input}: no such file"))),
        Err(e) => Err(e),
    }
}

/// Writes one shape directory of a bundle.
pub fn write_shape_dir(dir: &Path, shape: &BundleShape, source: &str, cfg: &RunConfig) -> Result<ShapeMeta> {
    fs::create_dir_all(dir.join("slices"))?;
    let g = &shape.grid;
    let mut w = create_file(&dir.join("grid.bin"))?;
    write_grid(g, &mut w)?;
    w.flush()?;
    let axis = cfg.env.slice_axis;
    let count = cfg.env.slice_count.min(g.dims()[axis.index()]);
    let planes = slice_layers(g.dims()[axis.index()], count)?;
    for cs in extract_slices(g, axis, count)? {
        let mut w = create_file(&dir.join("slices").join(format!("slice_{:03}.pgm", cs.plane_index)))?;
        cs.mask.write_pgm(&mut w)?;
        w.flush()?;
    }
    let projections = View::ALL.map(|v| project(g, v));
    for p in &projections {
        let mut w = create_file(&dir.join(format!("{}.pgm", p.view.name())))?;
        p.mask.write_pgm(&mut w)?;
        w.flush()?;
    }
    let corners = detect_all(&projections, &cfg.env.harris)?;
    let mut w = create_file(&dir.join("corners.csv"))?;
    write_corners_csv(&corners, &mut w)?;
    w.flush()?;
    shape.ground_truth.save_obj(&dir.join("gt.obj"))?;
    let meta = ShapeMeta {
        name: shape.name.clone(),
        source: source.to_string(),
        dims: g.dims(),
        voxel_size: g.voxel_size(),
        origin: g.origin(),
        slice_axis: axis,
        slice_planes: planes,
        occupied: g.count(),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(meta)
}

/// Reads a shape directory written by [`write_shape_dir`].
pub fn read_shape_dir(dir: &Path) -> Result<BundleShape> {
    let meta: ShapeMeta = serde_json::from_slice(&fs::read(dir.join("meta.json")).map_err(|e| {
        Error::invalid(format!("{}: not a shape directory ({e})", dir.display()))
    })?)?;
    let grid = read_grid(fs::File::open(dir.join("grid.bin"))?, meta.voxel_size, meta.origin)?;
    if grid.dims() != meta.dims {
        return Err(Error::Format(format!("{}: grid dims disagree with meta.json", dir.display())));
    }
    let gt = dir.join("gt.obj");
    let ground_truth = if gt.is_file() {
        TriMesh::load(&gt)?
    } else {
        TriMesh::from_voxels(&grid)
    };
    Ok(BundleShape {
        name: meta.name,
        grid,
        ground_truth,
    })
}

/// All shapes of a bundle, in manifest order.
pub fn read_bundle(dir: &Path) -> Result<Vec<BundleShape>> {
    let manifest: RunManifest = serde_json::from_slice(
        &fs::read(dir.join("manifest.json"))
            .map_err(|e| Error::invalid(format!("{}: not a bundle ({e})", dir.display())))?,
    )?;
    if manifest.shapes.is_empty() {
        return Err(Error::invalid(format!("{}: bundle has no shapes", dir.display())));
    }
    manifest.shapes.iter().map(|s| read_shape_dir(&dir.join(s))).collect()
}

/// A bundle shape directory, or a built-in shape generated on the fly.
fn resolve_shape(spec: &str, cfg: &RunConfig) -> Result<BundleShape> {
    let p = Path::new(spec);
    if p.is_dir() {
        read_shape_dir(p)
    } else {
        Ok(source_shape(spec, cfg.env.grid_resolution)?.1)
    }
}

pub fn cmd_prepare(g: &GlobalArgs, inputs: &[String], ordering_set: bool, resolution: Option<usize>, out: &Path) -> Result<RunManifest> {
    let mut cfg = load_config(g)?;
    if let Some(r) = resolution {
        cfg.env.grid_resolution = r;
    }
    let res = cfg.env.grid_resolution;
    let mut items = Vec::new();
    for input in inputs {
        items.push(source_shape(input, res)?);
    }
    if ordering_set {
        for (name, grid) in shapes::ordering_set(res) {
            items.push((
                format!("builtin:{name}"),
                BundleShape {
                    name: name.replace('@', "-"),
                    ground_truth: TriMesh::from_voxels(&grid),
                    grid,
                },
            ));
        }
    }
    if items.is_empty() {
        return Err(Error::invalid("nothing to prepare: give mesh files, shape names or --ordering-set"));
    }
    fs::create_dir_all(out)?;
    let mut names: Vec<String> = Vec::new();
    for (source, shape) in &items {
        let mut name = shape.name.clone();
        let mut k = 1;
        while names.contains(&name) {
            k += 1;
            name = format!("{}-{k}", shape.name);
        }
        let mut shape = shape.clone();
        shape.name = name.clone();
        let meta = write_shape_dir(&out.join(&name), &shape, source, &cfg)?;
        println!("{name}: {:?} cells, {} occupied, {} slices", meta.dims, meta.occupied, meta.slice_planes.len());
        names.push(name);
    }
    let manifest = RunManifest {
        command: "prepare".into(),
        config_path: g.config.clone(),
        config_hash: config_hash(&cfg),
        seed: g.seed,
        shapes: names,
        output: out.to_path_buf(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn cmd_corners(g: &GlobalArgs, shape: &str, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(g)?;
    let s = resolve_shape(shape, &cfg)?;
    let projections = View::ALL.map(|v| project(&s.grid, v));
    let sets = detect_all(&projections, &cfg.env.harris)?;
    match out {
        Some(p) => {
            let mut w = create_file(p)?;
            write_corners_csv(&sets, &mut w)?;
            w.flush()?;
        }
        None => write_corners_csv(&sets, std::io::stdout().lock())?,
    }
    Ok(())
}

fn named_grids(shapes: &[BundleShape]) -> Vec<(String, VoxelGrid)> {
    shapes.iter().map(|s| (s.name.clone(), s.grid.clone())).collect()
}

pub fn cmd_demos(g: &GlobalArgs, bundle: &Path, out: &Path, episodes: usize) -> Result<()> {
    let cfg = load_config(g)?;
    let shapes = read_bundle(bundle)?;
    if episodes == 0 {
        return Err(Error::invalid("--episodes must be >= 1"));
    }
    let demos = generate_demonstrations(&named_grids(&shapes), &cfg.env, episodes)?;
    let mut w = create_file(out)?;
    write_demonstrations(&mut w, &demos)?;
    w.flush()?;
    println!("shape,return,surface_iou,parts,steps");
    for d in &demos {
        println!(
            "{},{:.4},{:.4},{},{}",
            d.shape, d.total_return, d.metrics.surface_iou, d.metrics.parts, d.metrics.steps
        );
    }
    Ok(())
}

pub fn cmd_train(g: &GlobalArgs, bundle: &Path, demos: Option<&Path>, mode: Mode, out: &Path, report: Option<&Path>) -> Result<()> {
    let cfg = load_config(g)?;
    let shapes = read_bundle(bundle)?;
    let demos = match (mode, demos) {
        (Mode::Ddpg, _) => None,
        (_, Some(p)) => Some(read_demonstrations(std::io::BufReader::new(
            fs::File::open(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?,
        ))?),
        (_, None) => return Err(Error::invalid(format!("mode {mode} needs --demos"))),
    };
    let run = run_training(mode, &named_grids(&shapes), demos.as_deref(), &cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    run.agent.checkpoint().save(out)?;
    if let Some(p) = report {
        let mut w = create_file(p)?;
        write_report_csv(&run.report, &mut w)?;
        w.flush()?;
    }
    let train: Vec<_> = run.report.iter().filter(|r| r.phase == "train").collect();
    if let Some(last) = train.last() {
        let k = train.len().min(10);
        let mean = train[train.len() - k..].iter().filter_map(|r| r.surface_iou).sum::<f64>() / k as f64;
        println!("{} episodes, {} steps, mean surface IoU of last {k}: {mean:.4}", train.len(), last.steps);
    }
    println!("checkpoint written to {}", out.display());
    Ok(())
}

/// One greedy episode with the given variant; `cmd_reconstruct` and
/// `cmd_eval` both go through here.
pub fn reconstruct(shape: &BundleShape, variant: &Variant, cfg: &RunConfig) -> Result<EpisodeResult> {
    let mut env_cfg = cfg.env.clone();
    match variant {
        Variant::Expert => run_episode(&shape.grid, &env_cfg, &mut ExpertPolicy, Some(&shape.ground_truth)),
        Variant::Checkpoint(p) | Variant::NoProjections(p) => {
            let ck = Checkpoint::load(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
            let zero = matches!(variant, Variant::NoProjections(_));
            if zero {
                env_cfg.snap_to_corners = false;
            }
            let mut policy = ActorPolicy {
                actor: &ck.actor,
                zero_projections: zero,
            };
            run_episode(&shape.grid, &env_cfg, &mut policy as &mut dyn Policy, Some(&shape.ground_truth))
        }
    }
}

pub fn cmd_reconstruct(
    g: &GlobalArgs,
    shape: &str,
    policy: &PolicyArgs,
    out: &Path,
    metrics: Option<&Path>,
    trace: Option<&Path>,
) -> Result<EpisodeMetrics> {
    let cfg = load_config(g)?;
    let variant = Variant::from_args(policy)?;
    let s = resolve_shape(shape, &cfg)?;
    let ep = reconstruct(&s, &variant, &cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ep.final_mesh.save_obj(out)?;
    if let Some(p) = metrics {
        write_json(p, &ep.metrics)?;
    }
    if let Some(p) = trace {
        let mut w = create_file(p)?;
        write_trace(&ep.trace, &mut w)?;
        w.flush()?;
    }
    println!("{}", serde_json::to_string(&ep.metrics)?);
    Ok(ep.metrics)
}

/// One row of the evaluation table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub shape: String,
    pub variant: String,
    pub surface_iou: f64,
    pub chamfer_l1: Option<f64>,
    pub parts: f64,
    pub steps: f64,
}

pub fn evaluate_bundle(shapes: &[BundleShape], variants: &[Variant], cfg: &RunConfig) -> Result<Vec<EvalRow>> {
    use rayon::prelude::*;
    let mut rows = Vec::new();
    for v in variants {
        let label = v.label();
        let per: Vec<EvalRow> = shapes
            .par_iter()
            .map(|s| {
                let m = reconstruct(s, v, cfg)?.metrics;
                Ok(EvalRow {
                    shape: s.name.clone(),
                    variant: label.clone(),
                    surface_iou: m.surface_iou,
                    chamfer_l1: m.chamfer_l1,
                    parts: m.parts as f64,
                    steps: m.steps as f64,
                })
            })
            .collect::<Result<_>>()?;
        let n = per.len() as f64;
        let cds: Vec<f64> = per.iter().filter_map(|r| r.chamfer_l1).collect();
        let mean = EvalRow {
            shape: "mean".into(),
            variant: label,
            surface_iou: per.iter().map(|r| r.surface_iou).sum::<f64>() / n,
            chamfer_l1: (!cds.is_empty()).then(|| cds.iter().sum::<f64>() / cds.len() as f64),
            parts: per.iter().map(|r| r.parts).sum::<f64>() / n,
            steps: per.iter().map(|r| r.steps).sum::<f64>() / n,
        };
        rows.extend(per);
        rows.push(mean);
    }
    Ok(rows)
}

pub fn write_eval_csv<W: Write>(rows: &[EvalRow], mut w: W) -> Result<()> {
    writeln!(w, "shape,variant,surface_iou,chamfer_l1,parts,steps")?;
    for r in rows {
        let cd = r.chamfer_l1.map_or(String::new(), |c| format!("{c:.6}"));
        writeln!(w, "{},{},{:.6},{cd},{},{}", r.shape, r.variant, r.surface_iou, r.parts, r.steps)?;
    }
    Ok(())
}

pub fn cmd_eval(g: &GlobalArgs, bundle: &Path, variants: &[String], out: Option<&Path>) -> Result<Vec<EvalRow>> {
    let cfg = load_config(g)?;
    let shapes = read_bundle(bundle)?;
    let variants = variants.iter().map(|v| Variant::parse(v)).collect::<Result<Vec<_>>>()?;
    let rows = evaluate_bundle(&shapes, &variants, &cfg)?;
    match out {
        Some(p) => {
            let mut w = create_file(p)?;
            write_eval_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_eval_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(rows)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(Error::invalid("--jobs must be >= 1"));
        }
        // Fails only if a pool already exists (e.g. called twice in-process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let g = &cli.global;
    match &cli.command {
        Command::Prepare {
            inputs,
            ordering_set,
            resolution,
            out,
        } => cmd_prepare(g, inputs, *ordering_set, *resolution, out).map(|_| ()),
        Command::Corners { shape, out } => cmd_corners(g, shape, out.as_deref()),
        Command::Demos { bundle, out, episodes } => cmd_demos(g, bundle, out, *episodes),
        Command::Train {
            bundle,
            demos,
            mode,
            out,
            report,
        } => cmd_train(g, bundle, demos.as_deref(), *mode, out, report.as_deref()),
        Command::Reconstruct {
            shape,
            policy,
            out,
            metrics,
            trace,
        } => cmd_reconstruct(g, shape, policy, out, metrics.as_deref(), trace.as_deref()).map(|_| ()),
        Command::Eval { bundle, variants, out } => cmd_eval(g, bundle, variants, out.as_deref()).map(|_| ()),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => 0,
        // Output piped into e.g. `head`: not an error worth reporting.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
