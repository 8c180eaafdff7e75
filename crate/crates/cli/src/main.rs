use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use gscomp::adp::{self, CandidateGrid};
use gscomp::fgc;
use gscomp::foa::{self, CompressOptions, Constraint, EvalContext, TimeBreakdown};
use gscomp::metrics::{self, REFERENCE_PSNR_DB};
use gscomp::mpq::{self, GapTable, ProbeGranularity, QuantizationPlan};
use gscomp::render::{self, Camera, ImageBuffer};
use gscomp::scenegen::{self, SceneSpec};
use gscomp::{importance, ply, GaussianModel};
use log::info;
use serde::Serialize;

const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "gscomp", version, about = "Compress 3D Gaussian splatting models without retraining")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "FLEXGS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a compression plan meeting a target and write an FGC file
    Compress(CompressArgs),
    /// Expand an FGC file back into a PLY model
    Decompress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Render a PLY or FGC model from every camera
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ImageFormat::Png)]
        format: ImageFormat,
    },
    /// Measure how much each channel group loses at 4 bits
    Sensitivity {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = mpq::DEFAULT_GROUP_COUNT)]
        group_count: u32,
        /// Gap (dB) below which a group is assigned 4 bits
        #[arg(long, default_value_t = mpq::DEFAULT_INT4_THRESHOLD_DB)]
        threshold_db: f64,
        /// Probe each of the 59 channels instead of the six groups
        #[arg(long)]
        per_channel: bool,
    },
    /// Evaluate every grid candidate and write the rate-distortion curve
    RdSweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Also evaluate every grid point at uniform INT8 and uniform INT4
        #[arg(long)]
        joint: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic scene and orbit cameras
    GenScene {
        /// Scene spec JSON; defaults apply to missing fields
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").required(true).multiple(false)
    .args(["target_psnr_drop", "target_bytes", "target_ratio"])))]
struct CompressArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    cameras: PathBuf,
    /// Largest acceptable PSNR drop in dB
    #[arg(long)]
    target_psnr_drop: Option<f64>,
    /// Largest acceptable output size in bytes
    #[arg(long)]
    target_bytes: Option<u64>,
    /// Smallest acceptable compression ratio
    #[arg(long)]
    target_ratio: Option<f64>,
    /// Quantization plan JSON (bit-widths and group count)
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Candidate grid JSON
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Derive bit-widths from a sensitivity probe instead of the plan
    #[arg(long)]
    probe_sensitivity: bool,
    /// Add all-INT8 and all-INT4 variants to the ends of the path
    #[arg(long)]
    joint: bool,
    /// Separate cameras for importance scoring
    #[arg(long)]
    training_cameras: Option<PathBuf>,
    /// Write one JSON line per search step
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageFormat {
    Png,
    Pfm,
}

/// Errors the user can fix by changing arguments or inputs.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Serialize)]
struct CompressReport {
    psnr_drop_db: f64,
    psnr: f64,
    ssim: f64,
    input_bytes: u64,
    output_bytes: u64,
    ratio: f64,
    reduction_pct: f64,
    time_breakdown: TimeBreakdown,
    feasible: bool,
    evaluations: usize,
    plan: fgc::CompressionPlan,
}

#[derive(Serialize)]
struct SensitivityReport {
    #[serde(flatten)]
    gaps: GapTable,
    suggested_plan: QuantizationPlan,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: thread count must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { EXIT_USAGE } else { EXIT_ERROR })
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Compress(args) => compress(args),
        Command::Decompress { input, output } => {
            let model = load_fgc_model(&input)?;
            ply::write_ply(&model, &output).with_context(|| format!("writing {}", output.display()))?;
            Ok(0)
        }
        Command::Render {
            input,
            cameras,
            out,
            format,
        } => render_cmd(&input, &cameras, &out, format),
        Command::Sensitivity {
            input,
            cameras,
            out,
            group_count,
            threshold_db,
            per_channel,
        } => sensitivity(&input, &cameras, &out, group_count, threshold_db, per_channel),
        Command::RdSweep {
            input,
            cameras,
            grid,
            plan,
            joint,
            out,
        } => rd_sweep(&input, &cameras, grid.as_deref(), plan.as_deref(), joint, &out),
        Command::GenScene { spec, out } => {
            let spec = match spec {
                Some(p) => SceneSpec::load(&p).map_err(|e| UsageError(format!("{}: {e}", p.display())))?,
                None => SceneSpec::default(),
            };
            let paths = scenegen::write_fixture(&spec, &out)?;
            info!("wrote {} and {}", paths.model.display(), paths.cameras.display());
            Ok(0)
        }
    }
}

fn load_model(path: &Path) -> Result<GaussianModel> {
    ply::load_ply(path).with_context(|| format!("loading {}", path.display()))
}

fn load_fgc_model(path: &Path) -> Result<GaussianModel> {
    let file = fgc::load_fgc(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.model.dequantize()?)
}

/// PLY or FGC, told apart by the leading magic bytes.
fn load_any_model(path: &Path) -> Result<GaussianModel> {
    let head = {
        use std::io::Read;
        let mut buf = [0u8; 4];
        let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let n = f.read(&mut buf)?;
        buf[..n].to_vec()
    };
    if head == fgc::MAGIC {
        load_fgc_model(path)
    } else {
        load_model(path)
    }
}

fn load_cameras(path: &Path) -> Result<Vec<Camera>> {
    let cams = render::load_cameras(path).with_context(|| format!("loading {}", path.display()))?;
    if cams.is_empty() {
        return Err(UsageError(format!("{} contains no cameras", path.display())).into());
    }
    Ok(cams)
}

fn load_plan(path: Option<&Path>) -> Result<QuantizationPlan> {
    let Some(path) = path else {
        return Ok(QuantizationPlan::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let plan: QuantizationPlan =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    plan.validate().map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    Ok(plan)
}

fn load_grid(path: Option<&Path>) -> Result<CandidateGrid> {
    match path {
        Some(p) => Ok(CandidateGrid::load(p).map_err(|e| UsageError(format!("{}: {e}", p.display())))?),
        None => Ok(CandidateGrid::default()),
    }
}

fn compress(args: CompressArgs) -> Result<u8> {
    let constraint = match (args.target_psnr_drop, args.target_bytes, args.target_ratio) {
        (Some(d), None, None) => Constraint::MaxPsnrDropDb(d),
        (None, Some(b), None) => Constraint::MaxCompressedBytes(b),
        (None, None, Some(r)) => Constraint::MinCompressionRatio(r),
        _ => return Err(UsageError("exactly one target flag is required".into()).into()),
    };
    constraint.validate().map_err(|e| UsageError(e.to_string()))?;

    let t = Instant::now();
    let model = load_model(&args.input)?;
    let cameras = load_cameras(&args.cameras)?;
    let training_cameras = args.training_cameras.as_deref().map(load_cameras).transpose()?;
    let input_bytes = fs::metadata(&args.input)?.len();
    let load_time = t.elapsed().as_secs_f64();
    info!("loaded {} Gaussians and {} cameras", model.len(), cameras.len());

    let options = CompressOptions {
        grid: load_grid(args.grid.as_deref())?,
        quant: load_plan(args.plan.as_deref())?,
        probe_sensitivity: args.probe_sensitivity,
        joint: args.joint,
        training_cameras,
        input_bytes: Some(input_bytes),
        ..Default::default()
    };
    let mut res = foa::compress(&model, &cameras, &constraint, &options)?;
    res.time.load = load_time;

    let t = Instant::now();
    fs::write(&args.output, &res.bytes).with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(trace) = &args.trace {
        res.trace
            .write_jsonl(trace)
            .with_context(|| format!("writing {}", trace.display()))?;
    }
    res.time.storage += t.elapsed().as_secs_f64();

    let report = CompressReport {
        psnr_drop_db: res.quality.psnr_drop_db,
        psnr: res.quality.psnr,
        ssim: res.quality.ssim,
        input_bytes: res.input_bytes,
        output_bytes: res.output_bytes,
        ratio: res.ratio,
        reduction_pct: res.reduction_pct,
        time_breakdown: res.time,
        feasible: res.feasible,
        evaluations: res.trace.evaluations(),
        plan: res.plan,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !res.feasible {
        log::warn!("target not met; wrote the best-effort candidate");
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

fn render_cmd(input: &Path, cameras: &Path, out: &Path, format: ImageFormat) -> Result<u8> {
    let model = load_any_model(input)?;
    let cams = load_cameras(cameras)?;
    let images = render::render_views(&model, &cams)?;
    fs::create_dir_all(out)?;
    for (i, img) in images.iter().enumerate() {
        let path = match format {
            ImageFormat::Png => out.join(format!("view_{i:04}.png")),
            ImageFormat::Pfm => out.join(format!("view_{i:04}.pfm")),
        };
        match format {
            ImageFormat::Png => write_png(img, &path)?,
            ImageFormat::Pfm => write_pfm(img, &path)?,
        }
    }
    info!("rendered {} views into {}", images.len(), out.display());
    Ok(0)
}

fn write_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .rgb
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    image::save_buffer(path, &bytes, img.width as u32, img.height as u32, image::ColorType::Rgb8)
        .with_context(|| format!("writing {}", path.display()))
}

/// Portable float map: little-endian, rows stored bottom to top.
fn write_pfm(img: &ImageBuffer, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write!(w, "PF\n{} {}\n-1.0\n", img.width, img.height)?;
    for y in (0..img.height).rev() {
        for v in &img.rgb[y * img.width * 3..(y + 1) * img.width * 3] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sensitivity(
    input: &Path,
    cameras: &Path,
    out: &Path,
    group_count: u32,
    threshold_db: f64,
    per_channel: bool,
) -> Result<u8> {
    if group_count == 0 {
        return Err(UsageError("group count must be positive".into()).into());
    }
    let model = load_model(input)?;
    let cams = load_cameras(cameras)?;
    let eval_cams = &cams[..cams.len().min(CompressOptions::default().max_eval_views)];
    let baseline = render::render_views(&model, eval_cams)?;
    let granularity = if per_channel {
        ProbeGranularity::Channels
    } else {
        ProbeGranularity::Groups
    };
    let gaps = mpq::probe_channel_sensitivity(&model, eval_cams, &baseline, group_count, granularity)?;
    let report = SensitivityReport {
        suggested_plan: mpq::assign_bitwidths(&gaps, threshold_db, group_count),
        gaps,
    };
    fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    for e in &report.gaps.entries {
        info!("{:>10}: {:.3} dB", e.label, e.gap_db);
    }
    Ok(0)
}

fn rd_sweep(
    input: &Path,
    cameras: &Path,
    grid: Option<&Path>,
    plan: Option<&Path>,
    joint: bool,
    out: &Path,
) -> Result<u8> {
    let grid = load_grid(grid)?;
    let quant = load_plan(plan)?;
    let model = load_model(input)?;
    let input_bytes = fs::metadata(input)?.len();
    let cams = load_cameras(cameras)?;
    let eval_cams = &cams[..cams.len().min(CompressOptions::default().max_eval_views)];
    let scores = importance::compute_scores(&model, &cams)?;
    let baseline = render::render_views(&model, eval_cams)?;
    let ctx = EvalContext {
        model: &model,
        scores: &scores,
        cameras: eval_cams,
        baseline: &baseline,
        reference_psnr_db: REFERENCE_PSNR_DB,
    };
    let mut candidates = adp::enumerate_candidates(&grid, &scores, &quant)?;
    if joint {
        for bits in [8, 4] {
            let uniform = QuantizationPlan::uniform(bits, quant.group_count);
            candidates.extend(adp::enumerate_candidates(&grid, &scores, &uniform)?);
        }
    }
    let evals = foa::sweep(&ctx, &candidates)?;

    let mut w = BufWriter::new(fs::File::create(out).with_context(|| format!("creating {}", out.display()))?);
    writeln!(w, "alpha,beta,sh_fraction,bitwidth_profile,bytes,ratio,psnr_drop,ssim")?;
    for (c, e) in candidates.iter().zip(&evals) {
        let ratio = metrics::compression_ratio(input_bytes as f64, e.estimated_bytes as f64)?.ratio;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.pruning.alpha,
            c.pruning.beta,
            c.point.sh_fraction,
            c.quant.profile_name(),
            e.estimated_bytes,
            ratio,
            e.psnr_drop_db,
            e.ssim
        )?;
    }
    w.flush()?;
    info!("evaluated {} candidates", candidates.len());
    Ok(0)
}
