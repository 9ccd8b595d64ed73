use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use hypocodec::bitstream::{base_fingerprint, compute_bpp, read_base, read_container_with_layout, write_base, ResidualMode};
use hypocodec::config::CodecConfig;
use hypocodec::encoder::{pretrain_base, AdamConfig, RegTarget};
use hypocodec::hyponet::HypoNetConfig;
use hypocodec::io::{is_raw_path, read_video, sidecar_path, video_to_bytes, write_ppm_dir, RawMeta};
use hypocodec::metrics::{psnr, ssim};
use hypocodec::pipeline::{decode_bytes, encode_fit, fit_video, video_tubelets, CodingParams, VideoFit};
use hypocodec::rd::{rd_sweep, to_csv, SweepGrid};
use hypocodec::synthetic::{generate_synthetic, Pattern, SyntheticSpec};
use hypocodec::tubelet::{FusionMode, Tubelet, VideoBuffer};
use hypocodec::{Error, Result};

#[derive(Parser)]
#[command(name = "hypocodec", version, about = "Neural weight-stream video codec")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit shared base parameters on a corpus.
    Pretrain(PretrainArgs),
    /// Fit and code a video into a container.
    Encode(EncodeArgs),
    /// Reconstruct a video from a container.
    Decode(DecodeArgs),
    /// Print PSNR, SSIM, and optionally bpp.
    Eval(EvalArgs),
    /// Write a CSV of rate-distortion points.
    RdSweep(SweepArgs),
    /// Generate a synthetic test video.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus videos; tubelets are cut from every clip and position.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    /// Synthetic corpus size used when no input is given.
    #[arg(long, default_value_t = 16)]
    synthetic: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct FitArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// `oh,ow` overlap in pixels.
    #[arg(long)]
    overlap: Option<String>,
    #[arg(long)]
    fusion: Option<FusionMode>,
    /// Keyframe every this many clips (default: none).
    #[arg(long)]
    keyframe_interval: Option<u32>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    finetune_iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    finetune_lr: Option<f64>,
    #[arg(long)]
    reg_target: Option<RegTarget>,
    /// Start every clip from identity tokens.
    #[arg(long)]
    cold_start: bool,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, default_value_t = 4)]
    bits: u8,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = ResidualMode::Previous)]
    residual_mode: ResidualMode,
    /// Per-iteration loss CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// `.rgb`/`.raw` for raw output, otherwise a PPM directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    decoded: PathBuf,
    #[arg(long)]
    container: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [4u8])]
    bits: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1f64])]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [ResidualMode::Previous])]
    residual_mode: Vec<ResidualMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "moving_sinusoid")]
    pattern: Pattern,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long, default_value_t = 32)]
    frames: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_video_atomic(path: &Path, video: &VideoBuffer) -> Result<()> {
    if is_raw_path(path) {
        let meta = RawMeta {
            frames: video.frames(),
            height: video.height(),
            width: video.width(),
            fps: 30.0,
        };
        write_atomic(path, &video_to_bytes(video))?;
        return write_atomic(&sidecar_path(path), meta.to_text().as_bytes());
    }
    let tmp = tempfile::Builder::new()
        .prefix(".hypocodec-")
        .tempdir_in(parent_dir(path))?;
    write_ppm_dir(tmp.path(), video)?;
    if path.is_dir() {
        fs::remove_dir_all(path)?;
    }
    fs::rename(tmp.path(), path)?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<CodecConfig> {
    path.map_or_else(|| Ok(CodecConfig::default()), CodecConfig::load)
}

fn parse_overlap(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("overlap '{s}' is not 'oh,ow'"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

struct FitSetup {
    config: CodecConfig,
    base: hypocodec::hyponet::BaseParams<f32>,
    fingerprint: u32,
    video: VideoBuffer,
    grid: hypocodec::tubelet::TubeletGrid,
}

fn setup_fit(args: &FitArgs, lambda: Option<f64>) -> Result<FitSetup> {
    let mut config = load_config(args.config.as_deref())?;
    let base_bytes = fs::read(&args.base)?;
    let fingerprint = base_fingerprint(&base_bytes)?;
    let (hyponet, base) = read_base(&base_bytes)?;
    if args.config.is_some() && config.hyponet != hyponet {
        return Err(Error::Config(
            "the config's hyponetwork differs from the one stored in the base file".into(),
        ));
    }
    config.hyponet = hyponet;
    if let Some(o) = &args.overlap {
        config.grid.overlap = parse_overlap(o)?;
    }
    if args.fusion.is_some() {
        config.grid.fusion = args.fusion;
    }
    let e = &mut config.encoder;
    if let Some(k) = args.keyframe_interval {
        e.keyframe_interval = Some(k);
    }
    if let Some(v) = args.iterations {
        e.iterations = v;
    }
    if let Some(v) = args.finetune_iterations {
        e.finetune_iterations = v;
    }
    if let Some(v) = args.lr {
        e.adam.learning_rate = v;
    }
    if let Some(v) = args.finetune_lr {
        e.finetune_adam.learning_rate = v;
    }
    if let Some(v) = args.reg_target {
        e.reg_target = v;
    }
    if let Some(v) = lambda {
        e.lambda_temp = v;
    }
    e.warm_start &= !args.cold_start;
    e.validate()?;
    let video = read_video(&args.input)?;
    let grid = config.grid.plan(video.height(), video.width(), &config.hyponet)?;
    Ok(FitSetup {
        config,
        base,
        fingerprint,
        video,
        grid,
    })
}

fn trace_csv(fit: &VideoFit) -> String {
    let mut out = String::from("position,stage,clip,iteration,loss\n");
    for (p, r) in fit.positions.iter().enumerate() {
        for (c, t) in r.stage1_traces.iter().enumerate() {
            for (i, l) in t.iter().enumerate() {
                out.push_str(&format!("{p},independent,{c},{i},{l:e}\n"));
            }
        }
        for (i, l) in r.loss_trace.iter().enumerate() {
            out.push_str(&format!("{p},joint,,{i},{l:e}\n"));
        }
    }
    out
}

fn corpus_tubelets(args: &PretrainArgs, hyponet: &HypoNetConfig, config: &CodecConfig, seed: u64) -> Result<Vec<Tubelet>> {
    let mut corpus = Vec::new();
    if args.inputs.is_empty() {
        for i in 0..args.synthetic {
            let spec = SyntheticSpec {
                pattern: Pattern::ALL[i % Pattern::ALL.len()],
                speed: 1.0,
                frames: hyponet.clip_len,
                height: hyponet.patch_height(),
                width: hyponet.patch_width(),
                seed: seed.wrapping_add(i as u64 + 1),
            };
            let v = generate_synthetic(&spec)?;
            let grid = config.grid.plan(v.height(), v.width(), hyponet)?;
            corpus.extend(video_tubelets(&v, hyponet, &grid)?.into_iter().flatten());
        }
    }
    for path in &args.inputs {
        let v = read_video(path)?;
        let grid = config.grid.plan(v.height(), v.width(), hyponet)?;
        corpus.extend(video_tubelets(&v, hyponet, &grid)?.into_iter().flatten());
    }
    Ok(corpus)
}

fn pretrain(args: PretrainArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let mut cfg = config.pretrain.clone();
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.adam = AdamConfig {
            learning_rate: lr,
            ..cfg.adam
        };
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let corpus = corpus_tubelets(&args, &config.hyponet, &config, cfg.seed)?;
    let t = Instant::now();
    let result = pretrain_base(&corpus, &config.hyponet, &cfg)?;
    write_atomic(&args.out, &write_base(&config.hyponet, &result.base)?)?;
    if let Some(path) = &args.trace {
        let mut csv = String::from("epoch,mse\n");
        for (i, l) in result.loss_trace.iter().enumerate() {
            csv.push_str(&format!("{i},{l:e}\n"));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    println!(
        "pretrained on {} tubelets for {} epochs in {:.1}s: mse {:.6e}",
        corpus.len(),
        cfg.epochs,
        t.elapsed().as_secs_f64(),
        result.final_mse
    );
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let s = setup_fit(&args.fit, args.lambda)?;
    let t = Instant::now();
    let fit = fit_video(&s.video, &s.config.hyponet, &s.base, &s.grid, &s.config.encoder)?;
    let coding = CodingParams {
        bits: args.bits,
        mode: args.residual_mode,
        keyframe_interval: s.config.encoder.keyframe_interval,
        base_fingerprint: s.fingerprint,
    };
    let encoded = encode_fit(&fit, &s.config.hyponet, &coding)?;
    write_atomic(&args.out, &encoded.bytes)?;
    if let Some(path) = &args.trace {
        write_atomic(path, trace_csv(&fit).as_bytes())?;
    }
    let (h, w, n) = (s.video.height(), s.video.width(), s.video.frames());
    println!(
        "encoded {n} frames {w}x{h} at {} positions in {:.1}s: {} bytes, {:.6} bpp, fit mse {:.6e}",
        s.grid.len(),
        t.elapsed().as_secs_f64(),
        encoded.bytes.len(),
        compute_bpp(&encoded.layout, h, w, n),
        fit.mean_mse()
    );
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<()> {
    let base_bytes = fs::read(&args.base)?;
    let (_, base) = read_base(&base_bytes)?;
    let bytes = fs::read(&args.input)?;
    let (video, _, _) = decode_bytes(&bytes, &base, base_fingerprint(&base_bytes)?)?;
    write_video_atomic(&args.out, &video)?;
    println!("decoded {} frames {}x{}", video.frames(), video.width(), video.height());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let reference = read_video(&args.reference)?;
    let decoded = read_video(&args.decoded)?;
    println!("psnr_db {:.4}", psnr(&reference, &decoded)?);
    println!("ssim {:.6}", ssim(&reference, &decoded)?);
    if let Some(path) = &args.container {
        let (c, layout) = read_container_with_layout(&fs::read(path)?)?;
        let h = &c.header;
        println!("bpp {:.6}", compute_bpp(&layout, h.height as usize, h.width as usize, h.frames as usize));
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let s = setup_fit(&args.fit, None)?;
    let grid = SweepGrid {
        bits: args.bits,
        lambdas: args.lambda,
        modes: args.residual_mode,
    };
    let points = rd_sweep(&s.video, &s.config.hyponet, &s.base, &s.grid, &s.config.encoder, &grid, s.fingerprint)?;
    write_atomic(&args.out, to_csv(&points).as_bytes())?;
    println!("wrote {} rate-distortion points", points.len());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        pattern: args.pattern,
        speed: args.speed,
        frames: args.frames,
        height: args.height,
        width: args.width,
        seed: args.seed,
    };
    write_video_atomic(&args.out, &generate_synthetic(&spec)?)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Pretrain(a) => pretrain(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Eval(a) => eval(a),
        Command::RdSweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
