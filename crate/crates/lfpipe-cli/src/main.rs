//! Command line surface tying together the reference refocusing path, the
//! module-array simulator, the switch generator and the cycle model.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lfpipe::array::{process_frame, ArrayConfig, Iota};
use lfpipe::fir::FirModule;
use lfpipe::io::{read_image, write_meta, write_refocused, LightfieldMeta};
use lfpipe::lightfield::{AngularConvention, RefocusShift};
use lfpipe::refocus::{refocus_2d, InterpMode, PrecisionMode};
use lfpipe::switches::{gen_switch_matrix, matrix_to_json, validate_matrix};
use lfpipe::synth::{gen_synthetic, SyntheticSpec, TextureSpec};
use lfpipe::timing::{benchmark_report, TimingParams};

#[derive(Parser)]
#[command(name = "lfpipe", version, about = "Lightfield refocusing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refocus a frame with the reference spatial-domain path.
    Refocus(RefocusArgs),
    /// Refocus a frame with the simulated FIR module array and report cycles.
    Simulate(SimulateArgs),
    /// Generate and validate the switch matrix for a shift.
    GenSwitch(GenSwitchArgs),
    /// Evaluate the closed-form cycle/latency model.
    Timing(TimingArgs),
    /// Wall-clock benchmark of the reference path on this machine.
    Bench(BenchArgs),
    /// Generate a synthetic lightfield with known focal planes.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Nn,
    Linear,
}

impl From<InterpArg> for InterpMode {
    fn from(v: InterpArg) -> Self {
        match v {
            InterpArg::Nn => InterpMode::NearestNeighbor,
            InterpArg::Linear => InterpMode::Linear,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Exact,
    Hw,
    SumOnly,
}

impl From<PrecisionArg> for PrecisionMode {
    fn from(v: PrecisionArg) -> Self {
        match v {
            PrecisionArg::Exact => PrecisionMode::Exact,
            PrecisionArg::Hw => PrecisionMode::HardwareFaithful,
            PrecisionArg::SumOnly => PrecisionMode::SumOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Table,
}

#[derive(Args)]
struct ModeArgs {
    /// Refocus shift as a'/M, e.g. 2/3.
    #[arg(long)]
    shift: String,
    #[arg(long, value_enum, default_value = "nn")]
    interp: InterpArg,
    #[arg(long, value_enum, default_value = "exact")]
    precision: PrecisionArg,
}

#[derive(Args)]
struct RefocusArgs {
    #[command(flatten)]
    mode: ModeArgs,
    /// Also write a `<output>.mask.pgm` validity image.
    #[arg(long)]
    mask: bool,
    input: PathBuf,
    meta: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    mode: ModeArgs,
    /// Parallel degree: a number or `max`.
    #[arg(long, default_value = "max")]
    iota: String,
    /// Disable the trailing skew-register alignment stage.
    #[arg(long)]
    no_trailing_skew: bool,
    /// Write a line-delimited JSON half-cycle trace of the first row module.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    mask: bool,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportArg,
    input: PathBuf,
    meta: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct GenSwitchArgs {
    /// Refocus shift as a'/M.
    #[arg(long)]
    shift: String,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportArg,
}

#[derive(Args)]
struct TimingArgs {
    /// Micro image size.
    #[arg(long = "M", visible_alias = "m")]
    m: u64,
    /// Frame width in pixels.
    #[arg(long = "K", visible_alias = "k")]
    k: u64,
    /// Frame height in pixels.
    #[arg(long = "L", visible_alias = "l")]
    l: u64,
    /// Pixel clock period in nanoseconds.
    #[arg(long = "clock-ns", default_value_t = 10.0)]
    clock_ns: f64,
    /// Multiply-stage cycles.
    #[arg(long, default_value_t = 1)]
    lambda: u64,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Refocus shift as a'/M.
    #[arg(long, default_value = "1/3")]
    shift: String,
    #[arg(long, value_enum, default_value = "nn")]
    interp: InterpArg,
    #[arg(long, value_enum, default_value = "exact")]
    precision: PrecisionArg,
    /// Micro lenses per side of the generated benchmark frame.
    #[arg(long, default_value_t = 100)]
    lenses: usize,
    #[arg(long, default_value_t = 5)]
    reps: u32,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "random")]
    texture: TextureArg,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Checkerboard period in pixels.
    #[arg(long, default_value_t = 6)]
    period: usize,
    /// Micro image size.
    #[arg(long = "M", visible_alias = "m")]
    m: u32,
    /// Micro lens grid as JXxJY, e.g. 16x16.
    #[arg(long)]
    lenses: String,
    /// Comma-separated per-plane disparities on the upsampled grid.
    #[arg(long, default_value = "0")]
    disparity: String,
    output: PathBuf,
    meta_output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextureArg {
    Checkerboard,
    Gradient,
    Random,
}

/// Runs the command line; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exits
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn main() {
    std::process::exit(cli_main(std::env::args_os()));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Refocus(args) => cmd_refocus(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::GenSwitch(args) => cmd_gen_switch(args),
        Command::Timing(args) => cmd_timing(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn parse_shift(text: &str) -> Result<RefocusShift> {
    RefocusShift::parse(text).with_context(|| format!("parsing shift {text:?}"))
}

fn cmd_refocus(args: RefocusArgs) -> Result<()> {
    let shift = parse_shift(&args.mode.shift)?;
    let img = read_image(&args.input, &args.meta)?;
    let out = refocus_2d(
        &img,
        &shift,
        args.mode.interp.into(),
        args.mode.precision.into(),
    )?;
    write_refocused(&out, &args.output, args.mask)?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let shift = parse_shift(&args.mode.shift)?;
    let img = read_image(&args.input, &args.meta)?;
    let iota = if args.iota.eq_ignore_ascii_case("max") {
        Iota::Max
    } else {
        Iota::Fixed(args.iota.parse().context("parsing --iota")?)
    };
    let cfg = ArrayConfig {
        iota,
        shift,
        prec: args.mode.precision.into(),
        interp: args.mode.interp.into(),
        trailing_skew: !args.no_trailing_skew,
    };
    let res = process_frame(&img, &cfg)?;
    write_refocused(&res.image, &args.output, args.mask)?;

    if let Some(trace_path) = &args.trace {
        write_row_trace(&img, &cfg, trace_path)?;
    }

    let iota_value = match iota {
        Iota::Max => img.width.max(img.height) as u64,
        Iota::Fixed(n) => n,
    };
    let report = serde_json::json!({
        "first_frame_cycles": res.first_frame_cycles,
        "steady_state_cycles": res.steady_state_cycles,
        "iota": iota_value,
        "M": img.micro_size,
        "K": img.width,
        "L": img.height,
    });
    match args.report {
        ReportArg::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        ReportArg::Table => {
            println!(
                "simulated module array ({}x{}, M={})",
                img.width, img.height, img.micro_size
            );
            println!("  iota                : {iota_value}");
            println!("  first frame cycles  : {}", res.first_frame_cycles);
            println!("  steady state cycles : {}", res.steady_state_cycles);
        }
    }
    Ok(())
}

/// Streams the first row of the first channel through a traced module.
fn write_row_trace(
    img: &lfpipe::lightfield::LightfieldImage,
    cfg: &ArrayConfig,
    path: &PathBuf,
) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let mut module = FirModule::for_shift(&cfg.shift, cfg.prec, cfg.interp);
    let row: Vec<u32> = img.row(0, 0).iter().map(|&v| u32::from(v)).collect();
    let mask = vec![true; row.len()];
    let mut err: Option<std::io::Error> = None;
    module.run_stream_wide_traced(&row, &mask, |event| {
        if err.is_none() {
            let result = serde_json::to_writer(&mut out, &event)
                .map_err(std::io::Error::from)
                .and_then(|()| out.write_all(b"\n"));
            if let Err(e) = result {
                err = Some(e);
            }
        }
    })?;
    if let Some(e) = err {
        bail!("writing trace: {e}");
    }
    Ok(())
}

fn cmd_gen_switch(args: GenSwitchArgs) -> Result<()> {
    let shift = parse_shift(&args.shift)?;
    let matrix = gen_switch_matrix(&shift);
    let report = validate_matrix(&matrix);
    if !report.is_valid() {
        bail!("generated matrix failed validation: {report:?}");
    }
    match args.report {
        ReportArg::Json => println!("{}", matrix_to_json(&matrix)?),
        ReportArg::Table => print!("{}", matrix.to_table()),
    }
    Ok(())
}

fn cmd_timing(args: TimingArgs) -> Result<()> {
    let params = TimingParams::new(
        args.lambda,
        args.m,
        args.k,
        args.l,
        args.clock_ns * 1e-9,
        args.k.max(args.l),
    )?;
    let report = benchmark_report(&params);
    match args.report {
        ReportArg::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        ReportArg::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let shift = parse_shift(&args.shift)?;
    let spec = SyntheticSpec {
        texture: TextureSpec::Random { seed: 99 },
        disparities: vec![0],
        m: shift.micro_size(),
        lens_grid: [args.lenses, args.lenses],
    };
    let field = gen_synthetic(&spec)?;
    let img = &field.image;
    let interp: InterpMode = args.interp.into();
    let prec: PrecisionMode = args.precision.into();

    // warm-up pass, then timed repetitions
    refocus_2d(img, &shift, interp, prec)?;
    let start = Instant::now();
    for _ in 0..args.reps {
        refocus_2d(img, &shift, interp, prec)?;
    }
    let elapsed = start.elapsed().as_secs_f64() / f64::from(args.reps.max(1));
    let mpix = (img.width * img.height) as f64 / 1e6;
    println!(
        "host reference path: {}x{} frame, shift {}, {:.3} ms/frame ({:.2} MP/s)",
        img.width,
        img.height,
        shift,
        elapsed * 1e3,
        mpix / elapsed
    );
    println!("note: host wall-clock only; unrelated to the hardware cycle model");
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let (jx, jy) = args
        .lenses
        .split_once('x')
        .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
        .context("parsing --lenses, expected JXxJY")?;
    let disparities: Vec<i64> = args
        .disparity
        .split(',')
        .map(|d| d.trim().parse().context("parsing --disparity"))
        .collect::<Result<_>>()?;
    let texture = match args.texture {
        TextureArg::Checkerboard => TextureSpec::Checkerboard {
            period: args.period,
        },
        TextureArg::Gradient => TextureSpec::Gradient,
        TextureArg::Random => TextureSpec::Random { seed: args.seed },
    };
    let spec = SyntheticSpec {
        texture,
        disparities,
        m: args.m,
        lens_grid: [jx, jy],
    };
    let field = gen_synthetic(&spec)?;
    lfpipe::io::write_image(&field.image, &args.output)?;
    let meta = LightfieldMeta {
        m: args.m,
        lens_grid: [jx, jy],
        channels: 1,
        convention: AngularConvention::Centered,
        source_note: Some("synthetic".into()),
    };
    write_meta(&meta, &args.meta_output)?;
    Ok(())
}
