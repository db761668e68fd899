use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use plic::bench::{
    emit, generate_grid, run_benchmark, write_aggregate_csv, write_heatmap_csv, BenchConfig,
    Format, Method,
};
use plic::oracle::McSampler;
use plic::positioning::{position, position_newton_baseline, PositionQuery, StepKind};
use plic::shapes::ShapeKind;
use plic::truncation::precompute;
use plic::{Polyhedron, Vec3};

#[derive(Parser)]
#[command(
    name = "plic",
    version,
    about = "Plane positioning in arbitrary polyhedra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep normals and volume fractions and report truncation statistics.
    Bench(BenchArgs),
    /// Position a single plane.
    Position(PositionArgs),
    /// Compare the exact total or truncated volume against Monte Carlo.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ShapeArgs {
    /// cube, cuboid[:psi1,psi2], tetra, dodeca, torus, letterA or file:<path>
    #[arg(long)]
    shape: String,
    /// Keep the torus grid quads unsplit.
    #[arg(long)]
    strict_table1: bool,
}

impl ShapeArgs {
    fn build(&self) -> Result<(ShapeKind, Polyhedron)> {
        let mut kind: ShapeKind = self.shape.parse()?;
        if let ShapeKind::Torus { strict, .. } = &mut kind {
            *strict = self.strict_table1;
        }
        let p = kind.build().with_context(|| format!("building {kind}"))?;
        Ok((kind, p))
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 80)]
    m_normal: usize,
    #[arg(long, default_value_t = 50)]
    m_vof: usize,
    #[arg(long, default_value = "proposed")]
    method: Method,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Per-instance records; aggregate and heatmap files are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PositionArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Plane normal as x,y,z (normalized internally).
    #[arg(long, allow_hyphen_values = true)]
    normal: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value = "proposed")]
    method: Method,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value = "1e7")]
    samples: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Check the volume below the plane positioned for this normal and
    /// `--alpha` instead of the total volume.
    #[arg(long, allow_hyphen_values = true)]
    normal: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

fn parse_normal(text: &str) -> Result<Vec3> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing normal `{text}`"))?;
    let [x, y, z] = parts[..] else {
        bail!("normal needs three components, got `{text}`");
    };
    let n = Vec3::new(x, y, z);
    if !n.iter().all(|c| c.is_finite()) || n.norm() == 0.0 {
        bail!("normal `{text}` has no direction");
    }
    Ok(n.normalize())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let (kind, p) = args.shape.build()?;
    let grid = generate_grid(args.m_normal, args.m_vof)?;
    let config = BenchConfig {
        method: args.method,
        tol: args.tol,
        keep_records: args.out.is_some(),
    };
    let out = run_benchmark(&p, &kind.id(), &grid, &config)?;
    if let Some(path) = &args.out {
        emit(&out.records, args.format, path)
            .with_context(|| format!("writing {}", path.display()))?;
        write_aggregate_csv(&out.aggregate, File::create(sibling(path, "aggregate"))?)?;
        write_heatmap_csv(&out.aggregate, File::create(sibling(path, "heatmap"))?)?;
    }
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    serde_json::to_writer_pretty(&mut w, &out.aggregate)?;
    writeln!(w)?;
    w.flush()?;
    if out.aggregate.violations > 0 {
        eprintln!(
            "{} instance(s) exceeded tolerance {} (max error {:e})",
            out.aggregate.violations, args.tol, out.aggregate.max_error
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn step_name(kind: StepKind) -> &'static str {
    match kind {
        StepKind::Initial => "initial",
        StepKind::Taylor => "taylor",
        StepKind::Newton => "newton",
        StepKind::LoopBreak => "loop-break",
        StepKind::Midpoint => "midpoint",
        StepKind::Bisection => "bisection",
        StepKind::Cubic => "cubic",
    }
}

fn position_cmd(args: PositionArgs) -> Result<ExitCode> {
    let (_, p) = args.shape.build()?;
    let normal = parse_normal(&args.normal)?;
    let coeffs = precompute(&p, normal);
    let query = PositionQuery::new(&coeffs, args.alpha)?
        .with_tolerance(args.tol, plic::positioning::DEFAULT_ZERO_TOLERANCE)?
        .with_trace(args.trace);
    let result = match args.method {
        Method::Proposed => position(&query),
        Method::Newton => position_newton_baseline(&query),
    };
    let verified = coeffs.truncated_volume(result.s_star).volume / coeffs.total_volume();
    if let Some(trace) = &result.trace {
        for (i, e) in trace.iter().enumerate() {
            println!(
                "{i:3} {:<10} s = {:+.17e}  alpha = {:.17e}",
                step_name(e.kind),
                e.s,
                e.alpha
            );
        }
    }
    println!("s_star         {:+.17e}", result.s_star);
    println!("base           {:?}", coeffs.base().as_slice());
    println!("alpha_target   {:.17e}", args.alpha);
    println!("alpha_achieved {:.17e}", verified);
    println!("n_trunc        {}", result.n_trunc);
    println!("status         {}", result.status);
    if (verified - args.alpha).abs() > args.tol {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let (kind, p) = args.shape.build()?;
    if args.samples.is_nan() || args.samples < 1.0 {
        bail!("--samples must be at least 1");
    }
    let samples = args.samples as usize;
    let sampler = McSampler::new(&p, samples, args.seed);
    let (exact, estimate) = match &args.normal {
        None => (p.total_volume(), sampler.total()),
        Some(text) => {
            let coeffs = precompute(&p, parse_normal(text)?);
            let r = position(&PositionQuery::new(&coeffs, args.alpha)?);
            let exact = coeffs.truncated_volume(r.s_star).volume;
            (exact, sampler.estimate(&coeffs.frame(r.s_star)))
        }
    };
    let z = (estimate.volume - exact) / estimate.std_error;
    println!("shape      {kind}");
    println!("exact      {exact:.15e}");
    println!(
        "estimate   {:.15e} +- {:.3e} ({} samples)",
        estimate.volume, estimate.std_error, samples
    );
    println!("deviation  {z:+.3} sigma");
    Ok(if z.abs() <= 3.0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Position(a) => position_cmd(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
