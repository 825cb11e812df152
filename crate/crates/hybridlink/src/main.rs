use clap::{Args, Parser, Subcommand};
use hybridlink::error::{Error, Result};
use hybridlink::ofdm::OfdmConfig;
use hybridlink::sim::report::{self, Curve, Gain};
use hybridlink::sim::{config, runner};
use hybridlink::sync::{hybrid_detect, PreambleSpec, SyncConfig};
use num_complex::Complex64;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "hybridlink",
    about = "Hybrid NB-PLC / wireless OFDM diversity link simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo BER sweep from a scenario config.
    Ber(BerArgs),
    /// Eb/N0 gain of a curve over a baseline at a target BER.
    Gain(GainArgs),
    /// Detect frames in raw interleaved float32 I/Q captures.
    Detect(DetectArgs),
    /// Render BER curves from CSV files into an SVG figure.
    Plot(PlotArgs),
}

#[derive(Args)]
struct BerArgs {
    /// Scenario config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct GainArgs {
    /// Target BER at which the gain is measured.
    #[arg(long, default_value_t = 1e-4)]
    target_ber: f64,
    /// CSV of the scheme under test.
    #[arg(long)]
    curve: PathBuf,
    /// CSV of the baseline scheme.
    #[arg(long)]
    baseline: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Raw capture: interleaved little-endian float32 I/Q samples.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV (start,cfo_hz,metric); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Link type: wireless runs CFO estimation, plc skips it.
    #[arg(long, default_value = "wireless")]
    link: String,
    /// Number of SYNCP repetitions in the preamble.
    #[arg(long, default_value_t = 8)]
    n_syncp: usize,
    /// Optional scenario config supplying grid geometry and thresholds.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Curve CSV files (repeatable).
    #[arg(long = "curve", required = true)]
    curves: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Figure title.
    #[arg(long, default_value = "BER vs Eb/N0")]
    title: String,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Ber(args) => cmd_ber(args),
        Command::Gain(args) => cmd_gain(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

fn cmd_ber(args: BerArgs) -> Result<()> {
    if let Some(n) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    let mut sc = config::load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    let points = runner::run_sweep(&sc)?;
    for p in &points {
        println!(
            "{} ebno={:>6.2} dB  bits={:<10} errors={:<8} ber={:.3e} (+-{:.1e})",
            p.scheme.name(),
            p.ebno_db,
            p.bits,
            p.bit_errors,
            p.ber,
            p.ci95_halfwidth
        );
    }
    std::fs::write(&args.out, report::to_csv(&points))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_gain(args: GainArgs) -> Result<()> {
    let curve = report::read_curve(&args.curve)?;
    let baseline = report::read_curve(&args.baseline)?;
    match report::gain_at_ber(&curve.points, &baseline.points, args.target_ber) {
        Gain::Db(g) => println!(
            "gain of '{}' over '{}' at BER {:.1e}: {:.2} dB",
            curve.label, baseline.label, args.target_ber, g
        ),
        Gain::NotReached {
            curve: c,
            baseline: b,
        } => {
            let mut missing = Vec::new();
            if c {
                missing.push(curve.label.as_str());
            }
            if b {
                missing.push(baseline.label.as_str());
            }
            println!(
                "target BER {:.1e} not reached by: {}",
                args.target_ber,
                missing.join(", ")
            );
        }
    }
    Ok(())
}

fn read_iq_f32(path: &PathBuf) -> Result<Vec<Complex64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Framing(format!(
            "{}: length {} is not a whole number of I/Q float32 pairs",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            Complex64::new(re, im)
        })
        .collect())
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let (ofdm, mut sync) = match &args.config {
        Some(path) => {
            let sc = config::load_scenario(path)?;
            let ofdm = if args.link == "plc" {
                sc.ofdm_plc.clone()
            } else {
                sc.ofdm_wl.clone()
            };
            (ofdm, sc.sync)
        }
        None => (OfdmConfig::default(), SyncConfig::default()),
    };
    sync.estimate_cfo = match args.link.as_str() {
        "wireless" => true,
        "plc" => false,
        other => {
            return Err(Error::Config(format!(
                "link must be wireless or plc, got '{other}'"
            )))
        }
    };
    let spec = PreambleSpec::new(&ofdm, args.n_syncp)?;
    let samples = read_iq_f32(&args.input)?;
    let mut rows = String::from("start,cfo_hz,metric\n");
    let mut offset = 0usize;
    let mut found = 0usize;
    while offset + spec.total_len() <= samples.len() {
        let det = hybrid_detect(&samples[offset..], &spec, &ofdm, &sync);
        if !det.detected {
            break;
        }
        let start = offset + det.start_index;
        rows.push_str(&format!(
            "{},{:.3},{:.4}\n",
            start,
            det.total_cfo_hz(&ofdm),
            det.metric_peak
        ));
        found += 1;
        offset = start + spec.total_len();
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, rows)?;
            println!("{found} detection(s), wrote {}", path.display());
        }
        None => print!("{rows}"),
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let curves: Vec<Curve> = args
        .curves
        .iter()
        .map(|p| report::read_curve(p))
        .collect::<Result<_>>()?;
    let svg = report::plot_svg(&curves, &args.title);
    std::fs::write(&args.out, svg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
