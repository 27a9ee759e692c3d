use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nphoton::checkpoint;
use nphoton::config::{self, Overrides};
use nphoton::models::{jc_ladder, JCParams};
use nphoton::sweep::{self, Flag, RunOptions, ScanMode};
use nphoton::validate::{self, Level};
use nphoton::Error;

/// Frequency-filtered N-photon correlations through weakly coupled sensors.
/// Frequencies and rates are in units of the coupling g.
#[derive(Parser)]
#[command(name = "nphoton", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Physical spectrum from one sensor per frequency.
    Spectrum(ScanArgs),
    /// N-sensor zero-delay correlation over a frequency or linewidth grid.
    Gn(ScanArgs),
    /// Time-resolved correlation over a delay grid.
    Gtau(ScanArgs),
    /// Two-photon correlation map over (omega1, omega2).
    G2map(ScanArgs),
    /// Jaynes-Cummings ladder transitions and linewidths.
    Ladder(LadderArgs),
    /// Sensor-versus-oracle self check.
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
    },
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "NPHOTON_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Prefactor of the automatic coupling rule.
    #[arg(long)]
    chi: Option<f64>,
    /// Halve couplings until the value changes by less than this.
    #[arg(long = "converge-eps")]
    converge_eps: Option<f64>,
    /// Continue from existing output files, recomputing only unfinished points.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct LadderArgs {
    #[arg(long, default_value = "jc")]
    model: String,
    #[arg(long = "gamma-a")]
    gamma_a: f64,
    #[arg(long = "gamma-s")]
    gamma_s: f64,
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    #[arg(long, default_value_t = 3)]
    rungs: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

const EXIT_INVALID: u8 = 1;
const EXIT_COMPUTE: u8 = 2;
const EXIT_VALIDATE: u8 = 3;

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidDelays(_)
        | Error::DuplicateLabel(_)
        | Error::InvalidFactor { .. }
        | Error::UnknownLabel(_)
        | Error::ThermalDivergence
        | Error::TransitionOverdamped(_)
        | Error::SensorBackAction { .. }
        | Error::CheckpointUnreadable(_) => EXIT_INVALID,
        _ => EXIT_COMPUTE,
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_for(e))
}

fn scan(mode: ScanMode, a: &ScanArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&a.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", a.config.display());
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let ov = Overrides {
        chi: a.chi,
        converge: a.converge_eps,
        directory: a.out.clone(),
    };
    let cfg = match config::parse(&text, mode, &ov) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let dir = cfg.output.directory.clone();
    let base = cfg.output.basename.clone();
    let opts = RunOptions {
        workers: a.workers,
        checkpoint: Some((dir.clone(), base.clone())),
    };
    let result = if a.resume && checkpoint::meta_path(&dir, &base).exists() {
        match checkpoint::read(&dir, &base) {
            Ok(prev) if prev.request != cfg.request => {
                return fail(&Error::CheckpointUnreadable("existing output was produced by a different request".into()))
            }
            Ok(_) => sweep::resume(&dir, &base, &opts).map(|(r, n)| {
                eprintln!("resumed: recomputed {n} point(s)");
                r
            }),
            Err(e) => Err(e),
        }
    } else {
        sweep::run(&cfg.request, &opts)
    };
    let res = match result {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let names = res.request.axis.names();
    for p in res.points.iter().filter(|p| p.flag == Flag::Error) {
        let at: Vec<String> = names.iter().zip(&p.coords).map(|(n, c)| format!("{n}={c}")).collect();
        eprintln!("error at {}: {}", at.join(", "), p.message.as_deref().unwrap_or("unknown"));
    }
    let summary: Vec<String> = [Flag::Ok, Flag::Truncation, Flag::Starved, Flag::NotConverged, Flag::Error]
        .iter()
        .filter_map(|f| match res.count(*f) {
            0 => None,
            n => Some(format!("{n} {}", f.as_str())),
        })
        .collect();
    println!(
        "{} points ({}) -> {}",
        res.points.len(),
        summary.join(", "),
        checkpoint::csv_path(&dir, &base).display()
    );
    if res.count(Flag::Error) > 0 {
        ExitCode::from(EXIT_COMPUTE)
    } else {
        ExitCode::SUCCESS
    }
}

fn ladder(a: &LadderArgs) -> ExitCode {
    if a.model != "jc" {
        return fail(&Error::Config(format!("ladder is defined for the jc model, got `{}`", a.model)));
    }
    let p = JCParams {
        g: a.g,
        ..JCParams::new(a.gamma_a, a.gamma_s, 0.0, 1)
    };
    if let Err(e) = p.validate() {
        return fail(&e);
    }
    match jc_ladder(&p, a.rungs) {
        Ok(ts) => {
            println!("{:<7} {:<16} {:>22} {:>22}", "symbol", "transition", "frequency", "linewidth");
            for t in &ts {
                println!("{:<7} {:<16} {:>22.16e} {:>22.16e}", t.symbol(), t.describe(), t.frequency, t.linewidth);
            }
            println!("{} transitions", ts.len());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Spectrum(a) => scan(ScanMode::Spectrum, a),
        Command::Gn(a) => scan(ScanMode::GnZero, a),
        Command::Gtau(a) => scan(ScanMode::GnTau, a),
        Command::G2map(a) => scan(ScanMode::G2Map, a),
        Command::Ladder(a) => ladder(a),
        Command::Validate { level } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            match validate::run(level) {
                Ok(checks) => {
                    print!("{}", validate::table(&checks));
                    if checks.iter().all(|c| c.passed()) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_VALIDATE)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_VALIDATE)
                }
            }
        }
    }
}
