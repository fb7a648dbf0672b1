use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hardlogit::bench::{self, ExperimentReport, Verdict, DEFAULT_SIGMA, DEFAULT_ZETA};
use hardlogit::optimizers::MethodKind;
use hardlogit::wcgen::{self, ExportFormat, Variant};
use hardlogit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hardlogit",
    version,
    about = "Worst-case logistic regression instances and lower-bound experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Scale {
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_ZETA)]
    zeta: f64,
}

#[derive(Args)]
struct ReportOpts {
    /// Omit the generation timestamp so reports are byte-reproducible.
    #[arg(long)]
    no_timestamp: bool,
    /// Exit with status 1 when any verdict fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a worst-case dataset and its JSON sidecar.
    Generate {
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        scale: Scale,
        #[arg(long, default_value = "fourblock")]
        variant: Variant,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
        /// Output path; defaults to `hardlogit_k<k>_<variant>.<ext>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed-form optimum and subspace identities for every k up to max-k.
    Verify {
        #[arg(long, default_value_t = 20)]
        max_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Run a method on the k = 2T instance for each T and compare with the bounds.
    Race {
        #[arg(long, default_value = "agd")]
        method: MethodKind,
        /// Comma-separated iteration counts.
        #[arg(long = "t", value_delimiter = ',', default_value = "5,25,50")]
        iterations: Vec<usize>,
        #[command(flatten)]
        scale: Scale,
        #[arg(long, default_value = "race_out")]
        out_dir: PathBuf,
        #[command(flatten)]
        report: ReportOpts,
    },
    /// Run a method against the resisting oracle on k = 4T + 2.
    Resist {
        #[arg(long, default_value = "denseprobe")]
        method: MethodKind,
        #[arg(long = "t", default_value_t = 10)]
        iterations: usize,
        #[command(flatten)]
        scale: Scale,
        #[arg(long, default_value = "resist_out")]
        out_dir: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
        #[command(flatten)]
        report: ReportOpts,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Generate {
            k,
            scale,
            variant,
            format,
            out,
        } => {
            generate(k, &scale, variant, format, out)?;
            Ok(true)
        }
        Command::Verify {
            max_k,
            out,
            no_timestamp,
        } => verify(max_k, out, no_timestamp),
        Command::Race {
            method,
            iterations,
            scale,
            out_dir,
            report,
        } => race(method, &iterations, &scale, &out_dir, &report),
        Command::Resist {
            method,
            iterations,
            scale,
            out_dir,
            format,
            report,
        } => resist(method, iterations, &scale, &out_dir, format, &report),
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn print_verdicts(verdicts: &[Verdict]) {
    for v in verdicts {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        eprintln!(
            "{tag} {:<36} margin {:+.3e}  [{}] {}",
            v.name, v.margin, v.anchor, v.detail
        );
    }
}

fn generate(
    k: usize,
    scale: &Scale,
    variant: Variant,
    format: ExportFormat,
    out: Option<PathBuf>,
) -> Result<()> {
    let (inst, meta) = bench::cmd_generate(k, scale.sigma, scale.zeta, variant)?;
    let path = out.unwrap_or_else(|| {
        PathBuf::from(format!("hardlogit_k{k}_{variant}.{}", format.extension()))
    });
    wcgen::export(&inst, &meta, format, &path)?;
    if format != ExportFormat::Json {
        wcgen::export(&inst, &meta, ExportFormat::Json, &sidecar_path(&path))?;
    }
    println!("{}", path.display());
    Ok(())
}

fn verify(max_k: usize, out: Option<PathBuf>, no_timestamp: bool) -> Result<bool> {
    let mut report = bench::cmd_verify(max_k)?;
    if !no_timestamp {
        report.generated_unix = Some(bench::unix_now());
    }
    print_verdicts(&report.checks);
    let json = bench::to_canonical_json(&report)?;
    match out {
        Some(path) => write_text(&path, &json)?,
        None => print!("{json}"),
    }
    Ok(report.passed())
}

fn stamp(report: &mut ExperimentReport, opts: &ReportOpts) {
    if !opts.no_timestamp {
        report.generated_unix = Some(bench::unix_now());
    }
}

fn race(
    method: MethodKind,
    iterations: &[usize],
    scale: &Scale,
    out_dir: &Path,
    opts: &ReportOpts,
) -> Result<bool> {
    if iterations.is_empty() {
        return Err(Error::InvalidParameter("no iteration counts given".into()));
    }
    let cells = bench::cmd_race(method, iterations, scale.sigma, scale.zeta)?;
    fs::create_dir_all(out_dir)?;
    let mut reports = Vec::with_capacity(cells.len());
    for mut cell in cells {
        let t = cell.report.config.iterations;
        let mut out = BufWriter::new(File::create(
            out_dir.join(format!("trace_{method}_T{t}.csv")),
        )?);
        cell.trace.write_csv(&mut out, cell.f_star, &cell.x_star)?;
        stamp(&mut cell.report, opts);
        eprintln!("{method} T={t} k={}", cell.report.config.k);
        print_verdicts(&cell.report.verdicts);
        reports.push(cell.report);
    }
    let passed = reports.iter().all(ExperimentReport::passed);
    let json = bench::to_canonical_json(&reports)?;
    write_text(&out_dir.join(format!("race_{method}.json")), &json)?;
    print!("{json}");
    Ok(passed || !opts.strict)
}

fn resist(
    method: MethodKind,
    iterations: usize,
    scale: &Scale,
    out_dir: &Path,
    format: ExportFormat,
    opts: &ReportOpts,
) -> Result<bool> {
    if format == ExportFormat::Json {
        return Err(Error::InvalidParameter(
            "dataset format must be csv or libsvm".into(),
        ));
    }
    let mut outcome = bench::cmd_resist(method, iterations, scale.sigma, scale.zeta)?;
    fs::create_dir_all(out_dir)?;
    let stem = format!("resist_{method}_T{iterations}");
    let (_, meta) = bench::cmd_generate(
        outcome.report.config.k,
        scale.sigma,
        scale.zeta,
        Variant::FourBlock,
    )?;
    let data_path = out_dir.join(format!("{stem}.{}", format.extension()));
    wcgen::export(&outcome.run.instance, &meta, format, &data_path)?;
    wcgen::export(
        &outcome.run.instance,
        &meta,
        ExportFormat::Json,
        &out_dir.join(format!("{stem}_meta.json")),
    )?;
    let mut u_out = BufWriter::new(File::create(out_dir.join(format!("{stem}_rotation.csv")))?);
    wcgen::write_matrix_csv(outcome.run.instance.rotation(), &mut u_out)?;
    let mut t_out = BufWriter::new(File::create(out_dir.join(format!("{stem}_trace.csv")))?);
    outcome
        .run
        .trace
        .write_csv(&mut t_out, outcome.f_star, &outcome.z_star)?;

    stamp(&mut outcome.report, opts);
    print_verdicts(&outcome.report.verdicts);
    let json = bench::to_canonical_json(&outcome.report)?;
    write_text(&out_dir.join(format!("{stem}_report.json")), &json)?;
    print!("{json}");
    Ok(outcome.report.passed() || !opts.strict)
}
