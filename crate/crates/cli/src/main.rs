mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cesaro_core::{certify, ibp_sweep, sweep_csv, CharReport, Grid, XReal};

use config::{Conf, Failure};

/// Numerical certificates for weighted iterated Hardy-type operators.
#[derive(Parser)]
#[command(name = "cesaro", version, about)]
struct Cli {
    /// TOML config file with flat dotted keys (grid.tMin = 1e-4, ...).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a single config key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Write output to this file (atomically) instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format; defaults to json for eval/certify and csv for ibp/sweep.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the discretized characterization terms and print a report.
    Eval,
    /// Evaluate, then bracket the result with an optimizer-driven lower bound.
    Certify,
    /// Run the integration-by-parts self-check suite over random instances.
    Ibp,
    /// Re-certify along one axis (p, q, gamma_over_n, tMax, or n).
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let conf = Conf::load(cli.config.as_deref(), &cli.set)?;
    match cli.cmd {
        Cmd::Eval => cmd_eval(cli, &conf),
        Cmd::Certify => cmd_certify(cli, &conf),
        Cmd::Ibp => cmd_ibp(cli, &conf),
        Cmd::Sweep => cmd_sweep(cli, &conf),
    }
}

/// Resolve --format against output.format in the config, then the default.
fn resolve_format(cli: &Cli, conf: &Conf, default: Format) -> Result<Format, Failure> {
    if let Some(f) = cli.format {
        return Ok(f);
    }
    match conf.output_format()?.as_deref() {
        None => Ok(default),
        Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        Some(other) => Err(Failure::invalid(format!(
            "config key output.format must be \"json\" or \"csv\", got {other:?}"
        ))),
    }
}

fn resolve_out(cli: &Cli, conf: &Conf) -> Result<Option<PathBuf>, Failure> {
    if let Some(path) = &cli.out {
        return Ok(Some(path.clone()));
    }
    Ok(conf.output_path()?.map(PathBuf::from))
}

/// Write a finished document: atomically to a file if one was requested,
/// otherwise to stdout.
fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            write_atomic(path, content)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Write via a temp file in the same directory and rename into place, so the
/// destination is never observed half-written.
fn write_atomic(path: &Path, content: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Failure::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Failure::runtime(format!("cannot write {}: {e}", path.display()))
    })
}

fn report_csv(report: &CharReport) -> String {
    let mut out = String::from("name,value,boundaryRead\n");
    for term in &report.terms {
        out.push_str(&format!(
            "{},{},{}\n",
            term.name, term.value, term.boundary_read
        ));
    }
    out.push_str(&format!("total,{},\n", report.total));
    out
}

fn cmd_eval(cli: &Cli, conf: &Conf) -> Result<u8, Failure> {
    let spec = cesaro_core::ProblemSpec::build(conf.spec_input()?)?;
    let report = spec.evaluate()?;
    let format = resolve_format(cli, conf, Format::Json)?;
    let content = match format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => report_csv(&report),
    };
    emit(resolve_out(cli, conf)?.as_deref(), &content)?;
    Ok(0)
}

fn cmd_certify(cli: &Cli, conf: &Conf) -> Result<u8, Failure> {
    let spec = cesaro_core::ProblemSpec::build(conf.spec_input()?)?;
    let band = conf.band()?;
    let oracle = conf.oracle_config()?;
    let cert = certify(&spec, &oracle, &band)?;
    let format = resolve_format(cli, conf, Format::Json)?;
    let content = match format {
        Format::Json => serde_json::to_string_pretty(&cert)? + "\n",
        Format::Csv => format!(
            "lower,total,ratioBand,pass\n{},{},{},{}\n",
            cert.lower, cert.rhs.total, cert.ratio_band, cert.pass
        ),
    };
    emit(resolve_out(cli, conf)?.as_deref(), &content)?;
    eprintln!(
        "theorem {} case {}: total = {}, lower bound = {}, ratio = {}",
        cert.rhs.theorem, cert.rhs.case, cert.rhs.total, cert.lower, cert.ratio_band
    );
    eprintln!(
        "band [{}, {}] => {}",
        cert.c_lower,
        cert.c_upper,
        if cert.pass { "PASS" } else { "FAIL" }
    );
    Ok(if cert.pass { 0 } else { 3 })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SweepOut {
    axis: String,
    value: f64,
    total: XReal,
    sum_of_terms: XReal,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation_delta: Option<f64>,
    lower: XReal,
    band: XReal,
    pass: bool,
}

fn cmd_sweep(cli: &Cli, conf: &Conf) -> Result<u8, Failure> {
    let axis = conf.require_str("sweep.axis")?;
    let values = conf
        .get_f64_array("sweep.values")?
        .ok_or_else(|| Failure::invalid("missing required config key sweep.values"))?;
    let base = conf.spec_input()?;
    let band = conf.band()?;
    let oracle = conf.oracle_config()?;

    let mut rows = Vec::with_capacity(values.len());
    for &value in &values {
        let mut input = base.clone();
        match axis.as_str() {
            "p" => input.p = value,
            "q" => input.q = value,
            "gamma_over_n" => input.gamma_over_n = Some(value),
            "tMax" => input.t_max = value,
            "n" => {
                if value < 8.0 || value.fract() != 0.0 {
                    return Err(Failure::invalid(format!(
                        "sweep over n needs integer values of at least 8, got {value}"
                    )));
                }
                input.n = value as usize;
            }
            other => {
                return Err(Failure::invalid(format!(
                    "sweep.axis must be one of p, q, gamma_over_n, tMax, n; got {other:?}"
                )))
            }
        }
        let spec = cesaro_core::ProblemSpec::build(input)?;
        let cert = certify(&spec, &oracle, &band)?;
        rows.push(SweepOut {
            axis: axis.clone(),
            value,
            total: cert.rhs.total,
            sum_of_terms: cert.rhs.sum_of_terms,
            truncation_delta: cert.rhs.truncation_delta,
            lower: cert.lower,
            band: cert.ratio_band,
            pass: cert.pass,
        });
    }

    let format = resolve_format(cli, conf, Format::Csv)?;
    let content = match format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => {
            let mut out =
                String::from("axis,value,total,sumOfTerms,truncationDelta,lower,band,pass\n");
            for row in &rows {
                let delta = row
                    .truncation_delta
                    .map(|d| d.to_string())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    row.axis,
                    row.value,
                    row.total,
                    row.sum_of_terms,
                    delta,
                    row.lower,
                    row.band,
                    row.pass
                ));
            }
            out
        }
    };
    emit(resolve_out(cli, conf)?.as_deref(), &content)?;
    Ok(0)
}

fn cmd_ibp(cli: &Cli, conf: &Conf) -> Result<u8, Failure> {
    let t_min = conf.require_f64("grid.tMin")?;
    let t_max = conf.require_f64("grid.tMax")?;
    let n = conf
        .get_usize("grid.n")?
        .ok_or_else(|| Failure::invalid("missing required config key grid.n"))?;
    if n < 8 {
        return Err(Failure::invalid(format!(
            "grid.n must be at least 8, got {n}"
        )));
    }
    let alphas = conf
        .get_f64_array("ibp.alphas")?
        .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0]);
    let instances = conf.get_usize("ibp.instances")?.unwrap_or(100);
    let seed = conf.get_u64("ibp.seed")?.unwrap_or(42);

    let grid = Grid::log_uniform(t_min, t_max, n)?;
    let rows = ibp_sweep(&alphas, instances, seed, &grid)?;
    let all_pass = rows.iter().all(|r| r.pass);

    let format = resolve_format(cli, conf, Format::Csv)?;
    let content = match format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => sweep_csv(&rows),
    };
    emit(resolve_out(cli, conf)?.as_deref(), &content)?;
    if !all_pass {
        let failed = rows.iter().filter(|r| !r.pass).count();
        eprintln!("{failed} of {} instances failed the parts identity", rows.len());
        return Ok(3);
    }
    Ok(0)
}
