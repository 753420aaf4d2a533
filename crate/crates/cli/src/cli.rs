//! Argument parsing and the subcommands.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use osc_factor::experiments::{fidelity_curve, run_protocol, sweep, Preset, SweepAxis};
use osc_factor::oracle::suite::{run_suite, OracleOptions, OracleReport};

use crate::config::{Axis, CouplingEntry, RunConfig, SeriesSection, SweepSection, TauModeName, WindowModeName, TOOL_VERSION};
use crate::error::{CliError, Result};
use crate::output::{curve_csv, sweep_csv, write_atomic, Report};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "OSC_FACTOR_THREADS";

/// Exit status when the run completed but no factor was found.
pub const EXIT_NO_FACTORS: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "osc-factor", version, about = "Factoring with three coupled harmonic oscillators")]
pub struct Cli {
    /// Worker threads; overrides the environment and the config file.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the protocol once and write report.json and curve.csv.
    Factor(RunArgs),
    /// Fidelity against time, one series per curve value.
    Curve {
        #[command(flatten)]
        run: RunArgs,
        /// Time grid, e.g. 0:1:1001.
        #[arg(long, value_name = "START:STOP:POINTS")]
        tau_grid: Option<String>,
    },
    /// Sweep one parameter, optionally for several values of a second.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        axis: Option<String>,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, requires = "series")]
        series_axis: Option<String>,
        #[arg(long, requires = "series_axis")]
        series: Option<String>,
        /// optimal, reference, fixed:TAU or threshold:LEVEL.
        #[arg(long)]
        tau_mode: Option<String>,
    },
    /// Compare the analytic engines against the Fock-space reference.
    OracleCheck {
        /// Small smoke subset.
        #[arg(long)]
        quick: bool,
        /// Force the Fock dimension.
        #[arg(long)]
        dim: Option<usize>,
        /// Print every row, not only failures.
        #[arg(long)]
        verbose: bool,
    },
    /// Print the resolved configuration as TOML.
    Config(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// fig2, fig3, fig4 or fig5 (default fig2).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "N", value_name = "N")]
    pub n: Option<u64>,
    /// Explicit trial window.
    #[arg(long, value_name = "MIN:MAX")]
    pub window: Option<String>,
    /// full-support or paper-window.
    #[arg(long)]
    pub window_mode: Option<String>,
    /// Modulus of the coherent amplitude.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phase: Option<f64>,
    /// Strength of the single coupling.
    #[arg(long)]
    pub g: Option<f64>,
    /// Order of the single coupling.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub gamma3: Option<f64>,
    /// Measurement time instead of the searched optimum.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn split<'a, const K: usize>(s: &'a str, what: &str) -> Result<[&'a str; K]> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    parts.try_into().map_err(|_| CliError::Usage(format!("malformed {what} `{s}`")))
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| CliError::Usage(format!("malformed {what} `{s}`")))
}

/// `start:stop:step` (inclusive, empty when `stop < start`) or `a,b,c`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains(':') {
        let [a, b, h] = split::<3>(s, "grid")?;
        let (a, b, h): (f64, f64, f64) = (number(a, "grid")?, number(b, "grid")?, number(h, "grid")?);
        if !(h > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(CliError::Usage(format!("grid step must be positive (got `{s}`)")));
        }
        if b < a {
            return Ok(Vec::new());
        }
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| a + h * i as f64).collect());
    }
    s.split(',').map(|v| number(v, "grid")).collect()
}

fn parse_axis_values(axis: &str, values: &str) -> Result<SeriesSection> {
    Ok(SeriesSection { axis: Axis::parse(axis)?, values: parse_grid(values)? })
}

fn parse_tau_mode(s: &str) -> Result<(TauModeName, Option<f64>)> {
    let (name, value) = match s.split_once(':') {
        Some((n, v)) => (n, Some(number::<f64>(v, "tau mode")?)),
        None => (s, None),
    };
    let mode = match name {
        "optimal" => TauModeName::Optimal,
        "reference" => TauModeName::Reference,
        "fixed" => TauModeName::Fixed,
        "threshold" => TauModeName::Threshold,
        _ => return Err(CliError::Usage(format!("unknown tau mode `{s}`"))),
    };
    Ok((mode, value))
}

/// Loads the config file or preset and applies the command-line overrides.
pub fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut rc = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let rc = RunConfig::load(path)?;
            if rc.tool.version != TOOL_VERSION {
                eprintln!("warning: {} was written by version {} (this is {TOOL_VERSION})", path.display(), rc.tool.version);
            }
            rc
        }
        (None, name) => {
            let name = name.as_deref().unwrap_or("fig2");
            let p = Preset::from_name(name)
                .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}` (expected fig2, fig3, fig4 or fig5)")))?;
            RunConfig::preset(p)
        }
    };
    let p = &mut rc.protocol;
    if let Some(n) = args.n {
        p.n = n;
    }
    if let Some(mode) = &args.window_mode {
        p.window_mode = match mode.as_str() {
            "full-support" => WindowModeName::FullSupport,
            "paper-window" => WindowModeName::PaperWindow,
            "explicit" => WindowModeName::Explicit,
            _ => return Err(CliError::Usage(format!("unknown window mode `{mode}`"))),
        };
    }
    if let Some(w) = &args.window {
        let [a, b] = split::<2>(w, "window")?;
        p.window = Some([number(a, "window")?, number(b, "window")?]);
        p.window_mode = WindowModeName::Explicit;
    }
    if let Some(a) = args.alpha {
        p.alpha_modulus = a;
    }
    if let Some(phi) = args.phase {
        p.alpha_phase = phi;
    }
    if let Some(t) = args.tau {
        p.tau = Some(t);
    }
    if args.g.is_some() || args.k.is_some() {
        let lead = rc.system.couplings.first().copied().unwrap_or(CouplingEntry { order: 1, strength: 0.0 });
        rc.system.couplings =
            vec![CouplingEntry { order: args.k.unwrap_or(lead.order), strength: args.g.unwrap_or(lead.strength) }];
    }
    if let Some(g3) = args.gamma3 {
        rc.bath.gamma[2] = g3;
    }
    if let Some(dir) = &args.out {
        rc.output.dir = dir.clone();
    }
    Ok(rc)
}

/// Header comments shared by every CSV: the tool version and the
/// configuration, minus the fields that do not affect the numbers.
fn metadata(command: &str, rc: &RunConfig) -> Vec<String> {
    let mut shown = rc.clone();
    shown.output = Default::default();
    shown.run = Default::default();
    vec![format!("osc-factor {TOOL_VERSION} {command}"), shown.to_toml()]
}

fn factor(rc: &RunConfig) -> Result<u8> {
    let config = rc.to_protocol()?;
    let run = run_protocol(&config)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let report_path = rc.output.dir.join(&rc.output.report);
    let curve_path = rc.output.dir.join(&rc.output.curve);
    write_atomic(&curve_path, curve_csv(&metadata("factor", rc), std::slice::from_ref(&run.curve)).as_bytes())?;
    write_atomic(&report_path, Report::new(&run).to_json().as_bytes())?;

    let r = &run.report;
    println!("N = {}  tau = {:.6} ({})  A = {:.6e}", r.n, r.tau, run.tau_source.label(), r.born_probability);
    for p in &r.pairs {
        println!("  factor pair ({}, {})  weight {:.6}", p.r, p.s, p.weight);
    }
    for p in &r.contaminants {
        println!("  unverified  ({}, {})  weight {:.6}", p.r, p.s, p.weight);
    }
    println!("{}", r.outcome.label());
    println!("wrote {} and {}", report_path.display(), curve_path.display());
    Ok(if r.success { 0 } else { EXIT_NO_FACTORS })
}

fn curve(rc: &mut RunConfig, tau_grid: Option<&str>) -> Result<u8> {
    if let Some(g) = tau_grid {
        let [a, b, n] = split::<3>(g, "tau grid")?;
        rc.curve.start = number(a, "tau grid")?;
        rc.curve.stop = number(b, "tau grid")?;
        rc.curve.points = number(n, "tau grid")?;
    }
    let base = rc.to_protocol()?;
    let configs = match &rc.curve.series {
        Some(s) => {
            let axis = SweepAxis::from(s.axis);
            s.values.iter().map(|&v| axis.apply(&base, v)).collect::<osc_factor::Result<Vec<_>>>()?
        }
        None => vec![base.clone()],
    };
    let taus = base.curve.values();
    let series = configs.iter().map(|c| fidelity_curve(c, &taus)).collect::<osc_factor::Result<Vec<_>>>()?;
    let path = rc.output.dir.join(&rc.output.curve);
    write_atomic(&path, curve_csv(&metadata("curve", rc), &series).as_bytes())?;
    println!("wrote {} ({} series x {} points)", path.display(), series.len(), taus.len());
    Ok(0)
}

struct SweepOverrides<'a> {
    axis: Option<&'a str>,
    grid: Option<&'a str>,
    series: Option<(&'a str, &'a str)>,
    tau_mode: Option<&'a str>,
}

fn run_sweep(rc: &mut RunConfig, o: SweepOverrides<'_>) -> Result<u8> {
    if let Some(axis) = o.axis {
        let axis = Axis::parse(axis)?;
        let s = rc.sweep.get_or_insert_with(|| SweepSection {
            axis,
            grid: Vec::new(),
            series: None,
            tau_mode: TauModeName::Optimal,
            tau_value: None,
        });
        if s.axis != axis {
            s.axis = axis;
            s.series = None;
        }
    }
    let s = rc.sweep.as_mut().ok_or_else(|| CliError::Usage("no sweep defined: give --axis and --grid".into()))?;
    if let Some(g) = o.grid {
        s.grid = parse_grid(g)?;
    }
    if let Some((axis, values)) = o.series {
        s.series = Some(parse_axis_values(axis, values)?);
    }
    if let Some(m) = o.tau_mode {
        (s.tau_mode, s.tau_value) = parse_tau_mode(m)?;
    }
    let spec = rc.sweep_spec()?;
    let base = rc.to_protocol()?;
    let started = Instant::now();
    let table = sweep(&base, &spec)?;
    let failed = table.rows.iter().filter(|r| r.result.is_err()).count();
    let path = rc.output.dir.join(&rc.output.sweep);
    write_atomic(&path, sweep_csv(&metadata("sweep", rc), &table).as_bytes())?;
    println!(
        "wrote {} ({} rows, {failed} failed, {:.2} s)",
        path.display(),
        table.rows.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

/// Per-check summary followed by the failing (or all) rows.
pub fn oracle_table(report: &OracleReport, verbose: bool) -> String {
    let mut out = format!("{:<12} {:>6} {:>8} {:>14} {:>10}\n", "check", "rows", "failed", "max deviation", "tolerance");
    for check in report.checks() {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.check == check).collect();
        let failed = rows.iter().filter(|r| !r.passed()).count();
        let max = report.max_deviation(check).map_or("-".to_string(), |d| format!("{d:.3e}"));
        out += &format!("{check:<12} {:>6} {failed:>8} {max:>14} {:>10.1e}\n", rows.len(), rows[0].tolerance);
    }
    let listed: Vec<_> = report.rows.iter().filter(|r| verbose || !r.passed()).collect();
    if !listed.is_empty() {
        out.push('\n');
        for r in listed {
            out += &format!("{r}\n");
        }
    }
    out
}

fn oracle_check(quick: bool, dim: Option<usize>, verbose: bool) -> u8 {
    let started = Instant::now();
    let report = run_suite(OracleOptions { quick, dim_override: dim });
    print!("{}", oracle_table(&report, verbose));
    let passed = report.all_passed();
    println!(
        "{} ({} rows, {:.1} s)",
        if passed { "all oracle checks passed" } else { "oracle checks FAILED" },
        report.rows.len(),
        started.elapsed().as_secs_f64()
    );
    u8::from(!passed)
}

fn thread_count(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => number::<usize>(&v, THREADS_ENV).map(Some),
        _ => Ok(config),
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let config_threads = |args: &RunArgs| -> Result<Option<usize>> {
        Ok(match &args.config {
            Some(p) => RunConfig::load(p)?.run.threads,
            None => None,
        })
    };
    let args = match &cli.command {
        Command::Factor(a) | Command::Config(a) | Command::Curve { run: a, .. } | Command::Sweep { run: a, .. } => Some(a),
        Command::OracleCheck { .. } => None,
    };
    let threads = thread_count(cli.threads, args.map(config_threads).transpose()?.flatten())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;

    pool.install(|| match &cli.command {
        Command::Factor(a) => factor(&resolve(a)?),
        Command::Curve { run, tau_grid } => curve(&mut resolve(run)?, tau_grid.as_deref()),
        Command::Sweep { run, axis, grid, series_axis, series, tau_mode } => run_sweep(
            &mut resolve(run)?,
            SweepOverrides {
                axis: axis.as_deref(),
                grid: grid.as_deref(),
                series: series_axis.as_deref().zip(series.as_deref()),
                tau_mode: tau_mode.as_deref(),
            },
        ),
        Command::OracleCheck { quick, dim, verbose } => Ok(oracle_check(*quick, *dim, *verbose)),
        Command::Config(a) => {
            print!("{}", resolve(a)?.to_toml());
            Ok(0)
        }
    })
}

/// Runs a parsed command line; errors are printed and map to exit code 1.
pub fn run(cli: &Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("3:4:0.25").unwrap(), vec![3.0, 3.25, 3.5, 3.75, 4.0]);
        assert_eq!(parse_grid("1, 2,4").unwrap(), vec![1.0, 2.0, 4.0]);
        assert!(parse_grid("2:1:0.5").unwrap().is_empty());
        assert!(parse_grid("").unwrap().is_empty());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_grid("0.5:1.5:0.1").unwrap().len(), 11);
    }

    #[test]
    fn tau_modes() {
        assert_eq!(parse_tau_mode("threshold:0.9").unwrap(), (TauModeName::Threshold, Some(0.9)));
        assert_eq!(parse_tau_mode("reference").unwrap(), (TauModeName::Reference, None));
        assert!(parse_tau_mode("best").is_err());
    }

    #[test]
    fn overrides_apply() {
        let args = RunArgs {
            n: Some(21),
            window: Some("2:11".into()),
            g: Some(0.5),
            gamma3: Some(0.25),
            ..Default::default()
        };
        let rc = resolve(&args).unwrap();
        let c = rc.to_protocol().unwrap();
        assert_eq!(c.target.value(), 21);
        assert_eq!(c.leading_coupling(), (0.5, 1));
        assert_eq!(c.bath.gamma3(), 0.25);
        assert_eq!(c.window_mode.label(), "explicit");
        assert!(resolve(&RunArgs { preset: Some("fig9".into()), ..Default::default() }).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
