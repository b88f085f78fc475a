//! The `spacing` command line.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use spacing_core::estimation::{
    confidence_interval, ht_total, var_ht, var_syg, PopulationData,
};
use spacing_core::inclusion::{
    matrix_a_rowsums, pi_first_equilibrium, pi_first_renewal, pi_joint_fixed,
    pi_joint_fixed_generic, InclusionProbabilities, JointProbMatrix, SpacingSumTable,
};
use spacing_core::oracle::{enumerate, frequency_check};
use spacing_core::simlab::{replicate_rng, Study, StudyReport};
use spacing_core::{designs::design_pmf, Design, DesignKind};

use crate::format::{csv_writer, num, read_numbers, read_units};
use crate::parallel::run_parallel;
use crate::spec::{DesignSpec, DistSpec, StudySpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] spacing_core::Error),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Input(_) => "input",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Failed(_) => "verification_failed",
        }
    }

    /// 2 for failed consistency checks, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(spacing_core::Error::Consistency(_)) | CliError::Failed(_) => 2,
            _ => 1,
        }
    }

    /// One JSON object on one line.
    pub fn diagnostic(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "spacing", version, about = "Sampling designs driven by spacings between selected units")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Total,
    Mean,
}

#[derive(Debug, clap::Args)]
pub struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw samples from a design.
    Sample {
        /// Design as inline JSON or a path to a JSON file.
        #[arg(long)]
        design: String,
        #[arg(long)]
        seed: u64,
        /// Number of samples to draw.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Inclusion probabilities: joint curve by gap, or the first-order vector.
    Inclusion {
        #[arg(long)]
        design: String,
        /// Reference unit of the joint curve.
        #[arg(long, default_value_t = 1)]
        unit: usize,
        /// Emit first-order probabilities instead of the joint curve.
        #[arg(long)]
        first_order: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Probability mass function of a distribution, or of a sample under a
    /// circular design.
    Pmf {
        /// Distribution as inline JSON or a path.
        #[arg(long, conflicts_with = "design", required_unless_present = "design")]
        dist: Option<String>,
        /// Largest value listed; defaults to where the tail falls below 1e-12.
        #[arg(long, requires = "dist")]
        max: Option<u64>,
        /// Circular design as inline JSON or a path.
        #[arg(long, requires = "units")]
        design: Option<String>,
        /// Comma-separated sorted unit indexes.
        #[arg(long, value_delimiter = ',')]
        units: Vec<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Estimate a total or mean from a sample; writes JSON.
    Estimate {
        #[arg(long)]
        design: String,
        /// CSV file of sampled unit indexes.
        #[arg(long, conflicts_with = "units", required_unless_present = "units")]
        sample: Option<PathBuf>,
        /// Comma-separated sampled unit indexes.
        #[arg(long, value_delimiter = ',')]
        units: Vec<usize>,
        /// CSV file with the values of all N units.
        #[arg(long)]
        population: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum, default_value_t = Target::Total)]
        target: Target,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a small design against exhaustive enumeration; writes JSON.
    Verify {
        #[arg(long)]
        design: String,
        /// Also compare frequencies over this many draws.
        #[arg(long, requires = "seed")]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a replicated simulation study.
    Simulate {
        /// Study configuration as inline JSON or a path.
        #[arg(long)]
        config: String,
        /// Seed; required unless the configuration has one.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of replicates.
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
}

fn load_text(arg: &str) -> CliResult<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Input(format!("cannot read {arg}: {e}")))
    }
}

fn read_file(path: &std::path::Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_design(arg: &str) -> CliResult<Design> {
    let spec: DesignSpec = serde_json::from_str(&load_text(arg)?)?;
    Ok(spec.to_design()?)
}

fn sink(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> CliResult<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Parses arguments, runs, prints a diagnostic on failure and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sample {
            design,
            seed,
            count,
            out,
        } => sample(&load_design(&design)?, seed, count, &out),
        Command::Inclusion {
            design,
            unit,
            first_order,
            out,
        } => inclusion(&load_design(&design)?, unit, first_order, &out),
        Command::Pmf {
            dist,
            max,
            design,
            units,
            out,
        } => match (dist, design) {
            (Some(d), _) => {
                let spec: DistSpec = serde_json::from_str(&load_text(&d)?)?;
                dist_pmf(&spec, max, &out)
            }
            (None, Some(d)) => sample_pmf(&load_design(&d)?, &units, &out),
            (None, None) => Err(CliError::Input("need --dist or --design".into())),
        },
        Command::Estimate {
            design,
            sample,
            units,
            population,
            level,
            target,
            output,
        } => {
            let units = match sample {
                Some(p) => read_units(&read_file(&p)?).map_err(CliError::Input)?,
                None => units,
            };
            let y = read_numbers(&read_file(&population)?).map_err(CliError::Input)?;
            estimate(&load_design(&design)?, &units, y, level, target, &output)
        }
        Command::Verify {
            design,
            reps,
            seed,
            output,
        } => verify(&load_design(&design)?, reps, seed, &output),
        Command::Simulate {
            config,
            seed,
            reps,
            threads,
            out,
        } => {
            let mut spec: StudySpec = serde_json::from_str(&load_text(&config)?)?;
            if let Some(r) = reps {
                spec.reps = r;
            }
            let seed = seed.or(spec.seed).ok_or_else(|| {
                CliError::Input("a seed is required: pass --seed or set \"seed\" in the config".into())
            })?;
            simulate(&spec, seed, threads, &out)
        }
    }
}

fn sample(design: &Design, seed: u64, count: usize, out: &Output) -> CliResult<()> {
    let draws: Vec<Vec<usize>> = (0..count)
        .map(|i| {
            let mut d = design.draw(&mut replicate_rng(seed, 0, i));
            d.seed = Some(seed);
            d.units
        })
        .collect();
    match out.format {
        Format::Json => write_json(
            &out.output,
            &json!({ "design": DesignSpec::from_design(design), "seed": seed, "draws": draws }),
        ),
        Format::Csv => {
            let mut w = sink(&out.output)?;
            for d in &draws {
                let line: Vec<String> = d.iter().map(usize::to_string).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn inclusion(design: &Design, unit: usize, first_order: bool, out: &Output) -> CliResult<()> {
    let big_n = design.population();
    if unit == 0 || unit > big_n {
        return Err(CliError::Input(format!("unit {unit} lies outside 1..={big_n}")));
    }
    let m = JointProbMatrix::for_design(design)?;
    // partner of `unit` at distance `gap`, wrapping for circular designs
    let partners: Vec<(usize, usize)> = if m.is_circular() {
        (1..big_n).map(|g| (g, (unit - 1 + g) % big_n + 1)).collect()
    } else {
        (1..=big_n - unit).map(|g| (g, unit + g)).collect()
    };
    match (out.format, first_order) {
        (Format::Csv, true) => {
            let mut w = csv_writer(sink(&out.output)?);
            w.write_record(["unit", "pi"])?;
            for k in 1..=big_n {
                w.write_record([k.to_string(), num(m.pi(k))])?;
            }
            w.flush()?;
            Ok(())
        }
        (Format::Csv, false) => {
            let mut w = csv_writer(sink(&out.output)?);
            w.write_record(["gap", "pi_joint", "delta"])?;
            for (g, l) in partners {
                w.write_record([g.to_string(), num(m.pikl(unit, l)), num(m.delta(unit, l))])?;
            }
            w.flush()?;
            Ok(())
        }
        (Format::Json, _) => {
            let curve: Vec<_> = partners
                .iter()
                .map(|&(g, l)| json!({ "gap": g, "pi_joint": m.pikl(unit, l), "delta": m.delta(unit, l) }))
                .collect();
            write_json(
                &out.output,
                &json!({ "unit": unit, "pi": m.pi_vec(), "curve": curve }),
            )
        }
    }
}

fn dist_pmf(spec: &DistSpec, max: Option<u64>, out: &Output) -> CliResult<()> {
    let d = spec.to_dist()?;
    let top = max.unwrap_or_else(|| d.truncation_point(1e-12));
    let rows: Vec<(u64, f64, f64)> = (0..=top)
        .map(|x| Ok((x, d.pmf(x)?, d.cdf(x))))
        .collect::<spacing_core::Result<_>>()?;
    match out.format {
        Format::Csv => {
            let mut w = csv_writer(sink(&out.output)?);
            w.write_record(["x", "pmf", "cdf"])?;
            for (x, p, c) in rows {
                w.write_record([x.to_string(), num(p), num(c)])?;
            }
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let m = d.mean_var()?;
            let list: Vec<_> = rows
                .iter()
                .map(|(x, p, c)| json!({ "x": x, "pmf": p, "cdf": c }))
                .collect();
            write_json(
                &out.output,
                &json!({ "dist": spec, "mean": m.mean, "variance": m.variance, "values": list }),
            )
        }
    }
}

fn sample_pmf(design: &Design, units: &[usize], out: &Output) -> CliResult<()> {
    let p = design_pmf(design, units)?;
    match out.format {
        Format::Csv => {
            let mut w = csv_writer(sink(&out.output)?);
            w.write_record(["probability"])?;
            w.write_record([num(p)])?;
            w.flush()?;
            Ok(())
        }
        Format::Json => write_json(&out.output, &json!({ "units": units, "probability": p })),
    }
}

fn estimate(
    design: &Design,
    units: &[usize],
    y: Vec<f64>,
    level: f64,
    target: Target,
    output: &Option<PathBuf>,
) -> CliResult<()> {
    let pop = PopulationData::new(y)?;
    if pop.len() != design.population() {
        return Err(CliError::Input(format!(
            "population file has {} values, the design has N = {}",
            pop.len(),
            design.population()
        )));
    }
    let mut units = units.to_vec();
    units.sort_unstable();
    if units.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Input("sample lists a unit twice".into()));
    }
    let m = JointProbMatrix::for_design(design)?;
    let scale = match target {
        Target::Total => 1.0,
        Target::Mean => 1.0 / pop.len() as f64,
    };
    let point = ht_total(&units, &pop, &m)? * scale;
    let vht = var_ht(&units, &pop, &m)? * scale * scale;
    let vsyg = if design.is_fixed_size() {
        Some(var_syg(&units, &pop, &m)? * scale * scale)
    } else {
        None
    };
    let v = vsyg.unwrap_or(vht);
    let ci = match confidence_interval(point, v, level) {
        Ok((lo, hi)) => Some([lo, hi]),
        Err(spacing_core::Error::NegativeVariance(v)) => {
            log::warn!("negative variance estimate {v}; no interval");
            None
        }
        Err(e) => return Err(e.into()),
    };
    write_json(
        output,
        &json!({
            "target": match target { Target::Total => "total", Target::Mean => "mean" },
            "point": point,
            "variance_syg": vsyg,
            "variance_ht": vht,
            "level": level,
            "ci": ci,
        }),
    )
}

#[derive(Debug, Serialize)]
struct CheckResult {
    name: &'static str,
    passed: bool,
    max_deviation: f64,
    tolerance: f64,
}

impl CheckResult {
    fn new(name: &'static str, max_deviation: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: max_deviation <= tolerance,
            max_deviation,
            tolerance,
        }
    }
}

fn verify(
    design: &Design,
    reps: Option<usize>,
    seed: Option<u64>,
    output: &Option<PathBuf>,
) -> CliResult<()> {
    let big_n = design.population();
    let e = enumerate(design)?;
    let mut checks = vec![CheckResult::new("total_mass", (e.total_mass - 1.0).abs(), 1e-10)];

    let formula_pi: Vec<f64> = match design.kind() {
        DesignKind::Circular { .. } => vec![design.rate(); big_n],
        DesignKind::Renewal { jump } => pi_first_renewal(jump, big_n)?,
        DesignKind::EquilibriumRenewal { jump } => pi_first_equilibrium(jump, big_n)?,
    };
    let dev = (1..=big_n)
        .map(|k| (e.pi(k) - formula_pi[k - 1]).abs())
        .fold(0.0, f64::max);
    checks.push(CheckResult::new("first_order", dev, 1e-10));

    let m = JointProbMatrix::for_design(design)?;
    let mut dev: f64 = 0.0;
    for k in 1..=big_n {
        for l in k + 1..=big_n {
            dev = dev.max((e.pikl(k, l) - m.pikl(k, l)).abs());
        }
    }
    checks.push(CheckResult::new("joint", dev, 1e-9));

    if let DesignKind::Circular { spacings } = design.kind() {
        let mut dev: f64 = 0.0;
        for gap in 1..big_n {
            let a = pi_joint_fixed(spacings, gap)?;
            let b = pi_joint_fixed_generic(spacings, gap)?;
            dev = dev.max((a - b).abs());
        }
        checks.push(CheckResult::new("joint_closed_form", dev, 1e-9));
        let n = spacings.dim() as f64;
        let dev = match matrix_a_rowsums(&SpacingSumTable::new(spacings)?) {
            Ok(sums) => sums.iter().map(|s| (s - n).abs()).fold(0.0, f64::max),
            Err(spacing_core::Error::Consistency(msg)) => {
                log::warn!("{msg}");
                f64::INFINITY
            }
            Err(e) => return Err(e.into()),
        };
        checks.push(CheckResult::new("row_sums", dev, 1e-9));
    }

    if let (Some(reps), Some(seed)) = (reps, seed) {
        let rep = frequency_check(design, reps, &mut replicate_rng(seed, 0, 0))?;
        checks.push(CheckResult::new("inclusion_frequency_z", rep.max_abs_z_inclusion, 5.0));
        if let Some(z) = rep.max_abs_z_subset {
            checks.push(CheckResult::new("subset_frequency_z", z, 5.0));
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    write_json(
        output,
        &json!({
            "design": DesignSpec::from_design(design),
            "passed": passed,
            "total_mass": e.total_mass,
            "checks": checks,
        }),
    )?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}

fn simulate(spec: &StudySpec, seed: u64, threads: Option<usize>, out: &Output) -> CliResult<()> {
    let cfg = spec.to_config(seed)?;
    let study = Study::new(cfg)?;
    let report = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Input(e.to_string()))?
            .install(|| run_parallel(&study)),
        None => run_parallel(&study),
    };
    write_report(&report, out)
}

pub fn write_report(report: &StudyReport, out: &Output) -> CliResult<()> {
    match out.format {
        Format::Csv => {
            let mut w = csv_writer(sink(&out.output)?);
            w.write_record(["design", "BR", "SE", "REVAR", "CV", "coverage", "reps", "excluded"])?;
            for d in &report.designs {
                w.write_record([
                    d.name.clone(),
                    num(d.br),
                    num(d.se),
                    num(d.revar),
                    num(d.cv),
                    num(d.coverage),
                    d.reps.to_string(),
                    d.excluded.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let designs: Vec<_> = report
                .designs
                .iter()
                .map(|d| {
                    json!({
                        "design": d.name,
                        "BR": d.br,
                        "SE": d.se,
                        "REVAR": d.revar,
                        "CV": d.cv,
                        "coverage": d.coverage,
                        "reps": d.reps,
                        "excluded": d.excluded,
                        "null_joint_gaps": d.null_joint_gaps,
                    })
                })
                .collect();
            write_json(
                &out.output,
                &json!({
                    "seed": report.seed,
                    "reps": report.reps,
                    "population_mean": report.population_mean,
                    "designs": designs,
                }),
            )
        }
    }
}
