use clap::{Args, Parser, Subcommand};
use maxproj::harness::{
    self, cmd_bahadur, cmd_critvals, cmd_limit, cmd_power, cmd_test, emit, ingest, CriticalValueTable, OutputFormat,
    RowFilter, RunConfig, SampleSize,
};
use maxproj::limit_sim::LimitMethod;
use maxproj::{rng, AlternativeSpec, Error, Sampler};
use std::path::PathBuf;
use std::process::ExitCode;

/// Maximal-projection tests of uniformity on the hypersphere.
#[derive(Parser)]
#[command(name = "maxproj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Null critical values of T_{n,β} (and competitors) by simulation.
    Critvals {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: Simulation,
        #[command(flatten)]
        limit: LimitArgs,
    },
    /// Empirical power under one or more alternatives.
    Power {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: Simulation,
        /// Alternative, e.g. `vmf:kappa=1`, `bing1:kappa=1`, `lp:m=3,kappa=1`; repeatable.
        #[arg(long = "alt", required = true)]
        alts: Vec<String>,
        /// Critical values written by `critvals`; simulated on the fly when absent.
        #[arg(long)]
        critvals: Option<PathBuf>,
        #[arg(long, default_value_t = harness::DEFAULT_POWER_REPS)]
        power_reps: usize,
    },
    /// Test one dataset; p-values from simulated null replications.
    Test {
        /// CSV file with `lat,lon` or `x1,...,xd` columns.
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: Simulation,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Quantiles of the simulated limit law of T_{n,β}.
    Limit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "kernel", value_parser = parse_method)]
        method: LimitMethod,
        /// Cover size (defaults: kernel 1000 for d ≤ 3 else 5000, harmonic 2500).
        #[arg(long)]
        cover_m: Option<usize>,
        /// Replications (defaults: kernel 100000 for d ≤ 3 else 10000, harmonic 20000).
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Local Bahadur efficiencies against the likelihood-ratio test.
    Bahadur {
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Parse a data file and report how rows were handled.
    IngestCheck {
        data: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Draw a sample from an alternative and write it as `x1,...,xd` CSV.
    Sample {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long = "alt", default_value = "uniform")]
        alt: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: OutputFormat,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    d: usize,
    /// Comma-separated exponents.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    beta: Vec<usize>,
    #[arg(long, default_value_t = harness::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct Simulation {
    /// Comma-separated sample sizes; `inf` selects the limit law.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    n: Vec<String>,
    /// Cover size for T_{n,β} (default 5000 for d ≤ 3, else 20000).
    #[arg(long)]
    cover_m: Option<usize>,
    /// Null replications.
    #[arg(long, default_value_t = harness::DEFAULT_NULL_REPS)]
    reps: usize,
    /// Also run the competing tests defined for this dimension.
    #[arg(long)]
    competitors: bool,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long, default_value = "kernel", value_parser = parse_method)]
    limit_method: LimitMethod,
    #[arg(long)]
    limit_m: Option<usize>,
    #[arg(long)]
    limit_reps: Option<usize>,
}

#[derive(Args)]
struct FilterArgs {
    /// Keep rows whose filter column is at least this value.
    #[arg(long)]
    min_diameter: Option<f64>,
    #[arg(long, default_value = "diameter_km")]
    filter_column: String,
}

impl FilterArgs {
    fn filter(&self) -> Option<RowFilter> {
        self.min_diameter.map(|min| RowFilter {
            column: self.filter_column.clone(),
            min,
        })
    }
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<LimitMethod, String> {
    match s {
        "kernel" => Ok(LimitMethod::Kernel),
        "harmonic" => Ok(LimitMethod::Harmonic),
        _ => Err(format!("method must be kernel or harmonic, got '{s}'")),
    }
}

fn config(common: &Common, sim: Option<&Simulation>) -> maxproj::Result<RunConfig> {
    let mut c = RunConfig::new(common.d);
    c.betas = common.beta.clone();
    c.alpha = common.alpha;
    c.seed = common.seed;
    c.workers = common.workers;
    if let Some(s) = sim {
        c.n =
            s.n.iter()
                .map(|x| x.parse::<SampleSize>())
                .collect::<maxproj::Result<_>>()?;
        c.cover_m = s.cover_m;
        c.reps = s.reps;
        c.competitors = s.competitors;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> maxproj::Result<()> {
    match cli.command {
        Command::Critvals { common, sim, limit } => {
            let mut c = config(&common, Some(&sim))?;
            c.limit_method = limit.limit_method;
            c.limit_m = limit.limit_m;
            c.limit_reps = limit.limit_reps;
            let t = cmd_critvals(&c)?;
            emit(&t.rows, common.out.format, common.out.out.as_ref())
        }
        Command::Power {
            common,
            sim,
            alts,
            critvals,
            power_reps,
        } => {
            let mut c = config(&common, Some(&sim))?;
            c.power_reps = power_reps;
            c.validate()?;
            let alternatives = alts
                .iter()
                .map(|a| Ok((a.clone(), AlternativeSpec::parse(a, c.d)?)))
                .collect::<maxproj::Result<Vec<_>>>()?;
            let loaded = critvals.map(|p| CriticalValueTable::read_csv(&p)).transpose()?;
            let t = cmd_power(&c, &alternatives, loaded.as_ref())?;
            emit(&t.rows, common.out.format, common.out.out.as_ref())
        }
        Command::Test {
            data,
            common,
            sim,
            filter,
        } => {
            let (sample, report) = ingest(&data, filter.filter().as_ref())?;
            eprintln!(
                "read {} rows: kept {}, repaired {}, skipped {}, filtered {}",
                report.rows_read, report.kept, report.repaired, report.skipped, report.filtered
            );
            let c = config(&common, Some(&sim))?;
            let rows = cmd_test(&sample, &c)?;
            emit(&rows, common.out.format, common.out.out.as_ref())
        }
        Command::Limit {
            common,
            method,
            cover_m,
            reps,
        } => {
            let mut c = config(&common, None)?;
            c.limit_method = method;
            c.limit_m = cover_m;
            c.limit_reps = reps;
            c.validate()?;
            let rows = cmd_limit(&c)?;
            emit(&rows, common.out.format, common.out.out.as_ref())
        }
        Command::Bahadur { out } => emit(&cmd_bahadur()?, out.format, out.out.as_ref()),
        Command::IngestCheck { data, filter, out } => {
            let (sample, report) = ingest(&data, filter.filter().as_ref())?;
            eprintln!("dimension {}, {} directions", sample.d(), sample.n());
            emit(&[report], out.format, out.out.as_ref())
        }
        Command::Sample { d, n, alt, seed, out } => {
            let spec = AlternativeSpec::parse(&alt, d)?;
            let mut r = rng::seeded(seed);
            let s = Sampler::new(&spec)?.sample(n, &mut r)?;
            let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
            let mut text = header.join(",") + "\n";
            for row in s.rows() {
                let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                text += &line.join(",");
                text.push('\n');
            }
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Domain(_) | Error::Unsupported(_) => 1,
        Error::Data { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Numerical { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
