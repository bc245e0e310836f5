//! Monte Carlo orchestration: null critical values, power, single-dataset
//! p-values, limit quantiles and Bahadur tables, plus data ingestion and
//! CSV/JSON output.
//!
//! Replication `r` of every simulation draws from `rng::stream(seed, tag, r)`,
//! so results do not depend on the worker count.

use crate::bahadur::{self, Family};
use crate::error::{Error, Result};
use crate::geometry::{latlon_to_unit, DirectionCover, SphericalSample, UnitVector};
use crate::limit_sim::{self, default_kernel_settings, LimitMethod, DEFAULT_HARMONIC_SETTINGS};
use crate::rng::{self, tag, Rng};
use crate::samplers::{AlternativeSpec, Sampler};
use crate::statistics::{self, projection_maxima};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DEFAULT_NULL_REPS: usize = 20_000;
pub const DEFAULT_POWER_REPS: usize = 5_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Default cover size for finite-sample statistics in dimension `d`.
pub fn default_cover_m(d: usize) -> usize {
    if d <= 3 {
        5000
    } else {
        20_000
    }
}

/// Random projections used by the Cuesta-Albertos statistic.
pub fn default_ca_projections(d: usize) -> usize {
    if d == 2 {
        25
    } else {
        100
    }
}

/// Sample size, finite or the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleSize {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Finite(n) => write!(f, "{n}"),
            SampleSize::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for SampleSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "inf" || t == "infinity" || t == "∞" {
            return Ok(SampleSize::Infinite);
        }
        match t.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(SampleSize::Finite(n)),
            _ => Err(Error::Input(format!(
                "sample size must be a positive integer or 'inf', got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Input(format!("format must be csv or json, got '{s}'"))),
        }
    }
}

/// Settings shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    pub n: Vec<SampleSize>,
    pub betas: Vec<usize>,
    pub alpha: f64,
    /// Cover size for finite-sample statistics; `None` selects [`default_cover_m`].
    pub cover_m: Option<usize>,
    pub reps: usize,
    pub power_reps: usize,
    pub seed: u64,
    /// Worker threads; `0` uses the rayon default.
    pub workers: usize,
    /// Include the competing tests next to `T_{n,β}`.
    pub competitors: bool,
    /// Cover size and replications for `n = ∞` rows; `None` selects the defaults.
    pub limit_m: Option<usize>,
    pub limit_reps: Option<usize>,
    pub limit_method: LimitMethod,
}

impl RunConfig {
    pub fn new(d: usize) -> Self {
        RunConfig {
            d,
            n: vec![SampleSize::Finite(100)],
            betas: (1..=6).collect(),
            alpha: DEFAULT_ALPHA,
            cover_m: None,
            reps: DEFAULT_NULL_REPS,
            power_reps: DEFAULT_POWER_REPS,
            seed: 1,
            workers: 0,
            competitors: false,
            limit_m: None,
            limit_reps: None,
            limit_method: LimitMethod::Kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Input(format!("d must be ≥ 2, got {}", self.d)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Input(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.reps == 0 || self.power_reps == 0 {
            return Err(Error::Input("replication counts must be ≥ 1".into()));
        }
        if self.betas.is_empty() || self.betas.contains(&0) {
            return Err(Error::Input("β values must be ≥ 1".into()));
        }
        if self.cover_m == Some(0) || self.limit_m == Some(0) || self.limit_reps == Some(0) {
            return Err(Error::Input("cover sizes and replication counts must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn cover_size(&self) -> usize {
        self.cover_m.unwrap_or_else(|| default_cover_m(self.d))
    }

    /// Run `f` inside a pool with the configured number of workers.
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        if self.workers == 0 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Which tail of the null law is significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Upper,
    Lower,
}

/// The statistics computed per sample: `T_{n,β}` for the requested `β`
/// and, optionally, the competitors defined for `d`.
#[derive(Debug, Clone)]
pub struct Battery {
    d: usize,
    betas: Vec<usize>,
    cover_m: usize,
    competitors: bool,
    ca_q: usize,
}

impl Battery {
    pub fn new(d: usize, betas: &[usize], cover_m: usize, competitors: bool) -> Self {
        Battery {
            d,
            betas: betas.to_vec(),
            cover_m,
            competitors,
            ca_q: default_ca_projections(d),
        }
    }

    pub fn from_config(config: &RunConfig) -> Self {
        Battery::new(config.d, &config.betas, config.cover_size(), config.competitors)
    }

    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.betas.iter().map(|b| format!("T{b}")).collect();
        if self.competitors {
            let ca = format!("CA{}", self.ca_q);
            let extra: Vec<&str> = if self.d == 2 {
                vec!["Kuiper", "WatsonU2", "Ajne", "Rayleigh", &ca]
            } else {
                vec!["Ajne", "Rayleigh", "Bingham", "Gine", &ca, "CvM"]
            };
            out.extend(extra.into_iter().map(String::from));
        }
        out
    }

    pub fn tails(&self) -> Vec<Tail> {
        self.names()
            .iter()
            .map(|n| if n.starts_with("CA") { Tail::Lower } else { Tail::Upper })
            .collect()
    }

    /// Evaluate all statistics; the cover and the CA directions come from `rng`.
    pub fn evaluate(&self, sample: &SphericalSample, rng: &mut Rng) -> Result<Vec<f64>> {
        let max_beta = self.betas.iter().copied().max().unwrap_or(1);
        let cover = DirectionCover::from_rng(self.d, self.cover_m, 0, rng)?;
        let t = projection_maxima(sample, &cover, max_beta)?;
        let mut out: Vec<f64> = self.betas.iter().map(|&b| t[b - 1]).collect();
        if self.competitors {
            if self.d == 2 {
                let c = statistics::circle_classical(sample)?;
                out.extend([c.kuiper, c.watson_u2, c.ajne, c.rayleigh_mod]);
                out.push(statistics::ca_test(sample, self.ca_q, rng)?.value);
            } else {
                let n = sample.n();
                let angles = statistics::pairwise_angles(sample);
                out.push(statistics::ajne_from_angles(n, &angles));
                out.push(statistics::rayleigh_mod(sample));
                out.push(statistics::bingham_stat(sample));
                out.push(statistics::gine_from_angles(self.d, n, &angles)?);
                out.push(statistics::ca_test(sample, self.ca_q, rng)?.value);
                out.push(statistics::cvm_from_angles(self.d, n, &angles)?);
            }
        }
        Ok(out)
    }
}

/// Simulate the battery on `reps` samples of size `n` from `spec`, one
/// stream per replication. Returns one row of statistics per replication.
fn simulate_battery(
    battery: &Battery,
    spec: &AlternativeSpec,
    n: usize,
    reps: usize,
    seed: u64,
    stream_tag: u64,
) -> Result<Vec<Vec<f64>>> {
    let sampler = Sampler::new(spec)?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, stream_tag, r as u64);
            let sample = sampler.sample(n, &mut rng)?;
            battery.evaluate(&sample, &mut rng)
        })
        .collect()
}

/// Seed of one (n, d) block, so that rows for different sample sizes use
/// disjoint streams.
fn block_seed(seed: u64, d: usize, n: usize) -> u64 {
    seed ^ ((d as u64) << 48) ^ ((n as u64) << 20)
}

/// One row of a critical-value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueRow {
    pub tool_version: String,
    pub d: usize,
    pub n: String,
    pub statistic: String,
    pub alpha: f64,
    pub tail: Tail,
    pub critical_value: f64,
    pub mc_stderr: f64,
    pub replications: usize,
    pub cover_m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub rows: Vec<CriticalValueRow>,
}

impl CriticalValueTable {
    pub fn lookup(&self, d: usize, n: SampleSize, statistic: &str, alpha: f64) -> Option<&CriticalValueRow> {
        let key = n.to_string();
        self.rows
            .iter()
            .find(|r| r.d == d && r.n == key && r.statistic == statistic && (r.alpha - alpha).abs() < 1e-12)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<CriticalValueRow>, _>>()?;
        Ok(CriticalValueTable { rows })
    }
}

/// Empirical null quantiles of every statistic for each requested `n`.
pub fn cmd_critvals(config: &RunConfig) -> Result<CriticalValueTable> {
    config.validate()?;
    let mut rows = Vec::new();
    for &n in &config.n {
        match n {
            SampleSize::Finite(size) => rows.extend(finite_critvals(config, size)?),
            SampleSize::Infinite => rows.extend(limit_critvals(config)?),
        }
    }
    Ok(CriticalValueTable { rows })
}

fn finite_critvals(config: &RunConfig, n: usize) -> Result<Vec<CriticalValueRow>> {
    let battery = Battery::from_config(config);
    let seed = block_seed(config.seed, config.d, n);
    let sims = config.install(|| {
        simulate_battery(
            &battery,
            &AlternativeSpec::Uniform { d: config.d },
            n,
            config.reps,
            seed,
            tag::NULL_REPLICATION,
        )
    })??;
    let names = battery.names();
    let tails = battery.tails();
    let mut rows = Vec::with_capacity(names.len());
    for (i, (name, tail)) in names.iter().zip(&tails).enumerate() {
        let column: Vec<f64> = sims.iter().map(|r| r[i]).collect();
        let level = match tail {
            Tail::Upper => 1.0 - config.alpha,
            Tail::Lower => config.alpha,
        };
        let (q, se) = limit_sim::quantile_with_se(&column, level, seed);
        rows.push(CriticalValueRow {
            tool_version: TOOL_VERSION.into(),
            d: config.d,
            n: n.to_string(),
            statistic: name.clone(),
            alpha: config.alpha,
            tail: *tail,
            critical_value: q,
            mc_stderr: se,
            replications: config.reps,
            cover_m: battery.cover_m,
            seed: config.seed,
        });
    }
    Ok(rows)
}

fn limit_settings(config: &RunConfig) -> (usize, usize) {
    let (m, reps) = match config.limit_method {
        LimitMethod::Kernel => default_kernel_settings(config.d),
        LimitMethod::Harmonic => DEFAULT_HARMONIC_SETTINGS,
    };
    (config.limit_m.unwrap_or(m), config.limit_reps.unwrap_or(reps))
}

fn limit_critvals(config: &RunConfig) -> Result<Vec<CriticalValueRow>> {
    let (m, reps) = limit_settings(config);
    let mut rows = Vec::new();
    for &beta in &config.betas {
        let q = config.install(|| {
            limit_sim::limit_quantile(
                beta,
                config.d,
                1.0 - config.alpha,
                config.limit_method,
                m,
                reps,
                config.seed,
            )
        })??;
        rows.push(CriticalValueRow {
            tool_version: TOOL_VERSION.into(),
            d: config.d,
            n: SampleSize::Infinite.to_string(),
            statistic: format!("T{beta}"),
            alpha: config.alpha,
            tail: Tail::Upper,
            critical_value: q.value,
            mc_stderr: q.mc_stderr,
            replications: reps,
            cover_m: m,
            seed: config.seed,
        });
    }
    Ok(rows)
}

/// One row of a power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub tool_version: String,
    pub d: usize,
    pub n: usize,
    pub alternative: String,
    pub statistic: String,
    pub alpha: f64,
    pub power: f64,
    pub mc_stderr: f64,
    pub replications: usize,
    pub cover_m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn power(&self, alternative: &str, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.alternative == alternative && r.statistic == statistic)
            .map(|r| r.power)
    }
}

/// Rejection frequencies of every statistic under each alternative.
///
/// Critical values come from `critvals` when given, and are simulated with
/// `config.reps` null replications otherwise. Alternatives are given as
/// `(label, spec)` pairs.
pub fn cmd_power(
    config: &RunConfig,
    alternatives: &[(String, AlternativeSpec)],
    critvals: Option<&CriticalValueTable>,
) -> Result<PowerTable> {
    config.validate()?;
    let battery = Battery::from_config(config);
    let names = battery.names();
    let tails = battery.tails();
    let mut rows = Vec::new();
    for &n in &config.n {
        let SampleSize::Finite(size) = n else {
            return Err(Error::Input("power needs finite sample sizes".into()));
        };
        let simulated;
        let table = match critvals {
            Some(t) => t,
            None => {
                let mut c = config.clone();
                c.n = vec![n];
                simulated = cmd_critvals(&c)?;
                &simulated
            }
        };
        let mut crit = Vec::with_capacity(names.len());
        for name in &names {
            let row = table.lookup(config.d, n, name, config.alpha).ok_or_else(|| {
                Error::Input(format!(
                    "no critical value for {name} at d = {}, n = {n}, alpha = {}; run `critvals` \
                     with matching settings{}",
                    config.d,
                    config.alpha,
                    if name.starts_with('T') {
                        ""
                    } else {
                        " and --competitors"
                    }
                ))
            })?;
            crit.push(row.critical_value);
        }
        let seed = block_seed(config.seed, config.d, size);
        for (label, spec) in alternatives {
            if spec.d() != config.d {
                return Err(Error::Input(format!(
                    "alternative '{label}' has dimension {}, expected {}",
                    spec.d(),
                    config.d
                )));
            }
            let sims = config.install(|| {
                simulate_battery(&battery, spec, size, config.power_reps, seed, tag::POWER_REPLICATION)
            })??;
            for (i, name) in names.iter().enumerate() {
                let rejections = sims
                    .iter()
                    .filter(|r| match tails[i] {
                        Tail::Upper => r[i] > crit[i],
                        Tail::Lower => r[i] < crit[i],
                    })
                    .count();
                let p = rejections as f64 / config.power_reps as f64;
                rows.push(PowerRow {
                    tool_version: TOOL_VERSION.into(),
                    d: config.d,
                    n: size,
                    alternative: label.clone(),
                    statistic: name.clone(),
                    alpha: config.alpha,
                    power: p,
                    mc_stderr: (p * (1.0 - p) / config.power_reps as f64).sqrt(),
                    replications: config.power_reps,
                    cover_m: battery.cover_m,
                    seed: config.seed,
                });
            }
        }
    }
    Ok(PowerTable { rows })
}

/// Observed statistic with its Monte Carlo p-value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    pub tool_version: String,
    pub d: usize,
    pub n: usize,
    pub statistic: String,
    pub value: f64,
    pub p_value: f64,
    pub null_replications: usize,
    pub cover_m: usize,
    pub seed: u64,
}

/// Statistics of one dataset with p-values `(1 + #{null at least as extreme}) / (R + 1)`.
///
/// The observed statistics use a cover drawn from the `OBSERVED` stream of `config.seed`.
pub fn cmd_test(sample: &SphericalSample, config: &RunConfig) -> Result<Vec<TestRow>> {
    config.validate()?;
    if sample.d() != config.d {
        return Err(Error::Input(format!(
            "data has dimension {}, configuration says {}",
            sample.d(),
            config.d
        )));
    }
    let battery = Battery::from_config(config);
    let n = sample.n();
    let mut obs_rng = rng::stream(config.seed, tag::OBSERVED, 0);
    let observed = battery.evaluate(sample, &mut obs_rng)?;
    let seed = block_seed(config.seed, config.d, n);
    let sims = config.install(|| {
        simulate_battery(
            &battery,
            &AlternativeSpec::Uniform { d: config.d },
            n,
            config.reps,
            seed,
            tag::NULL_REPLICATION,
        )
    })??;
    let tails = battery.tails();
    Ok(battery
        .names()
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let extreme = sims
                .iter()
                .filter(|r| match tails[i] {
                    Tail::Upper => r[i] >= observed[i],
                    Tail::Lower => r[i] <= observed[i],
                })
                .count();
            TestRow {
                tool_version: TOOL_VERSION.into(),
                d: config.d,
                n,
                statistic: name,
                value: observed[i],
                p_value: (1 + extreme) as f64 / (config.reps + 1) as f64,
                null_replications: config.reps,
                cover_m: battery.cover_m,
                seed: config.seed,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub tool_version: String,
    pub d: usize,
    pub beta: usize,
    pub level: f64,
    pub method: LimitMethod,
    pub m: usize,
    pub replications: usize,
    pub quantile: f64,
    pub mc_stderr: f64,
    pub seed: u64,
}

/// `1 − α` quantiles of the simulated limit law for each β.
pub fn cmd_limit(config: &RunConfig) -> Result<Vec<LimitRow>> {
    config.validate()?;
    let (m, reps) = limit_settings(config);
    config
        .betas
        .iter()
        .map(|&beta| {
            let q = config.install(|| {
                limit_sim::limit_quantile(
                    beta,
                    config.d,
                    1.0 - config.alpha,
                    config.limit_method,
                    m,
                    reps,
                    config.seed,
                )
            })??;
            Ok(LimitRow {
                tool_version: TOOL_VERSION.into(),
                d: config.d,
                beta,
                level: q.alpha,
                method: q.method,
                m,
                replications: reps,
                quantile: q.value,
                mc_stderr: q.mc_stderr,
                seed: config.seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BahadurRow {
    pub tool_version: String,
    pub family: String,
    pub beta: usize,
    pub d: usize,
    pub local_are: f64,
}

/// The table of nontrivial local Bahadur efficiencies.
pub fn cmd_bahadur() -> Result<Vec<BahadurRow>> {
    Ok(bahadur::are_table()?
        .into_iter()
        .map(|e| BahadurRow {
            tool_version: TOOL_VERSION.into(),
            family: e.family.to_string(),
            beta: e.beta,
            d: e.d,
            local_are: e.value,
        })
        .collect())
}

/// Parse a family tag as printed in the Bahadur table (`vMF`, `W`, `LP3`).
pub fn parse_family(s: &str) -> Result<Family> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "vmf" => Ok(Family::VonMisesFisher),
        "w" | "watson" => Ok(Family::Watson),
        _ => t
            .strip_prefix("lp")
            .and_then(|m| m.parse::<usize>().ok())
            .filter(|&m| m >= 1)
            .map(Family::Legendre)
            .ok_or_else(|| Error::Input(format!("unknown family '{s}'"))),
    }
}

/// Row counts from [`ingest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub kept: usize,
    pub repaired: usize,
    pub skipped: usize,
    pub filtered: usize,
}

/// Optional row filter: keep rows whose `column` is at least `min`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFilter {
    pub column: String,
    pub min: f64,
}

enum Schema {
    LatLon { lat: usize, lon: usize },
    Cartesian(Vec<usize>),
}

fn detect_schema(headers: &csv::StringRecord) -> Result<Schema> {
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let find = |key: &str| names.iter().position(|h| h == key);
    if let (Some(lat), Some(lon)) = (find("lat"), find("lon")) {
        return Ok(Schema::LatLon { lat, lon });
    }
    let mut cols = Vec::new();
    while let Some(i) = find(&format!("x{}", cols.len() + 1)) {
        cols.push(i);
    }
    if cols.len() >= 2 {
        return Ok(Schema::Cartesian(cols));
    }
    Err(Error::Data {
        line: 1,
        message: format!(
            "unrecognized header [{}]; accepted schemas are `lat,lon` (degrees, d = 3) \
             or `x1,...,xd` (d ≥ 2)",
            names.join(",")
        ),
    })
}

/// Read directions from CSV text with a header row.
///
/// Rows are renormalized when their norm is off by more than the unit-norm
/// tolerance; rows that cannot be normalized are skipped. Unparseable fields
/// fail with the 1-based line number.
pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    filter: Option<&RowFilter>,
) -> Result<(SphericalSample, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let schema = detect_schema(&headers)?;
    let filter_col = match filter {
        Some(f) => Some(
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(&f.column))
                .ok_or_else(|| Error::Data {
                    line: 1,
                    message: format!("filter column '{}' not found", f.column),
                })?,
        ),
        None => None,
    };
    let mut report = IngestReport::default();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data {
            line,
            message: e.to_string(),
        })?;
        report.rows_read += 1;
        let field = |idx: usize| -> Result<f64> {
            let raw = rec.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Data {
                line,
                message: format!("'{raw}' in column '{}' is not a number", &headers[idx]),
            })
        };
        if let (Some(col), Some(f)) = (filter_col, filter) {
            if field(col)? < f.min {
                report.filtered += 1;
                continue;
            }
        }
        let parsed = match &schema {
            Schema::LatLon { lat, lon } => latlon_to_unit(field(*lat)?, field(*lon)?).map(|u| (u, false)),
            Schema::Cartesian(cols) => {
                let coords = cols.iter().map(|&c| field(c)).collect::<Result<Vec<_>>>()?;
                UnitVector::repair(coords)
            }
        };
        match parsed {
            Ok((u, repaired)) => {
                report.repaired += repaired as usize;
                report.kept += 1;
                rows.push(u);
            }
            Err(Error::Input(_)) | Err(Error::Domain(_)) => report.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::Data {
            line: report.rows_read + 1,
            message: "no usable rows".into(),
        });
    }
    Ok((SphericalSample::from_rows(&rows)?, report))
}

pub fn ingest(path: &Path, filter: Option<&RowFilter>) -> Result<(SphericalSample, IngestReport)> {
    ingest_reader(std::fs::File::open(path)?, filter)
}

/// Serialize rows as CSV (header plus one line per row) or a JSON array.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], format: OutputFormat, mut out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// [`write_rows`] to a file, or to stdout when `path` is `None`.
pub fn emit<T: Serialize>(rows: &[T], format: OutputFormat, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => write_rows(rows, format, std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => write_rows(rows, format, std::io::stdout().lock()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(d: usize) -> RunConfig {
        let mut c = RunConfig::new(d);
        c.n = vec![SampleSize::Finite(20)];
        c.reps = 200;
        c.power_reps = 100;
        c.cover_m = Some(200);
        c.competitors = true;
        c
    }

    #[test]
    fn sample_size_parse() {
        assert_eq!("inf".parse::<SampleSize>().unwrap(), SampleSize::Infinite);
        assert_eq!("20".parse::<SampleSize>().unwrap(), SampleSize::Finite(20));
        assert!("0".parse::<SampleSize>().is_err());
        assert!("x".parse::<SampleSize>().is_err());
    }

    #[test]
    fn battery_names_match_values() {
        let mut rng = rng::seeded(1);
        for d in [2, 3, 5] {
            let b = Battery::new(d, &[1, 2, 3], 100, true);
            let s = crate::geometry::sample_uniform(d, 15, &mut rng).unwrap();
            let v = b.evaluate(&s, &mut rng).unwrap();
            assert_eq!(v.len(), b.names().len());
            assert_eq!(b.tails().iter().filter(|t| **t == Tail::Lower).count(), 1);
        }
    }

    #[test]
    fn critvals_deterministic_across_workers() {
        let mut c = small(2);
        c.workers = 1;
        let a = cmd_critvals(&c).unwrap();
        c.workers = 3;
        let b = cmd_critvals(&c).unwrap();
        assert_eq!(a, b);
        let mut x = Vec::new();
        write_rows(&a.rows, OutputFormat::Csv, &mut x).unwrap();
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with("tool_version,d,n,statistic,alpha,tail,critical_value"));
    }

    #[test]
    fn critvals_roundtrip_through_csv() {
        let c = small(3);
        let t = cmd_critvals(&c).unwrap();
        let dir = std::env::temp_dir().join(format!("maxproj-cv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cv.csv");
        write_rows(&t.rows, OutputFormat::Csv, std::fs::File::create(&path).unwrap()).unwrap();
        let back = CriticalValueTable::read_csv(&path).unwrap();
        assert_eq!(back, t);
        let alts = vec![("uniform".to_string(), AlternativeSpec::Uniform { d: 3 })];
        let p = cmd_power(&c, &alts, Some(&back)).unwrap();
        assert_eq!(p.rows.len(), 6 + 6);
        assert!(p.rows.iter().all(|r| (0.0..=1.0).contains(&r.power)));
        let mut only_t = c.clone();
        only_t.competitors = false;
        let partial = cmd_critvals(&only_t).unwrap();
        let err = cmd_power(&c, &alts, Some(&partial)).unwrap_err();
        assert!(err.to_string().contains("critvals"));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn test_command_pvalues() {
        let mut c = small(3);
        c.n = vec![SampleSize::Finite(60)];
        c.competitors = false;
        c.betas = vec![1, 2];
        let mut rng = rng::seeded(5);
        let s = crate::samplers::sample(&AlternativeSpec::vmf1(3, 1.0), 60, &mut rng).unwrap();
        let rows = cmd_test(&s, &c).unwrap();
        assert_eq!(rows[0].statistic, "T1");
        assert!(rows[0].p_value < 0.05, "{rows:?}");
        assert!(rows.iter().all(|r| r.p_value > 0.0 && r.p_value <= 1.0));
    }

    #[test]
    fn ingest_examples() {
        let (s, r) = ingest_reader("lat,lon\n0,0\n".as_bytes(), None).unwrap();
        assert_eq!(s.d(), 3);
        assert_eq!(s.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(r.kept, 1);
        let (s, _) = ingest_reader("x1,x2\n0.6,0.8\n".as_bytes(), None).unwrap();
        assert_eq!(s.row(0), &[0.6, 0.8]);
        let (s, r) = ingest_reader("x1,x2\n0.3,0.4\n0,0\n".as_bytes(), None).unwrap();
        assert_eq!((r.repaired, r.skipped, s.n()), (1, 1, 1));
        assert!((s.row(0)[0] - 0.6).abs() < 1e-15);
        let err = ingest_reader("x1,x2\n1,0\n0,abc\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Data { line: 3, .. }));
        let err = ingest_reader("a,b\n1,2\n".as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("accepted schemas"));
        let f = RowFilter {
            column: "diameter_km".into(),
            min: 150.0,
        };
        let (s, r) = ingest_reader("lat,lon,diameter_km\n10,20,200\n-5,100,90\n".as_bytes(), Some(&f)).unwrap();
        assert_eq!((s.n(), r.filtered), (1, 1));
    }

    #[test]
    fn bahadur_rows_and_families() {
        let rows = cmd_bahadur().unwrap();
        assert_eq!(rows.len(), (3 + 3 + 3 + 3 + 2 + 2 + 1 + 1) * 4);
        assert_eq!(parse_family("LP3").unwrap(), Family::Legendre(3));
        assert_eq!(parse_family("vMF").unwrap(), Family::VonMisesFisher);
        assert!(parse_family("LP0").is_err());
    }

    #[test]
    fn json_output_is_array() {
        let rows = cmd_bahadur().unwrap();
        let mut out = Vec::new();
        write_rows(&rows[..2], OutputFormat::Json, &mut out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
    }
}
