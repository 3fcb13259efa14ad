//! Grid sweeps over (protocol, alpha, gamma) with checkpointed CSV output and
//! per-figure data files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, RateConvention};
use crate::gates::{EncodingKind, ScheduleTemplate};
use crate::metrics::{average_over_inputs, EntanglementSum, LogBase, MetricsRecord, SimConfig};
use crate::protocol::{RunConfig, DEFAULT_MEASURED_PAIR};

/// Tolerance when matching requested slice values against grid values.
pub const GRID_MATCH_TOL: f64 = 1e-9;

/// Dephasing strengths of the fixed-gamma cut panels.
pub const GAMMA_CUTS: [f64; 3] = [0.0, 0.038, 0.06];
/// Transmission strengths of the decay-vs-gamma panels.
pub const ALPHA_CUTS: [f64; 3] = [0.0, 0.5, 1.0];

/// Evenly spaced values `min, ..., max` (`count` of them).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == self.count - 1 {
                    self.max
                } else {
                    self.min + (self.max - self.min) * (i as f64 / last)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub protocols: Vec<EncodingKind>,
    pub alpha_grid: Grid,
    pub gamma_grid: Grid,
    pub dt: f64,
    pub log_base: LogBase,
    pub rate_convention: RateConvention,
    pub entanglement_sum: EntanglementSum,
    pub measured_pair: (usize, usize),
    pub scrambling_schedule: Option<PathBuf>,
    pub swap_schedule: Option<PathBuf>,
    pub output_path: PathBuf,
    pub resume: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            protocols: EncodingKind::ALL.to_vec(),
            alpha_grid: Grid { min: 0.0, max: 1.0, count: 51 },
            gamma_grid: Grid { min: 0.0, max: 0.06, count: 31 },
            dt: EvolutionConfig::DEFAULT_DT,
            log_base: LogBase::Two,
            rate_convention: RateConvention::Kraus,
            entanglement_sum: EntanglementSum::Cuts,
            measured_pair: DEFAULT_MEASURED_PAIR,
            scrambling_schedule: None,
            swap_schedule: None,
            output_path: PathBuf::from("sweep.csv"),
            resume: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    min: Option<f64>,
    max: Option<f64>,
    count: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    protocols: Option<Vec<String>>,
    alpha_grid: Option<RawGrid>,
    gamma_grid: Option<RawGrid>,
    dt: Option<f64>,
    log_base: Option<toml::Value>,
    rate_convention: Option<String>,
    entanglement_sum: Option<String>,
    measured_pair: Option<Vec<i64>>,
    scrambling_schedule: Option<PathBuf>,
    swap_schedule: Option<PathBuf>,
    output_path: Option<PathBuf>,
    resume: Option<bool>,
}

fn config_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { location: location.into(), message: message.into() }
}

fn merge_grid(name: &str, raw: Option<RawGrid>, default: Grid, lower: f64, upper: f64) -> Result<Grid> {
    let raw = raw.unwrap_or(RawGrid { min: None, max: None, count: None });
    let min = raw.min.unwrap_or(default.min);
    let max = raw.max.unwrap_or(default.max);
    let count = raw.count.unwrap_or(default.count as i64);
    for (field, v) in [("min", min), ("max", max)] {
        if !v.is_finite() || v < lower || v > upper {
            let bound = if upper.is_finite() { format!("[{lower}, {upper}]") } else { format!(">= {lower}") };
            return Err(config_error(format!("{name}.{field}"), format!("{v} must lie in {bound}")));
        }
    }
    if min > max {
        return Err(config_error(format!("{name}.min"), format!("min {min} exceeds max {max}")));
    }
    if count < 1 {
        return Err(config_error(format!("{name}.count"), format!("{count} must be at least 1")));
    }
    if count == 1 && min != max {
        return Err(config_error(format!("{name}.count"), "a single-point grid needs min = max"));
    }
    Ok(Grid { min, max, count: count as usize })
}

/// Parses and validates TOML sweep configuration text; missing keys take defaults.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => format!("line {}", text[..span.start.min(text.len())].matches('\n').count() + 1),
            None => "config".to_string(),
        };
        config_error(location, e.message().to_string())
    })?;
    let defaults = SweepConfig::default();

    let protocols = match raw.protocols {
        None => defaults.protocols,
        Some(list) => {
            if list.is_empty() {
                return Err(config_error("protocols", "at least one protocol is required"));
            }
            let mut kinds = Vec::new();
            for name in &list {
                let kind: EncodingKind = name.parse().map_err(|e: String| config_error("protocols", e))?;
                if kinds.contains(&kind) {
                    return Err(config_error("protocols", format!("'{name}' listed twice")));
                }
                kinds.push(kind);
            }
            kinds
        }
    };
    let alpha_grid = merge_grid("alpha_grid", raw.alpha_grid, defaults.alpha_grid, 0.0, 1.0)?;
    let gamma_grid = merge_grid("gamma_grid", raw.gamma_grid, defaults.gamma_grid, 0.0, f64::INFINITY)?;
    let dt = raw.dt.unwrap_or(defaults.dt);
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(config_error("dt", format!("{dt} must be positive")));
    }
    let log_base = match raw.log_base {
        None => defaults.log_base,
        Some(toml::Value::Integer(2)) => LogBase::Two,
        Some(toml::Value::String(s)) => s.parse().map_err(|e: String| config_error("log_base", e))?,
        Some(other) => return Err(config_error("log_base", format!("{other} must be \"2\" or \"e\""))),
    };
    let rate_convention = match raw.rate_convention {
        None => defaults.rate_convention,
        Some(s) => s.parse().map_err(|e: String| config_error("rate_convention", e))?,
    };
    let entanglement_sum = match raw.entanglement_sum {
        None => defaults.entanglement_sum,
        Some(s) => s.parse().map_err(|e: String| config_error("entanglement_sum", e))?,
    };
    let measured_pair = match raw.measured_pair {
        None => defaults.measured_pair,
        Some(p) => match p.as_slice() {
            &[a, b] if a != b && (1..=7).contains(&a) && (1..=7).contains(&b) => (a as usize, b as usize),
            _ => return Err(config_error("measured_pair", format!("{p:?} must be two distinct qubits in 1..=7"))),
        },
    };
    Ok(SweepConfig {
        protocols,
        alpha_grid,
        gamma_grid,
        dt,
        log_base,
        rate_convention,
        entanglement_sum,
        measured_pair,
        scrambling_schedule: raw.scrambling_schedule,
        swap_schedule: raw.swap_schedule,
        output_path: raw.output_path.unwrap_or(defaults.output_path),
        resume: raw.resume.unwrap_or(defaults.resume),
    })
}

impl SweepConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        parse_config(&text)
    }

    /// Simulation settings, with any replacement encoding-window files loaded.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let load = |p: &Option<PathBuf>| -> Result<Option<Arc<ScheduleTemplate>>> {
            p.as_deref().map(|p| ScheduleTemplate::from_file(p).map(Arc::new)).transpose()
        };
        Ok(SimConfig {
            run: RunConfig {
                dt: self.dt,
                rate_convention: self.rate_convention,
                measured_pair: self.measured_pair,
                scrambling_template: load(&self.scrambling_schedule)?,
                swap_template: load(&self.swap_schedule)?,
            },
            log_base: self.log_base,
            entanglement_sum: self.entanglement_sum,
        })
    }

    /// Grid points in output order: protocol, then alpha, then gamma.
    pub fn grid_points(&self) -> Vec<(EncodingKind, f64, f64)> {
        let alphas = self.alpha_grid.values();
        let gammas = self.gamma_grid.values();
        let mut points = Vec::with_capacity(self.protocols.len() * alphas.len() * gammas.len());
        for &kind in &self.protocols {
            for &alpha in &alphas {
                for &gamma in &gammas {
                    points.push((kind, alpha, gamma));
                }
            }
        }
        points
    }

    /// `#`-prefixed description of every setting that affects the output.
    pub fn provenance_header(&self) -> String {
        let grid = |g: &Grid| format!("{{ min = {:?}, max = {:?}, count = {} }}", g.min, g.max, g.count);
        let path = |p: &Option<PathBuf>| match p {
            Some(p) => format!("{:?}", p.display().to_string()),
            None => "\"bundled\"".to_string(),
        };
        let protocols: Vec<String> = self.protocols.iter().map(|k| format!("\"{}\"", k.name())).collect();
        let mut out = String::new();
        let _ = writeln!(out, "# noisy-teleport {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# protocols = [{}]", protocols.join(", "));
        let _ = writeln!(out, "# alpha_grid = {}", grid(&self.alpha_grid));
        let _ = writeln!(out, "# gamma_grid = {}", grid(&self.gamma_grid));
        let _ = writeln!(out, "# dt = {:?}", self.dt);
        let _ = writeln!(out, "# log_base = \"{}\"", self.log_base);
        let _ = writeln!(out, "# rate_convention = \"{}\"", self.rate_convention);
        let _ = writeln!(out, "# entanglement_sum = \"{}\"", self.entanglement_sum);
        let _ = writeln!(out, "# measured_pair = [{}, {}]", self.measured_pair.0, self.measured_pair.1);
        let _ = writeln!(out, "# scrambling_schedule = {}", path(&self.scrambling_schedule));
        let _ = writeln!(out, "# swap_schedule = {}", path(&self.swap_schedule));
        out
    }
}

/// One output row. Metric columns are empty when the row failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub protocol: String,
    pub alpha: f64,
    pub gamma: f64,
    pub fidelity_avg: Option<f64>,
    pub purity_avg: Option<f64>,
    pub purity_of_mean: Option<f64>,
    pub neg_cut34: Option<f64>,
    pub neg_total_t1: Option<f64>,
    pub neg_total_t2: Option<f64>,
    pub neg_total_t3: Option<f64>,
    pub delta_e_u: Option<f64>,
    pub delta_e_m: Option<f64>,
    pub success_prob_avg: Option<f64>,
    pub dt: f64,
    pub log_base: String,
    pub rate_convention: String,
    pub error: String,
}

pub const RECORD_COLUMNS: [&str; 17] = [
    "protocol",
    "alpha",
    "gamma",
    "fidelity_avg",
    "purity_avg",
    "purity_of_mean",
    "neg_cut34",
    "neg_total_t1",
    "neg_total_t2",
    "neg_total_t3",
    "delta_e_u",
    "delta_e_m",
    "success_prob_avg",
    "dt",
    "log_base",
    "rate_convention",
    "error",
];

impl SweepRecord {
    fn new(kind: EncodingKind, alpha: f64, gamma: f64, cfg: &SweepConfig, result: Result<MetricsRecord>) -> Self {
        let (m, error) = match result {
            Ok(m) => (Some(m), String::new()),
            Err(e) => (None, format!("{}: {e}", e.code())),
        };
        Self {
            protocol: kind.name().to_string(),
            alpha,
            gamma,
            fidelity_avg: m.map(|m| m.fidelity_avg),
            purity_avg: m.map(|m| m.purity_avg),
            purity_of_mean: m.map(|m| m.purity_of_mean),
            neg_cut34: m.map(|m| m.neg_cut34),
            neg_total_t1: m.map(|m| m.neg_total_t1),
            neg_total_t2: m.map(|m| m.neg_total_t2),
            neg_total_t3: m.map(|m| m.neg_total_t3),
            delta_e_u: m.map(|m| m.delta_e_u),
            delta_e_m: m.map(|m| m.delta_e_m),
            success_prob_avg: m.map(|m| m.success_prob_avg),
            dt: cfg.dt,
            log_base: cfg.log_base.to_string(),
            rate_convention: cfg.rate_convention.to_string(),
            error,
        }
    }

    pub fn kind(&self) -> Result<EncodingKind> {
        EncodingKind::from_str(&self.protocol).map_err(|e| Error::InvalidState(e))
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }

    fn matches(&self, kind: EncodingKind, alpha: f64, gamma: f64) -> bool {
        self.protocol == kind.name() && self.alpha.to_bits() == alpha.to_bits() && self.gamma.to_bits() == gamma.to_bits()
    }
}

fn record_line(record: &SweepRecord) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(record)?;
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn file_preamble(cfg: &SweepConfig) -> String {
    format!("{}{}\n", cfg.provenance_header(), RECORD_COLUMNS.join(","))
}

/// Reads the completed rows of a previous run of the same configuration.
/// A trailing partially written line is discarded.
fn load_checkpoint(cfg: &SweepConfig, points: &[(EncodingKind, f64, f64)]) -> Result<Vec<SweepRecord>> {
    let path = &cfg.output_path;
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::Io(format!("{}: {e}", path.display()))),
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let preamble = file_preamble(cfg);
    if complete.len() < preamble.len() {
        // Not even the header was finished.
        if preamble.starts_with(complete) {
            return Ok(Vec::new());
        }
    }
    let body = complete.strip_prefix(preamble.as_str()).ok_or_else(|| {
        config_error(
            path.display().to_string(),
            "existing output was written with a different configuration; refusing to resume",
        )
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
    let mut records = Vec::new();
    for row in reader.deserialize::<SweepRecord>() {
        let record = row?;
        let i = records.len();
        match points.get(i) {
            Some(&(k, a, g)) if record.matches(k, a, g) => records.push(record),
            _ => {
                return Err(config_error(
                    path.display().to_string(),
                    format!("row {} does not match the configured grid", i + 1),
                ))
            }
        }
    }
    Ok(records)
}

/// Runs the sweep, writing each row to `cfg.output_path` as soon as it and all
/// rows before it are done. With `cfg.resume`, completed rows are kept.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    run_sweep_with_progress(cfg, |_, _| {})
}

/// [`run_sweep`] with a callback receiving `(rows done, total rows)` after every write.
pub fn run_sweep_with_progress(cfg: &SweepConfig, mut progress: impl FnMut(usize, usize)) -> Result<Vec<SweepRecord>> {
    let sim = cfg.sim_config()?;
    EvolutionConfig::new(cfg.dt)?;
    let points = cfg.grid_points();
    let mut records = if cfg.resume { load_checkpoint(cfg, &points)? } else { Vec::new() };

    // Rewrite the kept prefix so a torn trailing line never survives.
    let mut contents = file_preamble(cfg).into_bytes();
    for r in &records {
        contents.extend(record_line(r)?);
    }
    if let Some(dir) = cfg.output_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = cfg.output_path.with_extension("partial");
    fs::write(&tmp, &contents)?;
    fs::rename(&tmp, &cfg.output_path)?;
    let mut file = OpenOptions::new().append(true).open(&cfg.output_path)?;

    let start = records.len();
    let total = points.len();
    progress(start, total);
    if start == total {
        return Ok(records);
    }
    let next_job = AtomicUsize::new(start);
    let workers = rayon::current_num_threads().max(1).min(total - start);
    let (tx, rx) = mpsc::channel::<(usize, SweepRecord)>();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next_job, points, sim) = (&next_job, &points, &sim);
            scope.spawn(move || loop {
                let i = next_job.fetch_add(1, Ordering::SeqCst);
                let Some(&(kind, alpha, gamma)) = points.get(i) else { break };
                let record = SweepRecord::new(kind, alpha, gamma, cfg, average_over_inputs(kind, alpha, gamma, sim));
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        for (i, record) in rx {
            pending.insert(i, record);
            while let Some(record) = pending.remove(&records.len()) {
                file.write_all(&record_line(&record)?)?;
                file.flush()?;
                records.push(record);
                progress(records.len(), total);
            }
        }
        Ok(())
    })?;
    file.sync_all()?;
    Ok(records)
}

/// Reads a sweep CSV (provenance lines are skipped).
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig7,
}

impl FigureId {
    pub const ALL: [FigureId; 4] = [FigureId::Fig2, FigureId::Fig3, FigureId::Fig4, FigureId::Fig7];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig7 => "fig7",
        }
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown figure '{s}' (expected fig2, fig3, fig4 or fig7)"))
    }
}

/// One data file: a comment block and a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub file_name: String,
    pub title: String,
    pub units: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Panel {
    fn render(&self, provenance: &str) -> Result<Vec<u8>> {
        let mut out = format!("# {}\n# units: {}\n{provenance}", self.title, self.units).into_bytes();
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        out.extend(w.into_inner().map_err(|e| Error::Io(e.to_string()))?);
        Ok(out)
    }
}

type Metric = fn(&SweepRecord) -> Option<f64>;

struct Slice<'a> {
    kind: EncodingKind,
    records: Vec<&'a SweepRecord>,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= GRID_MATCH_TOL);
    v
}

impl<'a> Slice<'a> {
    fn new(records: &'a [SweepRecord], kind: EncodingKind) -> Result<Self> {
        let records: Vec<&SweepRecord> = records.iter().filter(|r| r.protocol == kind.name()).collect();
        if records.is_empty() {
            return Err(Error::MissingCoverage(format!("no {} rows", kind.name())));
        }
        let alphas = sorted_unique(records.iter().map(|r| r.alpha).collect());
        let gammas = sorted_unique(records.iter().map(|r| r.gamma).collect());
        Ok(Self { kind, records, alphas, gammas })
    }

    fn value(&self, alpha: f64, gamma: f64, metric: Metric) -> Result<f64> {
        let record = self
            .records
            .iter()
            .find(|r| (r.alpha - alpha).abs() <= GRID_MATCH_TOL && (r.gamma - gamma).abs() <= GRID_MATCH_TOL)
            .ok_or_else(|| {
                Error::MissingCoverage(format!("{} has no row at alpha = {alpha}, gamma = {gamma}", self.kind.name()))
            })?;
        Ok(metric(record).unwrap_or(f64::NAN))
    }

    fn require(axis: &[f64], wanted: &[f64], name: &str, kind: EncodingKind) -> Result<Vec<f64>> {
        wanted
            .iter()
            .map(|&w| {
                axis.iter().copied().find(|v| (v - w).abs() <= GRID_MATCH_TOL).ok_or_else(|| {
                    Error::MissingCoverage(format!("{} grid lacks {name} = {w}", kind.name()))
                })
            })
            .collect()
    }

    /// Long format: alpha, gamma, value.
    fn map(&self, metric: Metric) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for &a in &self.alphas {
            for &g in &self.gammas {
                rows.push(vec![a, g, self.value(a, g, metric)?]);
            }
        }
        Ok(rows)
    }

    /// One row per alpha, one column per gamma in `gammas`.
    fn alpha_series(&self, gammas: &[f64], metric: Metric) -> Result<Vec<Vec<f64>>> {
        let gammas = Self::require(&self.gammas, gammas, "gamma", self.kind)?;
        self.alphas
            .iter()
            .map(|&a| {
                let mut row = vec![a];
                for &g in &gammas {
                    row.push(self.value(a, g, metric)?);
                }
                Ok(row)
            })
            .collect()
    }

    /// One row per gamma, one column per alpha in `alphas`.
    fn gamma_series(&self, alphas: &[f64], metric: Metric) -> Result<Vec<Vec<f64>>> {
        let alphas = Self::require(&self.alphas, alphas, "alpha", self.kind)?;
        self.gammas
            .iter()
            .map(|&g| {
                let mut row = vec![g];
                for &a in &alphas {
                    row.push(self.value(a, g, metric)?);
                }
                Ok(row)
            })
            .collect()
    }
}

fn entanglement_unit(records: &[SweepRecord]) -> &'static str {
    match records.first().map(|r| r.log_base.as_str()) {
        Some("e") => "nats",
        _ => "bits",
    }
}

fn value_columns(first: &str, prefix: &str, values: &[f64]) -> Vec<String> {
    std::iter::once(first.to_string()).chain(values.iter().map(|v| format!("{prefix}{v}"))).collect()
}

fn map_and_cut_panels(fig: &str, kind: EncodingKind, records: &[SweepRecord]) -> Result<Vec<Panel>> {
    let slice = Slice::new(records, kind)?;
    let ent = entanglement_unit(records);
    let quantities: [(&str, &str, Metric, String); 3] = [
        ("fidelity", "fidelity_avg", |r| r.fidelity_avg, "fidelity (dimensionless)".into()),
        ("purity", "purity_avg", |r| r.purity_avg, "purity (dimensionless)".into()),
        ("negativity", "neg_cut34", |r| r.neg_cut34, format!("log negativity across the 3|4 cut ({ent})")),
    ];
    let mut panels = Vec::new();
    for (i, (label, column, metric, unit)) in quantities.into_iter().enumerate() {
        let map_letter = (b'a' + 2 * i as u8) as char;
        let cut_letter = (b'b' + 2 * i as u8) as char;
        panels.push(Panel {
            file_name: format!("{fig}{map_letter}_{label}_map.csv"),
            title: format!("{} protocol: {column} over (alpha, gamma)", kind.name()),
            units: format!("alpha dimensionless; gamma per gate time; {unit}"),
            columns: vec!["alpha".into(), "gamma".into(), column.into()],
            rows: slice.map(metric)?,
        });
        panels.push(Panel {
            file_name: format!("{fig}{cut_letter}_{label}_cuts.csv"),
            title: format!("{} protocol: {column} versus alpha at fixed gamma", kind.name()),
            units: format!("alpha dimensionless; {unit}"),
            columns: value_columns("alpha", &format!("{column}@gamma="), &GAMMA_CUTS),
            rows: slice.alpha_series(&GAMMA_CUTS, metric)?,
        });
    }
    Ok(panels)
}

/// Builds the data panels of one figure.
pub fn figure_panels(records: &[SweepRecord], figure: FigureId) -> Result<Vec<Panel>> {
    match figure {
        FigureId::Fig2 => map_and_cut_panels("fig2", EncodingKind::Scrambling, records),
        FigureId::Fig3 => map_and_cut_panels("fig3", EncodingKind::Swap, records),
        FigureId::Fig4 => {
            let ent = entanglement_unit(records);
            let mut panels = Vec::new();
            let specs: [(char, EncodingKind, &str, Metric); 4] = [
                ('a', EncodingKind::Scrambling, "delta_e_u", |r| r.delta_e_u),
                ('b', EncodingKind::Swap, "delta_e_u", |r| r.delta_e_u),
                ('c', EncodingKind::Scrambling, "delta_e_m", |r| r.delta_e_m),
                ('d', EncodingKind::Swap, "delta_e_m", |r| r.delta_e_m),
            ];
            for (letter, kind, column, metric) in specs {
                let slice = Slice::new(records, kind)?;
                let gammas = slice.gammas.clone();
                panels.push(Panel {
                    file_name: format!("fig4{letter}_{}_{column}.csv", kind.name()),
                    title: format!("{} protocol: change of total log negativity ({column}) versus alpha", kind.name()),
                    units: format!("alpha dimensionless; {column} in {ent}"),
                    columns: value_columns("alpha", &format!("{column}@gamma="), &gammas),
                    rows: slice.alpha_series(&gammas, metric)?,
                });
            }
            Ok(panels)
        }
        FigureId::Fig7 => {
            let mut panels = Vec::new();
            let specs: [(char, EncodingKind, &str, Metric); 4] = [
                ('a', EncodingKind::Scrambling, "fidelity_avg", |r| r.fidelity_avg),
                ('b', EncodingKind::Scrambling, "purity_avg", |r| r.purity_avg),
                ('c', EncodingKind::Swap, "fidelity_avg", |r| r.fidelity_avg),
                ('d', EncodingKind::Swap, "purity_avg", |r| r.purity_avg),
            ];
            for (letter, kind, column, metric) in specs {
                let slice = Slice::new(records, kind)?;
                panels.push(Panel {
                    file_name: format!("fig7{letter}_{}_{column}.csv", kind.name()),
                    title: format!("{} protocol: {column} versus gamma at fixed alpha", kind.name()),
                    units: format!("gamma per gate time; {column} dimensionless"),
                    columns: value_columns("gamma", &format!("{column}@alpha="), &ALPHA_CUTS),
                    rows: slice.gamma_series(&ALPHA_CUTS, metric)?,
                });
            }
            Ok(panels)
        }
    }
}

/// Writes one file per panel of `figure` into `out_dir` and returns their paths.
pub fn emit_figure_data(
    records: &[SweepRecord],
    figure: FigureId,
    out_dir: &Path,
    provenance: &str,
) -> Result<Vec<PathBuf>> {
    let panels = figure_panels(records, figure)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for panel in panels {
        let path = out_dir.join(&panel.file_name);
        let mut file = File::create(&path)?;
        file.write_all(&panel.render(provenance)?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, SweepConfig::default());
        assert_eq!(cfg.grid_points().len(), 2 * 51 * 31);
        let alphas = cfg.alpha_grid.values();
        assert_eq!((alphas[0], alphas[50]), (0.0, 1.0));
        assert_eq!(cfg.gamma_grid.values()[30], 0.06);
    }

    #[test]
    fn gamma_grid_is_linear() {
        let cfg = parse_config("[gamma_grid]\nmin = 0\nmax = 0.06\ncount = 4\n").unwrap();
        let g = cfg.gamma_grid.values();
        let expected = [0.0, 0.02, 0.04, 0.06];
        assert_eq!(g.len(), 4);
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn range_errors_name_the_field() {
        match parse_config("[alpha_grid]\nmax = 1.5\n") {
            Err(Error::Config { location, .. }) => assert_eq!(location, "alpha_grid.max"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("dt = -0.1") {
            Err(Error::Config { location, .. }) => assert_eq!(location, "dt"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("[gamma_grid]\nmin = -0.01\n") {
            Err(Error::Config { location, .. }) => assert_eq!(location, "gamma_grid.min"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("[alpha_grid]\ncount = 0\n") {
            Err(Error::Config { location, .. }) => assert_eq!(location, "alpha_grid.count"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_report_a_line() {
        match parse_config("dt = 0.01\n\nalpha = 3\n") {
            Err(Error::Config { location, message }) => {
                assert_eq!(location, "line 3");
                assert!(message.contains("alpha"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn switches_parse() {
        let cfg = parse_config(
            "protocols = [\"swap\"]\nlog_base = \"e\"\nrate_convention = \"lindblad\"\nmeasured_pair = [2, 5]\n",
        )
        .unwrap();
        assert_eq!(cfg.protocols, vec![EncodingKind::Swap]);
        assert_eq!(cfg.log_base, LogBase::E);
        assert_eq!(cfg.rate_convention, RateConvention::Lindblad);
        assert_eq!(cfg.measured_pair, (2, 5));
        assert_eq!(parse_config("log_base = 2").unwrap().log_base, LogBase::Two);
        assert!(parse_config("log_base = 10").is_err());
        assert!(parse_config("protocols = []").is_err());
        assert!(parse_config("protocols = [\"teleport\"]").is_err());
        assert!(parse_config("measured_pair = [3, 3]").is_err());
    }

    #[test]
    fn provenance_mentions_every_setting() {
        let header = SweepConfig::default().provenance_header();
        for key in ["protocols", "alpha_grid", "gamma_grid", "dt", "log_base", "rate_convention", "measured_pair"] {
            assert!(header.contains(&format!("# {key} = ")), "{key}");
        }
        assert!(header.lines().all(|l| l.starts_with('#')));
    }

    fn fake_records(kinds: &[EncodingKind], alphas: &[f64], gammas: &[f64]) -> Vec<SweepRecord> {
        let cfg = SweepConfig::default();
        let mut out = Vec::new();
        for &k in kinds {
            for &a in alphas {
                for &g in gammas {
                    let m = MetricsRecord {
                        fidelity_avg: a + g,
                        purity_avg: 1.0 - g,
                        purity_of_mean: 0.5,
                        neg_cut34: 1.0 + a,
                        neg_total_t1: 5.0,
                        neg_total_t2: 5.0 + 6.0 * a,
                        neg_total_t3: 4.0,
                        delta_e_u: 6.0 * a,
                        delta_e_m: -1.0,
                        success_prob_avg: 0.25,
                    };
                    out.push(SweepRecord::new(k, a, g, &cfg, Ok(m)));
                }
            }
        }
        out
    }

    #[test]
    fn figure_panels_have_expected_shapes() {
        let records = fake_records(&EncodingKind::ALL, &[0.0, 0.5, 1.0], &[0.0, 0.019, 0.038, 0.06]);
        let fig2 = figure_panels(&records, FigureId::Fig2).unwrap();
        assert_eq!(fig2.len(), 6);
        assert_eq!(fig2[0].rows.len(), 12);
        assert_eq!(fig2[1].columns, vec!["alpha", "fidelity_avg@gamma=0", "fidelity_avg@gamma=0.038", "fidelity_avg@gamma=0.06"]);
        assert_eq!(fig2[1].rows[2], vec![1.0, 1.0, 1.038, 1.06]);
        let fig4 = figure_panels(&records, FigureId::Fig4).unwrap();
        assert_eq!(fig4.len(), 4);
        assert_eq!(fig4[0].columns.len(), 5);
        assert_eq!(fig4[0].rows[2][1], 6.0);
        let fig7 = figure_panels(&records, FigureId::Fig7).unwrap();
        assert_eq!(fig7[1].rows.len(), 4);
        assert_eq!(fig7[1].rows[3], vec![0.06, 0.94, 0.94, 0.94]);
    }

    #[test]
    fn missing_coverage_is_reported() {
        let records = fake_records(&[EncodingKind::Scrambling], &[0.0, 1.0], &[0.0, 0.06]);
        assert!(matches!(figure_panels(&records, FigureId::Fig2), Err(Error::MissingCoverage(_))));
        assert!(matches!(figure_panels(&records, FigureId::Fig3), Err(Error::MissingCoverage(_))));
        assert!(matches!(figure_panels(&records, FigureId::Fig7), Err(Error::MissingCoverage(_))));
        let records = fake_records(&[EncodingKind::Scrambling], &[0.0, 0.5, 1.0], &[0.0, 0.06]);
        assert!(figure_panels(&records, FigureId::Fig7).is_err());
    }

    #[test]
    fn record_lines_round_trip() {
        let records = fake_records(&[EncodingKind::Swap], &[0.1], &[0.038]);
        let line = record_line(&records[0]).unwrap();
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_slice());
        let back: SweepRecord = reader.deserialize().next().unwrap().unwrap();
        assert_eq!(back, records[0]);
        let failed = SweepRecord::new(
            EncodingKind::Swap,
            0.2,
            0.0,
            &SweepConfig::default(),
            Err(Error::PostselectionFailedInputs { labels: vec!["X+".into()] }),
        );
        let line = String::from_utf8(record_line(&failed).unwrap()).unwrap();
        assert!(line.contains(",,,"), "{line}");
        assert!(line.contains("postselection_impossible"), "{line}");
    }
}
