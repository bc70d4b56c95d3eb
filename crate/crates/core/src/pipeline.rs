//! End-to-end runs: method grid, stability windows, synthetic panels and
//! report files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{
    gain_from_adjacency, gain_from_rmt, greedy_cnm, louvain, sector_overlap, GainMatrix, Partition, SectorOverlap,
};
use crate::error::{Error, Result};
use crate::ingest::{
    compute_log_returns, filter_insufficient, load_price_panel, load_sector_map, synthetic_dates, CsvOptions,
    PricePanel, ReturnsPanel, SectorMap, DEFAULT_MIN_COVERAGE,
};
use crate::matrix::{fmt_full, SymMatrix};
use crate::signature::{word_label, TruncatedSignature};
use crate::similarity::{
    correlation_matrix, signature_features, similarity_cs, stream_signature, similarity_ed, similarity_rbf, FeatureOptions,
    FeatureScaling, Gamma, PathInput, DEFAULT_DEPTH,
};
use crate::spectral::{rmt_decompose, suggest_threshold, threshold_filter, SpectralReport};

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let s = s.trim();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| {
                        let known: Vec<&str> = $name::ALL.iter().map(|v| v.name()).collect();
                        Error::Config(format!(
                            "unknown {} `{s}` (expected one of {})",
                            stringify!($name).to_lowercase(),
                            known.join(", ")
                        ))
                    })
            }
        }
    };
}

named_enum!(
    /// Which matrix describes pairwise dependence.
    Method {
        Correlation => "correlation",
        SigEd => "sig-ed",
        SigCs => "sig-cs",
        SigRbf => "sig-rbf",
    }
);

named_enum!(
    FilterKind {
        Threshold => "threshold",
        Rmt => "rmt",
    }
);

named_enum!(
    Algorithm {
        Louvain => "louvain",
        Greedy => "greedy",
    }
);

/// Parses a comma separated list such as `sig-ed,correlation`.
pub fn parse_list<T: FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(T::from_str).collect()
}

pub const DEFAULT_TARGET_DENSITY: f64 = 0.1;
pub const DEFAULT_START_FRAC: f64 = 1.0 / 3.0;

/// How the asset-graph threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    Fixed(f64),
    TargetDensity(f64),
}

/// Everything needed to reproduce a run. File paths are not part of the
/// recorded settings, so outputs do not depend on where files live.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(skip_serializing)]
    pub prices: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub sectors: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub seed: u64,
    pub depth: usize,
    pub methods: Vec<Method>,
    pub filters: Vec<FilterKind>,
    pub algos: Vec<Algorithm>,
    pub threshold: Option<f64>,
    pub target_density: Option<f64>,
    pub gamma: Gamma,
    pub start_frac: f64,
    pub step: Option<usize>,
    pub min_coverage: f64,
    pub path_input: PathInput,
    pub feature_scaling: FeatureScaling,
    /// Visit Louvain nodes in a seeded random order instead of ascending.
    pub shuffle: bool,
    #[serde(skip_serializing)]
    pub dump_signatures: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prices: None,
            sectors: None,
            out: PathBuf::from("out"),
            seed: 0,
            depth: DEFAULT_DEPTH,
            methods: Method::ALL.to_vec(),
            filters: FilterKind::ALL.to_vec(),
            algos: Algorithm::ALL.to_vec(),
            threshold: None,
            target_density: None,
            gamma: Gamma::Median,
            start_frac: DEFAULT_START_FRAC,
            step: None,
            min_coverage: DEFAULT_MIN_COVERAGE,
            path_input: PathInput::Cumulative,
            feature_scaling: FeatureScaling::None,
            shuffle: false,
            dump_signatures: false,
        }
    }
}

impl RunConfig {
    /// Reads a TOML file whose keys mirror the CLI flags (`target-density`, ...).
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.methods.is_empty() || self.filters.is_empty() || self.algos.is_empty() {
            return Err(Error::Config("methods, filters and algos must be non-empty".into()));
        }
        if self.threshold.is_some() && self.target_density.is_some() {
            return Err(Error::Config("threshold and target-density are mutually exclusive".into()));
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return Err(Error::Config(format!("threshold must be finite, got {t}")));
            }
        }
        if let Some(d) = self.target_density {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!("target-density {d} outside (0, 1]")));
            }
        }
        if let Gamma::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.start_frac > 0.0 && self.start_frac < 1.0) {
            return Err(Error::Config(format!("start-frac {} outside (0, 1)", self.start_frac)));
        }
        if self.step == Some(0) {
            return Err(Error::Config("step must be at least 1".into()));
        }
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(Error::Config(format!("min-coverage {} outside (0, 1]", self.min_coverage)));
        }
        Ok(())
    }

    pub fn threshold_rule(&self) -> ThresholdRule {
        match (self.threshold, self.target_density) {
            (Some(t), _) => ThresholdRule::Fixed(t),
            (None, Some(d)) => ThresholdRule::TargetDensity(d),
            (None, None) => ThresholdRule::TargetDensity(DEFAULT_TARGET_DENSITY),
        }
    }

    fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            input: self.path_input,
            scaling: self.feature_scaling,
        }
    }
}

/// Loaded and cleaned input data.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub returns: ReturnsPanel,
    pub sectors: Option<SectorMap>,
}

/// Loads prices (and sectors, when configured), drops sparse series and
/// computes log-returns.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    let prices_path = config
        .prices
        .as_ref()
        .ok_or_else(|| Error::Config("no price file given (--prices)".into()))?;
    let panel = load_price_panel(prices_path, &CsvOptions::default())?;
    let panel = filter_insufficient(&panel, config.min_coverage)?;
    let returns = compute_log_returns(&panel)?;
    let sectors = match &config.sectors {
        Some(path) => {
            let map = load_sector_map(path)?;
            map.warn_unused(returns.tickers());
            Some(map)
        }
        None => None,
    };
    Ok(Dataset { returns, sectors })
}

/// Result of one (method, filter, algorithm) cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub method: Method,
    pub filter: FilterKind,
    pub algorithm: Algorithm,
    pub status: CellStatus,
    pub modularity: Option<f64>,
    pub clusters: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub theta: Option<f64>,
    pub density: Option<f64>,
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sectors: Option<SectorOverlap>,
    #[serde(skip)]
    pub partition: Option<Partition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

impl CellResult {
    /// `<method>_<filter>_<algorithm>`, used in file names.
    pub fn name(&self) -> String {
        cell_name(self.method, self.filter, self.algorithm)
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

pub fn cell_name(method: Method, filter: FilterKind, algorithm: Algorithm) -> String {
    format!("{method}_{filter}_{algorithm}")
}

/// Everything a grid run produces.
#[derive(Debug, Clone, Serialize)]
pub struct GridResults {
    pub n_series: usize,
    pub n_obs: usize,
    pub settings: RunConfig,
    pub cells: Vec<CellResult>,
    #[serde(skip)]
    pub tickers: Vec<String>,
    #[serde(skip)]
    pub spectra: Vec<(Method, SpectralReport)>,
    #[serde(skip)]
    pub signatures: Option<Vec<TruncatedSignature>>,
}

struct FilterOutput {
    gain: GainMatrix,
    theta: Option<f64>,
    density: Option<f64>,
}

/// Builds the dependence matrix for one method.
pub fn build_matrix(method: Method, returns: &ReturnsPanel, config: &RunConfig) -> Result<SymMatrix> {
    if method == Method::Correlation {
        return correlation_matrix(returns);
    }
    let features = signature_features(returns, config.depth, &config.feature_options())?;
    match method {
        Method::SigEd => Ok(similarity_ed(&features)),
        Method::SigCs => similarity_cs(&features),
        Method::SigRbf => similarity_rbf(&features, config.gamma),
        Method::Correlation => unreachable!(),
    }
}

fn apply_filter(filter: FilterKind, matrix: &SymMatrix, n_obs: usize, rule: ThresholdRule) -> Result<(FilterOutput, Option<SpectralReport>)> {
    match filter {
        FilterKind::Threshold => {
            let theta = match rule {
                ThresholdRule::Fixed(t) => t,
                ThresholdRule::TargetDensity(d) => suggest_threshold(matrix, d)?.theta,
            };
            let adj = threshold_filter(matrix, theta);
            if adj.is_disconnected() {
                return Err(Error::Numeric(format!("threshold {theta} leaves no edges")));
            }
            let density = adj.density();
            Ok((
                FilterOutput {
                    gain: gain_from_adjacency(&adj)?,
                    theta: Some(theta),
                    density: Some(density),
                },
                None,
            ))
        }
        FilterKind::Rmt => {
            let split = rmt_decompose(matrix, n_obs)?;
            let report = split.report(matrix.kind());
            Ok((
                FilterOutput {
                    gain: gain_from_rmt(&split, matrix)?,
                    theta: None,
                    density: None,
                },
                Some(report),
            ))
        }
    }
}

fn detect(algorithm: Algorithm, gain: &GainMatrix, config: &RunConfig) -> Partition {
    match algorithm {
        Algorithm::Louvain => louvain(gain, config.shuffle.then_some(config.seed)).partition,
        Algorithm::Greedy => greedy_cnm(gain).partition,
    }
}

fn failed(method: Method, filter: FilterKind, algorithm: Algorithm, reason: &Error) -> CellResult {
    CellResult {
        method,
        filter,
        algorithm,
        status: CellStatus::Failed,
        modularity: None,
        clusters: None,
        sizes: None,
        theta: None,
        density: None,
        reason: Some(reason.to_string()),
        sectors: None,
        partition: None,
    }
}

/// Runs every configured cell on an already loaded panel. Cells that fail
/// are recorded with their reason; the others proceed.
pub fn run_grid_on(returns: &ReturnsPanel, sectors: Option<&SectorMap>, config: &RunConfig) -> Result<GridResults> {
    config.validate()?;
    let rule = config.threshold_rule();
    let per_method: Vec<(Vec<CellResult>, Option<SpectralReport>)> = config
        .methods
        .par_iter()
        .map(|&method| {
            let mut cells = Vec::new();
            let mut spectrum = None;
            let matrix = build_matrix(method, returns, config);
            for &filter in &config.filters {
                let filtered = matrix
                    .as_ref()
                    .map_err(clone_error)
                    .and_then(|m| apply_filter(filter, m, returns.n_obs(), rule));
                for &algorithm in &config.algos {
                    let cell = match &filtered {
                        Err(e) => failed(method, filter, algorithm, e),
                        Ok((out, report)) => {
                            if spectrum.is_none() {
                                spectrum.clone_from(report);
                            }
                            let partition = detect(algorithm, &out.gain, config);
                            let overlap = sectors
                                .map(|s| sector_overlap(&partition, s, returns.tickers()))
                                .transpose();
                            match overlap {
                                Err(e) => failed(method, filter, algorithm, &e),
                                Ok(overlap) => CellResult {
                                    method,
                                    filter,
                                    algorithm,
                                    status: CellStatus::Ok,
                                    modularity: Some(partition.q),
                                    clusters: Some(partition.k),
                                    sizes: Some(partition.sizes()),
                                    theta: out.theta,
                                    density: out.density,
                                    reason: None,
                                    sectors: overlap,
                                    partition: Some(partition),
                                },
                            }
                        }
                    };
                    cells.push(cell);
                }
            }
            (cells, spectrum)
        })
        .collect();

    let mut cells = Vec::new();
    let mut spectra = Vec::new();
    for (&method, (c, s)) in config.methods.iter().zip(per_method) {
        cells.extend(c);
        if let Some(s) = s {
            spectra.push((method, s));
        }
    }

    let signatures = if config.dump_signatures {
        Some(
            returns
                .rows()
                .iter()
                .map(|r| stream_signature(r, config.depth, config.path_input))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    Ok(GridResults {
        n_series: returns.n_series(),
        n_obs: returns.n_obs(),
        settings: config.clone(),
        cells,
        tickers: returns.tickers().to_vec(),
        spectra,
        signatures,
    })
}

// Errors are not `Clone`; cells sharing a failed matrix each get the message.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(m.clone()),
        Error::Data(m) => Error::Data(m.clone()),
        Error::ZeroVariance { ticker } => Error::ZeroVariance { ticker: ticker.clone() },
        Error::Precondition(m) => Error::Precondition(m.clone()),
        Error::Dimension(m) => Error::Dimension(m.clone()),
        other => Error::Numeric(other.to_string()),
    }
}

/// Loads the configured data and runs the grid.
pub fn run_grid(config: &RunConfig) -> Result<GridResults> {
    config.validate()?;
    let data = load_dataset(config)?;
    run_grid_on(&data.returns, data.sectors.as_ref(), config)
}

/// Prefix window lengths `⌈fT⌉, ⌈fT⌉ + s, …, T`.
pub fn stability_windows(total: usize, start_frac: f64, step: usize) -> Result<Vec<usize>> {
    if !(start_frac > 0.0 && start_frac < 1.0) {
        return Err(Error::Config(format!("start-frac {start_frac} outside (0, 1)")));
    }
    if step == 0 {
        return Err(Error::Config("step must be at least 1".into()));
    }
    // absorb rounding in f·T before taking the ceiling
    let start = ((start_frac * total as f64) - 1e-9).ceil().max(1.0) as usize;
    if start >= total {
        return Err(Error::Precondition(format!(
            "panel of {total} observations is too short for a start window of {start}"
        )));
    }
    let mut windows: Vec<usize> = (start..total).step_by(step).collect();
    windows.push(total);
    Ok(windows)
}

/// `round((T − ⌈fT⌉) / 10)`, at least 1.
pub fn default_step(total: usize, start_frac: f64) -> usize {
    let start = ((start_frac * total as f64) - 1e-9).ceil();
    (((total as f64 - start) / 10.0).round() as usize).max(1)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityPoint {
    pub window: usize,
    pub method: Method,
    pub filter: FilterKind,
    pub algorithm: Algorithm,
    pub status: CellStatus,
    pub modularity: Option<f64>,
    pub clusters: Option<usize>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StabilityCurve {
    pub points: Vec<StabilityPoint>,
}

impl StabilityCurve {
    pub fn windows(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.points.iter().map(|p| p.window).collect();
        w.dedup();
        w
    }

    /// Points of one cell, in window order.
    pub fn series(&self, method: Method, filter: FilterKind, algorithm: Algorithm) -> Vec<&StabilityPoint> {
        self.points
            .iter()
            .filter(|p| p.method == method && p.filter == filter && p.algorithm == algorithm)
            .collect()
    }
}

/// Re-runs the grid on growing prefixes of the panel.
pub fn stability_on(returns: &ReturnsPanel, config: &RunConfig) -> Result<StabilityCurve> {
    config.validate()?;
    let total = returns.n_obs();
    let step = config.step.unwrap_or_else(|| default_step(total, config.start_frac));
    let windows = stability_windows(total, config.start_frac, step)?;
    let mut quiet = config.clone();
    quiet.dump_signatures = false;
    let mut points = Vec::new();
    for window in windows {
        let prefix = returns.prefix(window)?;
        let grid = run_grid_on(&prefix, None, &quiet)?;
        points.extend(grid.cells.into_iter().map(|c| StabilityPoint {
            window,
            method: c.method,
            filter: c.filter,
            algorithm: c.algorithm,
            status: c.status,
            modularity: c.modularity,
            clusters: c.clusters,
            reason: c.reason,
        }));
    }
    Ok(StabilityCurve { points })
}

pub fn stability_analysis(config: &RunConfig) -> Result<StabilityCurve> {
    config.validate()?;
    let data = load_dataset(config)?;
    stability_on(&data.returns, config)
}

/// Daily volatility of synthetic returns.
pub const SYNTH_DAILY_VOL: f64 = 0.01;
pub const SYNTH_INITIAL_PRICE: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub prices: PricePanel,
    /// Planted block of every series.
    pub labels: Vec<usize>,
}

impl SynthPanel {
    /// Sector map assigning each ticker the label `block_<k>`.
    pub fn block_sectors(&self) -> SectorMap {
        SectorMap::from_pairs(
            self.prices
                .tickers()
                .iter()
                .zip(&self.labels)
                .map(|(t, b)| (t.clone(), format!("block_{b}"))),
        )
        .expect("synthetic tickers are unique")
    }
}

/// Gaussian one-factor-per-block panel: within a block returns have
/// correlation `intra_corr`, across blocks 0. Prices start at 100.
pub fn synth_panel(n_series: usize, n_obs: usize, n_blocks: usize, intra_corr: f64, seed: u64) -> Result<SynthPanel> {
    if !(0.0..1.0).contains(&intra_corr) {
        return Err(Error::Config(format!("intra-block correlation {intra_corr} outside [0, 1)")));
    }
    if n_series == 0 || n_blocks == 0 || n_blocks > n_series {
        return Err(Error::Config(format!(
            "need 1 <= blocks <= series (blocks = {n_blocks}, series = {n_series})"
        )));
    }
    if n_obs < 2 {
        return Err(Error::Config(format!("need at least 2 observations, got {n_obs}")));
    }
    let labels: Vec<usize> = (0..n_series).map(|i| i * n_blocks / n_series).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common = intra_corr.sqrt();
    let own = (1.0 - intra_corr).sqrt();
    let mut log_price = vec![SYNTH_INITIAL_PRICE.ln(); n_series];
    let mut values: Vec<Vec<f64>> = (0..n_series).map(|_| vec![SYNTH_INITIAL_PRICE]).collect();
    let mut factors = vec![0.0; n_blocks];
    for _ in 1..n_obs {
        for f in factors.iter_mut() {
            *f = StandardNormal.sample(&mut rng);
        }
        for (i, row) in values.iter_mut().enumerate() {
            let eps: f64 = StandardNormal.sample(&mut rng);
            log_price[i] += SYNTH_DAILY_VOL * (common * factors[labels[i]] + own * eps);
            row.push(log_price[i].exp());
        }
    }
    let width = (n_series.max(2) - 1).to_string().len().max(3);
    let tickers = (0..n_series).map(|i| format!("S{i:0width$}")).collect();
    let prices = PricePanel::from_complete(tickers, synthetic_dates(n_obs), values)?;
    Ok(SynthPanel { prices, labels })
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_full).unwrap_or_default()
}

fn opt_usize(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_to_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.into_inner().map_err(|e| Error::Numeric(format!("csv buffer: {e}")))
}

pub fn grid_csv(results: &GridResults) -> Result<Vec<u8>> {
    csv_to_string(
        &["method", "filter", "algorithm", "status", "modularity", "clusters", "theta", "density", "reason"],
        results.cells.iter().map(|c| {
            vec![
                c.method.to_string(),
                c.filter.to_string(),
                c.algorithm.to_string(),
                if c.is_ok() { "ok" } else { "failed" }.to_string(),
                opt_f64(c.modularity),
                opt_usize(c.clusters),
                opt_f64(c.theta),
                opt_f64(c.density),
                c.reason.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn stability_csv(curve: &StabilityCurve) -> Result<Vec<u8>> {
    csv_to_string(
        &["window", "method", "filter", "algorithm", "status", "modularity", "clusters", "reason"],
        curve.points.iter().map(|p| {
            vec![
                p.window.to_string(),
                p.method.to_string(),
                p.filter.to_string(),
                p.algorithm.to_string(),
                if p.status == CellStatus::Ok { "ok" } else { "failed" }.to_string(),
                opt_f64(p.modularity),
                opt_usize(p.clusters),
                p.reason.clone().unwrap_or_default(),
            ]
        }),
    )
}

fn partition_csv(tickers: &[String], partition: &Partition) -> Result<Vec<u8>> {
    csv_to_string(
        &["ticker", "community"],
        tickers
            .iter()
            .zip(&partition.assignment)
            .map(|(t, c)| vec![t.clone(), c.to_string()]),
    )
}

fn signatures_csv(tickers: &[String], signatures: &[TruncatedSignature]) -> Result<Vec<u8>> {
    csv_to_string(
        &["ticker", "word", "coefficient"],
        tickers.iter().zip(signatures).flat_map(|(t, sig)| {
            sig.words()
                .map(|(w, c)| vec![t.clone(), word_label(&w), fmt_full(c)])
                .collect::<Vec<_>>()
        }),
    )
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// In-memory report files, keyed by file name.
pub fn grid_files(results: &GridResults) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = vec![
        ("grid.csv".to_string(), grid_csv(results)?),
        ("grid.json".to_string(), json_bytes(results)?),
    ];
    for cell in &results.cells {
        if let Some(p) = &cell.partition {
            files.push((format!("partition_{}.csv", cell.name()), partition_csv(&results.tickers, p)?));
        }
    }
    for (method, report) in &results.spectra {
        files.push((format!("spectrum_{method}_rmt.json"), json_bytes(report)?));
    }
    if let Some(sigs) = &results.signatures {
        files.push(("signatures.csv".to_string(), signatures_csv(&results.tickers, sigs)?));
    }
    Ok(files)
}

pub fn stability_files(curve: &StabilityCurve) -> Result<Vec<(String, Vec<u8>)>> {
    Ok(vec![("stability.csv".to_string(), stability_csv(curve)?)])
}

/// Writes `files` into `dir` through a staging directory: nothing lands in
/// `dir` unless every file was written, and each file is moved into place
/// with a rename.
pub fn write_files_atomically(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let staging = dir.join(format!(".staging-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
    let written = (|| {
        for (name, bytes) in files {
            let path = staging.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        let mut out = Vec::with_capacity(files.len());
        for (name, _) in files {
            let target = dir.join(name);
            fs::rename(staging.join(name), &target).map_err(|e| Error::io(&target, e))?;
            out.push(target);
        }
        Ok(out)
    })();
    let _ = fs::remove_dir_all(&staging);
    written
}

/// Writes the grid report files into `dir`.
pub fn emit_report(results: &GridResults, dir: &Path) -> Result<Vec<PathBuf>> {
    write_files_atomically(dir, &grid_files(results)?)
}

pub fn emit_stability(curve: &StabilityCurve, dir: &Path) -> Result<Vec<PathBuf>> {
    write_files_atomically(dir, &stability_files(curve)?)
}
