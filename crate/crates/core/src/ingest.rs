//! Loading, alignment and cleaning of price panels.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const DEFAULT_MIN_COVERAGE: f64 = 0.99;
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// `N` aligned price series over `T` dates. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    values: Vec<Vec<Option<f64>>>,
}

impl PricePanel {
    /// Validates and builds a panel; `values[i][t]` is ticker `i` on date `t`.
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, values: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if tickers.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} tickers but {} value rows",
                tickers.len(),
                values.len()
            )));
        }
        check_unique_tickers(&tickers)?;
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!("dates not strictly increasing at {}", w[1])));
        }
        for (ticker, row) in tickers.iter().zip(&values) {
            if row.len() != dates.len() {
                return Err(Error::Dimension(format!(
                    "series `{ticker}` has {} values for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            for (date, v) in dates.iter().zip(row) {
                if let Some(p) = *v {
                    check_price(p, ticker, date)?;
                }
            }
        }
        Ok(Self { tickers, dates, values })
    }

    /// Builds a fully observed panel.
    pub fn from_complete(tickers: Vec<String>, dates: Vec<NaiveDate>, values: Vec<Vec<f64>>) -> Result<Self> {
        let values = values.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        Self::new(tickers, dates, values)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_series(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn row(&self, i: usize) -> &[Option<f64>] {
        &self.values[i]
    }

    pub fn is_missing(&self, i: usize, t: usize) -> bool {
        self.values[i][t].is_none()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_none()).count()
    }

    /// Fraction of observed cells for series `i`.
    pub fn coverage(&self, i: usize) -> f64 {
        if self.dates.is_empty() {
            return 0.0;
        }
        let observed = self.values[i].iter().filter(|v| v.is_some()).count();
        observed as f64 / self.dates.len() as f64
    }

    /// Writes the panel in the `date,<ticker>...` layout read by [`load_price_panel`].
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        wtr.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.format(DATE_FORMAT).to_string()];
            rec.extend(self.values.iter().map(|row| match row[t] {
                Some(p) => format!("{p:.16e}"),
                None => String::new(),
            }));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Log-returns `r_i(t) = ln(S_i(t) / S_i(t-1))`, no missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    values: Vec<Vec<f64>>,
}

impl ReturnsPanel {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, values: Vec<Vec<f64>>) -> Result<Self> {
        if tickers.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} tickers but {} return rows",
                tickers.len(),
                values.len()
            )));
        }
        check_unique_tickers(&tickers)?;
        for (ticker, row) in tickers.iter().zip(&values) {
            if row.len() != dates.len() {
                return Err(Error::Dimension(format!(
                    "series `{ticker}` has {} returns for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            if row.iter().any(|r| !r.is_finite()) {
                return Err(Error::Data(format!("series `{ticker}` has a non-finite return")));
            }
        }
        Ok(Self { tickers, dates, values })
    }

    /// Builds a panel from raw rows with placeholder consecutive dates.
    pub fn from_rows(tickers: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let t = values.first().map_or(0, Vec::len);
        Self::new(tickers, synthetic_dates(t), values)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_series(&self) -> usize {
        self.tickers.len()
    }

    /// Number of return observations per series.
    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// The first `len` observations of every series.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.n_obs() {
            return Err(Error::Precondition(format!(
                "prefix length {len} outside 1..={}",
                self.n_obs()
            )));
        }
        Ok(Self {
            tickers: self.tickers.clone(),
            dates: self.dates[..len].to_vec(),
            values: self.values.iter().map(|r| r[..len].to_vec()).collect(),
        })
    }
}

/// Consecutive calendar days starting 2000-01-01.
pub fn synthetic_dates(len: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    start.iter_days().take(len).collect()
}

fn check_unique_tickers(tickers: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for t in tickers {
        if !seen.insert(t.as_str()) {
            return Err(Error::Data(format!("duplicate ticker `{t}`")));
        }
    }
    Ok(())
}

fn check_price(p: f64, ticker: &str, date: &NaiveDate) -> Result<()> {
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::Data(format!(
            "non-positive or non-finite price {p} for `{ticker}` on {date}"
        )));
    }
    Ok(())
}

/// Reads a `date,<ticker1>,<ticker2>,...` CSV; empty cells are missing.
///
/// Row numbers in errors are 1-based file lines (the header is line 1);
/// columns are 1-based.
pub fn load_price_panel(path: impl AsRef<Path>, options: &CsvOptions) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_price_panel(file, options)
}

/// [`load_price_panel`] over any reader.
pub fn read_price_panel(reader: impl std::io::Read, options: &CsvOptions) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_parse_error(e, 1))?,
        None => {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                message: "missing header row".into(),
            })
        }
    };
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "header needs a date column and at least one ticker".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if let Some(pos) = tickers.iter().position(String::is_empty) {
        return Err(Error::Parse {
            row: 1,
            column: pos + 2,
            message: "empty ticker name".into(),
        });
    }
    check_unique_tickers(&tickers)?;
    let n = tickers.len();

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| csv_parse_error(e, line))?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(n + 1),
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        let date_str = rec[0].trim();
        let date = NaiveDate::parse_from_str(date_str, DATE_FORMAT).map_err(|e| Error::Parse {
            row: line,
            column: 1,
            message: format!("invalid date `{date_str}`: {e}"),
        })?;
        let mut values = Vec::with_capacity(n);
        for (j, field) in rec.iter().skip(1).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                values.push(None);
                continue;
            }
            let p: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: j + 2,
                message: format!("invalid number `{field}`"),
            })?;
            check_price(p, &tickers[j], &date)?;
            values.push(Some(p));
        }
        rows.push((date, values));
    }

    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!("duplicate date {}", w[0].0)));
    }

    let dates = rows.iter().map(|(d, _)| *d).collect();
    let mut values = vec![Vec::with_capacity(rows.len()); n];
    for (_, row) in rows {
        for (col, v) in values.iter_mut().zip(row) {
            col.push(v);
        }
    }
    PricePanel::new(tickers, dates, values)
}

fn csv_parse_error(e: csv::Error, line: usize) -> Error {
    Error::Parse {
        row: e.position().map_or(line, |p| p.line() as usize),
        column: 1,
        message: e.to_string(),
    }
}

/// Drops series observed on fewer than `min_coverage` of the dates, then
/// forward-fills (and, before the first observation, backward-fills) the
/// remaining gaps.
pub fn filter_insufficient(panel: &PricePanel, min_coverage: f64) -> Result<PricePanel> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(Error::Config(format!("min_coverage {min_coverage} outside (0, 1]")));
    }
    let mut tickers = Vec::new();
    let mut values = Vec::new();
    for i in 0..panel.n_series() {
        let coverage = panel.coverage(i);
        if coverage < min_coverage {
            log::info!(
                "dropping `{}`: coverage {:.4} below {min_coverage}",
                panel.tickers[i],
                coverage
            );
            continue;
        }
        tickers.push(panel.tickers[i].clone());
        values.push(fill_gaps(&panel.values[i]));
    }
    if tickers.is_empty() {
        return Err(Error::EmptyPanel);
    }
    PricePanel::new(tickers, panel.dates.clone(), values)
}

fn fill_gaps(row: &[Option<f64>]) -> Vec<Option<f64>> {
    let first = row.iter().flatten().next().copied();
    let mut last = first;
    row.iter()
        .map(|v| {
            if v.is_some() {
                last = *v;
            }
            last
        })
        .collect()
}

/// Log-returns of a complete panel; the output has one fewer column.
pub fn compute_log_returns(panel: &PricePanel) -> Result<ReturnsPanel> {
    if panel.n_dates() < 2 {
        return Err(Error::Precondition("need at least two dates to form returns".into()));
    }
    let mut values = Vec::with_capacity(panel.n_series());
    for (ticker, row) in panel.tickers.iter().zip(&panel.values) {
        let prices: Vec<f64> = row
            .iter()
            .map(|v| {
                v.ok_or_else(|| {
                    Error::Precondition(format!(
                        "series `{ticker}` has missing prices; run filter_insufficient first"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        values.push(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect());
    }
    ReturnsPanel::new(panel.tickers.clone(), panel.dates[1..].to_vec(), values)
}

/// Ticker to sector label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SectorMap {
    map: BTreeMap<String, String>,
}

impl SectorMap {
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (ticker, sector) in pairs {
            let ticker = ticker.into();
            if map.contains_key(&ticker) {
                return Err(Error::Data(format!("duplicate ticker `{ticker}` in sector map")));
            }
            map.insert(ticker, sector.into());
        }
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, ticker: &str) -> Option<&str> {
        self.map.get(ticker).map(String::as_str)
    }

    /// Distinct sector labels, sorted.
    pub fn sectors(&self) -> Vec<String> {
        self.map.values().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Logs a warning for every mapped ticker not present in `tickers` and
    /// returns them.
    pub fn warn_unused(&self, tickers: &[String]) -> Vec<String> {
        let present: HashSet<&str> = tickers.iter().map(String::as_str).collect();
        let unused: Vec<String> = self
            .map
            .keys()
            .filter(|t| !present.contains(t.as_str()))
            .cloned()
            .collect();
        for t in &unused {
            log::warn!("sector map ticker `{t}` is not in the panel");
        }
        unused
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["ticker", "sector"])?;
        for (t, s) in &self.map {
            wtr.write_record([t, s])?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Reads a two-column `ticker,sector` CSV.
pub fn load_sector_map(path: impl AsRef<Path>) -> Result<SectorMap> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_sector_map(file)
}

pub fn read_sector_map(reader: impl std::io::Read) -> Result<SectorMap> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut pairs = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| csv_parse_error(e, line))?;
        if rec.len() != 2 {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(2),
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        pairs.push((rec[0].trim().to_string(), rec[1].trim().to_string()));
    }
    SectorMap::from_pairs(pairs)
}
