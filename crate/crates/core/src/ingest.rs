//! Loading, validating and aligning daily close prices.
//!
//! Input is a delimiter-separated table with a `date,ticker,close` header.
//! Records are collected into a [`RecordSet`], aligned onto a gap-free daily
//! calendar with [`align_panel`], and turned into log returns with
//! [`log_returns`]. Any ticker missing even one day inside the requested range
//! is dropped and reported rather than interpolated.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub date: NaiveDate,
    pub ticker: String,
    pub close: f64,
}

/// First and last observed day for one ticker, and how many days it has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub first: NaiveDate,
    pub last: NaiveDate,
    pub days: usize,
}

/// Validated but not yet aligned price records.
#[derive(Debug, Clone, Default)]
pub struct RecordSet {
    records: Vec<PriceRecord>,
}

impl RecordSet {
    pub fn new(records: Vec<PriceRecord>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 1;
            if !(r.close > 0.0) || !r.close.is_finite() {
                return Err(Error::NonPositivePrice {
                    line,
                    ticker: r.ticker.clone(),
                    date: r.date,
                    close: r.close,
                });
            }
            if let Some(first_line) = seen.insert((r.date, r.ticker.as_str()), line) {
                return Err(Error::DuplicateRecord {
                    line,
                    first_line,
                    ticker: r.ticker.clone(),
                    date: r.date,
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[PriceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tickers(&self) -> Vec<String> {
        self.coverage().into_keys().collect()
    }

    pub fn coverage(&self) -> BTreeMap<String, Coverage> {
        let mut spans: BTreeMap<String, Coverage> = BTreeMap::new();
        for r in &self.records {
            spans
                .entry(r.ticker.clone())
                .and_modify(|c| {
                    c.first = c.first.min(r.date);
                    c.last = c.last.max(r.date);
                    c.days += 1;
                })
                .or_insert(Coverage {
                    first: r.date,
                    last: r.date,
                    days: 1,
                });
        }
        spans
    }
}

/// Reads a comma-separated `date,ticker,close` table.
pub fn load_prices<R: Read>(reader: R) -> Result<RecordSet> {
    load_prices_delimited(reader, b',')
}

pub fn load_prices_file(path: &Path) -> Result<RecordSet> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_prices(file)
}

pub fn load_prices_delimited<R: Read>(reader: R, delimiter: u8) -> Result<RecordSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput);
    }
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(Error::MalformedRow {
                line: 1,
                field: name,
                reason: format!("header is missing column `{name}`"),
            })
    };
    let (date_col, ticker_col, close_col) = (column("date")?, column("ticker")?, column("close")?);

    let mut records = Vec::new();
    let mut seen: HashMap<(NaiveDate, String), u64> = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &'static str| {
            row.get(idx)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::MalformedRow {
                    line,
                    field: name,
                    reason: "missing value".into(),
                })
        };
        let date_raw = field(date_col, "date")?;
        let date = NaiveDate::parse_from_str(date_raw, DATE_FORMAT).map_err(|e| {
            Error::MalformedRow {
                line,
                field: "date",
                reason: format!("`{date_raw}`: {e}"),
            }
        })?;
        let ticker = field(ticker_col, "ticker")?.to_string();
        let close_raw = field(close_col, "close")?;
        let close: f64 = close_raw.parse().map_err(|_| Error::MalformedRow {
            line,
            field: "close",
            reason: format!("`{close_raw}` is not a number"),
        })?;
        if !(close > 0.0) || !close.is_finite() {
            return Err(Error::NonPositivePrice {
                line,
                ticker,
                date,
                close,
            });
        }
        if let Some(&first_line) = seen.get(&(date, ticker.clone())) {
            return Err(Error::DuplicateRecord {
                line,
                first_line,
                ticker,
                date,
            });
        }
        seen.insert((date, ticker.clone()), line);
        records.push(PriceRecord {
            date,
            ticker,
            close,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(RecordSet { records })
}

/// Aligned close prices: every ticker has a price on every calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    tickers: Vec<String>,
    calendar: Vec<NaiveDate>,
    /// One row per ticker, one column per calendar day.
    prices: Vec<Vec<f64>>,
}

impl PricePanel {
    pub fn new(tickers: Vec<String>, calendar: Vec<NaiveDate>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if tickers.is_empty() || calendar.is_empty() {
            return Err(Error::InvalidConfig("panel needs at least one ticker and one day".into()));
        }
        if prices.len() != tickers.len() {
            return Err(Error::InvalidConfig(format!(
                "{} price rows for {} tickers",
                prices.len(),
                tickers.len()
            )));
        }
        let mut names = std::collections::HashSet::new();
        for t in &tickers {
            if !names.insert(t.as_str()) {
                return Err(Error::DuplicateTicker(t.clone()));
            }
        }
        for pair in calendar.windows(2) {
            if pair[0].checked_add_days(Days::new(1)) != Some(pair[1]) {
                return Err(Error::InvalidConfig(format!(
                    "calendar is not consecutive between {} and {}",
                    pair[0], pair[1]
                )));
            }
        }
        for (ticker, row) in tickers.iter().zip(&prices) {
            if row.len() != calendar.len() {
                return Err(Error::InvalidConfig(format!(
                    "{ticker} has {} prices for {} days",
                    row.len(),
                    calendar.len()
                )));
            }
            if let Some((j, &close)) = row.iter().enumerate().find(|(_, p)| !(**p > 0.0) || !p.is_finite()) {
                return Err(Error::NonPositivePrice {
                    line: 0,
                    ticker: ticker.clone(),
                    date: calendar[j],
                    close,
                });
            }
        }
        Ok(Self {
            tickers,
            calendar,
            prices,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn row(&self, ticker: &str) -> Option<&[f64]> {
        self.tickers
            .iter()
            .position(|t| t == ticker)
            .map(|i| self.prices[i].as_slice())
    }

    /// Number of tickers.
    pub fn width(&self) -> usize {
        self.tickers.len()
    }

    /// Number of calendar days.
    pub fn days(&self) -> usize {
        self.calendar.len()
    }

    /// Restricts and reorders the panel to `tickers`.
    pub fn select(&self, tickers: &[String]) -> Result<Self> {
        let mut rows = Vec::with_capacity(tickers.len());
        for t in tickers {
            let i = self
                .tickers
                .iter()
                .position(|x| x == t)
                .ok_or_else(|| Error::UnknownTicker(t.clone()))?;
            rows.push(self.prices[i].clone());
        }
        Self::new(tickers.to_vec(), self.calendar.clone(), rows)
    }

    /// Flattens back to records, ticker-major.
    pub fn to_records(&self) -> RecordSet {
        let records = self
            .tickers
            .iter()
            .zip(&self.prices)
            .flat_map(|(t, row)| {
                self.calendar.iter().zip(row).map(|(&date, &close)| PriceRecord {
                    date,
                    ticker: t.clone(),
                    close,
                })
            })
            .collect();
        RecordSet { records }
    }
}

/// A ticker removed during alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedTicker {
    pub ticker: String,
    pub missing: usize,
    pub coverage: Coverage,
}

impl fmt::Display for DroppedTicker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "DROPPED {} missing={} first={} last={}",
            self.ticker,
            self.missing,
            self.coverage.first.format(DATE_FORMAT),
            self.coverage.last.format(DATE_FORMAT)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub panel: PricePanel,
    pub dropped: Vec<DroppedTicker>,
}

impl Alignment {
    /// Drop report, one line per removed ticker.
    pub fn drop_report(&self) -> String {
        self.dropped.iter().map(|d| format!("{d}\n")).collect()
    }
}

/// Aligns records onto the inclusive daily calendar `start..=end`.
///
/// Tickers are kept in the order of their first appearance in `records`.
pub fn align_panel(records: &RecordSet, start: NaiveDate, end: NaiveDate) -> Result<Alignment> {
    if start >= end {
        return Err(Error::InvalidRange { start, end });
    }
    let calendar: Vec<NaiveDate> = start.iter_days().take_while(|d| *d <= end).collect();
    let day_index = |d: NaiveDate| (d - start).num_days() as usize;

    let mut order: Vec<&str> = Vec::new();
    let mut rows: HashMap<&str, Vec<Option<f64>>> = HashMap::new();
    for r in records.records() {
        let row = rows.entry(r.ticker.as_str()).or_insert_with(|| {
            order.push(r.ticker.as_str());
            vec![None; calendar.len()]
        });
        if r.date >= start && r.date <= end {
            row[day_index(r.date)] = Some(r.close);
        }
    }

    let coverage = records.coverage();
    let mut tickers = Vec::new();
    let mut prices = Vec::new();
    let mut dropped = Vec::new();
    for t in order {
        let row = &rows[t];
        let missing = row.iter().filter(|p| p.is_none()).count();
        if missing == 0 {
            tickers.push(t.to_string());
            prices.push(row.iter().map(|p| p.unwrap_or_default()).collect());
        } else {
            dropped.push(DroppedTicker {
                ticker: t.to_string(),
                missing,
                coverage: coverage[t],
            });
        }
    }
    if tickers.is_empty() {
        return Err(Error::EmptyPanel { start, end });
    }
    Ok(Alignment {
        panel: PricePanel::new(tickers, calendar, prices)?,
        dropped,
    })
}

/// Tickers grouped into equally sized market-cap buckets (deciles).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecileMap {
    /// Tickers in descending market-cap order; bucket k holds positions
    /// `k*group_size..(k+1)*group_size`.
    ordering: Vec<String>,
    group_size: usize,
}

/// Splits a market-cap ordered ticker list into consecutive groups of `group_size`.
pub fn assign_deciles(tickers_by_cap: &[String], group_size: usize) -> Result<DecileMap> {
    if group_size == 0 || tickers_by_cap.is_empty() || tickers_by_cap.len() % group_size != 0 {
        return Err(Error::IndivisibleGroups {
            count: tickers_by_cap.len(),
            group_size,
        });
    }
    let mut seen = std::collections::HashSet::new();
    for t in tickers_by_cap {
        if !seen.insert(t.as_str()) {
            return Err(Error::DuplicateTicker(t.clone()));
        }
    }
    Ok(DecileMap {
        ordering: tickers_by_cap.to_vec(),
        group_size,
    })
}

impl DecileMap {
    /// Builds the map from explicit `(ticker, decile)` pairs, deciles numbered from 1.
    pub fn from_assignments(pairs: &[(String, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidSectors("no assignments".into()));
        }
        let count = pairs.iter().map(|(_, d)| *d).max().unwrap_or(0);
        let mut groups: Vec<Vec<String>> = vec![Vec::new(); count];
        for (ticker, decile) in pairs {
            if *decile == 0 {
                return Err(Error::InvalidSectors(format!("{ticker}: deciles are numbered from 1")));
            }
            groups[decile - 1].push(ticker.clone());
        }
        let group_size = groups[0].len();
        if let Some((k, g)) = groups.iter().enumerate().find(|(_, g)| g.len() != group_size) {
            return Err(Error::InvalidSectors(format!(
                "decile {} has {} tickers, decile 1 has {group_size}",
                k + 1,
                g.len()
            )));
        }
        assign_deciles(&groups.concat(), group_size)
    }

    /// Reads either a `ticker,decile` table or a single-column ordered `ticker` list.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let ticker_col = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case("ticker"))
            .ok_or(Error::MalformedRow {
                line: 1,
                field: "ticker",
                reason: "header is missing column `ticker`".into(),
            })?;
        let decile_col = headers.iter().position(|h| h.eq_ignore_ascii_case("decile"));

        let mut pairs = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let ticker = row.get(ticker_col).unwrap_or_default().to_string();
            if ticker.is_empty() {
                return Err(Error::MalformedRow {
                    line,
                    field: "ticker",
                    reason: "missing value".into(),
                });
            }
            let decile = match decile_col {
                Some(c) => {
                    let raw = row.get(c).unwrap_or_default();
                    raw.parse::<usize>().map_err(|_| Error::MalformedRow {
                        line,
                        field: "decile",
                        reason: format!("`{raw}` is not a positive integer"),
                    })?
                }
                None => 0,
            };
            pairs.push((ticker, decile));
        }
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if decile_col.is_some() {
            Self::from_assignments(&pairs)
        } else {
            let tickers: Vec<String> = pairs.into_iter().map(|(t, _)| t).collect();
            assign_deciles(&tickers, DEFAULT_GROUP_SIZE)
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn ordering(&self) -> &[String] {
        &self.ordering
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn decile_count(&self) -> usize {
        self.ordering.len() / self.group_size
    }

    /// 1-based decile of `ticker`.
    pub fn decile_of(&self, ticker: &str) -> Option<usize> {
        self.ordering
            .iter()
            .position(|t| t == ticker)
            .map(|i| i / self.group_size + 1)
    }

    pub fn groups(&self) -> impl Iterator<Item = &[String]> {
        self.ordering.chunks(self.group_size)
    }

    /// Resolves each decile to row indices of `tickers`; every ticker must be assigned exactly once.
    pub fn resolve(&self, tickers: &[String]) -> Result<Sectors> {
        if tickers.len() != self.ordering.len() {
            return Err(Error::InvalidSectors(format!(
                "{} tickers in the data but {} in the decile map",
                tickers.len(),
                self.ordering.len()
            )));
        }
        let index: HashMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let groups = self
            .groups()
            .map(|g| {
                g.iter()
                    .map(|t| index.get(t.as_str()).copied().ok_or_else(|| Error::UnknownTicker(t.clone())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Sectors::new(groups, tickers.len())
    }
}

/// Reference bucket size: ten deciles of four tickers.
pub const DEFAULT_GROUP_SIZE: usize = 4;

/// Deciles resolved to row indices of a returns matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sectors {
    groups: Vec<Vec<usize>>,
}

impl Sectors {
    pub fn new(groups: Vec<Vec<usize>>, rows: usize) -> Result<Self> {
        let size = groups.first().map_or(0, Vec::len);
        if groups.is_empty() || size == 0 {
            return Err(Error::InvalidSectors("need at least one non-empty sector".into()));
        }
        let mut seen = vec![false; rows];
        for g in &groups {
            if g.len() != size {
                return Err(Error::InvalidSectors("sectors must have equal size".into()));
            }
            for &i in g {
                if i >= rows || seen[i] {
                    return Err(Error::InvalidSubset { index: i, rows });
                }
                seen[i] = true;
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn count(&self) -> usize {
        self.groups.len()
    }

    pub fn size(&self) -> usize {
        self.groups[0].len()
    }
}

/// Daily log returns, one row per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    tickers: Vec<String>,
    /// Day on which each return column ends.
    dates: Vec<NaiveDate>,
    values: Vec<Vec<f64>>,
}

impl ReturnsMatrix {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, values: Vec<Vec<f64>>) -> Result<Self> {
        if tickers.len() != values.len() || tickers.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "{} return rows for {} tickers",
                values.len(),
                tickers.len()
            )));
        }
        for (t, row) in tickers.iter().zip(&values) {
            if row.len() != dates.len() {
                return Err(Error::InvalidConfig(format!(
                    "{t} has {} returns for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{t} has a non-finite return")));
            }
        }
        Ok(Self { tickers, dates, values })
    }

    /// Rows with a plain daily calendar starting on 2000-01-02, for synthetic data.
    pub fn from_rows(tickers: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let len = values.first().map_or(0, Vec::len);
        let origin = NaiveDate::from_ymd_opt(2000, 1, 2).expect("valid date");
        let dates = origin.iter_days().take(len).collect();
        Self::new(tickers, dates, values)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.tickers.len()
    }

    pub fn columns(&self) -> usize {
        self.dates.len()
    }
}

/// `r_i(t) = ln(c_i(t) / c_i(t-1))` for every ticker.
pub fn log_returns(panel: &PricePanel) -> ReturnsMatrix {
    let values = panel
        .prices()
        .iter()
        .map(|row| row.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        .collect();
    ReturnsMatrix {
        tickers: panel.tickers().to_vec(),
        dates: panel.calendar()[1..].to_vec(),
        values,
    }
}
