//! On-disk table formats. Floats are written in shortest round-trip form unless noted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use marketmode::cluster::{DistanceMatrix, Dendrogram};
use marketmode::ingest::DATE_FORMAT;
use marketmode::sampling::{GreedyPath, MedianTrajectory, MuTable, PortfolioSpec};
use marketmode::spectra::SpectrumPoint;
use marketmode::{DecileMap, PricePanel};

/// Bumped whenever any file layout below changes.
pub const FORMAT_VERSION: u32 = 1;

fn date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

/// Wide panel: `date,<ticker>...`, one row per day.
pub fn write_panel(panel: &PricePanel) -> String {
    let mut out = String::from("date");
    for t in panel.tickers() {
        write!(out, ",{t}").unwrap();
    }
    out.push('\n');
    for (j, d) in panel.calendar().iter().enumerate() {
        out.push_str(&date(*d));
        for row in panel.prices() {
            write!(out, ",{}", row[j]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_panel(path: &Path) -> Result<PricePanel> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("date") || headers.len() < 2 {
        bail!("{}: expected header `date,<ticker>...`", path.display());
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut calendar = Vec::new();
    let mut prices = vec![Vec::new(); tickers.len()];
    for row in rdr.records() {
        let row = row?;
        calendar.push(NaiveDate::parse_from_str(&row[0], DATE_FORMAT)?);
        for (i, cell) in row.iter().skip(1).enumerate() {
            prices[i].push(cell.parse::<f64>().with_context(|| format!("bad price `{cell}`"))?);
        }
    }
    Ok(PricePanel::new(tickers, calendar, prices)?)
}

/// `ticker,decile` in market-cap order.
pub fn write_deciles(map: &DecileMap) -> String {
    let mut out = String::from("ticker,decile\n");
    for (k, group) in map.groups().enumerate() {
        for t in group {
            writeln!(out, "{t},{}", k + 1).unwrap();
        }
    }
    out
}

pub fn scope_name(decile: Option<usize>) -> String {
    match decile {
        None => "ALL".into(),
        Some(k) => format!("DECILE_{k}"),
    }
}

/// `t_end_date,lambda1_tilde,h,degenerate_flag`.
pub fn write_spectrum(points: &[SpectrumPoint], dates: &[NaiveDate]) -> String {
    let mut out = String::from("t_end_date,lambda1_tilde,h,degenerate_flag\n");
    for p in points {
        writeln!(out, "{},{},{},{}", date(dates[p.end - 1]), p.lambda1_tilde, p.h, u8::from(p.degenerate)).unwrap();
    }
    out
}

/// Table-2 layout: rows `m`, columns `n`, three decimals.
pub fn write_mu_grid(table: &MuTable) -> String {
    let grid = table.grid();
    let mut out = String::from("m\\n");
    for n in 1..=grid.per_sector {
        write!(out, "\t{n}").unwrap();
    }
    out.push('\n');
    for m in 1..=grid.sectors {
        write!(out, "{m}").unwrap();
        for n in 1..=grid.per_sector {
            let mu = table.get(PortfolioSpec::new(m, n)).expect("in grid");
            write!(out, "\t{mu:.3}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Full-precision companion: `m,n,mu`.
pub fn write_mu_csv(table: &MuTable) -> String {
    let mut out = String::from("m,n,mu\n");
    for (spec, mu) in table.iter() {
        writeln!(out, "{},{},{mu}", spec.sectors, spec.per_sector).unwrap();
    }
    out
}

pub fn read_mu_csv(path: &Path) -> Result<MuTable> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: BTreeMap<PortfolioSpec, f64> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let spec = PortfolioSpec::new(row[0].parse()?, row[1].parse()?);
        rows.insert(spec, row[2].parse()?);
    }
    let sectors = rows.keys().map(|s| s.sectors).max().unwrap_or(0);
    let per_sector = rows.keys().map(|s| s.per_sector).max().unwrap_or(0);
    let grid = marketmode::Grid { sectors, per_sector };
    Ok(MuTable::new(grid, rows.into_values().collect())?)
}

/// Long format `m,n,t_end_date,lambda_median`.
pub fn write_trajectories(trajectories: &[MedianTrajectory], dates: &[NaiveDate], window: usize) -> String {
    let mut out = String::from("m,n,t_end_date,lambda_median\n");
    for tr in trajectories {
        for (k, v) in tr.values.iter().enumerate() {
            let d = dates[window - 1 + k];
            writeln!(out, "{},{},{},{v}", tr.spec.sectors, tr.spec.per_sector, date(d)).unwrap();
        }
    }
    out
}

/// Reads trajectories back, checking that every spec covers the same dates.
pub fn read_trajectories(path: &Path) -> Result<Vec<MedianTrajectory>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut series: BTreeMap<PortfolioSpec, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        if row.len() != 4 {
            bail!("{}: row {} has {} fields, expected 4", path.display(), i + 2, row.len());
        }
        let spec = PortfolioSpec::new(row[0].parse()?, row[1].parse()?);
        let d = NaiveDate::parse_from_str(&row[2], DATE_FORMAT)?;
        series.entry(spec).or_default().push((d, row[3].parse()?));
    }
    let mut reference: Option<Vec<NaiveDate>> = None;
    let mut out = Vec::with_capacity(series.len());
    for (spec, mut points) in series {
        points.sort_by_key(|p| p.0);
        let dates: Vec<NaiveDate> = points.iter().map(|p| p.0).collect();
        match &reference {
            None => reference = Some(dates),
            Some(r) if *r != dates => return Err(anyhow!("trajectory {spec} is not aligned with the others")),
            Some(_) => {}
        }
        out.push(MedianTrajectory {
            spec,
            values: points.into_iter().map(|p| p.1).collect(),
            draws: 0,
        });
    }
    if out.is_empty() {
        bail!("{}: no trajectories", path.display());
    }
    Ok(out)
}

/// Ordered records `step,m,n,mu,move`.
pub fn write_greedy(path: &GreedyPath) -> String {
    let mut out = String::from("step,m,n,mu,move\n");
    for (i, s) in path.steps.iter().enumerate() {
        writeln!(out, "{i},{},{},{},{}", s.spec.sectors, s.spec.per_sector, s.mu, s.mv).unwrap();
    }
    out
}

/// Square matrix with a label header row and column.
pub fn write_distances(dist: &DistanceMatrix<PortfolioSpec>) -> String {
    let label = |s: &PortfolioSpec| format!("\"{},{}\"", s.sectors, s.per_sector);
    let mut out = String::from("label");
    for l in dist.labels() {
        write!(out, ",{}", label(l)).unwrap();
    }
    out.push('\n');
    for (i, l) in dist.labels().iter().enumerate() {
        out.push_str(&label(l));
        for j in 0..dist.len() {
            write!(out, ",{}", dist.get(i, j)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// `step,left,right,height,size`; leaves are `0..L`, step `s` creates node `L + s`.
pub fn write_merges<L>(tree: &Dendrogram<L>) -> String {
    let mut out = String::from("step,left,right,height,size\n");
    for (i, m) in tree.merges().iter().enumerate() {
        writeln!(out, "{i},{},{},{},{}", m.left, m.right, m.height, m.size).unwrap();
    }
    out
}

/// `m,n,cluster_id`.
pub fn write_flat_cut(labels: &[PortfolioSpec], ids: &[usize]) -> String {
    let mut out = String::from("m,n,cluster_id\n");
    for (l, id) in labels.iter().zip(ids) {
        writeln!(out, "{},{},{id}", l.sectors, l.per_sector).unwrap();
    }
    out
}
