//! The five pipeline stages. Each reads its inputs from the run directory (or explicit
//! paths), writes its outputs under `<run>/<stage>/`, and records them in `stage.json`.

use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use marketmode::cluster::{average_linkage, cut_clusters, distance_matrix};
use marketmode::ingest::{align_panel, load_prices_file, log_returns, DecileMap, PricePanel, ReturnsMatrix, DATE_FORMAT};
use marketmode::sampling::{greedy_path, Grid, SamplingExperiment};
use marketmode::spectra::{rolling_spectra, SpectrumPoint};
use marketmode::Error;

use crate::chart::{line_chart, Series};
use crate::config::RunConfig;
use crate::formats;
use crate::manifest::{self, RunManifest, StageManifest, StageWriter, FileDigest};
use crate::CliError;

pub const STAGES: [&str; 4] = ["ingest", "spectra", "sample", "cluster"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scopes {
    All,
    Deciles,
    Both,
}

fn run_dir(config: &RunConfig) -> &Path {
    &config.paths.run_dir
}

fn panel_path(config: &RunConfig) -> PathBuf {
    run_dir(config).join("ingest/panel.csv")
}

fn deciles_path(config: &RunConfig) -> PathBuf {
    run_dir(config).join("ingest/deciles.csv")
}

fn input_error(path: &Path, err: Error) -> CliError {
    match err {
        Error::EmptyInput => CliError::Usage(format!("{} is empty", path.display())),
        Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => {
            CliError::Usage(format!("{} does not exist", path.display()))
        }
        other => CliError::Runtime(anyhow!(other).context(format!("loading {}", path.display()))),
    }
}

/// What `ingest` produced.
#[derive(Debug)]
pub struct IngestOutcome {
    pub panel: PricePanel,
    pub dropped: Vec<String>,
    pub manifest: StageManifest,
}

pub fn ingest(config: &RunConfig) -> Result<IngestOutcome, CliError> {
    let prices = config
        .paths
        .prices
        .as_deref()
        .ok_or_else(|| CliError::Usage("no prices file given (use --prices or paths.prices)".into()))?;
    let (start, end) = match (config.analysis.start, config.analysis.end) {
        (Some(s), Some(e)) => (s, e),
        _ => return Err(CliError::Usage("both analysis.start and analysis.end are required".into())),
    };
    if start >= end {
        return Err(CliError::Usage(format!("start {start} must precede end {end}")));
    }

    let records = load_prices_file(prices).map_err(|e| input_error(prices, e))?;
    let deciles = match &config.paths.deciles {
        Some(p) => Some(DecileMap::from_file(p).map_err(|e| input_error(p, e))?),
        None => None,
    };

    let mut stage = StageWriter::new(run_dir(config), "ingest")?;
    stage.input("prices", prices)?;
    if let Some(p) = &config.paths.deciles {
        stage.input("deciles", p)?;
    }

    let alignment = align_panel(&records, start, end)?;
    let report = alignment.drop_report();
    stage.write("drop_report.txt", &report)?;

    let panel = match &deciles {
        Some(map) => {
            let missing: Vec<&str> = map
                .ordering()
                .iter()
                .filter(|t| !alignment.panel.tickers().contains(t))
                .map(String::as_str)
                .collect();
            if !missing.is_empty() {
                return Err(CliError::Runtime(anyhow!(
                    "decile tickers without complete data in range: {} (see {})",
                    missing.join(", "),
                    run_dir(config).join("ingest/drop_report.txt").display()
                )));
            }
            for t in alignment.panel.tickers() {
                if map.decile_of(t).is_none() {
                    eprintln!("note: {t} has no decile assignment and is excluded");
                }
            }
            let panel = alignment.panel.select(map.ordering())?;
            stage.write("deciles.csv", &formats::write_deciles(map))?;
            panel
        }
        None => alignment.panel.clone(),
    };
    stage.write("panel.csv", &formats::write_panel(&panel))?;
    let manifest = stage.finish(config)?;

    println!(
        "ingest: {} tickers x {} days ({} to {}), {} dropped",
        panel.width(),
        panel.days(),
        start.format(DATE_FORMAT),
        end.format(DATE_FORMAT),
        alignment.dropped.len()
    );
    Ok(IngestOutcome {
        panel,
        dropped: alignment.dropped.iter().map(|d| d.ticker.clone()).collect(),
        manifest,
    })
}

fn load_returns(config: &RunConfig) -> Result<ReturnsMatrix, CliError> {
    let path = panel_path(config);
    if !path.exists() {
        return Err(CliError::Runtime(anyhow!(
            "missing stage outputs: ingest ({} not found)",
            path.display()
        )));
    }
    Ok(log_returns(&formats::read_panel(&path)?))
}

fn load_deciles(config: &RunConfig) -> Result<Option<DecileMap>, CliError> {
    let path = deciles_path(config);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(DecileMap::from_file(&path).map_err(|e| input_error(&path, e))?))
}

fn check_analysis(config: &RunConfig, returns: &ReturnsMatrix) -> Result<(), CliError> {
    config
        .analysis
        .validate(returns.columns())
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn spectra(config: &RunConfig, scopes: Scopes) -> Result<StageManifest, CliError> {
    let returns = load_returns(config)?;
    check_analysis(config, &returns)?;
    let deciles = load_deciles(config)?;

    let mut targets: Vec<(Option<usize>, Vec<usize>)> = Vec::new();
    if matches!(scopes, Scopes::All | Scopes::Both) {
        targets.push((None, (0..returns.rows()).collect()));
    }
    if matches!(scopes, Scopes::Deciles | Scopes::Both) {
        let map = deciles.ok_or_else(|| {
            CliError::Usage("per-decile scopes need a decile file at ingest time".into())
        })?;
        let sectors = map.resolve(returns.tickers())?;
        for (k, group) in sectors.groups().iter().enumerate() {
            targets.push((Some(k + 1), group.clone()));
        }
    }

    let mut stage = StageWriter::new(run_dir(config), "spectra")?;
    stage.input("ingest/panel.csv", &panel_path(config))?;
    let window = config.analysis.window;
    let mut series: Vec<(String, Vec<SpectrumPoint>)> = Vec::new();
    for (decile, subset) in targets {
        let points = rolling_spectra(&returns, &subset, window, config.analysis.variance_floor)?;
        let name = formats::scope_name(decile);
        stage.write(&format!("{name}.csv"), &formats::write_spectrum(&points, returns.dates()))?;
        series.push((name, points));
    }

    if config.charts {
        let first = returns.dates()[window - 1].format(DATE_FORMAT).to_string();
        let last = returns.dates()[returns.columns() - 1].format(DATE_FORMAT).to_string();
        let lambda: Vec<Vec<f64>> = series.iter().map(|(_, p)| p.iter().map(|x| x.lambda1_tilde).collect()).collect();
        let h: Vec<Vec<f64>> = series.iter().map(|(_, p)| p.iter().map(|x| x.h).collect()).collect();
        let to_series = |values: &'_ [Vec<f64>]| -> Vec<(String, Vec<f64>)> {
            series.iter().zip(values).map(|((n, _), v)| (n.clone(), v.clone())).collect()
        };
        for (file, title, values) in [
            ("lambda1.svg", "Normalized leading eigenvalue", to_series(&lambda)),
            ("uniformity.svg", "Leading eigenvector uniformity h", to_series(&h)),
        ] {
            let refs: Vec<Series<'_>> = values.iter().map(|(n, v)| Series { name: n, values: v }).collect();
            stage.write(file, &line_chart(title, (&first, &last), &refs, 0.0, 1.0))?;
        }
    }

    let manifest = stage.finish(config)?;
    println!("spectra: {} scopes x {} windows", series.len(), series.first().map_or(0, |s| s.1.len()));
    Ok(manifest)
}

pub fn sample(config: &RunConfig) -> Result<StageManifest, CliError> {
    let returns = load_returns(config)?;
    check_analysis(config, &returns)?;
    let map = load_deciles(config)?
        .ok_or_else(|| CliError::Usage("sampling needs a decile file at ingest time".into()))?;
    let sectors = map.resolve(returns.tickers())?;
    let full = Grid::full(&sectors);
    let grid = Grid {
        sectors: if config.max_sectors == 0 { full.sectors } else { config.max_sectors },
        per_sector: if config.max_per_sector == 0 { full.per_sector } else { config.max_per_sector },
    };
    if grid.sectors > full.sectors || grid.per_sector > full.per_sector {
        return Err(CliError::Usage(format!(
            "grid {}x{} exceeds the {}x{} available",
            grid.sectors, grid.per_sector, full.sectors, full.per_sector
        )));
    }

    let experiment = SamplingExperiment::new(&returns, &sectors, &config.analysis)?;
    let run = experiment.run(grid)?;
    let path = greedy_path(&run.table, config.epsilon, config.tie_break);

    let mut stage = StageWriter::new(run_dir(config), "sample")?;
    stage.input("ingest/panel.csv", &panel_path(config))?;
    stage.input("ingest/deciles.csv", &deciles_path(config))?;
    stage.write("mu_table.txt", &formats::write_mu_grid(&run.table))?;
    stage.write("mu_table.csv", &formats::write_mu_csv(&run.table))?;
    stage.write(
        "trajectories.csv",
        &formats::write_trajectories(&run.trajectories, returns.dates(), config.analysis.window),
    )?;
    stage.write("greedy_path.csv", &formats::write_greedy(&path))?;
    stage.write("greedy_path.json", &(serde_json::to_string_pretty(&path).context("greedy path")? + "\n"))?;
    let manifest = stage.finish(config)?;

    println!(
        "sample: {} portfolios x {} draws, greedy path ends at {} ({})",
        grid.len(),
        config.analysis.draws,
        path.steps.last().expect("path has a start").spec,
        path.stop
    );
    Ok(manifest)
}

pub fn cluster(config: &RunConfig, trajectories: Option<&Path>) -> Result<StageManifest, CliError> {
    let default = run_dir(config).join("sample/trajectories.csv");
    let source = trajectories.unwrap_or(&default);
    if !source.exists() {
        return Err(if trajectories.is_some() {
            CliError::Usage(format!("{} does not exist", source.display()))
        } else {
            CliError::Runtime(anyhow!("missing stage outputs: sample ({} not found)", source.display()))
        });
    }
    let trajectories = formats::read_trajectories(source)?;
    let k = config.clusters;
    if k == 0 || k > trajectories.len() {
        return Err(CliError::Usage(format!(
            "cluster count {k} must lie in 1..={}",
            trajectories.len()
        )));
    }
    let dist = distance_matrix(&trajectories)?;
    let tree = average_linkage(&dist);
    let ids = cut_clusters(&tree, k)?;

    let mut stage = StageWriter::new(run_dir(config), "cluster")?;
    stage.input("trajectories", source)?;
    stage.write("distance_matrix.csv", &formats::write_distances(&dist))?;
    stage.write("merges.csv", &formats::write_merges(&tree))?;
    stage.write("dendrogram.nwk", &(tree.to_newick() + "\n"))?;
    stage.write("flat_cut.csv", &formats::write_flat_cut(dist.labels(), &ids))?;
    let manifest = stage.finish(config)?;
    println!("cluster: {} trajectories, {} merges, cut into {k}", dist.len(), tree.merges().len());
    Ok(manifest)
}

/// Checks every stage's outputs against its manifest and writes `report.md` and `manifest.json`.
pub fn report(config: &RunConfig) -> Result<RunManifest, CliError> {
    let dir = run_dir(config);
    let missing: Vec<&str> = STAGES
        .iter()
        .copied()
        .filter(|s| !dir.join(s).join(manifest::STAGE_FILE).exists())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Runtime(anyhow!("missing stage outputs: {}", missing.join(", "))));
    }
    let stages = STAGES
        .iter()
        .map(|s| manifest::read_stage(dir, s))
        .collect::<anyhow::Result<Vec<_>>>()?;
    for stage in &stages {
        for FileDigest { path, sha256 } in &stage.outputs {
            let actual = manifest::digest_file(&dir.join(path))?;
            if &actual != sha256 {
                return Err(CliError::Runtime(anyhow!("{path} changed since the {} stage wrote it", stage.stage)));
            }
        }
    }

    let sampled = &stages.iter().find(|s| s.stage == "sample").expect("checked above").config.analysis;
    let read = |rel: &str| fs::read_to_string(dir.join(rel)).with_context(|| format!("reading {rel}"));
    let mut md = String::from("# Market structure report\n\n");
    writeln!(md, "Tool version {} (formats v{}), master seed {}.\n", manifest::TOOL_VERSION, formats::FORMAT_VERSION, sampled.master_seed).unwrap();
    let a = sampled;
    writeln!(md, "Window {} days, {} draws per portfolio, variance floor {:e}.\n", a.window, a.draws, a.variance_floor).unwrap();

    md.push_str("## Panel\n\n");
    let dropped = read("ingest/drop_report.txt")?;
    let panel = formats::read_panel(&dir.join("ingest/panel.csv"))?;
    writeln!(md, "{} tickers over {} days.", panel.width(), panel.days()).unwrap();
    if dropped.is_empty() {
        md.push_str("No tickers dropped.\n\n");
    } else {
        writeln!(md, "\n```\n{dropped}```\n").unwrap();
    }

    md.push_str("## Spectra\n\n");
    let spectra = stages.iter().find(|s| s.stage == "spectra").expect("checked above");
    for out in &spectra.outputs {
        writeln!(md, "- `{}`", out.path).unwrap();
    }

    md.push_str("\n## Mean median collectivity mu(m, n)\n\n```\n");
    md.push_str(&read("sample/mu_table.txt")?);
    md.push_str("```\n\n## Greedy path\n\n");
    let path: serde_json::Value = serde_json::from_str(&read("sample/greedy_path.json")?).context("greedy path")?;
    md.push_str("| step | m | n | mu | move | alternative |\n|---|---|---|---|---|---|\n");
    for (i, s) in path["steps"].as_array().into_iter().flatten().enumerate() {
        let alt = match s["rejected"].as_array() {
            Some(r) => format!("({},{}) = {}{}", r[0]["sectors"], r[0]["per_sector"], r[1], if s["tie"].as_bool() == Some(true) { " (tie)" } else { "" }),
            None => String::new(),
        };
        writeln!(md, "| {i} | {} | {} | {} | {} | {alt} |", s["spec"]["sectors"], s["spec"]["per_sector"], s["mu"], s["mv"].as_str().unwrap_or("")).unwrap();
    }
    writeln!(md, "\nStopped: {} (epsilon {}, ties go to {}).", path["stop"].as_str().unwrap_or("?"), path["epsilon"], path["tie_break"].as_str().unwrap_or("?")).unwrap();
    if let Some(c) = path["stop_candidate"].as_array() {
        writeln!(md, "Best remaining move: ({},{}) with mu = {}.", c[0]["sectors"], c[0]["per_sector"], c[1]).unwrap();
    }

    md.push_str("\n## Clusters\n\n");
    let cut = read("cluster/flat_cut.csv")?;
    let mut groups: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
    for line in cut.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if let [m, n, id] = f[..] {
            groups.entry(id.parse().unwrap_or(0)).or_default().push(format!("({m},{n})"));
        }
    }
    for (id, members) in &groups {
        writeln!(md, "- cluster {id}: {}", members.join(" ")).unwrap();
    }
    md.push_str("\nDendrogram: `cluster/dendrogram.nwk`, merges: `cluster/merges.csv`.\n\n## Outputs\n\n");
    for stage in &stages {
        for out in &stage.outputs {
            writeln!(md, "- `{}` sha256 {}", out.path, out.sha256).unwrap();
        }
    }

    let run = RunManifest {
        tool_version: manifest::TOOL_VERSION.to_string(),
        format_version: formats::FORMAT_VERSION,
        master_seed: sampled.master_seed,
        stages,
    };
    fs::write(dir.join("report.md"), md).context("writing report.md")?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&run).context("manifest")? + "\n")
        .context("writing manifest.json")?;
    println!("report: {}", dir.join("report.md").display());
    Ok(run)
}
