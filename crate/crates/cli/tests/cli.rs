//! End-to-end runs of the `marketmode` binary on small synthetic markets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use marketmode::synthetic::{prices_from_returns, sector_returns};
use tempfile::TempDir;

const START: &str = "2021-01-01";
const END: &str = "2021-04-30";

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Four sectors of two tickers, 120 days, plus a config using a 30-day window.
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let returns = sector_returns(4, 2, 119, 1.0, 0.7, 3).unwrap();
        let panel = prices_from_returns(&returns, NaiveDate::parse_from_str(START, "%Y-%m-%d").unwrap()).unwrap();
        let mut csv = String::from("date,ticker,close\n");
        for r in panel.to_records().records() {
            csv.push_str(&format!("{},{},{}\n", r.date, r.ticker, r.close));
        }
        fs::write(dir.path().join("prices.csv"), csv).unwrap();
        let deciles: String = std::iter::once("ticker,decile\n".to_string())
            .chain((0..8).map(|i| format!("S{i:02},{}\n", i / 2 + 1)))
            .collect();
        fs::write(dir.path().join("deciles.csv"), deciles).unwrap();
        fs::write(
            dir.path().join("config.toml"),
            format!(
                "clusters = 2\n\n[analysis]\nwindow = 30\ndraws = 3\nmaster_seed = 5\nstart = \"{START}\"\nend = \"{END}\"\n\n\
                 [paths]\nprices = \"prices.csv\"\ndeciles = \"deciles.csv\"\nrun_dir = \"run\"\n"
            ),
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_marketmode"));
        cmd.arg("--config").arg(self.path("config.toml")).args(args);
        cmd.env_remove("MARKETMODE_CONFIG");
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.path(rel)).unwrap()
    }

    fn full_run(&self, extra: &[&str]) {
        for stage in [&["ingest"][..], &["spectra"], &["sample"], &["cluster"], &["report"]] {
            let args: Vec<&str> = stage.iter().chain(extra).copied().collect();
            self.ok(&args);
        }
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn digests(manifest: &Path) -> serde_json::Value {
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    m["stages"].clone()
}

#[test]
fn version_names_the_file_format() {
    let out = Command::new(env!("CARGO_BIN_EXE_marketmode")).arg("--version").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(env!("CARGO_PKG_VERSION")) && text.contains("file formats v1"), "{text}");
}

#[test]
fn empty_prices_file_is_a_usage_error() {
    let f = Fixture::new();
    fs::write(f.path("prices.csv"), "").unwrap();
    let out = f.run(&["ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty"), "{}", stderr(&out));
}

#[test]
fn ticker_with_a_gap_is_dropped_and_reported() {
    let f = Fixture::new();
    let mut prices = f.read("prices.csv");
    prices.push_str("2021-01-01,GAP,1.0\n2021-01-03,GAP,1.1\n");
    fs::write(f.path("prices.csv"), prices).unwrap();
    f.ok(&["ingest"]);
    let report = f.read("run/ingest/drop_report.txt");
    assert!(report.contains("DROPPED GAP missing="), "{report}");
    let panel = f.read("run/ingest/panel.csv");
    assert!(!panel.lines().next().unwrap().contains("GAP"));
    assert_eq!(panel.lines().count(), 121);
}

#[test]
fn zero_clusters_is_a_usage_error() {
    let f = Fixture::new();
    let out = f.run(&["cluster", "-k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn too_many_clusters_is_a_usage_error() {
    let f = Fixture::new();
    f.ok(&["ingest"]);
    f.ok(&["sample", "--max-sectors", "1", "--max-per-sector", "2"]);
    let out = f.run(&["cluster", "-k", "3"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn two_trajectories_merge_once() {
    let f = Fixture::new();
    fs::write(
        f.path("two.csv"),
        "m,n,t_end_date,lambda_median\n1,1,2021-01-02,1.0\n1,1,2021-01-03,1.0\n1,2,2021-01-02,0.5\n1,2,2021-01-03,0.7\n",
    )
    .unwrap();
    let two = f.path("two.csv");
    f.ok(&["cluster", "--trajectories", two.to_str().unwrap(), "-k", "1"]);
    let merges = f.read("run/cluster/merges.csv");
    let rows: Vec<&str> = merges.lines().collect();
    assert_eq!(rows.len(), 2, "{merges}");
    assert_eq!(rows[1], "0,0,1,0.4,2");
    let cut = f.read("run/cluster/flat_cut.csv");
    assert!(cut.contains("1,1,0") && cut.contains("1,2,0"), "{cut}");
}

#[test]
fn small_grid_has_four_entries() {
    let f = Fixture::new();
    f.ok(&["ingest"]);
    let t0 = std::time::Instant::now();
    f.ok(&["sample", "--draws", "1", "--max-sectors", "2", "--max-per-sector", "2"]);
    assert!(t0.elapsed().as_secs() < 30);
    let table = f.read("run/sample/mu_table.csv");
    assert_eq!(table.lines().count(), 1 + 4, "{table}");
    assert!(table.lines().nth(1).unwrap().starts_with("1,1,1"), "{table}");
}

#[test]
fn report_names_missing_stages() {
    let f = Fixture::new();
    f.ok(&["ingest"]);
    f.ok(&["spectra"]);
    let out = f.run(&["report"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("missing stage outputs") && err.contains("sample") && err.contains("cluster"), "{err}");
    assert!(!err.contains("spectra"), "{err}");
}

#[test]
fn report_detects_edited_outputs() {
    let f = Fixture::new();
    f.full_run(&[]);
    fs::write(f.path("run/sample/mu_table.csv"), "m,n,mu\n").unwrap();
    let out = f.run(&["report"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("mu_table.csv"), "{}", stderr(&out));
}

#[test]
fn full_run_writes_every_artifact() {
    let f = Fixture::new();
    f.ok(&["ingest"]);
    f.ok(&["spectra", "--charts"]);
    f.ok(&["sample"]);
    f.ok(&["cluster"]);
    f.ok(&["report"]);
    for file in [
        "ingest/panel.csv",
        "ingest/deciles.csv",
        "spectra/ALL.csv",
        "spectra/DECILE_4.csv",
        "spectra/lambda1.svg",
        "spectra/uniformity.svg",
        "sample/mu_table.txt",
        "sample/trajectories.csv",
        "sample/greedy_path.csv",
        "cluster/dendrogram.nwk",
        "cluster/flat_cut.csv",
        "report.md",
        "manifest.json",
    ] {
        assert!(f.path("run").join(file).exists(), "{file} missing");
    }
    let all = f.read("run/spectra/ALL.csv");
    assert_eq!(all.lines().next().unwrap(), "t_end_date,lambda1_tilde,h,degenerate_flag");
    assert_eq!(all.lines().count(), 1 + 119 - 30 + 1);
    let greedy = f.read("run/sample/greedy_path.csv");
    assert_eq!(greedy.lines().next().unwrap(), "step,m,n,mu,move");
    assert!(greedy.lines().nth(1).unwrap().starts_with("0,1,1,1,start"), "{greedy}");
    let report = f.read("run/report.md");
    for needle in ["(1,1)", "Greedy", "Cluster"] {
        assert!(report.contains(needle), "report lacks {needle}:\n{report}");
    }
    let cut = f.read("run/cluster/flat_cut.csv");
    assert_eq!(cut.lines().count(), 1 + 8);
}

#[test]
fn same_seed_gives_identical_digests() {
    let a = Fixture::new();
    let b = Fixture::new();
    a.full_run(&[]);
    b.full_run(&[]);
    assert_eq!(digests(&a.path("run/manifest.json")), digests(&b.path("run/manifest.json")));
    let c = Fixture::new();
    c.full_run(&[]);
    c.ok(&["sample", "--seed", "6"]);
    let sample = |f: &Fixture| f.read("run/sample/trajectories.csv");
    assert_ne!(sample(&a), sample(&c));
}

#[test]
fn config_path_from_environment() {
    let f = Fixture::new();
    let out = Command::new(env!("CARGO_BIN_EXE_marketmode"))
        .arg("ingest")
        .env("MARKETMODE_CONFIG", f.path("config.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(f.path("run/ingest/panel.csv").exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let f = Fixture::new();
    let mut text = f.read("config.toml");
    text.insert_str(0, "windw = 3\n");
    fs::write(f.path("config.toml"), text).unwrap();
    assert_eq!(f.run(&["ingest"]).status.code(), Some(2));
}

#[test]
fn unknown_scope_is_a_usage_error() {
    let f = Fixture::new();
    assert_eq!(f.run(&["spectra", "--scopes", "sectors"]).status.code(), Some(2));
}
