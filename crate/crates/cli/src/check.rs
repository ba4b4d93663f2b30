//! Round-trip self-check: every file is parsed, re-serialized and parsed
//! again, and the two parses must agree.

use std::path::{Path, PathBuf};

use amr_core::embeddings::{read_store, write_store};
use amr_core::manifest::{read_manifest, read_manifest_from, write_manifest_to};
use amr_core::metrics::MetricReport;
use amr_core::predictions::{read_predictions, read_predictions_from, write_predictions_to};
use anyhow::{bail, Context};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::evaluation::SedReport;
use crate::Failure;

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_name = "FILE")]
    manifest: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    predictions: Vec<PathBuf>,
    /// MetricReport JSON written by `eval`.
    #[arg(long, value_name = "FILE")]
    report: Vec<PathBuf>,
    /// JSON written by `sed-eval`, single or sweep.
    #[arg(long, value_name = "FILE")]
    sed_report: Vec<PathBuf>,
    /// Embedding store payload (`*.emb`).
    #[arg(long, value_name = "FILE")]
    store: Vec<PathBuf>,
    /// Run configuration, including `tune` output.
    #[arg(long = "run-config", value_name = "FILE")]
    run_config: Vec<PathBuf>,
}

fn json_round_trip<T: Serialize + DeserializeOwned + PartialEq>(path: &Path) -> anyhow::Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first: T =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let second: T = serde_json::from_str(&serde_json::to_string(&first)?)?;
    if first != second {
        bail!("{}: re-serialized content differs", path.display());
    }
    Ok(())
}

#[derive(Serialize, serde::Deserialize, PartialEq)]
#[serde(untagged)]
enum SedOutput {
    One(SedReport),
    Sweep(Vec<SedReport>),
}

pub fn run(args: &CheckArgs) -> anyhow::Result<()> {
    let mut checked = 0;
    for p in &args.manifest {
        let items = read_manifest(p)?;
        let mut buf = Vec::new();
        write_manifest_to(&items, &mut buf)?;
        if read_manifest_from(&buf[..], p)? != items {
            bail!("{}: manifest does not round-trip", p.display());
        }
        println!("ok manifest {} ({} items)", p.display(), items.len());
        checked += 1;
    }
    for p in &args.predictions {
        let rows = read_predictions(p)?;
        let mut buf = Vec::new();
        write_predictions_to(&rows, &mut buf)?;
        if read_predictions_from(&buf[..], p)? != rows {
            bail!("{}: predictions do not round-trip", p.display());
        }
        println!("ok predictions {} ({} rows)", p.display(), rows.len());
        checked += 1;
    }
    for p in &args.report {
        json_round_trip::<MetricReport>(p)?;
        println!("ok report {}", p.display());
        checked += 1;
    }
    for p in &args.sed_report {
        json_round_trip::<SedOutput>(p)?;
        println!("ok sed report {}", p.display());
        checked += 1;
    }
    for p in &args.store {
        let store = read_store(p)?;
        let dir = std::env::temp_dir().join(format!("amr-check-{}", std::process::id()));
        let copy = dir.join("copy.emb");
        write_store(&store, &copy)?;
        let same_bytes = std::fs::read(&copy)? == std::fs::read(p)?;
        let same = read_store(&copy)? == store;
        let _ = std::fs::remove_dir_all(&dir);
        if !(same && same_bytes) {
            bail!("{}: store does not round-trip", p.display());
        }
        println!(
            "ok store {} ({}×{})",
            p.display(),
            store.rows(),
            store.dim()
        );
        checked += 1;
    }
    for p in &args.run_config {
        let cfg = RunConfig::load(Some(p))?;
        if RunConfig::parse(&serde_json::to_string(&cfg)?)? != cfg {
            bail!("{}: configuration does not round-trip", p.display());
        }
        println!("ok config {}", p.display());
        checked += 1;
    }
    if checked == 0 {
        return Err(Failure::Config("nothing to check".into()).into());
    }
    Ok(())
}
