use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use fusedpmf::dataset::{read_reviews, read_views, write_reviews_jsonl, write_views_tsv, Dataset};
use fusedpmf::evaluation::{comparison_table, generate_synthetic, sweep_k, EvalError, EvalReport, SyntheticSpec};
use fusedpmf::features::{build_channels, Interval};
use fusedpmf::model::{ChannelIntervals, TrainedModel};
use fusedpmf::trainer::{fit, TrainError, TrainTrace};

use crate::config::RunConfig;
use crate::Failure;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(contents.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn ingest(rc: &RunConfig, reviews: &Path, views: Option<&Path>) -> Result<(), Failure> {
    let reviews = read_reviews(reviews).with_context(|| format!("reading {}", reviews.display()))?;
    let views = match views {
        Some(p) => read_views(p).with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let d = Dataset::build(&reviews, &views).context("building dataset")?;
    let path = rc.out.join("dataset.json");
    fs::create_dir_all(&rc.out).with_context(|| format!("creating {}", rc.out.display()))?;
    d.save(&path).with_context(|| format!("writing {}", path.display()))?;

    println!("{:<10} {:>8} {:>8} {:>10} {:>8} {:>10}", "dataset", "users", "items", "reviews", "views", "sparsity");
    println!(
        "{:<10} {:>8} {:>8} {:>10} {:>8} {:>10.6}",
        path.file_stem().unwrap().to_string_lossy(),
        d.n_users(),
        d.n_items(),
        d.n_reviews(),
        d.views().len(),
        d.sparsity()
    );
    Ok(())
}

#[derive(Serialize)]
struct IntervalsFile {
    rating: Interval,
    helpfulness: Interval,
    centrality: Interval,
    view: Interval,
}

pub fn features(rc: &RunConfig, dataset: &Path) -> Result<(), Failure> {
    let d = load_dataset(dataset)?;
    let all: Vec<usize> = (0..d.n_reviews()).collect();
    let channels = build_channels(&d, &all, &rc.experiment.features).context("computing features")?;
    let dir = rc.out.join("features");
    for ch in channels.iter() {
        let path = dir.join(format!("{}.tsv", ch.kind().symbol()));
        let mut out = create(&path)?;
        ch.write_triplets(&d, &mut out).and_then(|()| out.flush()).with_context(|| format!("writing {}", path.display()))?;
    }
    let iv = ChannelIntervals::of(&channels);
    let intervals =
        IntervalsFile { rating: iv.rating, helpfulness: iv.helpfulness, centrality: iv.centrality, view: iv.view };
    write_file(&dir.join("intervals.json"), &(serde_json::to_string_pretty(&intervals).map_err(anyhow::Error::from)? + "\n"))?;
    for ch in channels.iter() {
        println!("{}\t{} entries\t[{}, {}]", ch.kind().symbol(), ch.len(), ch.interval().lo, ch.interval().hi);
    }
    Ok(())
}

fn write_trace(path: &Path, trace: &TrainTrace) -> Result<()> {
    let mut out = create(path)?;
    trace.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// One output directory per K when sweeping, the plain one otherwise.
fn k_dir(rc: &RunConfig, k: usize) -> PathBuf {
    if rc.ks.len() == 1 {
        rc.out.clone()
    } else {
        rc.out.join(format!("k{k}"))
    }
}

pub fn train(rc: &RunConfig, dataset: &Path) -> Result<(), Failure> {
    let d = load_dataset(dataset)?;
    let all: Vec<usize> = (0..d.n_reviews()).collect();
    let channels = build_channels(&d, &all, &rc.experiment.features).context("computing features")?;
    for &k in &rc.ks {
        let dir = k_dir(rc, k);
        let mut config = rc.experiment.train;
        config.hp.k = k;
        match fit(&channels, &config) {
            Ok((factors, trace)) => {
                write_trace(&dir.join("trace.csv"), &trace)?;
                let model = TrainedModel::new(&d, &channels, &all, factors, config.hp).map_err(anyhow::Error::from)?;
                let path = dir.join("checkpoint.json");
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                model.save(&path).with_context(|| format!("writing {}", path.display()))?;
                println!(
                    "K={k}\t{:?} after {} epochs\tobjective {:.6}",
                    trace.termination,
                    trace.n_updates(),
                    trace.final_objective()
                );
            }
            Err(TrainError::Diverged { epoch, reason, trace }) => {
                write_trace(&dir.join("trace.csv"), &trace)?;
                return Err(Failure::Diverged(anyhow!("K={k}: training diverged at epoch {epoch}: {reason}")));
            }
            Err(e) => return Err(Failure::Usage(e.into())),
        }
    }
    Ok(())
}

fn write_report(dir: &Path, d: &Dataset, report: &EvalReport) -> Result<()> {
    write_file(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write_file(&dir.join("report.txt"), &report.to_table())?;
    for (r, trace) in report.traces.iter().enumerate() {
        write_trace(&dir.join(format!("trace_r{}.csv", r + 1)), trace)?;
        let mut out = create(&dir.join(format!("predictions_r{}.tsv", r + 1)))?;
        report.write_predictions(d, r, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

pub fn evaluate(rc: &RunConfig, dataset: &Path) -> Result<(), Failure> {
    let d = load_dataset(dataset)?;
    let reports = match sweep_k(&d, &rc.experiment, &rc.ks) {
        Ok(reports) => reports,
        Err(EvalError::Train { repeat, source: TrainError::Diverged { epoch, reason, trace } }) => {
            write_trace(&rc.out.join(format!("trace_r{}.csv", repeat + 1)), &trace)?;
            return Err(Failure::Diverged(anyhow!("repeat {}: training diverged at epoch {epoch}: {reason}", repeat + 1)));
        }
        Err(e @ (EvalError::Split(_) | EvalError::Feature(_))) => return Err(Failure::Data(e.into())),
        Err(e) => return Err(Failure::Usage(e.into())),
    };
    for report in &reports {
        write_report(&k_dir(rc, report.k), &d, report)?;
        print!("{}", report.to_table());
    }
    if reports.len() > 1 {
        let table = comparison_table(&reports);
        write_file(&rc.out.join("comparison.txt"), &table)?;
        print!("{table}");
    }
    Ok(())
}

pub fn predict(checkpoint: &Path, user: &str, item: &str) -> Result<(), Failure> {
    let model =
        TrainedModel::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let p = model.predict(user, item);
    if p.fallback {
        println!("{}\tfallback", p.rating);
    } else {
        println!("{}", p.rating);
    }
    Ok(())
}

#[derive(Serialize)]
struct PlantedFile<'a> {
    spec: &'a SyntheticSpec,
    planted: &'a fusedpmf::evaluation::PlantedFactors,
}

pub fn synth(rc: &RunConfig) -> Result<(), Failure> {
    let corpus = generate_synthetic(&rc.synthetic).map_err(|e| Failure::Usage(anyhow!(e)))?;
    let mut out = create(&rc.out.join("reviews.jsonl"))?;
    write_reviews_jsonl(&corpus.reviews, &mut out).context("writing reviews")?;
    out.flush().context("writing reviews")?;
    let mut out = create(&rc.out.join("views.tsv"))?;
    write_views_tsv(&corpus.views, &mut out).context("writing views")?;
    out.flush().context("writing views")?;
    let planted = PlantedFile { spec: &rc.synthetic, planted: &corpus.planted };
    write_file(&rc.out.join("planted.json"), &serde_json::to_string(&planted).map_err(anyhow::Error::from)?)?;
    println!("{} reviews, {} views", corpus.reviews.len(), corpus.views.len());
    Ok(())
}
