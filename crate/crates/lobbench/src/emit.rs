//! Writes a report and its plot data to a directory.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use lobbench_core::impact::EventClass;

use crate::model_io;
use crate::report::{AblationRow, BenchmarkRun, BenchmarkReport};

/// Keeps `[A-Za-z0-9_-.]`, replaces everything else with `_`.
pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "_-.".contains(c) { c } else { '_' }).collect()
}

fn csv_at(path: &Path) -> io::Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(io::Error::other)
}

fn rows<I, R>(path: &Path, header: &[&str], it: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv_at(path)?;
    w.write_record(header).map_err(io::Error::other)?;
    for r in it {
        w.write_record(r).map_err(io::Error::other)?;
    }
    w.flush()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serialised report, pretty-printed with a trailing newline.
pub fn report_json(report: &BenchmarkReport) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(report).expect("report serialises");
    v.push(b'\n');
    v
}

/// Writes every output file into `dir` (created if needed) and returns the
/// paths written.
pub fn emit(run: &BenchmarkRun, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut push = |p: PathBuf| {
        written.push(p.clone());
        p
    };
    let report = &run.report;

    fs::write(push(dir.join("report.json")), report_json(report))?;

    for h in &run.artifacts.histograms {
        let p = push(dir.join(format!("hist_{}.csv", file_stem(&h.score))));
        rows(
            &p,
            &["bin_low", "bin_high", "real_mass", "gen_mass"],
            (0..h.real_mass.len()).map(|k| {
                [h.edges[k], h.edges[k + 1], h.real_mass[k], h.gen_mass[k]].map(|x| x.to_string())
            }),
        )?;
    }

    for s in report.scores.iter().filter(|s| !s.horizon.is_empty()) {
        let p = push(dir.join(format!("divergence_{}.csv", file_stem(&s.spec.name))));
        let mut recs = Vec::new();
        for c in &s.horizon {
            for pt in &c.points {
                let r = pt.result.as_ref();
                let ci = r.and_then(|r| r.ci);
                recs.push([
                    c.metric.name().to_string(),
                    pt.start.to_string(),
                    pt.end.to_string(),
                    pt.n_gen.to_string(),
                    opt(r.map(|r| r.value)),
                    opt(ci.map(|c| c.0)),
                    opt(ci.map(|c| c.1)),
                ]);
            }
        }
        rows(&p, &["metric", "step_start", "step_end", "n_gen", "value", "ci_low", "ci_high"], recs)?;
    }

    for c in &report.conditionals {
        let p = push(dir.join(format!("conditional_{}.csv", file_stem(&c.name))));
        let mut recs = Vec::new();
        for r in &c.results {
            for b in &r.buckets {
                recs.push([
                    r.metric.name().to_string(),
                    b.low.to_string(),
                    b.high.to_string(),
                    b.weight.to_string(),
                    b.n_real.to_string(),
                    b.n_gen.to_string(),
                    b.value.to_string(),
                    b.insufficient.to_string(),
                ]);
            }
        }
        rows(&p, &["metric", "bucket_low", "bucket_high", "weight", "n_real", "n_gen", "value", "insufficient"], recs)?;
    }

    if let Some(imp) = &report.impact {
        for class in EventClass::ALL {
            let p = push(dir.join(format!("impact_{}.csv", class.name())));
            let mut recs = Vec::new();
            for (dataset, curves) in [("real", &imp.real), ("generated", &imp.generated)] {
                for c in curves.iter().filter(|c| c.class == class) {
                    for i in 0..c.lags.len() {
                        recs.push([
                            dataset.to_string(),
                            c.lags[i].to_string(),
                            c.values[i].to_string(),
                            c.ci[i].0.to_string(),
                            c.ci[i].1.to_string(),
                            c.counts[i].to_string(),
                        ]);
                    }
                }
            }
            rows(&p, &["dataset", "lag", "value", "ci_low", "ci_high", "count"], recs)?;
        }
    }

    let metrics: Vec<_> = report.aggregates.iter().map(|a| a.metric).collect();
    if !metrics.is_empty() {
        let p = push(dir.join("spider.csv"));
        let mut header = vec![String::from("score")];
        header.extend(metrics.iter().map(|m| format!("neg_{}", m.name())));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let recs = report.scores.iter().map(|s| {
            let mut r = vec![s.spec.name.clone()];
            r.extend(metrics.iter().map(|&m| opt(s.divergence(m).map(|d| -d.value))));
            r
        });
        rows(&p, &header, recs)?;
    }

    let ablation: Vec<AblationRow> = report
        .scores
        .iter()
        .flat_map(|s| {
            s.ablation.iter().map(|a| AblationRow { score: s.spec.name.clone(), factor: a.factor, l1: a.value, n_bins: a.n_bins })
        })
        .collect();
    if !ablation.is_empty() {
        write_ablation(&push(dir.join("ablation.csv")), &ablation)?;
    }

    if !run.artifacts.roc.is_empty() {
        let p = push(dir.join("roc.csv"));
        rows(&p, &["fpr", "tpr"], run.artifacts.roc.iter().map(|(f, t)| [f.to_string(), t.to_string()]))?;
    }
    if !run.artifacts.logits.is_empty() {
        let p = push(dir.join("logits.csv"));
        rows(
            &p,
            &["sequence_id", "label", "split", "logit"],
            run.artifacts.logits.iter().map(|l| {
                [
                    l.sequence_id.clone(),
                    if l.label { "real" } else { "generated" }.to_string(),
                    if l.test { "test" } else { "train" }.to_string(),
                    l.logit.to_string(),
                ]
            }),
        )?;
    }
    if let Some(m) = &run.artifacts.model {
        let p = push(dir.join("discriminator.bin"));
        let mut f = BufWriter::new(File::create(&p)?);
        model_io::write_model(&mut f, m)?;
        f.flush()?;
    }
    Ok(written)
}

pub fn write_ablation(path: &Path, rows_in: &[AblationRow]) -> io::Result<()> {
    rows(
        path,
        &["score", "factor", "l1", "n_bins"],
        rows_in.iter().map(|r| [r.score.clone(), r.factor.to_string(), r.l1.to_string(), r.n_bins.to_string()]),
    )
}
