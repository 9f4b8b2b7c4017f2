use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{bias, pcc, rmse, stratify, Binning, EvalRecord};
use crate::scene::channel;

/// Mean and population standard deviation across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Summary {
            mean,
            std: var.sqrt(),
            runs: values.len(),
        })
    }

    fn text(&self) -> String {
        if self.runs > 1 {
            format!("{:.2} [{:.2}]", self.mean, self.std)
        } else {
            format!("{:.2}", self.mean)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub label: String,
    /// Records in the bin, summed over runs.
    pub n: usize,
    pub bias: Option<Summary>,
    pub rmse: Option<Summary>,
    pub pcc: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub name: String,
    pub channels: Vec<String>,
    pub bins: Vec<BinSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    pub binning: Binning,
    pub columns: Vec<ColumnReport>,
}

/// Display name and run id of an evaluated channel: `wspd_gmf` is `GMF`,
/// `wspd_pred_<model>_<run>` is `<model>` run `<run>`.
pub fn column_label(channel_name: &str) -> (String, Option<String>) {
    if channel_name == channel::WSPD_GMF {
        return ("GMF".to_string(), None);
    }
    match channel_name.strip_prefix(channel::PREDICTION_PREFIX) {
        Some(rest) => match rest.rsplit_once('_') {
            Some((model, run)) => (model.to_string(), Some(run.to_string())),
            None => (rest.to_string(), None),
        },
        None => (channel_name.to_string(), None),
    }
}

/// Bias, RMSE and PCC per bin per column; prediction channels of the same
/// model are summarized across runs.
pub fn build_report(
    title: &str,
    records: &BTreeMap<String, Vec<EvalRecord>>,
    binning: Binning,
) -> Report {
    type Columns<'a> = Vec<(&'a String, &'a Vec<EvalRecord>)>;
    let mut grouped: BTreeMap<(bool, String), Columns> = BTreeMap::new();
    for (name, recs) in records {
        let (label, _) = column_label(name);
        grouped
            .entry((label != "GMF", label))
            .or_default()
            .push((name, recs));
    }
    let columns = grouped
        .into_iter()
        .map(|((_, name), runs)| {
            let per_run: Vec<Vec<Vec<EvalRecord>>> =
                runs.iter().map(|(_, r)| stratify(r, binning)).collect();
            let bins = binning
                .labels()
                .iter()
                .enumerate()
                .map(|(b, label)| {
                    let collect = |f: fn(&[EvalRecord]) -> crate::Result<f64>| {
                        let vals: Vec<f64> = per_run.iter().filter_map(|g| f(&g[b]).ok()).collect();
                        Summary::of(&vals)
                    };
                    BinSummary {
                        label: label.to_string(),
                        n: per_run.iter().map(|g| g[b].len()).sum(),
                        bias: collect(bias),
                        rmse: collect(rmse),
                        pcc: collect(pcc),
                    }
                })
                .collect();
            ColumnReport {
                name,
                channels: runs.iter().map(|(n, _)| n.to_string()).collect(),
                bins,
            }
        })
        .collect();
    Report {
        title: title.to_string(),
        binning,
        columns,
    }
}

impl Report {
    pub fn column(&self, name: &str) -> Option<&ColumnReport> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("column,runs,bin,n,bias,bias_std,rmse,rmse_std,pcc,pcc_std\n");
        let cell = |s: &Option<Summary>| match s {
            Some(s) => format!("{},{}", s.mean, s.std),
            None => ",".to_string(),
        };
        for c in &self.columns {
            for b in &c.bins {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.name,
                    c.channels.len(),
                    b.label,
                    b.n,
                    cell(&b.bias),
                    cell(&b.rmse),
                    cell(&b.pcc)
                );
            }
        }
        out
    }

    /// Aligned table with Bias/RMSE/PCC rows per column and one column per bin.
    pub fn to_text(&self) -> String {
        let labels = self.binning.labels();
        let mut rows: Vec<Vec<String>> = vec![std::iter::once(String::new())
            .chain(std::iter::once(String::new()))
            .chain(labels.iter().map(|l| l.to_string()))
            .collect()];
        for c in &self.columns {
            let mut n_row = vec![c.name.clone(), "n".to_string()];
            n_row.extend(c.bins.iter().map(|b| b.n.to_string()));
            rows.push(n_row);
            for (metric, get) in [
                (
                    "Bias",
                    (|b: &BinSummary| b.bias) as fn(&BinSummary) -> Option<Summary>,
                ),
                ("RMSE", |b| b.rmse),
                ("PCC", |b| b.pcc),
            ] {
                let mut row = vec![String::new(), metric.to_string()];
                row.extend(
                    c.bins
                        .iter()
                        .map(|b| get(b).map_or("-".to_string(), |s| s.text())),
                );
                rows.push(row);
            }
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!("{}\n", self.title);
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}
