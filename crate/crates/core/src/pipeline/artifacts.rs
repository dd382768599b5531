//! Plain TSV encodings of the stage outputs.

use std::collections::BTreeMap;

use crate::stats::{CorrelationMatrix, GroupStat, RegressionResult};

pub const NA: &str = "NA";

pub fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), fmt_f)
}

/// Header plus tab-joined rows, newline terminated.
pub fn table<I>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut s = header.join("\t");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join("\t"));
        s.push('\n');
    }
    s.into_bytes()
}

/// Patent ids plus named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub patent_ids: Vec<String>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ScoreTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = vec!["patent_id"];
        header.extend(self.columns.iter().map(|c| c.0.as_str()));
        let rows = self.patent_ids.iter().enumerate().map(|(i, id)| {
            let mut r = vec![id.clone()];
            r.extend(self.columns.iter().map(|c| fmt_f(c.1[i])));
            r
        });
        table(&header, rows)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or("empty score table")?.split('\t').collect();
        if header.first() != Some(&"patent_id") {
            return Err("score table must start with a patent_id column".into());
        }
        let mut ids = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != header.len() {
                return Err(format!("line {}: expected {} fields, found {}", n + 2, header.len(), f.len()));
            }
            ids.push(f[0].to_string());
            for (c, v) in cols.iter_mut().zip(&f[1..]) {
                c.push(v.parse().map_err(|_| format!("line {}: invalid number '{v}'", n + 2))?);
            }
        }
        Ok(Self { patent_ids: ids, columns: header[1..].iter().map(|h| h.to_string()).zip(cols).collect() })
    }
}

pub fn correlation_table(m: &CorrelationMatrix, spearman: bool) -> Vec<u8> {
    let mut header = vec![""];
    header.extend(m.labels.iter().map(String::as_str));
    let data = if spearman { &m.spearman } else { &m.pearson };
    let rows = m.labels.iter().zip(data).map(|(l, row)| {
        let mut r = vec![l.clone()];
        r.extend(row.iter().map(|v| fmt_opt(*v)));
        r
    });
    table(&header, rows)
}

pub const REGRESSION_HEADER: [&str; 7] =
    ["variable", "coefficient", "std_error", "t_stat", "p_value", "r_squared", "n_obs"];

pub fn regression_rows(r: &RegressionResult) -> Vec<Vec<String>> {
    r.coefficients
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                fmt_f(c.estimate),
                fmt_f(c.std_error),
                fmt_f(c.t_stat),
                fmt_f(c.p_value),
                fmt_f(r.r_squared),
                r.n_obs.to_string(),
            ]
        })
        .collect()
}

/// `variable -> (coefficient, std_error, p_value)` from a regression table.
pub fn read_regression(text: &str) -> Result<BTreeMap<String, (f64, f64, f64)>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != REGRESSION_HEADER.len() {
            return Err(format!("line {}: expected {} fields", n + 1, REGRESSION_HEADER.len()));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| format!("line {}: invalid number '{}'", n + 1, f[i]));
        out.insert(f[0].to_string(), (num(1)?, num(2)?, num(4)?));
    }
    Ok(out)
}

pub fn trend_table<K: ToString>(key: &str, stats: &[GroupStat<K>], extra: &[(&str, Vec<Option<f64>>)]) -> Vec<u8> {
    let mut header = vec![key, "mean", "median", "count"];
    header.extend(extra.iter().map(|e| e.0));
    let rows = stats.iter().enumerate().map(|(i, s)| {
        let mut r = vec![s.key.to_string(), fmt_f(s.mean), fmt_f(s.median), s.count.to_string()];
        r.extend(extra.iter().map(|e| fmt_opt(e.1[i])));
        r
    });
    table(&header, rows)
}
