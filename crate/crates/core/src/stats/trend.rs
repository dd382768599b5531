use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::corr::pearson;
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Year,
    IpcSection,
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Year => "year",
            GroupBy::IpcSection => "ipc_section",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStat<K> {
    pub key: K,
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn groups<K: Ord + Clone>(keys: &[K], n: usize) -> Result<BTreeMap<K, Vec<usize>>, StatsError> {
    if keys.len() != n {
        return Err(StatsError::LengthMismatch);
    }
    if n == 0 {
        return Err(StatsError::EmptyInput);
    }
    let mut g: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        g.entry(k.clone()).or_default().push(i);
    }
    Ok(g)
}

/// Mean, median and count per key, ordered by key.
pub fn group_trend<K: Ord + Clone>(values: &[f64], keys: &[K]) -> Result<Vec<GroupStat<K>>, StatsError> {
    Ok(groups(keys, values.len())?
        .into_iter()
        .map(|(key, idx)| {
            let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            GroupStat { key, mean: v.iter().sum::<f64>() / v.len() as f64, median: median(&v), count: v.len() }
        })
        .collect())
}

/// Pearson correlation of `x` and `y` within each group.
pub fn grouped_pearson<K: Ord + Clone>(
    x: &[f64],
    y: &[f64],
    keys: &[K],
) -> Result<Vec<(K, Option<f64>, usize)>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch);
    }
    Ok(groups(keys, x.len())?
        .into_iter()
        .map(|(key, idx)| {
            let a: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let b: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            (key, pearson(&a, &b), idx.len())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelchTest {
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_stat: f64,
    pub df: f64,
    pub p_two_sided: f64,
    /// One-sided p-value for mean(a) > mean(b).
    pub p_greater: f64,
}

/// Two-sample t-test without the equal-variance assumption.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, found: a.len().min(b.len()) });
    }
    let moments = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, var, n)
    };
    let (ma, va, na) = moments(a);
    let (mb, vb, nb) = moments(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if !(se2 > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|_| StatsError::ZeroVariance)?;
    let upper = 1.0 - dist.cdf(t);
    Ok(WelchTest {
        mean_a: ma,
        mean_b: mb,
        t_stat: t,
        df,
        p_two_sided: (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0),
        p_greater: upper.clamp(0.0, 1.0),
    })
}
