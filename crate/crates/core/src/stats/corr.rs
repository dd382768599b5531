use super::StatsError;

/// Product-moment correlation; `None` when either column is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.is_empty() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Pairwise Pearson and Spearman correlations of labeled columns. Entries
/// involving a constant column are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub pearson: Vec<Vec<Option<f64>>>,
    pub spearman: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn pearson_between(&self, a: &str, b: &str) -> Option<f64> {
        self.pearson[self.index_of(a)?][self.index_of(b)?]
    }

    pub fn spearman_between(&self, a: &str, b: &str) -> Option<f64> {
        self.spearman[self.index_of(a)?][self.index_of(b)?]
    }

    /// Labels of columns with no variance.
    pub fn constant_columns(&self) -> Vec<&str> {
        (0..self.labels.len()).filter(|&i| self.pearson[i][i].is_none()).map(|i| self.labels[i].as_str()).collect()
    }
}

fn matrix(cols: &[&[f64]], f: impl Fn(&[f64], &[f64]) -> Option<f64>) -> Vec<Vec<Option<f64>>> {
    let k = cols.len();
    let mut m = vec![vec![None; k]; k];
    for i in 0..k {
        let own = f(cols[i], cols[i]);
        m[i][i] = own.map(|_| 1.0);
        for j in i + 1..k {
            let r = f(cols[i], cols[j]);
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

pub fn correlation_matrix(columns: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix, StatsError> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if columns.iter().any(|c| c.1.len() != n) {
        return Err(StatsError::LengthMismatch);
    }
    if n < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, found: n });
    }
    if columns.iter().any(|c| c.1.iter().any(|v| !v.is_finite())) {
        return Err(StatsError::NonFinite);
    }
    let cols: Vec<&[f64]> = columns.iter().map(|c| c.1.as_slice()).collect();
    let ranked: Vec<Vec<f64>> = cols.iter().map(|c| average_ranks(c)).collect();
    let ranked_refs: Vec<&[f64]> = ranked.iter().map(Vec::as_slice).collect();
    Ok(CorrelationMatrix {
        labels: columns.iter().map(|c| c.0.clone()).collect(),
        pearson: matrix(&cols, pearson),
        spearman: matrix(&ranked_refs, pearson),
    })
}
