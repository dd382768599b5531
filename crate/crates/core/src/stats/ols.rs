use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

/// Relative pivot size below which a design column counts as collinear.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n_obs: usize,
    /// Fixed-effect levels with a dummy column (the reference level excluded).
    pub fe_levels: Vec<i32>,
    pub fe_reference: Option<i32>,
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    /// Years with a dummy column, ascending.
    pub fe_levels: Vec<i32>,
    /// Omitted (earliest) year.
    pub fe_reference: Option<i32>,
}

/// Design matrix: intercept, the named regressors, then one dummy per year
/// except the earliest.
pub fn design_matrix(regressors: &[(&str, &[f64])], year_fe: Option<&[i32]>, n: usize) -> Result<Design, StatsError> {
    if regressors.iter().any(|r| r.1.len() != n) || year_fe.is_some_and(|y| y.len() != n) {
        return Err(StatsError::LengthMismatch);
    }
    let mut names = vec!["intercept".to_string()];
    names.extend(regressors.iter().map(|r| r.0.to_string()));
    let (levels, reference) = match year_fe {
        Some(years) => {
            let set: BTreeSet<i32> = years.iter().copied().collect();
            let mut it = set.into_iter();
            let reference = it.next();
            (it.collect::<Vec<i32>>(), reference)
        }
        None => (Vec::new(), None),
    };
    names.extend(levels.iter().map(|y| format!("year_{y}")));
    let p = names.len();
    let mut x = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (j, r) in regressors.iter().enumerate() {
            x[(i, j + 1)] = r.1[i];
        }
        if let Some(years) = year_fe {
            if let Ok(k) = levels.binary_search(&years[i]) {
                x[(i, 1 + regressors.len() + k)] = 1.0;
            }
        }
    }
    Ok(Design { names, x, fe_levels: levels, fe_reference: reference })
}

/// Pooled OLS with an intercept, the given regressors and optional year
/// dummies. Solved by QR; classical standard errors.
pub fn ols_fit(
    y: &[f64],
    regressors: &[(&str, &[f64])],
    year_fe: Option<&[i32]>,
) -> Result<RegressionResult, StatsError> {
    let n = y.len();
    if y.iter().chain(regressors.iter().flat_map(|r| r.1.iter())).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let Design { names, x, fe_levels, fe_reference } = design_matrix(regressors, year_fe, n)?;
    let p = names.len();
    if n <= p {
        return Err(StatsError::InsufficientObservations { n, params: p });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let deficient: Vec<String> =
        (0..p).filter(|&i| r[(i, i)].abs() <= RANK_TOL * scale.max(1.0)).map(|i| names[i].clone()).collect();
    if !deficient.is_empty() {
        return Err(StatsError::RankDeficient(deficient));
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| StatsError::RankDeficient(names.clone()))?;
    let fitted = &x * &beta;
    let resid: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let r_inv =
        r.solve_upper_triangular(&DMatrix::identity(p, p)).ok_or_else(|| StatsError::RankDeficient(names.clone()))?;
    let cov_diag: Vec<f64> = (0..p).map(|i| (0..p).map(|k| r_inv[(i, k)].powi(2)).sum::<f64>() * sigma2).collect();
    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|_| StatsError::InsufficientObservations { n, params: p })?;
    let coefficients = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let se = cov_diag[i].sqrt();
            let t = if se > 0.0 {
                beta[i] / se
            } else if beta[i] == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(beta[i])
            };
            let p_value = if t.is_finite() { (2.0 * (1.0 - t_dist.cdf(t.abs()))).clamp(0.0, 1.0) } else { 0.0 };
            Coefficient { name, estimate: beta[i], std_error: se, t_stat: t, p_value }
        })
        .collect();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let adj_r_squared = if tss > 0.0 { 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df } else { 0.0 };
    Ok(RegressionResult { coefficients, r_squared, adj_r_squared, n_obs: n, fe_levels, fe_reference, residuals: resid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_linear_fit() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = ols_fit(&y, &[("x", &x)], None).unwrap();
        assert!((r.coefficient("x").unwrap().estimate - 2.0).abs() < 1e-9);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_is_mean() {
        let y = [1.0, 4.0, 2.5, 7.0];
        let r = ols_fit(&y, &[], None).unwrap();
        assert!((r.coefficients[0].estimate - 3.625).abs() < 1e-12);
        assert_eq!(r.r_squared, 0.0);
    }

    #[test]
    fn collinear_column_rejected() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        match ols_fit(&y, &[("x", &x), ("x2", &x2)], None) {
            Err(StatsError::RankDeficient(cols)) => assert_eq!(cols, vec!["x2".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn too_few_observations() {
        let x = [1.0, 2.0];
        assert!(matches!(
            ols_fit(&[1.0, 2.0], &[("x", &x)], None),
            Err(StatsError::InsufficientObservations { n: 2, params: 2 })
        ));
    }

    #[test]
    fn year_dummies_drop_earliest() {
        let years = [2003, 2001, 2002, 2001, 2003, 2002, 2001];
        let Design { names, x, fe_levels: levels, fe_reference: reference } =
            design_matrix(&[], Some(&years), years.len()).unwrap();
        assert_eq!(names, vec!["intercept", "year_2002", "year_2003"]);
        assert_eq!(levels, vec![2002, 2003]);
        assert_eq!(reference, Some(2001));
        assert_eq!(x[(0, 2)], 1.0);
        assert_eq!(x[(1, 1)] + x[(1, 2)], 0.0);
    }

    proptest! {
        #[test]
        fn residuals_orthogonal_and_fe_absorbs_shifts(
            x in prop::collection::vec(-3.0f64..3.0, 24),
            e in prop::collection::vec(-1.0f64..1.0, 24),
            shift in prop::array::uniform3(-5.0f64..5.0),
        ) {
            let years: Vec<i32> = (0..24).map(|i| 2000 + (i % 3)).collect();
            let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| 0.7 * a + b).collect();
            let r = ols_fit(&y, &[("x", &x)], Some(&years)).unwrap();
            let design = design_matrix(&[("x", &x)], Some(&years), y.len()).unwrap().x;
            let res = DVector::from_column_slice(&r.residuals);
            let xe = design.transpose() * res;
            prop_assert!(xe.iter().all(|v| v.abs() < 1e-8));

            let shifted: Vec<f64> = y.iter().zip(&years).map(|(v, yr)| v + shift[(yr - 2000) as usize]).collect();
            let r2 = ols_fit(&shifted, &[("x", &x)], Some(&years)).unwrap();
            let b1 = r.coefficient("x").unwrap().estimate;
            let b2 = r2.coefficient("x").unwrap().estimate;
            prop_assert!((b1 - b2).abs() < 1e-8);
        }
    }
}
