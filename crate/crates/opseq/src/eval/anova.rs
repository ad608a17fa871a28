//! One-way analysis of variance across model accuracy groups.

use super::special::f_cdf;
use super::EvalError;

/// F statistic with its degrees of freedom and right-tail p-value.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: u64,
    pub df_within: u64,
    pub p: f64,
}

/// F = MS_between / MS_within over the groups, with
/// MS_between = sum n_i (mean_i - grand)^2 / (k - 1) and
/// MS_within  = sum_ij (x_ij - mean_i)^2 / (N - k);
/// p = 1 - CDF_F(F; k-1, N-k).
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, EvalError> {
    if groups.len() < 2 {
        return Err(EvalError::TooFewGroups(groups.len()));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(EvalError::TooFewObservations(g.len()));
    }
    let k = groups.len() as f64;
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let n = n_total as f64;

    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let grand = groups.iter().flatten().sum::<f64>() / n;

    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand) * (m - grand))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m) * (x - m)).sum::<f64>())
        .sum();

    let df_between = groups.len() as u64 - 1;
    let df_within = n_total as u64 - groups.len() as u64;
    let ms_within = ss_within / df_within as f64;
    if ms_within == 0.0 || !ms_within.is_finite() {
        return Err(EvalError::DegenerateGroups);
    }
    let ms_between = ss_between / (k - 1.0);
    let f = (ms_between / ms_within).max(0.0);
    let p = 1.0 - f_cdf(f, df_between, df_within)?;
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
    })
}
