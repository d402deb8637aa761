//! Two-sample Welch t-test and Pearson correlation.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("input is constant")]
    ConstantInput,
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Result of a Welch two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Both samples are constant. `p` is then 1.0 for equal means and 0.0
    /// otherwise, and `t`/`df` are not meaningful.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Two-sided p-value of `t` under Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    for sample in [a, b] {
        if sample.len() < 2 {
            return Err(StatsError::InsufficientData {
                needed: 2,
                got: sample.len(),
            });
        }
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let p = if ma == mb { 1.0 } else { 0.0 };
        return Ok(WelchTest {
            t: 0.0,
            df: na + nb - 2.0,
            p,
            degenerate: true,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchTest {
        t,
        df,
        p: t_two_sided_p(t, df),
        degenerate: false,
    })
}

/// Pearson product-moment correlation with a two-sided p-value from the
/// t-transform on n−2 degrees of freedom.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::InsufficientData { needed: 3, got: n });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(CorrelationResult { r, p, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_welch_fixture() {
        // scipy.stats.ttest_ind(equal_var=False): t = -1, df = 8.
        let w = welch_t_test(&[1., 2., 3., 4., 5.], &[2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(w.t, -1.0);
        assert!((w.df - 8.0).abs() < 1e-12);
        assert!((w.p - 0.346_593_507_087_334_16).abs() < 1e-9);
    }

    #[test]
    fn degenerate_samples() {
        let eq = welch_t_test(&[3., 3.], &[3., 3., 3.]).unwrap();
        assert!(eq.degenerate);
        assert_eq!(eq.p, 1.0);
        let ne = welch_t_test(&[3., 3.], &[4., 4.]).unwrap();
        assert!(ne.degenerate);
        assert_eq!(ne.p, 0.0);
    }

    #[test]
    fn too_few_points() {
        assert_eq!(
            welch_t_test(&[1.0], &[1.0, 2.0]),
            Err(StatsError::InsufficientData { needed: 2, got: 1 })
        );
        assert_eq!(
            pearson_r(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::InsufficientData { needed: 3, got: 2 })
        );
        assert_eq!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ConstantInput)
        );
    }
}
