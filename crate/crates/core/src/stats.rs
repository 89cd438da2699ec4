//! Significance tests and smoothing.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least two observations")]
    SampleTooSmall,
    #[error("contingency table is all zeros")]
    EmptyTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Zero variance with different means: the statistic is infinite.
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variance {
    #[default]
    Pooled,
    Welch,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample Student's t-test (pooled variance), two-sided.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    t_test_with(a, b, Variance::Pooled)
}

pub fn t_test_with(a: &[f64], b: &[f64], variance: Variance) -> Result<TestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::SampleTooSmall);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (se, df) = match variance {
        Variance::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
        Variance::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((qa + qb).sqrt(), df)
        }
    };
    let diff = ma - mb;
    if se == 0.0 {
        return Ok(if diff == 0.0 {
            TestResult { statistic: 0.0, df: Some(df), p_value: 1.0, degenerate: false }
        } else {
            TestResult {
                statistic: diff.signum() * f64::INFINITY,
                df: Some(df),
                p_value: 0.0,
                degenerate: true,
            }
        });
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(TestResult { statistic: t, df: Some(df), p_value: p, degenerate: false })
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`: sums the probability
/// of every table with the same margins that is no more likely than the
/// observed one. The statistic is the observed table's probability.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> Result<TestResult, StatsError> {
    let [[a, b], [c, d]] = table;
    let n = a + b + c + d;
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let (row1, col1) = (a + b, a + c);
    let row2 = n - row1;
    let lf = ln_factorials(n);
    let ln_p = |x: u64| {
        let (y, z) = (row1 - x, col1 - x);
        let w = row2 - z;
        lf[row1 as usize] + lf[row2 as usize] + lf[col1 as usize] + lf[(n - col1) as usize]
            - lf[n as usize]
            - lf[x as usize]
            - lf[y as usize]
            - lf[z as usize]
            - lf[w as usize]
    };
    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let observed = ln_p(a);
    // Relative tolerance guards against rounding in tables of equal probability.
    let cutoff = observed + 1e-7;
    let p: f64 = (lo..=hi).map(ln_p).filter(|&lp| lp <= cutoff).map(f64::exp).sum();
    Ok(TestResult { statistic: observed.exp(), df: None, p_value: p.min(1.0), degenerate: false })
}

/// Exponentially weighted moving average: `y0 = x0`,
/// `yt = alpha * xt + (1 - alpha) * y(t-1)`.
pub fn ewma(series: &[f64], alpha: f64) -> Vec<f64> {
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
    let mut out = Vec::with_capacity(series.len());
    let mut prev = None;
    for &x in series {
        let y = match prev {
            None => x,
            Some(p) => alpha * x + (1.0 - alpha) * p,
        };
        out.push(y);
        prev = Some(y);
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route for the t CDF: Simpson integration of the density.
    fn t_two_sided_by_quadrature(t: f64, df: f64) -> f64 {
        let ln_gamma = statrs::function::gamma::ln_gamma;
        let c = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
        let pdf = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let n = 20_000;
        let h = t.abs() / n as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(i as f64 * h);
        }
        let central = s * h / 3.0;
        1.0 - 2.0 * central
    }

    #[test]
    fn t_test_reference_case() {
        let r = t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.statistic + 1.0).abs() < 1e-12);
        assert_eq!(r.df, Some(8.0));
        let oracle = t_two_sided_by_quadrature(-1.0, 8.0);
        assert!((oracle - 0.346_593).abs() < 1e-5, "{oracle}");
        assert!((r.p_value - oracle).abs() < 1e-8);
    }

    #[test]
    fn t_test_identical_and_degenerate() {
        let a = [1.0, 3.0, 2.0, 5.0];
        let r = t_test(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert!(r.degenerate && r.p_value == 0.0);
        assert_eq!(t_test(&[1.0], &[1.0, 2.0]), Err(StatsError::SampleTooSmall));
    }

    #[test]
    fn welch_matches_pooled_for_equal_sizes_and_variances() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let p = t_test_with(&a, &b, Variance::Pooled).unwrap();
        let w = t_test_with(&a, &b, Variance::Welch).unwrap();
        assert!((p.statistic - w.statistic).abs() < 1e-12);
        assert!((p.p_value - w.p_value).abs() < 1e-12);
    }

    /// Brute-force hypergeometric enumeration with exact integer binomials.
    fn fisher_oracle(table: [[u64; 2]; 2]) -> f64 {
        fn binom(n: u64, k: u64) -> u128 {
            let k = k.min(n - k);
            let mut r: u128 = 1;
            for i in 0..k {
                r = r * (n - i) as u128 / (i + 1) as u128;
            }
            r
        }
        let [[a, b], [c, d]] = table;
        let (r1, r2, c1) = (a + b, c + d, a + c);
        let total = binom(r1 + r2, c1);
        let weight = |x: u64| binom(r1, x) * binom(r2, c1 - x);
        let obs = weight(a);
        let lo = c1.saturating_sub(r2);
        let hi = r1.min(c1);
        let num: u128 = (lo..=hi).map(weight).filter(|&w| w <= obs).sum();
        num as f64 / total as f64
    }

    #[test]
    fn fisher_perfect_separation() {
        let oracle = fisher_oracle([[15, 0], [0, 15]]);
        assert!((oracle - 2.0 / 155_117_520.0).abs() < 1e-20);
        let r = fisher_exact([[15, 0], [0, 15]]).unwrap();
        assert!((r.p_value - 1.289_344_2e-8).abs() < 1e-13, "{}", r.p_value);
        assert!((r.p_value / oracle - 1.0).abs() < 1e-9);
        assert!(r.p_value < 1e-4);
    }

    #[test]
    fn fisher_no_association_and_errors() {
        let r = fisher_exact([[5, 5], [5, 5]]).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(fisher_exact([[0, 0], [0, 0]]), Err(StatsError::EmptyTable));
    }

    #[test]
    fn fisher_matches_oracle_on_assorted_tables() {
        for t in [[[3, 1], [1, 3]], [[8, 2], [1, 5]], [[0, 7], [4, 2]], [[10, 0], [3, 9]], [[1, 0], [0, 0]]] {
            let r = fisher_exact(t).unwrap();
            let o = fisher_oracle(t);
            assert!((r.p_value - o).abs() < 1e-10, "{t:?}: {} vs {o}", r.p_value);
        }
    }

    #[test]
    fn ewma_cases() {
        let xs = [1.0, 5.0, -2.0, 7.0];
        assert_eq!(ewma(&xs, 1.0), xs.to_vec());
        assert!(ewma(&[3.0; 6], 0.3).iter().all(|y| (y - 3.0).abs() < 1e-12));
        let step: Vec<f64> = std::iter::once(0.0).chain(std::iter::repeat(1.0).take(50)).collect();
        let y = ewma(&step, 0.2);
        for (t, pair) in y.windows(2).enumerate() {
            assert!(pair[1] >= pair[0]);
            // Closed form: 1 - 0.8^t after the step.
            let expect = 1.0 - 0.8f64.powi(t as i32 + 1);
            assert!((pair[1] - expect).abs() < 1e-12);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fisher_symmetric_under_double_swap(a in 0u64..12, b in 0u64..12, c in 0u64..12, d in 0u64..12) {
                prop_assume!(a + b + c + d > 0);
                let p1 = fisher_exact([[a, b], [c, d]]).unwrap().p_value;
                let p2 = fisher_exact([[d, c], [b, a]]).unwrap().p_value;
                prop_assert!((p1 - p2).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&p1));
            }

            #[test]
            fn t_test_antisymmetric(a in prop::collection::vec(-50.0f64..50.0, 2..12),
                                    b in prop::collection::vec(-50.0f64..50.0, 2..12)) {
                let ab = t_test(&a, &b).unwrap();
                let ba = t_test(&b, &a).unwrap();
                prop_assume!(!ab.degenerate);
                prop_assert!((ab.statistic + ba.statistic).abs() < 1e-9);
                prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab.p_value));
            }
        }
    }
}
