//! Hypothesis tests and association measures.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n−1 denominator), two-pass.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz method.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        for (coef, is_last) in [(num, false), (-(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0)), true)] {
            d = 1.0 + coef * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + coef / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if is_last && (delta - 1.0).abs() < EPS {
                return h;
            }
        }
    }
    h
}

/// Two-sided p-value of a Student t statistic.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df / (df + t * t), df / 2.0, 0.5).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::domain("t-test needs at least two values per group"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 <= 0.0 || !se2.is_finite() {
        return Err(Error::domain("t-test with zero variance in both groups"));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided(t, df),
    })
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::contract("pearson needs two equal-length series of at least 2 values"));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::domain("correlation with a constant series"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
}

/// Point-biserial correlation between a feature and 0/1 labels.
pub fn point_biserial(values: &[f64], labels: &[u8]) -> Result<Correlation> {
    if values.len() != labels.len() {
        return Err(Error::contract("values and labels differ in length"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::contract("labels must be 0 or 1"));
    }
    let n = values.len() as f64;
    let ones: Vec<f64> = values.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(v, _)| *v).collect();
    let zeros: Vec<f64> = values.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(v, _)| *v).collect();
    if ones.is_empty() || zeros.is_empty() {
        return Err(Error::domain("point-biserial correlation needs both classes"));
    }
    if values.len() < 3 {
        return Err(Error::domain("point-biserial correlation needs at least 3 values"));
    }
    let m = mean(values);
    let sn = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    if sn == 0.0 {
        return Err(Error::domain("point-biserial correlation with a constant feature"));
    }
    let p = ones.len() as f64 / n;
    let r = ((mean(&ones) - mean(&zeros)) / sn * (p * (1.0 - p)).sqrt()).clamp(-1.0, 1.0);
    let df = n - 2.0;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        student_t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation { r, p: p_value })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    /// In input order.
    pub rejected: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Benjamini-Hochberg step-up procedure at level `alpha`.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Result<BhResult> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::contract(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));

    let cutoff = (0..m)
        .rev()
        .find(|&i| p_values[order[i]] <= (i + 1) as f64 / m as f64 * alpha)
        .map_or(0, |i| i + 1);
    let mut rejected = vec![false; m];
    for &idx in &order[..cutoff] {
        rejected[idx] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for i in (0..m).rev() {
        let idx = order[i];
        running = running.min(p_values[idx] * m as f64 / (i + 1) as f64);
        adjusted[idx] = running.min(1.0);
    }
    Ok(BhResult { rejected, adjusted })
}

/// |P ∩ C| / |P ∪ C|.
pub fn jaccard<T: Eq + Hash>(p: &HashSet<T>, c: &HashSet<T>) -> Result<f64> {
    if p.is_empty() && c.is_empty() {
        return Err(Error::domain("Jaccard index of two empty sets"));
    }
    let inter = p.intersection(c).count();
    let union = p.len() + c.len() - inter;
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gamma_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
    }

    #[test]
    fn beta_symmetry_and_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a
        assert_abs_diff_eq!(incomplete_beta(0.3, 1.0, 1.0), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(incomplete_beta(0.6, 3.0, 1.0), 0.216, epsilon = 1e-14);
        let (x, a, b) = (0.37, 2.5, 4.0);
        assert_abs_diff_eq!(incomplete_beta(x, a, b), 1.0 - incomplete_beta(1.0 - x, b, a), epsilon = 1e-14);
    }

    #[test]
    fn welch_fixtures() {
        let t = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.t, 0.0);
        assert_abs_diff_eq!(t.p, 1.0, epsilon = 1e-12);
        assert!(matches!(welch_ttest(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::Domain(_))));
        assert!(matches!(welch_ttest(&[1.0], &[2.0, 3.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn point_biserial_fixture() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let l = [0, 0, 0, 1, 1, 1];
        let c = point_biserial(&v, &l).unwrap();
        // Pearson with 0/1 coding: sxy = 4.5, sxx = 17.5, syy = 1.5
        assert_abs_diff_eq!(c.r, 4.5 / (17.5f64 * 1.5).sqrt(), epsilon = 1e-12);
        let inv: Vec<u8> = l.iter().map(|x| 1 - x).collect();
        assert_eq!(point_biserial(&v, &inv).unwrap().r, -c.r);
        let same: Vec<f64> = l.iter().map(|&x| x as f64).collect();
        assert_eq!(point_biserial(&same, &l).unwrap().r, 1.0);
    }

    #[test]
    fn bh_fixture() {
        let r = benjamini_hochberg(&[0.01, 0.02, 0.04, 0.2], 0.05).unwrap();
        assert_eq!(r.rejected, [true, true, false, false]);
        assert_abs_diff_eq!(r.adjusted[0], 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(r.adjusted[2], 0.16 / 3.0, epsilon = 1e-15);
        assert!(benjamini_hochberg(&[0.0; 3], 0.05).unwrap().rejected.iter().all(|&x| x));
        assert_eq!(benjamini_hochberg(&[0.05], 0.05).unwrap().rejected, [true]);
        assert_eq!(benjamini_hochberg(&[0.051], 0.05).unwrap().rejected, [false]);
        assert!(matches!(benjamini_hochberg(&[1.5], 0.05), Err(Error::Contract(_))));
    }

    #[test]
    fn jaccard_fixtures() {
        let s = |v: &[&'static str]| v.iter().copied().collect::<HashSet<_>>();
        assert_eq!(jaccard(&s(&["a", "b"]), &s(&["b", "c"])).unwrap(), 1.0 / 3.0);
        assert_eq!(jaccard(&s(&["a"]), &s(&["a"])).unwrap(), 1.0);
        assert_eq!(jaccard(&s(&["a"]), &s(&["b"])).unwrap(), 0.0);
        assert!(jaccard(&s(&[]), &s(&[])).is_err());
    }
}
