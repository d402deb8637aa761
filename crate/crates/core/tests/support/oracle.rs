//! Independent implementations of the Welch test and Pearson r: the t
//! distribution tail comes from Simpson integration of the density with a
//! Lanczos log-gamma, not from the library CDF.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rapport_core::experiment::stats::{pearson_r, welch_t_test};

pub const TOL: f64 = 1e-9;

pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn t_density(x: f64, df: f64) -> f64 {
    let log_norm = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Two-sided tail `P(|T| > |t|)` as `1 - 2 * integral_0^|t| f`.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    let b = t.abs();
    if b == 0.0 {
        return 1.0;
    }
    let n = 40_000;
    let h = b / n as f64;
    let mut sum = t_density(0.0, df) + t_density(b, df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * t_density(i as f64 * h, df);
    }
    (1.0 - 2.0 * sum * h / 3.0).max(0.0)
}

pub fn brute_welch(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mut total = 0.0;
        for x in xs {
            total += x;
        }
        let m = total / n;
        let mut ss = 0.0;
        for x in xs {
            ss += (x - m) * (x - m);
        }
        (m, ss / (n - 1.0) / n, n)
    };
    let (ma, va, na) = stats(a);
    let (mb, vb, nb) = stats(b);
    let t = (ma - mb) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    (t, df, two_sided_p(t, df))
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
    let df = n - 2.0;
    (r, two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df))
}

pub fn sample(rng: &mut impl Rng, n: usize, mean: f64, spread: f64) -> Vec<f64> {
    (0..n).map(|_| mean + spread * (rng.random::<f64>() - 0.5) * 3.4).collect()
}

/// Compares [`welch_t_test`] with [`brute_welch`] on `cases` random
/// two-sample fixtures.
pub fn check_welch(seed: u64, cases: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let na = rng.random_range(2..60);
        let nb = rng.random_range(2..60);
        let (sa, sb): (f64, f64) = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
        let shift = rng.random_range(-1.0..1.0);
        let a = sample(&mut rng, na, 3.5, sa);
        let b = sample(&mut rng, nb, 3.5 + shift, sb);
        let got = welch_t_test(&a, &b).map_err(|e| format!("case {case}: {e}"))?;
        let (t, df, p) = brute_welch(&a, &b);
        if (got.t - t).abs() >= TOL * t.abs().max(1.0) {
            return Err(format!("case {case}: t {} vs {t}", got.t));
        }
        if (got.df - df).abs() >= TOL * df.max(1.0) {
            return Err(format!("case {case}: df {} vs {df}", got.df));
        }
        if (got.p - p).abs() >= TOL {
            return Err(format!("case {case}: p {} vs {p}", got.p));
        }
    }
    Ok(())
}

/// Compares [`pearson_r`] with [`brute_pearson`] on `cases` random
/// linear-plus-noise fixtures.
pub fn check_pearson(seed: u64, cases: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.random_range(3..80);
        let slope = rng.random_range(-2.0..2.0);
        let x = sample(&mut rng, n, 0.0, 3.0);
        let spread: f64 = rng.random_range(0.1..5.0);
        let noise = sample(&mut rng, n, 0.0, spread);
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| slope * a + e).collect();
        let got = pearson_r(&x, &y).map_err(|e| format!("case {case}: {e}"))?;
        let (r, p) = brute_pearson(&x, &y);
        if (got.r - r).abs() >= TOL || (got.p - p).abs() >= TOL || got.n != n {
            return Err(format!("case {case}: r {} vs {r}, p {} vs {p}", got.r, got.p));
        }
    }
    Ok(())
}

/// The exact trivial cases: identical samples and perfect linearity.
pub fn check_trivial_cases() -> Result<(), String> {
    let a = [2.0, 4.5, 3.25, 5.0, 1.0];
    let w = welch_t_test(&a, &a).map_err(|e| e.to_string())?;
    if w.t != 0.0 || w.p != 1.0 {
        return Err(format!("identical samples: t {}, p {}", w.t, w.p));
    }
    let x: Vec<f64> = (1..=10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let c = pearson_r(&x, &y).map_err(|e| e.to_string())?;
    if c.r != 1.0 || c.p != 0.0 {
        return Err(format!("perfect linearity: r {}, p {}", c.r, c.p));
    }
    let neg: Vec<f64> = x.iter().map(|v| -2.0 * v + 1.0).collect();
    let c = pearson_r(&x, &neg).map_err(|e| e.to_string())?;
    if c.r != -1.0 {
        return Err(format!("perfect negative linearity: r {}", c.r));
    }
    Ok(())
}
