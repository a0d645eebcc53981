//! Small statistics helpers shared by estimators, analysis and the
//! validation suites.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n-1 denominator); 0 for fewer than two points.
pub fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// log(sum(exp(xs))) computed stably; -inf for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Percentile by linear interpolation on the sorted copy, q in [0,1].
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    s[lo] * (1.0 - frac) + s[hi] * frac
}

/// Percentile bootstrap confidence interval for the mean.
///
/// Resampling is driven by an explicit stream so aggregates are reproducible.
pub fn bootstrap_mean_ci(
    xs: &[f64],
    resamples: usize,
    level: f64,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("bootstrap over empty sample".into()));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidInput(format!(
            "confidence level {level} outside (0,1)"
        )));
    }
    if xs.len() == 1 {
        return Ok((xs[0], xs[0]));
    }
    let mut rng = stream.rng();
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let s: f64 = (0..xs.len())
            .map(|_| xs[rng.random_range(0..xs.len())])
            .sum();
        means.push(s / xs.len() as f64);
    }
    let alpha = 1.0 - level;
    Ok((
        percentile(&means, alpha / 2.0),
        percentile(&means, 1.0 - alpha / 2.0),
    ))
}

/// Weighted least-squares line fit `y ~ intercept + slope * x`.
///
/// Returns `(slope, intercept, slope_stderr, r2)`. With all weights equal the
/// slope stderr comes from the residual variance; with genuine inverse-variance
/// weights it is the analytic `sqrt(1/Sxx)` of the weighted design.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = x.len();
    if n != y.len() || n != w.len() {
        return Err(Error::InvalidInput("fit arrays differ in length".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 points for a line fit, got {n}"
        )));
    }
    if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
        return Err(Error::InvalidInput("weights must be positive finite".into()));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidInput("degenerate abscissae in fit".into()));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), c)| c * (a - mx) * (b - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // goodness of fit
    let ss_tot: f64 = y.iter().zip(w).map(|(b, c)| c * (b - my) * (b - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), c)| {
            let r = b - (intercept + slope * a);
            c * r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let uniform = w.iter().all(|&wi| (wi - w[0]).abs() < 1e-12 * w[0].abs().max(1.0));
    let se = if uniform {
        if n > 2 {
            let sigma2 = ss_res / w[0] / (n - 2) as f64;
            (sigma2 / (sxx / w[0])).sqrt()
        } else {
            0.0
        }
    } else {
        // weights are 1/variance: analytic stderr of the weighted slope
        (1.0 / sxx).sqrt()
    };
    Ok((slope, intercept, se, r2))
}

/// Two-sample Kolmogorov-Smirnov distance. Inputs need not be sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Large-sample two-sample KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Slope of `log P(sample > u)` over a band of thresholds, for checking that
/// a positive sample has an exponential-looking tail. Thresholds with fewer
/// than `min_count` exceedances are dropped.
pub fn exp_tail_slope(samples: &[f64], us: &[f64], min_count: usize) -> Result<f64> {
    let n = samples.len() as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &u in us {
        let cnt = samples.iter().filter(|&&s| s > u).count();
        if cnt >= min_count {
            xs.push(u);
            ys.push((cnt as f64 / n).ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput(
            "too few occupied tail thresholds for a slope".into(),
        ));
    }
    let w = vec![1.0; xs.len()];
    let (slope, _, _, _) = weighted_line_fit(&xs, &ys, &w)?;
    Ok(slope)
}

/// Serde adapter for `f64` fields that legitimately take the values
/// `+inf`/`-inf` (killed curves, infeasible exponents, one-sided windows).
///
/// JSON has no literal for infinities — plain serialization drops them to
/// `null` and cannot read them back. This adapter writes finite values as
/// numbers and infinities as the strings `"inf"`/`"-inf"`, and accepts
/// either form on input (TOML's native `inf` float included).
pub mod extended_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else if v.is_nan() {
            "nan".serialize(s)
        } else if *v > 0.0 {
            "inf".serialize(s)
        } else {
            "-inf".serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn line_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.5 * v - 1.25).collect();
        let w = vec![1.0; x.len()];
        let (s, c, se, r2) = weighted_line_fit(&x, &y, &w).unwrap();
        assert_abs_diff_eq!(s, 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c, -1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(se, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_identical_samples_zero() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_disjoint_samples_one() {
        let a = [0.0, 1.0];
        let b = [5.0, 6.0];
        assert_abs_diff_eq!(ks_two_sample(&a, &b), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn logsumexp_matches_direct_small() {
        let xs = [0.0, (2.0f64).ln()];
        assert_abs_diff_eq!(logsumexp(&xs), (3.0f64).ln(), epsilon = 1e-14);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn bootstrap_ci_brackets_mean_of_tight_sample() {
        let xs: Vec<f64> = (0..50).map(|i| 10.0 + 0.01 * (i % 5) as f64).collect();
        let (lo, hi) =
            bootstrap_mean_ci(&xs, 1000, 0.95, RngStream::new(1, 0)).unwrap();
        let m = mean(&xs);
        assert!(lo <= m && m <= hi);
        assert!(hi - lo < 0.02);
    }
}
