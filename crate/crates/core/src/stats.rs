//! One-sample Kolmogorov-Smirnov test against the uniform law on `[0, 1]`.

use alloc::vec::Vec;

/// `sup |F_n(x) - x|` over `[0, 1]`.
pub fn ks_uniform_statistic(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov tail `P(K > t) = 2 sum_{k>=1} (-1)^(k-1) e^(-2 k^2 t^2)`.
pub fn kolmogorov_tail(t: f64) -> f64 {
    // the series converges slowly near zero, where the tail is 1 to machine precision
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = libm::exp(-2.0 * kf * kf * t * t);
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of the statistic with Stephens' small-sample correction.
pub fn ks_uniform_p_value(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n == 0.0 {
        return 1.0;
    }
    let d = ks_uniform_statistic(values);
    let sn = libm::sqrt(n);
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

/// Equal-width histogram on `[lo, hi]`; values outside are clamped into the
/// end bins. Returns `(bin_lo, bin_hi, count)` triples.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = alloc::vec![0usize; bins];
    for &v in values.iter().filter(|v| !v.is_nan()) {
        let idx = if width > 0.0 { ((v - lo) / width) as isize } else { 0 };
        counts[idx.clamp(0, bins as isize - 1) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistic_of_a_grid() {
        let v: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((ks_uniform_statistic(&v) - 0.05).abs() < 1e-12);
        assert_eq!(ks_uniform_statistic(&[1.0; 5]), 1.0);
    }

    #[test]
    fn kolmogorov_quantiles() {
        // classical critical values of the limiting law
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn point_mass_is_rejected() {
        assert!(ks_uniform_p_value(&[1.0; 100]) < 1e-10);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.05, 0.5, 1.0], 0.0, 1.0, 10);
        assert_eq!(h.len(), 10);
        assert_eq!(h[0].2, 2);
        assert_eq!(h[5].2, 1);
        assert_eq!(h[9].2, 1);
        assert!((h[3].0 - 0.3).abs() < 1e-12);
    }
}
