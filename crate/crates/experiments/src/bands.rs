//! Band construction over collections of curves, plus the small statistics
//! helpers (median, least-squares slope) shared by the studies.
//!
//! Two band constructions are used. The *pointwise* band takes per-abscissa
//! quantiles, matching the per-coordinate credible intervals. The *central
//! region* band instead ranks whole curves by a standardized sup deviation
//! from the pointwise median, keeps the most central `level` fraction, and
//! envelopes them; this keeps the band a set of realizable curves and is what
//! the function-space figure panels use.

/// Sample median; averages the two middle order statistics for even counts.
/// Returns NaN on empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[k]
    } else {
        0.5 * (sorted[k - 1] + sorted[k])
    }
}

// Quantile of a sorted sample by linear interpolation of order statistics,
// h = (len-1)p; the same convention the ensemble credible intervals use.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let last = sorted.len() - 1;
    let h = last as f64 * p;
    let lo = (h.floor() as usize).min(last);
    let upper = (lo + 1).min(last);
    let w = h - lo as f64;
    (1.0 - w) * sorted[lo] + w * sorted[upper]
}

/// Interpolated sample quantile, same order-statistic convention as the
/// bands. `p` in [0, 1].
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&p), "p must lie in [0,1]");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted_quantile(&sorted, p)
}

/// Equal-tailed pointwise quantile band at the given central level:
/// per abscissa, the (1-level)/2 and (1+level)/2 sample quantiles across
/// curves. All curves must share a common length.
pub fn pointwise_band(curves: &[Vec<f64>], level: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(!curves.is_empty(), "pointwise_band needs at least one curve");
    assert!(0.0 < level && level < 1.0, "level must lie in (0,1)");
    let m = curves[0].len();
    assert!(curves.iter().all(|c| c.len() == m), "curve lengths differ");
    let p_lo = 0.5 * (1.0 - level);
    let p_hi = 0.5 * (1.0 + level);
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    let mut column = vec![0.0; curves.len()];
    for x in 0..m {
        for (j, curve) in curves.iter().enumerate() {
            column[j] = curve[x];
        }
        column.sort_by(f64::total_cmp);
        lo.push(sorted_quantile(&column, p_lo));
        hi.push(sorted_quantile(&column, p_hi));
    }
    (lo, hi)
}

/// Central-region band: rank curves by `max_x |F_j(x) - med(x)| / s(x)` where
/// `med` and `s` are the pointwise median and standard deviation, keep the
/// `ceil(level * J)` most central curves, and return their pointwise envelope.
pub fn central_band(curves: &[Vec<f64>], level: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(!curves.is_empty(), "central_band needs at least one curve");
    assert!(0.0 < level && level <= 1.0, "level must lie in (0,1]");
    let j_total = curves.len();
    let m = curves[0].len();
    assert!(curves.iter().all(|c| c.len() == m), "curve lengths differ");

    let mut med = Vec::with_capacity(m);
    let mut scale = Vec::with_capacity(m);
    let mut column = vec![0.0; j_total];
    for x in 0..m {
        for (j, curve) in curves.iter().enumerate() {
            column[j] = curve[x];
        }
        med.push(median(&column));
        let mean = column.iter().sum::<f64>() / j_total as f64;
        let var = if j_total > 1 {
            column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (j_total - 1) as f64
        } else {
            0.0
        };
        // Floor keeps degenerate (constant) abscissas from dominating depths.
        scale.push(var.sqrt().max(1e-12));
    }

    let mut depth: Vec<(f64, usize)> = curves
        .iter()
        .enumerate()
        .map(|(j, curve)| {
            let d = curve
                .iter()
                .zip(med.iter().zip(scale.iter()))
                .map(|(v, (c, s))| ((v - c) / s).abs())
                .fold(0.0_f64, f64::max);
            (d, j)
        })
        .collect();
    depth.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let keep = ((level * j_total as f64).ceil() as usize).clamp(1, j_total);
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for &(_, j) in depth.iter().take(keep) {
        for (x, &v) in curves[j].iter().enumerate() {
            lo[x] = lo[x].min(v);
            hi[x] = hi[x].max(v);
        }
    }
    (lo, hi)
}

/// Area between the band edges with uniform abscissa spacing `spacing`.
pub fn band_area(lo: &[f64], hi: &[f64], spacing: f64) -> f64 {
    assert_eq!(lo.len(), hi.len());
    spacing * lo.iter().zip(hi).map(|(a, b)| b - a).sum::<f64>()
}

/// Least-squares slope of y against x. NaN when fewer than two distinct
/// abscissas are given.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let xbar = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.0 - xbar).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return f64::NAN;
    }
    let sxy = points.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum::<f64>();
    sxy / sxx
}
