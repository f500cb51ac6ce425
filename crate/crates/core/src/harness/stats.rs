//! Order statistics and log-log fits used for aggregation across seeds.

/// Linear-interpolation quantile of unsorted data (`q` in `[0, 1]`).
pub fn quantile(data: &[f64], q: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5)
}

/// Least-squares slope of `ln y` against `ln x`. Non-positive `y` values are
/// floored at `floor` so exact zeros count as "very small".
pub fn loglog_slope(x: &[f64], y: &[f64], floor: f64) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return f64::NAN;
    }
    let lx: Vec<f64> = x[..n].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y[..n].iter().map(|v| v.max(floor).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        let d = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(median(&d), 3.0);
        assert_eq!(quantile(&d, 0.25), 2.0);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn power_law_slope() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y, 1e-300) + 0.5).abs() < 1e-12);
    }
}
