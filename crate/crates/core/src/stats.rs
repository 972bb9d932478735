//! Small regression helpers shared by the diagnostics.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. Needs at least two distinct `x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Some(LineFit { slope, intercept, rms })
}

/// Log-log fit of `values ≈ c·scales^slope`, ignoring non-positive values.
pub fn fit_power_law(scales: &[f64], values: &[f64]) -> Option<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(values)
        .filter(|(s, v)| **s > 0.0 && **v > 0.0)
        .map(|(s, v)| (s.ln(), v.ln()))
        .unzip();
    fit_line(&xs, &ys)
}
