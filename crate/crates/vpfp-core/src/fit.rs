//! Least-squares exponent and rate fits with declared windows.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpfpError};

/// Result of a straight-line fit `y ≈ intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the residuals.
    pub residual: f64,
    pub points: usize,
}

/// Ordinary least squares on paired samples (non-finite pairs are skipped).
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Some(LineFit {
        slope,
        intercept,
        residual,
        points: n,
    })
}

/// Which Green's-function component a fit describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    P0,
    Pm,
    P3,
    Full,
    Field,
}

/// Fitted algebraic spatial exponent and/or exponential time rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub component: Component,
    pub t: f64,
    /// Exponent `p` in `|g| ~ (1+|x|^2)^{-p/2}`.
    pub exponent_x: f64,
    /// Rate `r` in `|g| ~ e^{-r t}`.
    pub rate_t: f64,
    pub window: (f64, f64),
    pub residual: f64,
    pub points: usize,
}

/// Slope of `log|g|` against `log(1+|x|^2)/2` on `window`, reported as a
/// positive decay exponent.
///
/// Samples whose magnitude is zero or below `floor` are dropped so that a
/// profile that has fallen to round-off does not corrupt the fit; the
/// number of retained points is returned with the fit.
pub fn fit_decay(
    component: Component,
    t: f64,
    x: &[f64],
    profile: &[f64],
    window: (f64, f64),
    floor: f64,
) -> Result<DecayFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(profile)
        .filter(|(xx, g)| **xx >= window.0 && **xx <= window.1 && g.abs() > floor)
        .map(|(xx, g)| (0.5 * (1.0 + xx * xx).ln(), g.abs().ln()))
        .unzip();
    let fit = line_fit(&xs, &ys).filter(|f| f.points >= 3).ok_or(VpfpError::FitWindow {
        lo: window.0,
        hi: window.1,
        points: xs.len(),
    })?;
    Ok(DecayFit {
        component,
        t,
        exponent_x: -fit.slope,
        rate_t: f64::NAN,
        window,
        residual: fit.residual,
        points: fit.points,
    })
}

/// Exponential rate `r` in `|g(t)| ~ e^{-r t}` fitted on `window`.
pub fn fit_rate(t: &[f64], values: &[f64], window: (f64, f64)) -> Result<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(values)
        .filter(|(tt, g)| **tt >= window.0 && **tt <= window.1 && g.abs() > 0.0)
        .map(|(tt, g)| (*tt, g.abs().ln()))
        .unzip();
    let mut fit = line_fit(&xs, &ys).ok_or(VpfpError::FitWindow {
        lo: window.0,
        hi: window.1,
        points: xs.len(),
    })?;
    fit.slope = -fit.slope;
    Ok(fit)
}

/// Power-law exponent `p` in `g ~ x^p` (log-log slope) on `window`.
pub fn fit_power(x: &[f64], values: &[f64], window: (f64, f64)) -> Result<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(values)
        .filter(|(xx, g)| **xx >= window.0 && **xx <= window.1 && **xx > 0.0 && g.abs() > 0.0)
        .map(|(xx, g)| (xx.ln(), g.abs().ln()))
        .unzip();
    line_fit(&xs, &ys).ok_or(VpfpError::FitWindow {
        lo: window.0,
        hi: window.1,
        points: xs.len(),
    })
}

/// Monotone tail envelope `sup_{y ≥ x_i} |g(y)|` of a profile sampled on an
/// increasing grid.  Decay bounds are statements about this envelope, and
/// fitting it removes the zeros of oscillating (wave-like) profiles.
pub fn tail_envelope(profile: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; profile.len()];
    let mut run: f64 = 0.0;
    for (o, g) in out.iter_mut().zip(profile).rev() {
        run = run.max(g.abs());
        *o = run;
    }
    out
}
