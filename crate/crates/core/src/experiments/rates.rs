//! Log-log rate fits and the stepsize-regime tables they are compared against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of one smoothing step in `ln t` (50 steps per decade).
pub const LOG_STEP: f64 = std::f64::consts::LN_10 / 50.0;

/// Minimum number of positive points in a fit window.
pub const MIN_FIT_POINTS: usize = 5;

/// A metric sampled at increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(t.len(), y.len(), "curve coordinates must pair up");
        Self { t, y }
    }

    pub fn from_fn(t: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self::new(t.to_vec(), t.iter().map(|&x| f(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Value at the sample closest to `t`.
    pub fn value_near(&self, t: f64) -> Option<f64> {
        self.t
            .iter()
            .zip(&self.y)
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(_, y)| *y)
    }
}

/// Centered moving average in `ln t`.
///
/// Point `i` is replaced by the mean over `u ∈ [ln t_i − h, ln t_i + h]` of the
/// curve linearly interpolated in `u = ln t`, with `h = half_window · LOG_STEP`.
/// Near the ends `h` shrinks so the window stays symmetric; points at `t ≤ 0`
/// are left untouched.
pub fn smooth_curve(curve: &Curve, half_window: usize) -> Curve {
    if half_window == 0 {
        return curve.clone();
    }
    let (idx, u): (Vec<usize>, Vec<f64>) = (0..curve.len())
        .filter(|&i| curve.t[i] > 0.0)
        .map(|i| (i, curve.t[i].ln()))
        .unzip();
    if idx.len() < 2 {
        return curve.clone();
    }
    let v: Vec<f64> = idx.iter().map(|&i| curve.y[i]).collect();
    let (lo, hi) = (u[0], u[u.len() - 1]);
    let mut y = curve.y.clone();
    for (k, &i) in idx.iter().enumerate() {
        let h = (half_window as f64 * LOG_STEP).min(u[k] - lo).min(hi - u[k]);
        if h > 0.0 {
            y[i] = interpolated_integral(&u, &v, u[k] - h, u[k] + h) / (2.0 * h);
        }
    }
    Curve::new(curve.t.clone(), y)
}

/// `∫_a^b` of the piecewise-linear interpolant through `(u, v)`, with `a, b`
/// inside `[u_0, u_last]`.
fn interpolated_integral(u: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let at = |j: usize, x: f64| v[j] + (v[j + 1] - v[j]) * (x - u[j]) / (u[j + 1] - u[j]);
    let mut total = 0.0;
    for j in 0..u.len() - 1 {
        let (l, r) = (u[j].max(a), u[j + 1].min(b));
        if r > l {
            total += 0.5 * (at(j, l) + at(j, r)) * (r - l);
        }
    }
    total
}

/// Least-squares slope of `ln y` on `ln t`, weighting samples by `1/t` so the
/// fit is uniform in `ln t` for evenly spaced `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub t_min: f64,
    pub t_max: f64,
}

/// Fits `ln y = slope · ln t + c` over samples with `t_min ≤ t ≤ t_max` and `y > 0`.
pub fn fit_rate_exponent(curve: &Curve, t_min: f64, t_max: f64) -> Result<RateFit> {
    let points: Vec<(f64, f64, f64)> = curve
        .t
        .iter()
        .zip(&curve.y)
        .filter(|(t, y)| **t >= t_min && **t <= t_max && **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln(), 1.0 / t))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::WindowTooSmall {
            found: points.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let mean_x = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let mean_y = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|(x, _, w)| w * (x - mean_x).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|(x, y, w)| w * (x - mean_x) * (y - mean_y))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|(_, y, w)| w * (y - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|(x, y, w)| w * (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
        t_min,
        t_max,
    })
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Case split for the decay of the critic tracking error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackingRegime {
    /// `σ > 1.5ν`: rate `t^{−ν}` up to `log² t`.
    AboveBalance,
    /// `σ = 1.5ν`: the balanced point, also `t^{−ν}`.
    Balanced,
    /// `ν < σ < 1.5ν`: slow-drift dominated, `t^{−2(σ−ν)}`.
    SlowDrift,
}

impl TrackingRegime {
    pub fn classify(sigma: f64, nu: f64) -> Self {
        if approx_eq(sigma, 1.5 * nu) {
            TrackingRegime::Balanced
        } else if sigma > 1.5 * nu {
            TrackingRegime::AboveBalance
        } else {
            TrackingRegime::SlowDrift
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TrackingRegime::AboveBalance => "σ>1.5ν",
            TrackingRegime::Balanced => "σ=1.5ν",
            TrackingRegime::SlowDrift => "ν<σ<1.5ν",
        }
    }

    /// Upper-bound decay exponent (negative) ignoring log factors.
    pub fn exponent(self, sigma: f64, nu: f64) -> f64 {
        match self {
            TrackingRegime::AboveBalance | TrackingRegime::Balanced => -nu,
            TrackingRegime::SlowDrift => -2.0 * (sigma - nu),
        }
    }
}

/// A stepsize case with its label and predicted exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCase {
    pub label: String,
    pub exponent: f64,
}

/// `E‖∇J‖²` cases for AC (with `ν = 2σ/3`).
pub fn ac_gradient_case(sigma: f64) -> RateCase {
    let (label, exponent) = if approx_eq(sigma, 0.6) {
        ("σ=3/5", -0.4)
    } else if sigma > 0.6 {
        ("3/5<σ≤1", -(1.0 - sigma))
    } else {
        ("0<σ<3/5", -2.0 * sigma / 3.0)
    };
    RateCase {
        label: label.into(),
        exponent,
    }
}

/// `J* − E J` cases for NAC (with `ν = 2σ/3`).
pub fn nac_gap_case(sigma: f64) -> RateCase {
    let (label, exponent) = if approx_eq(sigma, 0.75) {
        ("σ=3/4", -0.25)
    } else if sigma > 0.75 {
        ("σ>3/4", -(1.0 - sigma))
    } else {
        ("σ<3/4", -sigma / 3.0)
    };
    RateCase {
        label: label.into(),
        exponent,
    }
}
