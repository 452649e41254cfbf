//! Windowed drift and volatility estimation from an observed series.
//!
//! The series is cut into consecutive windows of a fixed number of
//! increments; each window's drift slope is its net change over its time
//! span, realizing the per-step drift schedule of the process. Volatility
//! comes from the drift-removed increments normalized by their gaps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::series::{SeriesData, TimeUnit};

/// One completed drift window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftWindow {
    /// Index of the first observation of the window.
    pub start: usize,
    /// Index of the last observation (inclusive).
    pub end: usize,
    /// Window time span in configured units.
    pub span: f64,
    /// Estimated drift slope (value per unit time).
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub sigma_hat: f64,
    pub drift_windows: Vec<DriftWindow>,
    /// Mean of the window slopes.
    pub w_bar_hat: f64,
    /// Predicted standard error of `w_bar_hat` (from `sigma_hat`).
    pub w_bar_se: f64,
    /// Slope of the last completed window.
    pub w_prev_hat: f64,
    /// Mean observation spacing in configured units.
    pub delta_hat: f64,
    /// Last observed value (the process is re-based at the decision point).
    pub a0: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitError {
    /// Series shorter than two windows.
    TooShort { len: usize, window: usize },
    /// A window spans zero time after unit conversion.
    ZeroSpan { window_index: usize },
    /// Window size below two increments.
    WindowTooSmall,
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooShort { len, window } => {
                write!(f, "series of {len} points is too short for window {window} (need 2x)")
            }
            Self::ZeroSpan { window_index } => {
                write!(f, "window {window_index} spans zero time")
            }
            Self::WindowTooSmall => write!(f, "window must cover at least 2 increments"),
        }
    }
}

impl std::error::Error for FitError {}

/// Estimate process parameters from a series.
///
/// `window` counts increments per drift window; only full windows enter the
/// estimates. The volatility estimator removes each window's fitted slope
/// and divides by the per-window degrees of freedom (`window - 1` each),
/// since the endpoint slope absorbs one degree per window.
pub fn fit_params(
    series: &SeriesData,
    window: usize,
    unit: TimeUnit,
) -> Result<FitResult, FitError> {
    if window < 2 {
        return Err(FitError::WindowTooSmall);
    }
    let n = series.len();
    if n < 2 * window {
        return Err(FitError::TooShort { len: n, window });
    }
    let scale = unit.seconds();
    let time = |i: usize| series.points[i].0 / scale;
    let value = |i: usize| series.points[i].1;

    let increments = n - 1;
    let delta_hat = (time(n - 1) - time(0)) / increments as f64;

    let full = increments / window;
    let mut windows = Vec::with_capacity(full);
    for w in 0..full {
        let start = w * window;
        let end = start + window;
        let span = time(end) - time(start);
        if span <= 0.0 {
            return Err(FitError::ZeroSpan { window_index: w });
        }
        windows.push(DriftWindow {
            start,
            end,
            span,
            slope: (value(end) - value(start)) / span,
        });
    }

    // Normalized residual sum over full-window increments.
    let mut residual_sum = 0.0;
    for win in &windows {
        for i in win.start..win.end {
            let dt = time(i + 1) - time(i);
            let dv = value(i + 1) - value(i);
            let centered = dv - win.slope * dt;
            residual_sum += centered * centered / dt;
        }
    }
    let dof = (full * (window - 1)) as f64;
    let sigma_hat = (residual_sum / dof).sqrt();

    let w_bar_hat = windows.iter().map(|w| w.slope).sum::<f64>() / full as f64;
    let inv_span_sum: f64 = windows.iter().map(|w| 1.0 / w.span).sum();
    let w_bar_se = sigma_hat * inv_span_sum.sqrt() / full as f64;
    let w_prev_hat = windows.last().expect("at least one window").slope;

    Ok(FitResult {
        sigma_hat,
        drift_windows: windows,
        w_bar_hat,
        w_bar_se,
        w_prev_hat,
        delta_hat,
        a0: value(n - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: Vec<(f64, f64)>) -> SeriesData {
        SeriesData { points, source: "test".into() }
    }

    #[test]
    fn constant_series_fits_zero() {
        let pts = (0..20).map(|i| (i as f64, 5.0)).collect();
        let fit = fit_params(&series(pts), 5, TimeUnit::Sec).unwrap();
        assert_eq!(fit.sigma_hat, 0.0);
        assert!(fit.drift_windows.iter().all(|w| w.slope == 0.0));
        assert_eq!(fit.w_bar_hat, 0.0);
        assert_eq!(fit.delta_hat, 1.0);
        assert_eq!(fit.a0, 5.0);
    }

    #[test]
    fn linear_series_recovers_slope_exactly() {
        let pts = (0..40).map(|i| (i as f64 * 2.0, 1.0 + 0.75 * i as f64 * 2.0)).collect();
        let fit = fit_params(&series(pts), 4, TimeUnit::Sec).unwrap();
        assert!((fit.w_bar_hat - 0.75).abs() < 1e-12);
        assert!(fit.sigma_hat < 1e-9);
        assert_eq!(fit.delta_hat, 2.0);
    }

    #[test]
    fn too_short_is_rejected() {
        let pts = (0..9).map(|i| (i as f64, i as f64)).collect();
        assert!(matches!(
            fit_params(&series(pts), 5, TimeUnit::Sec),
            Err(FitError::TooShort { .. })
        ));
    }

    #[test]
    fn window_of_one_is_rejected() {
        let pts = (0..9).map(|i| (i as f64, i as f64)).collect();
        assert!(matches!(fit_params(&series(pts), 1, TimeUnit::Sec), Err(FitError::WindowTooSmall)));
    }

    #[test]
    fn day_unit_rescales_time() {
        let pts = (0..20).map(|i| (i as f64 * 86_400.0, 3.0 * i as f64)).collect();
        let fit = fit_params(&series(pts), 5, TimeUnit::Day).unwrap();
        assert_eq!(fit.delta_hat, 1.0);
        assert!((fit.w_bar_hat - 3.0).abs() < 1e-12);
    }

    #[test]
    fn only_full_windows_count() {
        // 23 increments with window 5: 4 full windows, trailing 3 ignored.
        let pts = (0..24).map(|i| (i as f64, i as f64)).collect();
        let fit = fit_params(&series(pts), 5, TimeUnit::Sec).unwrap();
        assert_eq!(fit.drift_windows.len(), 4);
        assert_eq!(fit.drift_windows.last().unwrap().end, 20);
        let mean: f64 = fit.drift_windows.iter().map(|w| w.slope).sum::<f64>() / 4.0;
        assert_eq!(fit.w_bar_hat, mean);
    }
}
