//! Power-law diagnostics for the minimum gap as a function of system size.
//!
//! A straight line is fitted to `(ln n, ln g_min)`. If the minimum gap decays
//! like a power of `n` the residuals of that fit carry no systematic shape;
//! if it decays faster the residuals bend downwards. The bend is measured by
//! averaging local second derivatives of the residuals with respect to
//! `ln n`, with the standard error of that average as the error bar.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{valid_sizes, ProblemInstance};
use crate::spectral::minimize_gap;

/// Paired `(n, g_min)` samples together with their natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    n_values: Vec<usize>,
    g_min_values: Vec<f64>,
    log_n: Vec<f64>,
    log_g: Vec<f64>,
}

impl ScalingSeries {
    pub fn new(n_values: Vec<usize>, g_min_values: Vec<f64>) -> Result<Self> {
        if n_values.len() != g_min_values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sizes but {} gaps",
                n_values.len(),
                g_min_values.len()
            )));
        }
        if n_values.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: n_values.len(),
            });
        }
        for pair in n_values.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::DegenerateSpacing(pair[1]));
            }
        }
        if n_values[0] == 0 {
            return Err(Error::InvalidArgument("system size 0".into()));
        }
        if let Some(g) = g_min_values.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidArgument(format!("gap {g} is not positive")));
        }
        let log_n = n_values.iter().map(|&n| (n as f64).ln()).collect();
        let log_g = g_min_values.iter().map(|g| g.ln()).collect();
        Ok(Self {
            n_values,
            g_min_values,
            log_n,
            log_g,
        })
    }

    pub fn len(&self) -> usize {
        self.n_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty()
    }

    pub fn n_values(&self) -> &[usize] {
        &self.n_values
    }

    pub fn g_min_values(&self) -> &[f64] {
        &self.g_min_values
    }

    pub fn log_n(&self) -> &[f64] {
        &self.log_n
    }

    pub fn log_g(&self) -> &[f64] {
        &self.log_g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares of `ln g_min` on `ln n`.
pub fn loglog_fit(series: &ScalingSeries) -> Result<LogLogFit> {
    let x = series.log_n();
    let y = series.log_g();
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: x.len(),
        });
    }
    let m = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / m;
    let y_mean = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|xi| (xi - x_mean).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - x_mean) * (yi - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    // centred form keeps the residual sum at rounding level
    let residuals = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - y_mean) - slope * (xi - x_mean))
        .collect();
    Ok(LogLogFit {
        slope,
        intercept,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// Residual curvature below zero by more than one standard error.
    Superpolynomial,
    /// Curvature within one standard error of zero.
    PolynomialConsistent,
    /// Curvature above zero by more than one standard error.
    SubpolynomialTrend,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Superpolynomial => "superpolynomial",
            Classification::PolynomialConsistent => "polynomial-consistent",
            Classification::SubpolynomialTrend => "subpolynomial-trend",
        }
    }

    pub fn from_curvature(mean: f64, std_error: f64) -> Self {
        if mean + std_error < 0.0 {
            Classification::Superpolynomial
        } else if mean - std_error > 0.0 {
            Classification::SubpolynomialTrend
        } else {
            Classification::PolynomialConsistent
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureVerdict {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// Local second derivatives at each interior point.
    pub second_derivatives: Vec<f64>,
    pub mean_curvature: f64,
    pub std_error: f64,
    pub classification: Classification,
}

/// Three-point second derivative on a non-uniform grid.
fn second_derivative(x: [f64; 3], y: [f64; 3]) -> f64 {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[1];
    2.0 * (h1 * y[2] - (h1 + h2) * y[1] + h2 * y[0]) / (h1 * h2 * (h1 + h2))
}

/// Fits the log-log line and classifies the curvature of its residuals.
pub fn residual_curvature(series: &ScalingSeries) -> Result<CurvatureVerdict> {
    if series.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: series.len(),
        });
    }
    let fit = loglog_fit(series)?;
    let x = series.log_n();
    let r = &fit.residuals;
    let second_derivatives: Vec<f64> = (1..x.len() - 1)
        .map(|i| second_derivative([x[i - 1], x[i], x[i + 1]], [r[i - 1], r[i], r[i + 1]]))
        .collect();
    let count = second_derivatives.len() as f64;
    let mean = second_derivatives.iter().sum::<f64>() / count;
    let var = second_derivatives
        .iter()
        .map(|d| (d - mean).powi(2))
        .sum::<f64>()
        / (count - 1.0);
    let std_error = var.sqrt() / count.sqrt();
    Ok(CurvatureVerdict {
        slope: fit.slope,
        intercept: fit.intercept,
        residuals: fit.residuals,
        second_derivatives,
        mean_curvature: mean,
        std_error,
        classification: Classification::from_curvature(mean, std_error),
    })
}

/// Settings for the per-size gap minimisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSearch {
    pub coarse_step: f64,
    pub refine_tol: f64,
}

impl Default for GapSearch {
    fn default() -> Self {
        Self {
            coarse_step: 1e-3,
            refine_tol: 1e-6,
        }
    }
}

/// Minimum gaps for every valid size of `(alpha, c)` in `n_min..=n_max`.
pub fn gap_series(
    alpha: f64,
    c: f64,
    n_min: usize,
    n_max: usize,
    search: GapSearch,
) -> Result<ScalingSeries> {
    let sizes = valid_sizes(alpha, c, n_min, n_max);
    if sizes.is_empty() {
        return Err(Error::EmptySizeRange {
            alpha,
            c,
            n_min,
            n_max,
        });
    }
    let gaps = sizes
        .par_iter()
        .map(|&n| {
            let inst = ProblemInstance::checked(n, alpha, c)?;
            minimize_gap(&inst, search.coarse_step, search.refine_tol).map(|p| p.g_min)
        })
        .collect::<Result<Vec<f64>>>()?;
    ScalingSeries::new(sizes, gaps)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanOutcome {
    Classified(CurvatureVerdict),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaScan {
    pub alpha: f64,
    pub c: f64,
    pub series: Option<ScalingSeries>,
    pub outcome: ScanOutcome,
}

impl AlphaScan {
    pub fn verdict(&self) -> Option<&CurvatureVerdict> {
        match &self.outcome {
            ScanOutcome::Classified(v) => Some(v),
            ScanOutcome::Skipped(_) => None,
        }
    }
}

/// Classifies the residual curvature for each `alpha` at fixed `c`.
///
/// Exponents with fewer than four valid sizes in range are reported as
/// skipped. Output follows the order of `alphas`.
pub fn alpha_transition_scan(
    alphas: &[f64],
    c: f64,
    n_min: usize,
    n_max: usize,
    search: GapSearch,
) -> Result<Vec<AlphaScan>> {
    alphas
        .iter()
        .map(|&alpha| {
            let sizes = valid_sizes(alpha, c, n_min, n_max);
            if sizes.len() < 4 {
                return Ok(AlphaScan {
                    alpha,
                    c,
                    series: None,
                    outcome: ScanOutcome::Skipped(format!(
                        "{} valid sizes in {n_min}..={n_max}, need 4",
                        sizes.len()
                    )),
                });
            }
            let series = gap_series(alpha, c, n_min, n_max, search)?;
            let verdict = residual_curvature(&series)?;
            Ok(AlphaScan {
                alpha,
                c,
                series: Some(series),
                outcome: ScanOutcome::Classified(verdict),
            })
        })
        .collect()
}
