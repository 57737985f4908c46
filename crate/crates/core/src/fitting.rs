//! Power-law and piecewise power-law fits in log-log space.
//!
//! A metric y(x) is modeled as `a * x^b` per density segment; the fit is
//! ordinary least squares on `(log10 x, log10 y)`. Segments are fitted
//! independently, with no continuity constraint at the breakpoints.

use crate::error::{Error, Result};

/// One fitted power law, valid on `[x_lo, x_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// Coefficient: metric value at x = 1.
    pub a: f64,
    /// Exponent (log-log slope).
    pub b: f64,
    /// Coefficient of determination of the log-domain regression.
    pub r2: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// Ordered density breakpoints delimiting fit segments.
#[derive(Debug, Clone)]
pub struct Breakpoints(Vec<f64>);

impl Breakpoints {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidConfig(
                "breakpoints need at least 2 entries".into(),
            ));
        }
        if !edges.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Breakpoints(edges))
    }

    pub fn edges(&self) -> &[f64] {
        &self.0
    }

    pub fn n_segments(&self) -> usize {
        self.0.len() - 1
    }
}

fn check_points(points: &[(f64, f64)]) -> Result<()> {
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Domain(format!(
                "power-law fit needs x > 0 and y > 0, got ({x}, {y})"
            )));
        }
    }
    Ok(())
}

/// Least-squares power law through `points`; the validity interval is the
/// data range.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    check_points(points)?;
    let distinct = {
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        xs.sort_unstable_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    if distinct < 2 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs >= 2 distinct x values, got {distinct}"
        )));
    }

    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log10(), y.log10())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let ss_res: f64 = logs
        .iter()
        .map(|&(lx, ly)| {
            let r = ly - (intercept + slope * lx);
            r * r
        })
        .sum();
    let ss_tot: f64 = logs.iter().map(|&(_, ly)| (ly - mean_y) * (ly - mean_y)).sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };

    let x_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerLawFit {
        a: 10f64.powf(intercept),
        b: slope,
        r2,
        x_lo,
        x_hi,
    })
}

/// Independent least-squares power law per segment `[edge_i, edge_{i+1})`.
pub fn fit_piecewise(points: &[(f64, f64)], breakpoints: &Breakpoints) -> Result<Vec<PowerLawFit>> {
    check_points(points)?;
    let edges = breakpoints.edges();
    let mut fits = Vec::with_capacity(breakpoints.n_segments());
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let seg: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|&(x, _)| x >= lo && x < hi)
            .collect();
        let mut fit = fit_power_law(&seg).map_err(|e| match e {
            Error::InsufficientData(msg) => {
                Error::InsufficientData(format!("segment [{lo}, {hi}): {msg}"))
            }
            other => other,
        })?;
        fit.x_lo = lo;
        fit.x_hi = hi;
        fits.push(fit);
    }
    Ok(fits)
}
