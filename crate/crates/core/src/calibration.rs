//! Interference-limited transmit-power calibration.
//!
//! The per-BS transmit power is the smallest value keeping the network
//! interference limited: the gap between the SIR and SINR distributions at
//! a reference quantile must not exceed a threshold. The gap is evaluated
//! on one snapshot batch (common random numbers between the SIR and SINR
//! sides), which makes it a strictly decreasing function of the power, so
//! a log-domain bisection brackets the minimum exactly.

use crate::error::{Error, Result};
use crate::simcore::{quantile_select, Batch};

/// Quantile criterion and search bracket for the power calibration.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationCriterion {
    /// Reference CDF level (fraction).
    pub y_quantile: f64,
    /// Maximum tolerated SIR-SINR quantile gap, dB.
    pub delta_db0: f64,
    pub search_lo_w: f64,
    pub search_hi_w: f64,
    /// Stop when the bracket is this narrow, dB.
    pub bracket_tol_db: f64,
}

impl Default for CalibrationCriterion {
    fn default() -> Self {
        CalibrationCriterion {
            y_quantile: 0.80,
            delta_db0: 0.2,
            search_lo_w: 1e-10,
            // Sparse networks need kW-scale power before interference
            // drowns the noise floor.
            search_hi_w: 1e4,
            bracket_tol_db: 0.1,
        }
    }
}

impl CalibrationCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_quantile > 0.0 && self.y_quantile < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "calibration quantile must be in (0,1), got {}",
                self.y_quantile
            )));
        }
        if !(self.delta_db0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "calibration gap threshold must be positive, got {}",
                self.delta_db0
            )));
        }
        if !(self.search_lo_w > 0.0 && self.search_lo_w < self.search_hi_w) {
            return Err(Error::InvalidConfig(format!(
                "calibration bracket must satisfy 0 < lo < hi, got [{}, {}]",
                self.search_lo_w, self.search_hi_w
            )));
        }
        if !(self.bracket_tol_db > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bracket tolerance must be positive, got {}",
                self.bracket_tol_db
            )));
        }
        Ok(())
    }
}

/// Calibrated power with the gap it achieves and the bisection step count.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationOutcome {
    pub ptx_w: f64,
    pub gap_db: f64,
    pub iterations: u32,
}

/// SIR-SINR quantile gap in dB at the given power, both sides evaluated on
/// the same batch (identical seeds).
pub fn delta_db(batch: &Batch, noise_w: f64, y_quantile: f64, ptx_w: f64) -> Result<f64> {
    if !(ptx_w > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "transmit power must be positive, got {ptx_w}"
        )));
    }
    let sir_q = batch.sir_quantile(y_quantile)?;
    let sinr_q = batch.sinr_quantile(ptx_w, noise_w, y_quantile)?;
    Ok(sir_q - sinr_q)
}

/// Minimum per-BS transmit power satisfying `delta_db <= delta_db0`,
/// bisected in log power; the returned value is the feasible upper end of
/// the final bracket.
pub fn calibrate_ptx(
    batch: &Batch,
    noise_w: f64,
    crit: &CalibrationCriterion,
) -> Result<CalibrationOutcome> {
    crit.validate()?;
    let sir_q = batch.sir_quantile(crit.y_quantile)?;
    let gap_at = |ptx_w: f64| -> Result<f64> {
        let mut sinr = batch.sinr_db_pooled(ptx_w, noise_w);
        Ok(sir_q - quantile_select(&mut sinr, crit.y_quantile)?)
    };

    let mut lo = crit.search_lo_w.log10();
    let mut hi = crit.search_hi_w.log10();
    let mut gap_hi = gap_at(crit.search_hi_w)?;
    if gap_hi > crit.delta_db0 {
        return Err(Error::CalibrationFailure {
            gap_db: gap_hi,
            ptx_hi_w: crit.search_hi_w,
        });
    }
    let gap_lo = gap_at(crit.search_lo_w)?;
    if gap_lo <= crit.delta_db0 {
        // Already feasible at the lower bracket end; the minimum is at or
        // below it, report the bound.
        return Ok(CalibrationOutcome {
            ptx_w: crit.search_lo_w,
            gap_db: gap_lo,
            iterations: 0,
        });
    }

    let mut iterations = 0u32;
    while (hi - lo) * 10.0 > crit.bracket_tol_db {
        let mid = 0.5 * (lo + hi);
        let gap_mid = gap_at(10f64.powf(mid))?;
        if gap_mid <= crit.delta_db0 {
            hi = mid;
            gap_hi = gap_mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }

    Ok(CalibrationOutcome {
        ptx_w: 10f64.powf(hi),
        gap_db: gap_hi,
        iterations,
    })
}
