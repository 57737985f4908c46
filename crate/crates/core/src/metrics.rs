//! Spectral-efficiency mapping and area spectral efficiency.
//!
//! SINR maps to link spectral efficiency through an attenuated, capped
//! Shannon curve. The area spectral efficiency of one density point is the
//! average per-cell spectral efficiency over every non-empty cell of every
//! snapshot, times the BS density per m².

use crate::error::{Error, Result};
use crate::propagation::db_to_linear;
use crate::simcore::{Batch, NetworkSnapshot};

/// Capped link-level capacity curve.
#[derive(Debug, Clone, Copy)]
pub struct CapacityMap {
    pub bw_eff: f64,
    pub sinr_eff: f64,
    pub se_cap_bps_hz: f64,
}

impl Default for CapacityMap {
    fn default() -> Self {
        CapacityMap {
            bw_eff: 0.75,
            sinr_eff: 1.33,
            se_cap_bps_hz: 5.55,
        }
    }
}

impl CapacityMap {
    pub fn validate(&self) -> Result<()> {
        if self.bw_eff > 0.0 && self.sinr_eff > 0.0 && self.se_cap_bps_hz > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "capacity map constants must be positive".into(),
            ))
        }
    }

    #[inline]
    fn eval(&self, gamma_linear: f64) -> f64 {
        (self.bw_eff * (1.0 + gamma_linear / self.sinr_eff).log2()).min(self.se_cap_bps_hz)
    }
}

/// Spectral efficiency in bit/s/Hz for a linear SINR.
pub fn capacity(gamma_linear: f64, map: &CapacityMap) -> Result<f64> {
    if !(gamma_linear >= 0.0) {
        return Err(Error::Domain(format!(
            "capacity needs gamma >= 0, got {gamma_linear}"
        )));
    }
    Ok(map.eval(gamma_linear))
}

/// Aggregate ASE for one density point.
#[derive(Debug, Clone, Copy)]
pub struct AseRecord {
    pub density_per_km2: f64,
    pub ase_bps_hz_m2: f64,
    pub mean_cell_se_bps_hz: f64,
    pub n_nonempty_cells: u64,
    pub n_snapshots: u32,
}

fn record_from_cell_means(
    cell_means: &[f64],
    density_per_km2: f64,
    n_snapshots: u32,
) -> Result<AseRecord> {
    if cell_means.is_empty() {
        return Err(Error::InsufficientData(
            "no cell has an associated user".into(),
        ));
    }
    let mean_cell_se = cell_means.iter().sum::<f64>() / cell_means.len() as f64;
    Ok(AseRecord {
        density_per_km2,
        ase_bps_hz_m2: density_per_km2 * 1e-6 * mean_cell_se,
        mean_cell_se_bps_hz: mean_cell_se,
        n_nonempty_cells: cell_means.len() as u64,
        n_snapshots,
    })
}

/// ASE from full snapshots (SINR must be present).
pub fn area_spectral_efficiency(
    snapshots: &[NetworkSnapshot],
    map: &CapacityMap,
    density_per_km2: f64,
) -> Result<AseRecord> {
    map.validate()?;
    if snapshots.is_empty() {
        return Err(Error::InsufficientData("no snapshots".into()));
    }
    let mut cell_means = Vec::new();
    for snap in snapshots {
        let sinr_db = snap.sinr_db.as_ref().ok_or_else(|| {
            Error::InsufficientData("snapshot carries no SINR (pure-SIR mode)".into())
        })?;
        for members in &snap.cell_members {
            if members.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for &u in members {
                sum += map.eval(db_to_linear(sinr_db[u as usize]));
            }
            cell_means.push(sum / members.len() as f64);
        }
    }
    record_from_cell_means(&cell_means, density_per_km2, snapshots.len() as u32)
}

/// ASE from a streaming batch, evaluated at the calibrated power.
pub fn ase_from_batch(
    batch: &Batch,
    ptx_w: f64,
    noise_w: f64,
    map: &CapacityMap,
    density_per_km2: f64,
) -> Result<AseRecord> {
    map.validate()?;
    if batch.snapshots.is_empty() {
        return Err(Error::InsufficientData("no snapshots".into()));
    }
    let mut cell_means = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    for snap in &batch.snapshots {
        sums.clear();
        sums.resize(snap.bs_count, 0.0);
        counts.clear();
        counts.resize(snap.bs_count, 0);
        for ((&s, &g), &i) in snap
            .serving
            .iter()
            .zip(&snap.gain_serving)
            .zip(&snap.interference)
        {
            let gamma = ptx_w * g / (ptx_w * i + noise_w);
            sums[s as usize] += map.eval(gamma);
            counts[s as usize] += 1;
        }
        for (sum, &n) in sums.iter().zip(&counts) {
            if n > 0 {
                cell_means.push(sum / n as f64);
            }
        }
    }
    record_from_cell_means(&cell_means, density_per_km2, batch.n_snapshots())
}
