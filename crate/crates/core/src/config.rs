//! Run configuration: flat key=value text with strict unknown-key
//! rejection. Every key has a default, so an empty file (or no file) runs
//! the reference parameter set.

use std::collections::BTreeMap;

use crate::calibration::CalibrationCriterion;
use crate::error::{Error, Result};
use crate::fitting::Breakpoints;
use crate::geometry::{AreaSpec, Layout, LayoutKind};
use crate::metrics::CapacityMap;
use crate::propagation::{ChannelSpec, CombinedLosNlosModel, PathLossModel, SingleSlopeModel};
use crate::simcore::{NoiseSpec, Scenario, UserPolicy};

/// Which path-loss model drives the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    SingleSlope,
    Combined,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub layout: LayoutKind,
    pub model: ModelKind,
    pub area_side_km: f64,
    pub densities_per_km2: Vec<f64>,
    pub n_snapshots: u32,
    pub seed: u64,
    pub single_slope: SingleSlopeModel,
    pub combined: CombinedLosNlosModel,
    pub channel: ChannelSpec,
    pub noise: NoiseSpec,
    pub capacity: CapacityMap,
    pub calibration: CalibrationCriterion,
    pub users: UserPolicy,
    pub torus: bool,
    pub breakpoints_per_km2: Vec<f64>,
    pub energy_p0_w: Vec<f64>,
    pub energy_krf: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            layout: LayoutKind::SquareGrid,
            model: ModelKind::Combined,
            area_side_km: 1.0,
            densities_per_km2: vec![
                10.0, 20.0, 40.0, 60.0, 100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 8000.0,
            ],
            n_snapshots: 50,
            seed: 1,
            single_slope: SingleSlopeModel::default(),
            combined: CombinedLosNlosModel::default(),
            channel: ChannelSpec::default(),
            noise: NoiseSpec::default(),
            capacity: CapacityMap::default(),
            calibration: CalibrationCriterion::default(),
            users: UserPolicy::default(),
            torus: false,
            breakpoints_per_km2: vec![10.0, 60.0, 400.0, 8000.0],
            energy_p0_w: vec![2.0, 10.0],
            energy_krf: 10.0,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::InvalidConfig(format!("key '{key}': expected a number, got '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<Vec<f64>>>()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "key '{key}': expected true or false, got '{v}'"
        ))),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::InvalidConfig(format!("key '{key}': expected an integer, got '{v}'")))
}

impl RunConfig {
    /// Parse `key = value` lines; `#` starts a comment line. Unknown or
    /// repeated keys are errors.
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), lineno).is_some() {
                return Err(Error::InvalidConfig(format!("key '{key}' appears twice")));
            }
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "layout" => {
                self.layout = match v {
                    "grid" => LayoutKind::SquareGrid,
                    "sppp" => LayoutKind::Sppp,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "key 'layout': expected grid or sppp, got '{v}'"
                        )))
                    }
                }
            }
            "model" => {
                self.model = match v {
                    "single_slope" => ModelKind::SingleSlope,
                    "combined" => ModelKind::Combined,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "key 'model': expected single_slope or combined, got '{v}'"
                        )))
                    }
                }
            }
            "area_side_km" => self.area_side_km = parse_f64(key, v)?,
            "densities_per_km2" => self.densities_per_km2 = parse_list(key, v)?,
            "n_snapshots" => self.n_snapshots = parse_usize(key, v)? as u32,
            "seed" => {
                self.seed = v.parse::<u64>().map_err(|_| {
                    Error::InvalidConfig(format!("key 'seed': expected an integer, got '{v}'"))
                })?
            }
            "single_slope_k_db" => self.single_slope.k_db = parse_f64(key, v)?,
            "single_slope_beta" => self.single_slope.beta = parse_f64(key, v)?,
            "combined_los_k_db" => self.combined.los_k_db = parse_f64(key, v)?,
            "combined_los_beta" => self.combined.los_beta = parse_f64(key, v)?,
            "combined_nlos_k_db" => self.combined.nlos_k_db = parse_f64(key, v)?,
            "combined_nlos_beta" => self.combined.nlos_beta = parse_f64(key, v)?,
            "combined_d0_km" => self.combined.d0_km = parse_f64(key, v)?,
            "combined_d1_km" => self.combined.d1_km = parse_f64(key, v)?,
            "shadowing_std_db" => self.channel.shadowing_std_db = parse_f64(key, v)?,
            "penetration_loss_db" => self.channel.penetration_loss_db = parse_f64(key, v)?,
            "noise_psd_dbm_hz" => self.noise.psd_dbm_hz = parse_f64(key, v)?,
            "bandwidth_hz" => self.noise.bandwidth_hz = parse_f64(key, v)?,
            "noise_figure_db" => self.noise.noise_figure_db = parse_f64(key, v)?,
            "capacity_bw_eff" => self.capacity.bw_eff = parse_f64(key, v)?,
            "capacity_sinr_eff" => self.capacity.sinr_eff = parse_f64(key, v)?,
            "capacity_se_cap" => self.capacity.se_cap_bps_hz = parse_f64(key, v)?,
            "calib_quantile" => self.calibration.y_quantile = parse_f64(key, v)?,
            "calib_delta_db0" => self.calibration.delta_db0 = parse_f64(key, v)?,
            "calib_search_lo_w" => self.calibration.search_lo_w = parse_f64(key, v)?,
            "calib_search_hi_w" => self.calibration.search_hi_w = parse_f64(key, v)?,
            "calib_bracket_tol_db" => self.calibration.bracket_tol_db = parse_f64(key, v)?,
            "users_min" => self.users.min_users = parse_usize(key, v)?,
            "users_per_bs" => self.users.per_bs = parse_usize(key, v)?,
            "users_max" => self.users.max_users = parse_usize(key, v)?,
            "torus" => self.torus = parse_bool(key, v)?,
            "breakpoints_per_km2" => self.breakpoints_per_km2 = parse_list(key, v)?,
            "energy_p0_w" => self.energy_p0_w = parse_list(key, v)?,
            "energy_krf" => self.energy_krf = parse_f64(key, v)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        AreaSpec::new(self.area_side_km)?;
        if self.densities_per_km2.is_empty() {
            return Err(Error::InvalidConfig("density list is empty".into()));
        }
        if !self
            .densities_per_km2
            .windows(2)
            .all(|w| w[0] < w[1])
            || self.densities_per_km2[0] <= 0.0
        {
            return Err(Error::InvalidConfig(
                "densities must be positive and strictly increasing".into(),
            ));
        }
        if self.n_snapshots < 1 {
            return Err(Error::InvalidConfig("n_snapshots must be >= 1".into()));
        }
        self.path_loss_model().validate()?;
        self.channel.validate()?;
        self.capacity.validate()?;
        self.calibration.validate()?;
        self.users.validate()?;
        Breakpoints::new(self.breakpoints_per_km2.clone())?;
        if self.energy_p0_w.is_empty() || self.energy_p0_w.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidConfig(
                "energy_p0_w needs at least one positive value".into(),
            ));
        }
        if self.energy_krf < 1.0 {
            return Err(Error::InvalidConfig("energy_krf must be >= 1".into()));
        }
        Ok(())
    }

    pub fn path_loss_model(&self) -> PathLossModel {
        match self.model {
            ModelKind::SingleSlope => PathLossModel::SingleSlope(self.single_slope),
            ModelKind::Combined => PathLossModel::Combined(self.combined),
        }
    }

    pub fn area(&self) -> AreaSpec {
        AreaSpec {
            side_km: self.area_side_km,
        }
    }

    pub fn layout_name(&self) -> &'static str {
        match self.layout {
            LayoutKind::SquareGrid => "grid",
            LayoutKind::Sppp => "sppp",
        }
    }

    pub fn model_name(&self) -> &'static str {
        match self.model {
            ModelKind::SingleSlope => "single_slope",
            ModelKind::Combined => "combined",
        }
    }

    /// Scenario for one density of the sweep.
    pub fn scenario(&self, density_per_km2: f64) -> Result<Scenario> {
        Ok(Scenario {
            area: self.area(),
            layout: Layout::new(self.layout, density_per_km2)?,
            model: self.path_loss_model(),
            channel: self.channel,
            noise: self.noise,
            users: self.users,
            torus: self.torus,
        })
    }

    fn fmt_list(xs: &[f64]) -> String {
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Canonical `key = value` listing of the effective configuration, in
    /// fixed key order; hashed and embedded into every output file.
    pub fn canonical_lines(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = Vec::new();
        out.push(("layout", self.layout_name().into()));
        out.push(("model", self.model_name().into()));
        out.push(("area_side_km", self.area_side_km.to_string()));
        out.push(("densities_per_km2", Self::fmt_list(&self.densities_per_km2)));
        out.push(("n_snapshots", self.n_snapshots.to_string()));
        out.push(("seed", self.seed.to_string()));
        out.push(("single_slope_k_db", self.single_slope.k_db.to_string()));
        out.push(("single_slope_beta", self.single_slope.beta.to_string()));
        out.push(("combined_los_k_db", self.combined.los_k_db.to_string()));
        out.push(("combined_los_beta", self.combined.los_beta.to_string()));
        out.push(("combined_nlos_k_db", self.combined.nlos_k_db.to_string()));
        out.push(("combined_nlos_beta", self.combined.nlos_beta.to_string()));
        out.push(("combined_d0_km", self.combined.d0_km.to_string()));
        out.push(("combined_d1_km", self.combined.d1_km.to_string()));
        out.push(("shadowing_std_db", self.channel.shadowing_std_db.to_string()));
        out.push(("penetration_loss_db", self.channel.penetration_loss_db.to_string()));
        out.push(("noise_psd_dbm_hz", self.noise.psd_dbm_hz.to_string()));
        out.push(("bandwidth_hz", self.noise.bandwidth_hz.to_string()));
        out.push(("noise_figure_db", self.noise.noise_figure_db.to_string()));
        out.push(("capacity_bw_eff", self.capacity.bw_eff.to_string()));
        out.push(("capacity_sinr_eff", self.capacity.sinr_eff.to_string()));
        out.push(("capacity_se_cap", self.capacity.se_cap_bps_hz.to_string()));
        out.push(("calib_quantile", self.calibration.y_quantile.to_string()));
        out.push(("calib_delta_db0", self.calibration.delta_db0.to_string()));
        out.push(("calib_search_lo_w", self.calibration.search_lo_w.to_string()));
        out.push(("calib_search_hi_w", self.calibration.search_hi_w.to_string()));
        out.push(("calib_bracket_tol_db", self.calibration.bracket_tol_db.to_string()));
        out.push(("users_min", self.users.min_users.to_string()));
        out.push(("users_per_bs", self.users.per_bs.to_string()));
        out.push(("users_max", self.users.max_users.to_string()));
        out.push(("torus", self.torus.to_string()));
        out.push(("breakpoints_per_km2", Self::fmt_list(&self.breakpoints_per_km2)));
        out.push(("energy_p0_w", Self::fmt_list(&self.energy_p0_w)));
        out.push(("energy_krf", self.energy_krf.to_string()));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn canonical_text(&self) -> String {
        self.canonical_lines()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
