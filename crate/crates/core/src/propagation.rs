//! Path loss, LOS probability, per-link state sampling and link gain.
//!
//! Two path-loss models are supported: a single power-law slope, and a
//! combined model that picks a LOS or NLOS power law per link with a
//! distance-dependent LOS probability. Constants are carried in dB form
//! (`pl_db(d) = k_db + 10 * beta * log10(d_km)`), which is how they appear
//! in configuration files and in 3GPP parameter tables.

use rand::Rng;

use crate::error::{Error, Result};

/// Links shorter than this are evaluated at this distance; the power-law
/// models diverge as d -> 0.
pub const D_MIN_KM: f64 = 0.001;

const LN_10_OVER_10: f64 = std::f64::consts::LN_10 / 10.0;

/// 10^(db/10).
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    (db * LN_10_OVER_10).exp()
}

/// 10 * log10(x).
#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// One power law for every link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleSlopeModel {
    /// Attenuation at 1 km, dB.
    pub k_db: f64,
    /// Path-loss exponent.
    pub beta: f64,
}

impl Default for SingleSlopeModel {
    fn default() -> Self {
        SingleSlopeModel {
            k_db: 140.7,
            beta: 3.67,
        }
    }
}

/// LOS / NLOS power-law pair with the transition constants of the LOS
/// probability curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedLosNlosModel {
    pub los_k_db: f64,
    pub los_beta: f64,
    pub nlos_k_db: f64,
    pub nlos_beta: f64,
    pub d0_km: f64,
    pub d1_km: f64,
}

impl Default for CombinedLosNlosModel {
    fn default() -> Self {
        CombinedLosNlosModel {
            los_k_db: 103.8,
            los_beta: 2.09,
            nlos_k_db: 145.4,
            nlos_beta: 3.75,
            d0_km: 0.156,
            d1_km: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathLossModel {
    SingleSlope(SingleSlopeModel),
    Combined(CombinedLosNlosModel),
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PathLossModel::SingleSlope(m) => m.beta > 0.0,
            PathLossModel::Combined(m) => {
                m.los_beta > 0.0 && m.nlos_beta > 0.0 && m.d0_km > 0.0 && m.d1_km > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "path-loss exponents and transition distances must be positive".into(),
            ))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PathLossModel::SingleSlope(_) => "single_slope",
            PathLossModel::Combined(_) => "combined",
        }
    }
}

/// Propagation state of one BS-user link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkState {
    Los,
    Nlos,
}

/// Shadowing and penetration applied on top of path loss.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSpec {
    pub shadowing_std_db: f64,
    pub penetration_loss_db: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            shadowing_std_db: 8.0,
            penetration_loss_db: 20.0,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shadowing_std_db < 0.0 || self.penetration_loss_db < 0.0 {
            return Err(Error::InvalidConfig(
                "shadowing std and penetration loss must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Probability that a link of length `d_km` is in line of sight:
/// `0.5 - min(0.5, 5 e^{-d0/d}) + min(0.5, 5 e^{-d/d1})`.
pub fn los_probability(d_km: f64, model: &CombinedLosNlosModel) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::Domain(format!(
            "LOS probability needs d > 0, got {d_km}"
        )));
    }
    Ok(los_probability_raw(d_km, model.d0_km, model.d1_km))
}

#[inline]
pub(crate) fn los_probability_raw(d_km: f64, d0_km: f64, d1_km: f64) -> f64 {
    0.5 - (5.0 * (-d0_km / d_km).exp()).min(0.5) + (5.0 * (-d_km / d1_km).exp()).min(0.5)
}

/// Draw the LOS/NLOS state of one link. The state is drawn once per link
/// per snapshot and reused for every power evaluation in that snapshot.
pub fn sample_link_state<R: Rng>(
    d_km: f64,
    model: &CombinedLosNlosModel,
    rng: &mut R,
) -> Result<LinkState> {
    let p = los_probability(d_km, model)?;
    Ok(state_from_uniform(rng.random::<f64>(), p))
}

#[inline]
pub(crate) fn state_from_uniform(u: f64, p_los: f64) -> LinkState {
    if u < p_los {
        LinkState::Los
    } else {
        LinkState::Nlos
    }
}

/// Path loss in dB at `d_km`, clamped below at [`D_MIN_KM`]. For the
/// combined model the `state` selects the branch; it is ignored for the
/// single-slope model.
pub fn path_loss_db(model: &PathLossModel, state: Option<LinkState>, d_km: f64) -> f64 {
    let d = d_km.max(D_MIN_KM);
    let log_d = d.log10();
    match model {
        PathLossModel::SingleSlope(m) => m.k_db + 10.0 * m.beta * log_d,
        PathLossModel::Combined(m) => match state.unwrap_or(LinkState::Nlos) {
            LinkState::Los => m.los_k_db + 10.0 * m.los_beta * log_d,
            LinkState::Nlos => m.nlos_k_db + 10.0 * m.nlos_beta * log_d,
        },
    }
}

/// Dimensionless link gain `10^{-(pl + shadow + penetration)/10}`.
#[inline]
pub fn link_gain_linear(pl_db: f64, shadow_db: f64, penetration_db: f64) -> f64 {
    db_to_linear(-(pl_db + shadow_db + penetration_db))
}
