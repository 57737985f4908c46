//! Base-station and user placement over a square deployment region.
//!
//! Two deployment models are supported: a regular square lattice and a
//! spatial Poisson point process (SPPP), both over the same square area.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// A point in the deployment plane, in km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x_km: f64,
    pub y_km: f64,
}

/// Square deployment region.
#[derive(Debug, Clone, Copy)]
pub struct AreaSpec {
    pub side_km: f64,
}

impl AreaSpec {
    pub fn new(side_km: f64) -> Result<Self> {
        if !(side_km > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "area side must be positive, got {side_km}"
            )));
        }
        Ok(AreaSpec { side_km })
    }

    pub fn area_km2(&self) -> f64 {
        self.side_km * self.side_km
    }

    pub fn area_m2(&self) -> f64 {
        self.area_km2() * 1e6
    }
}

impl Default for AreaSpec {
    fn default() -> Self {
        AreaSpec { side_km: 1.0 }
    }
}

/// Base-station deployment model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    SquareGrid,
    Sppp,
}

#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub kind: LayoutKind,
    pub target_density_per_km2: f64,
}

impl Layout {
    pub fn new(kind: LayoutKind, target_density_per_km2: f64) -> Result<Self> {
        if !(target_density_per_km2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target density must be positive, got {target_density_per_km2}"
            )));
        }
        Ok(Layout {
            kind,
            target_density_per_km2,
        })
    }
}

/// One realization of base-station and user positions.
#[derive(Debug, Clone)]
pub struct Placement {
    pub bs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// Actual BS count divided by area; for lattices this differs from the
    /// target whenever the target count is not a perfect square, and it is
    /// the value downstream sweeps must use as their density coordinate.
    pub realized_density_per_km2: f64,
    /// Times an SPPP count draw came up empty and was redrawn.
    pub empty_redraws: u32,
}

/// Place `n x n` base stations on a lattice with spacing `side/n`, offset
/// `side/(2n)` from each edge, where `n = round(sqrt(density * area))`.
pub fn place_bs_grid(density_per_km2: f64, area: &AreaSpec) -> Result<(Vec<Point>, f64)> {
    let target = density_per_km2 * area.area_km2();
    if !(target >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grid needs density*area >= 1, got {target}"
        )));
    }
    let n = target.sqrt().round() as usize;
    let step = area.side_km / n as f64;
    let mut pts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            pts.push(Point {
                x_km: (i as f64 + 0.5) * step,
                y_km: (j as f64 + 0.5) * step,
            });
        }
    }
    let realized = (n * n) as f64 / area.area_km2();
    Ok((pts, realized))
}

/// Draw a Poisson-distributed number of base stations placed independently
/// and uniformly on the square. An empty draw is repeated (a network needs
/// at least one BS); the redraw count is reported.
pub fn place_bs_sppp<R: Rng>(
    density_per_km2: f64,
    area: &AreaSpec,
    rng: &mut R,
) -> Result<(Vec<Point>, f64, u32)> {
    if !(density_per_km2 > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "SPPP density must be positive, got {density_per_km2}"
        )));
    }
    let mean = density_per_km2 * area.area_km2();
    let poisson = Poisson::new(mean)
        .map_err(|e| Error::InvalidConfig(format!("bad Poisson mean {mean}: {e}")))?;
    let mut redraws = 0u32;
    let count = loop {
        let draw = poisson.sample(rng) as usize;
        if draw > 0 {
            break draw;
        }
        redraws += 1;
    };
    let pts = uniform_points(count, area, rng);
    let realized = count as f64 / area.area_km2();
    Ok((pts, realized, redraws))
}

/// Place `count` i.i.d. uniform users on the square.
pub fn place_users<R: Rng>(count: usize, area: &AreaSpec, rng: &mut R) -> Result<Vec<Point>> {
    if count < 1 {
        return Err(Error::InvalidConfig(
            "user count must be at least 1".into(),
        ));
    }
    Ok(uniform_points(count, area, rng))
}

fn uniform_points<R: Rng>(count: usize, area: &AreaSpec, rng: &mut R) -> Vec<Point> {
    (0..count)
        .map(|_| Point {
            x_km: rng.random::<f64>() * area.side_km,
            y_km: rng.random::<f64>() * area.side_km,
        })
        .collect()
}
