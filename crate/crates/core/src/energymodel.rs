//! Network power model, energy efficiency and its density optimum.
//!
//! Throughput and per-BS transmit power enter as fitted power laws of the
//! BS density x (per m²): `R(x) = A * r1 * x^alpha` and
//! `P_TX(x) = P_T * x^delta`. Consumption per BS is a static part plus the
//! amplifier draw `k_rf * P_TX`, so the network-level energy efficiency is
//!
//! `ee(x) = r1 * x^(alpha-1) / (p0 + p_c * x^delta)`, with `p_c = k_rf * P_T`.
//!
//! Its shape depends only on (alpha, delta): monotone increasing, monotone
//! decreasing, or rising to an interior maximum with a closed form.

use crate::error::{Error, Result};
use crate::fitting::PowerLawFit;

/// Static and amplifier consumption constants plus the deployment scale.
#[derive(Debug, Clone, Copy)]
pub struct EnergyParams {
    pub p0_w: f64,
    pub k_rf: f64,
    pub area_m2: f64,
    pub bw_hz: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if self.p0_w > 0.0 && self.k_rf >= 1.0 && self.area_m2 > 0.0 && self.bw_hz > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "energy params need p0 > 0, k_rf >= 1, positive area and bandwidth".into(),
            ))
        }
    }
}

/// Fitted ASE and transmit-power laws for one density segment.
#[derive(Debug, Clone, Copy)]
pub struct ScalingLaws {
    /// ASE law: a in bit/s/Hz/m² at x = 1 per m², b = alpha.
    pub ase: PowerLawFit,
    /// Transmit-power law: a in W at x = 1 per m², b = delta.
    pub ptx: PowerLawFit,
}

impl ScalingLaws {
    pub fn validate(&self) -> Result<()> {
        if !(self.ase.b > 0.0) {
            return Err(Error::Domain(format!(
                "throughput exponent must be positive, got alpha = {}",
                self.ase.b
            )));
        }
        if !(self.ptx.b < 0.0) {
            return Err(Error::Domain(format!(
                "power exponent must be negative, got delta = {}",
                self.ptx.b
            )));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.ase.b
    }

    pub fn delta(&self) -> f64 {
        self.ptx.b
    }

    /// Throughput coefficient per unit area: bw * eta_A0.
    pub fn r1(&self, params: &EnergyParams) -> f64 {
        params.bw_hz * self.ase.a
    }

    /// Consumed-power coefficient: the amplifier factor applied to the
    /// radiated-power fit.
    pub fn p_c(&self, params: &EnergyParams) -> f64 {
        params.k_rf * self.ptx.a
    }
}

/// Shape of the energy-efficiency curve over density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// ee'(x) > 0 everywhere; `saturates` marks the alpha = 1 boundary
    /// where the curve levels off at r1/p0.
    MonotoneIncreasing { saturates: bool },
    /// ee'(x) < 0 everywhere; `boundary` marks alpha = 1 + delta where the
    /// derivative only reaches zero asymptotically.
    MonotoneDecreasing { boundary: bool },
    /// Rises to a global maximum at `x_opt_per_m2`, then falls.
    InteriorMaximum { x_opt_per_m2: f64 },
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::MonotoneIncreasing { saturates: false } => "increasing",
            Regime::MonotoneIncreasing { saturates: true } => "increasing_saturating",
            Regime::MonotoneDecreasing { boundary: false } => "decreasing",
            Regime::MonotoneDecreasing { boundary: true } => "decreasing_boundary",
            Regime::InteriorMaximum { .. } => "interior_maximum",
        }
    }

    pub fn x_opt_per_m2(&self) -> Option<f64> {
        match self {
            Regime::InteriorMaximum { x_opt_per_m2 } => Some(*x_opt_per_m2),
            _ => None,
        }
    }
}

/// Total network consumption `A * x * (p0 + k_rf * P_T * x^delta)` in W.
pub fn total_power(x_per_m2: f64, laws: &ScalingLaws, params: &EnergyParams) -> f64 {
    let ptx = laws.ptx.a * x_per_m2.powf(laws.ptx.b);
    params.area_m2 * x_per_m2 * (params.p0_w + params.k_rf * ptx)
}

/// Energy efficiency `r1 * x^(alpha-1) / (p0 + p_c * x^delta)` in bit/J.
pub fn energy_efficiency(x_per_m2: f64, laws: &ScalingLaws, params: &EnergyParams) -> f64 {
    let r1 = laws.r1(params);
    let p_c = laws.p_c(params);
    r1 * x_per_m2.powf(laws.alpha() - 1.0) / (params.p0_w + p_c * x_per_m2.powf(laws.delta()))
}

/// Closed-form stationary point of the energy efficiency:
/// `x0 = (p0 (1 - alpha) / (p_c (alpha - delta - 1)))^(1/delta)`.
pub fn optimum_density_per_m2(alpha: f64, delta: f64, p0: f64, p_c: f64) -> f64 {
    ((p0 * (1.0 - alpha)) / (p_c * (alpha - delta - 1.0))).powf(1.0 / delta)
}

/// Classify the energy-efficiency curve from the fitted exponents.
pub fn classify_regime(alpha: f64, delta: f64, p0: f64, p_c: f64) -> Result<Regime> {
    if !(alpha > 0.0) || !(delta < 0.0) || !(p0 > 0.0) || !(p_c > 0.0) {
        return Err(Error::Domain(format!(
            "regime classification needs alpha > 0, delta < 0, p0 > 0, p_c > 0; \
             got ({alpha}, {delta}, {p0}, {p_c})"
        )));
    }
    if alpha > 1.0 {
        return Ok(Regime::MonotoneIncreasing { saturates: false });
    }
    if alpha == 1.0 {
        return Ok(Regime::MonotoneIncreasing { saturates: true });
    }
    // alpha < 1 from here.
    if alpha < 1.0 + delta {
        return Ok(Regime::MonotoneDecreasing { boundary: false });
    }
    if alpha == 1.0 + delta {
        return Ok(Regime::MonotoneDecreasing { boundary: true });
    }
    Ok(Regime::InteriorMaximum {
        x_opt_per_m2: optimum_density_per_m2(alpha, delta, p0, p_c),
    })
}

/// One evaluated point of the piecewise energy-efficiency curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub x_per_m2: f64,
    pub ee_bits_per_joule: f64,
    /// Index of the segment whose validity interval contains x.
    pub segment: usize,
}

/// Evaluate the energy efficiency over `x_grid`, using for each point the
/// segment whose `[x_lo, x_hi)` interval contains it.
pub fn ee_curve(
    segments: &[ScalingLaws],
    params: &EnergyParams,
    x_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    params.validate()?;
    if segments.is_empty() {
        return Err(Error::InsufficientData("no fitted segments".into()));
    }
    for laws in segments {
        laws.validate()?;
    }
    let mut out = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let seg = segments
            .iter()
            .position(|l| x >= l.ase.x_lo && x < l.ase.x_hi)
            .ok_or_else(|| {
                Error::OutOfRange(format!("x = {x} per m² lies outside every fitted segment"))
            })?;
        out.push(CurvePoint {
            x_per_m2: x,
            ee_bits_per_joule: energy_efficiency(x, &segments[seg], params),
            segment: seg,
        });
    }
    Ok(out)
}

/// Log-spaced grid covering `[lo, hi)`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laws(a_ase: f64, alpha: f64, a_ptx: f64, delta: f64, x_lo: f64, x_hi: f64) -> ScalingLaws {
        ScalingLaws {
            ase: PowerLawFit { a: a_ase, b: alpha, r2: 1.0, x_lo, x_hi },
            ptx: PowerLawFit { a: a_ptx, b: delta, r2: 1.0, x_lo, x_hi },
        }
    }

    fn params(p0: f64) -> EnergyParams {
        EnergyParams { p0_w: p0, k_rf: 10.0, area_m2: 1e6, bw_hz: 1e7 }
    }

    /// Golden-section maximization of the energy efficiency on a log-x
    /// bracket; independent of the closed form.
    fn golden_section_x_opt(laws: &ScalingLaws, params: &EnergyParams, lo: f64, hi: f64) -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |t: f64| energy_efficiency(10f64.powf(t), laws, params);
        let (mut a, mut b) = (lo.log10(), hi.log10());
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d);
            }
        }
        10f64.powf(0.5 * (a + b))
    }

    #[test]
    fn total_power_reference_point() {
        // 100 BSs at 0.01 W radiated each: 100 * (2 + 10*0.01) = 210 W.
        let l = laws(1.0, 1.0, 1e-6, -1.0, 1e-6, 1.0);
        let p = params(2.0);
        // x = 1e-4 per m² over 1e6 m² is 100 BSs; ptx = 1e-6 / 1e-4 = 0.01 W.
        assert_relative_eq!(total_power(1e-4, &l, &p), 210.0, max_relative = 1e-12);
        // Doubling the area doubles consumption.
        let double = EnergyParams { area_m2: 2e6, ..p };
        assert_relative_eq!(total_power(1e-4, &l, &double), 420.0, max_relative = 1e-12);
    }

    #[test]
    fn vanishing_ptx_leaves_static_power() {
        let l = laws(1.0, 1.0, 1e-30, -0.5, 1e-6, 1.0);
        let p = params(2.0);
        assert_relative_eq!(total_power(1e-4, &l, &p), 1e6 * 1e-4 * 2.0, max_relative = 1e-9);
    }

    #[test]
    fn saturation_at_unit_alpha() {
        let l = laws(2.5e-2, 1.0, 3.5e-11, -1.83, 1e-6, 1.0);
        let p = params(2.0);
        let r1_over_p0 = l.r1(&p) / p.p0_w;
        let ratio = energy_efficiency(1e-5 * 1e10, &l, &p) / r1_over_p0;
        assert!((0.999..=1.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn unit_alpha_matches_single_slope_form() {
        // alpha = 1 collapses to r1 / (p0 + p_c x^delta).
        let l = laws(3.0e-2, 1.0, 2.0e-10, -1.8, 1e-6, 1.0);
        let p = params(2.0);
        for x in [1e-5f64, 1e-4, 1e-3] {
            let direct = l.r1(&p) / (p.p0_w + l.p_c(&p) * x.powf(-1.8));
            assert_relative_eq!(energy_efficiency(x, &l, &p), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn regime_classification_covers_all_cases() {
        assert_eq!(
            classify_regime(1.25, -1.90, 2.0, 1e-7).unwrap(),
            Regime::MonotoneIncreasing { saturates: false }
        );
        assert_eq!(
            classify_regime(1.0, -1.8, 2.0, 1e-7).unwrap(),
            Regime::MonotoneIncreasing { saturates: true }
        );
        // alpha < 1 + delta needs delta > -1.
        assert_eq!(
            classify_regime(0.3, -0.5, 2.0, 1e-7).unwrap(),
            Regime::MonotoneDecreasing { boundary: false }
        );
        assert_eq!(
            classify_regime(0.5, -0.5, 2.0, 1e-7).unwrap(),
            Regime::MonotoneDecreasing { boundary: true }
        );
        assert!(matches!(
            classify_regime(0.45, -4.01, 2.0, 7.21e-15).unwrap(),
            Regime::InteriorMaximum { .. }
        ));
        assert!(classify_regime(-0.1, -1.0, 2.0, 1.0).is_err());
        assert!(classify_regime(0.5, 0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn tabulated_mid_segment_optimum() {
        // Combined-model mid segment: alpha 0.45, delta -4.01,
        // P_T 7.210e-17 W with amplifier factor 10.
        let p_c = 10.0 * 7.210e-17;
        let x0 = optimum_density_per_m2(0.45, -4.01, 2.0, p_c);
        assert_relative_eq!(x0, 2.2287e-4, max_relative = 1e-3);
        let l = laws(1.64e-2, 0.45, 7.210e-17, -4.01, 6e-5, 4e-4);
        let oracle = golden_section_x_opt(&l, &params(2.0), 1e-5, 1e-2);
        assert_relative_eq!(x0, oracle, max_relative = 1e-6);
    }

    #[test]
    fn tabulated_high_segment_optimum_below_validity() {
        let p_c = 10.0 * 5.949e-9;
        let x0 = optimum_density_per_m2(0.72, -1.70, 2.0, p_c);
        assert_relative_eq!(x0, 9.713e-5, max_relative = 1e-3);
        // Below the 400 per-km² lower edge of the segment it came from.
        assert!(x0 < 4e-4);
    }

    #[test]
    fn closed_form_matches_golden_section_on_random_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..20 {
            let delta = -(rng.random::<f64>() * 4.2 + 0.3);
            let u = rng.random::<f64>() * 0.8 + 0.1;
            let alpha = 1.0 - u * delta.abs();
            if alpha <= 0.05 {
                continue;
            }
            let p0 = rng.random::<f64>() * 19.5 + 0.5;
            let p_t = 10f64.powf(-(rng.random::<f64>() * 12.0 + 6.0));
            let l = laws(1e-2, alpha, p_t, delta, 1e-9, 1e3);
            let p = EnergyParams { p0_w: p0, ..params(p0) };
            let x0 = optimum_density_per_m2(alpha, delta, p0, l.p_c(&p));
            let oracle = golden_section_x_opt(&l, &p, x0 * 1e-3, x0 * 1e3);
            assert_relative_eq!(x0, oracle, max_relative = 1e-6);
        }
    }

    #[test]
    fn derivative_changes_sign_once_at_optimum() {
        let l = laws(1.64e-2, 0.45, 7.210e-17, -4.01, 1e-9, 1e3);
        let p = params(2.0);
        let x0 = optimum_density_per_m2(0.45, -4.01, 2.0, l.p_c(&p));
        let grid = log_grid(x0 * 1e-3, x0 * 1e3, 1000);
        let mut sign_changes = 0;
        let mut crossing = f64::NAN;
        for w in grid.windows(2) {
            let d = energy_efficiency(w[1], &l, &p) - energy_efficiency(w[0], &l, &p);
            if d < 0.0 && sign_changes == 0 {
                sign_changes = 1;
                crossing = w[0];
            } else if d > 0.0 && sign_changes == 1 {
                sign_changes = 2;
            }
        }
        assert_eq!(sign_changes, 1);
        assert_relative_eq!(crossing, x0, max_relative = 2e-2);

        // Monotone case: no sign change.
        let mono = laws(3.98e1, 1.25, 4.516e-8, -1.90, 1e-9, 1e3);
        let mut increasing = true;
        for w in log_grid(1e-6, 1e-2, 1000).windows(2) {
            if energy_efficiency(w[1], &mono, &p) < energy_efficiency(w[0], &mono, &p) {
                increasing = false;
            }
        }
        assert!(increasing);
    }

    #[test]
    fn curve_uses_segment_of_each_point() {
        let segs = vec![
            laws(3.98e1, 1.25, 4.516e-8, -1.90, 1e-5, 6e-5),
            laws(1.64e-2, 0.45, 7.210e-17, -4.01, 6e-5, 4e-4),
            laws(1.30e-1, 0.72, 5.949e-9, -1.70, 4e-4, 8e-3),
        ];
        let p2 = params(2.0);
        let grid = log_grid(1e-5, 8e-3, 300);
        let curve = ee_curve(&segs, &p2, &grid).unwrap();
        // The global maximum of the assembled curve falls in the middle
        // segment, and its segment labels are non-decreasing.
        let best = curve
            .iter()
            .max_by(|a, b| a.ee_bits_per_joule.total_cmp(&b.ee_bits_per_joule))
            .unwrap();
        assert_eq!(best.segment, 1);
        assert!(curve.windows(2).all(|w| w[0].segment <= w[1].segment));

        // A larger static power lowers the curve pointwise.
        let p10 = params(10.0);
        let curve10 = ee_curve(&segs, &p10, &grid).unwrap();
        for (a, b) in curve.iter().zip(&curve10) {
            assert!(b.ee_bits_per_joule < a.ee_bits_per_joule);
        }

        // Out-of-range evaluation is refused.
        assert!(matches!(
            ee_curve(&segs, &p2, &[1e-2]),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn single_slope_curve_is_monotone_nondecreasing() {
        let segs = vec![laws(2.5e-2, 1.0019, 3.5e-11, -1.83, 1e-5, 9e-3)];
        let curve = ee_curve(&segs, &params(2.0), &log_grid(1e-5, 9e-3, 400)).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].ee_bits_per_joule >= w[0].ee_bits_per_joule);
        }
    }
}
