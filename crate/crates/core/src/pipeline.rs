//! End-to-end stages: density sweep (calibrate, simulate, aggregate),
//! piecewise fitting of a sweep file, and the energy report built from a
//! fits file.

use std::fmt::Write as _;

use crate::calibration::calibrate_ptx;
use crate::config::RunConfig;
use crate::energymodel::{
    classify_regime, ee_curve, log_grid, EnergyParams, Regime, ScalingLaws,
};
use crate::error::{Error, Result};
use crate::fitting::{fit_piecewise, Breakpoints, PowerLawFit};
use crate::metrics::ase_from_batch;
use crate::output::{config_hash_hex, FileMeta, FitRow, Table};
use crate::propagation::linear_to_db;
use crate::simcore::{run_batch, BatchMode};

/// One density point of the sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub density_per_km2: f64,
    pub realized_density_per_km2: f64,
    pub layout: String,
    pub model: String,
    pub ptx_w: f64,
    pub ptx_dbm: f64,
    pub gap_db: f64,
    pub ase_bps_hz_m2: f64,
    pub mean_cell_se: f64,
    pub sir_p80_db: f64,
    pub sinr_p80_db: f64,
    pub n_snapshots: u32,
    pub seed: u64,
    pub calib_iterations: u32,
}

pub const SWEEP_COLUMNS: &str = "density_per_km2,realized_density_per_km2,layout,model,ptx_w,ptx_dbm,gap_db,ase_bps_hz_m2,mean_cell_se,sir_p80_db,sinr_p80_db,n_snapshots,seed,calib_iterations";
pub const SWEEP_UNITS: &str =
    "per_km2,per_km2,-,-,W,dBm,dB,bit_per_s_per_hz_per_m2,bit_per_s_per_hz,dB,dB,-,-,-";

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.density_per_km2,
            self.realized_density_per_km2,
            self.layout,
            self.model,
            self.ptx_w,
            self.ptx_dbm,
            self.gap_db,
            self.ase_bps_hz_m2,
            self.mean_cell_se,
            self.sir_p80_db,
            self.sinr_p80_db,
            self.n_snapshots,
            self.seed,
            self.calib_iterations
        );
        s
    }
}

pub fn sweep_meta(cfg: &RunConfig) -> FileMeta {
    FileMeta {
        config_hash: config_hash_hex(&cfg.canonical_text()),
        seed: cfg.seed,
        cfg_lines: cfg.canonical_lines(),
        extra: Vec::new(),
    }
}

/// Header block plus column and units rows for a sweep file.
pub fn sweep_header_text(cfg: &RunConfig) -> String {
    format!("{}{SWEEP_COLUMNS}\n{SWEEP_UNITS}\n", sweep_meta(cfg).header())
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub sppp_empty_redraws: u64,
}

/// Run the full sweep: per density, calibrate the transmit power on one
/// batch, then evaluate SIR/SINR statistics and the ASE on an independent
/// batch at the calibrated power. `on_row` sees every finished row before
/// the next density starts, so partial output survives a calibration
/// failure at a later density.
pub fn run_sweep<F>(cfg: &RunConfig, on_row: F) -> Result<SweepSummary>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    run_sweep_observed(cfg, on_row, |_, _, _| Ok(()))
}

/// [`run_sweep`] with a hook that sees each density's final batch at its
/// calibrated power (per-snapshot debug dumps).
pub fn run_sweep_observed<F, G>(cfg: &RunConfig, mut on_row: F, mut on_final: G) -> Result<SweepSummary>
where
    F: FnMut(&SweepRow) -> Result<()>,
    G: FnMut(u32, &crate::simcore::Batch, f64) -> Result<()>,
{
    cfg.validate()?;
    let noise_w = cfg.noise.noise_power_w();
    let area = cfg.area();
    let q = cfg.calibration.y_quantile;
    let mut rows = Vec::with_capacity(cfg.densities_per_km2.len());
    let mut redraws = 0u64;

    for (i, &density) in cfg.densities_per_km2.iter().enumerate() {
        let sc = cfg.scenario(density)?;
        let calib_batch = run_batch(&sc, cfg.n_snapshots, cfg.seed, i as u32, BatchMode::SinrCalib)?;
        redraws += calib_batch.total_empty_redraws();
        let outcome = calibrate_ptx(&calib_batch, noise_w, &cfg.calibration)?;
        drop(calib_batch);

        let final_batch = run_batch(&sc, cfg.n_snapshots, cfg.seed, i as u32, BatchMode::SinrFinal)?;
        on_final(i as u32, &final_batch, outcome.ptx_w)?;
        redraws += final_batch.total_empty_redraws();
        let realized = final_batch.mean_realized_density_per_km2(&area);
        let sir_p = final_batch.sir_quantile(q)?;
        let sinr_p = final_batch.sinr_quantile(outcome.ptx_w, noise_w, q)?;
        let ase = ase_from_batch(&final_batch, outcome.ptx_w, noise_w, &cfg.capacity, realized)?;

        let row = SweepRow {
            density_per_km2: density,
            realized_density_per_km2: realized,
            layout: cfg.layout_name().to_string(),
            model: cfg.model_name().to_string(),
            ptx_w: outcome.ptx_w,
            ptx_dbm: linear_to_db(outcome.ptx_w) + 30.0,
            gap_db: outcome.gap_db,
            ase_bps_hz_m2: ase.ase_bps_hz_m2,
            mean_cell_se: ase.mean_cell_se_bps_hz,
            sir_p80_db: sir_p,
            sinr_p80_db: sinr_p,
            n_snapshots: cfg.n_snapshots,
            seed: cfg.seed,
            calib_iterations: outcome.iterations,
        };
        on_row(&row)?;
        rows.push(row);
    }

    Ok(SweepSummary {
        rows,
        sppp_empty_redraws: redraws,
    })
}

/// Piecewise power-law fits of the ASE and transmit-power columns of a
/// sweep table. Densities enter in per-m² (the sweep stores per-km²), so
/// the reported coefficients follow the per-m² convention.
pub fn fit_sweep_table(table: &Table, breakpoints_per_km2: &[f64]) -> Result<Vec<FitRow>> {
    let bp_m2: Vec<f64> = breakpoints_per_km2.iter().map(|b| b * 1e-6).collect();
    let breakpoints = Breakpoints::new(bp_m2)?;
    let x_m2: Vec<f64> = table
        .f64_column("realized_density_per_km2")?
        .into_iter()
        .map(|x| x * 1e-6)
        .collect();
    if x_m2.is_empty() {
        return Err(Error::InsufficientData("sweep file has no rows".into()));
    }

    let mut rows = Vec::new();
    for (metric, column) in [("ase", "ase_bps_hz_m2"), ("ptx", "ptx_w")] {
        let ys = table.f64_column(column)?;
        let pts: Vec<(f64, f64)> = x_m2.iter().copied().zip(ys).collect();
        let fits = fit_piecewise(&pts, &breakpoints).map_err(|e| match e {
            Error::InsufficientData(msg) => {
                Error::InsufficientData(format!("metric {metric}: {msg}"))
            }
            other => other,
        })?;
        for f in fits {
            rows.push(FitRow {
                metric: metric.to_string(),
                x_lo_per_m2: f.x_lo,
                x_hi_per_m2: f.x_hi,
                a: f.a,
                b: f.b,
                r2: f.r2,
            });
        }
    }
    Ok(rows)
}

/// One classified segment of the energy report.
#[derive(Debug, Clone)]
pub struct EnergyRow {
    pub p0_w: f64,
    pub k_rf: f64,
    pub segment: String,
    pub x_lo_per_m2: f64,
    pub x_hi_per_m2: f64,
    pub alpha: f64,
    pub delta: f64,
    pub regime: Regime,
}

impl EnergyRow {
    pub fn x_opt_per_km2(&self) -> Option<f64> {
        self.regime.x_opt_per_m2().map(|x| x * 1e6)
    }

    pub fn x_opt_in_segment(&self) -> Option<bool> {
        self.regime
            .x_opt_per_m2()
            .map(|x| x >= self.x_lo_per_m2 && x < self.x_hi_per_m2)
    }
}

#[derive(Debug, Clone)]
pub struct CurveRow {
    pub p0_w: f64,
    pub k_rf: f64,
    pub x_per_m2: f64,
    pub ee_bits_per_joule: f64,
    pub segment: String,
}

#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    pub curve: Vec<CurveRow>,
}

pub const ENERGY_COLUMNS: &str =
    "p0_w,k_rf,segment,alpha,delta,regime,x_opt_per_km2,x_opt_in_segment";
pub const ENERGY_UNITS: &str = "W,-,-,-,-,-,per_km2,-";
pub const CURVE_COLUMNS: &str = "p0_w,k_rf,x_per_m2,x_per_km2,ee_bits_per_joule,segment";
pub const CURVE_UNITS: &str = "W,-,per_m2,per_km2,bit_per_joule,-";

pub fn energy_rows_csv(rows: &[EnergyRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let x_opt = r
            .x_opt_per_km2()
            .map(|x| x.to_string())
            .unwrap_or_default();
        let in_seg = match r.x_opt_in_segment() {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.p0_w,
            r.k_rf,
            r.segment,
            r.alpha,
            r.delta,
            r.regime.label(),
            x_opt,
            in_seg
        );
    }
    s
}

pub fn curve_rows_csv(rows: &[CurveRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.p0_w,
            r.k_rf,
            r.x_per_m2,
            r.x_per_m2 * 1e6,
            r.ee_bits_per_joule,
            r.segment
        );
    }
    s
}

/// Pair the ASE and power fits segment by segment, classify the energy
/// regime for every static-power value, and tabulate the piecewise
/// energy-efficiency curve.
pub fn energy_from_fits(
    fits: &[FitRow],
    p0_list: &[f64],
    k_rf: f64,
    area_m2: f64,
    bw_hz: f64,
    curve_points: usize,
) -> Result<EnergyReport> {
    let to_law = |r: &FitRow| PowerLawFit {
        a: r.a,
        b: r.b,
        r2: r.r2,
        x_lo: r.x_lo_per_m2,
        x_hi: r.x_hi_per_m2,
    };
    let mut ase: Vec<&FitRow> = fits.iter().filter(|r| r.metric == "ase").collect();
    let mut ptx: Vec<&FitRow> = fits.iter().filter(|r| r.metric == "ptx").collect();
    ase.sort_by(|a, b| a.x_lo_per_m2.total_cmp(&b.x_lo_per_m2));
    ptx.sort_by(|a, b| a.x_lo_per_m2.total_cmp(&b.x_lo_per_m2));
    if ase.is_empty() || ase.len() != ptx.len() {
        return Err(Error::InsufficientData(format!(
            "fits file needs matching ase and ptx segments, got {} and {}",
            ase.len(),
            ptx.len()
        )));
    }

    let mut segments = Vec::with_capacity(ase.len());
    for (a, p) in ase.iter().zip(&ptx) {
        if a.x_lo_per_m2 != p.x_lo_per_m2 || a.x_hi_per_m2 != p.x_hi_per_m2 {
            return Err(Error::InvalidConfig(format!(
                "ase segment [{}, {}) has no matching ptx segment",
                a.x_lo_per_m2, a.x_hi_per_m2
            )));
        }
        let laws = ScalingLaws {
            ase: to_law(a),
            ptx: to_law(p),
        };
        laws.validate()?;
        segments.push(laws);
    }

    let x_lo = segments[0].ase.x_lo;
    let x_hi = segments[segments.len() - 1].ase.x_hi;
    let grid = log_grid(x_lo, x_hi, curve_points);

    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for &p0 in p0_list {
        let params = EnergyParams {
            p0_w: p0,
            k_rf,
            area_m2,
            bw_hz,
        };
        params.validate()?;
        for (i, laws) in segments.iter().enumerate() {
            let regime = classify_regime(laws.alpha(), laws.delta(), p0, laws.p_c(&params))?;
            rows.push(EnergyRow {
                p0_w: p0,
                k_rf,
                segment: format!("D{}", i + 1),
                x_lo_per_m2: laws.ase.x_lo,
                x_hi_per_m2: laws.ase.x_hi,
                alpha: laws.alpha(),
                delta: laws.delta(),
                regime,
            });
        }
        for pt in ee_curve(&segments, &params, &grid)? {
            curve.push(CurveRow {
                p0_w: p0,
                k_rf,
                x_per_m2: pt.x_per_m2,
                ee_bits_per_joule: pt.ee_bits_per_joule,
                segment: format!("D{}", pt.segment + 1),
            });
        }
    }
    Ok(EnergyReport { rows, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelKind;
    use approx::assert_relative_eq;

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.model = ModelKind::SingleSlope;
        cfg.densities_per_km2 = vec![25.0, 100.0, 400.0];
        cfg.n_snapshots = 4;
        cfg.users.min_users = 300;
        cfg.users.max_users = 1500;
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn sweep_rows_are_deterministic_and_feasible() {
        let cfg = tiny_config();
        let a = run_sweep(&cfg, |_| Ok(())).unwrap();
        let b = run_sweep(&cfg, |_| Ok(())).unwrap();
        assert_eq!(a.rows, b.rows);
        for row in &a.rows {
            assert!(row.gap_db <= cfg.calibration.delta_db0);
            assert!(row.ptx_w > 0.0);
            assert!(row.ase_bps_hz_m2 > 0.0);
            assert!(row.sinr_p80_db <= row.sir_p80_db);
        }
        // Realized grid densities snap to perfect squares.
        assert_relative_eq!(a.rows[0].realized_density_per_km2, 25.0);
        assert_relative_eq!(a.rows[1].realized_density_per_km2, 100.0);
    }

    #[test]
    fn calibration_failure_aborts_with_no_rows() {
        let mut cfg = tiny_config();
        cfg.calibration.search_hi_w = 2e-9;
        cfg.calibration.search_lo_w = 1e-9;
        let mut seen = 0;
        let err = run_sweep(&cfg, |_| {
            seen += 1;
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::CalibrationFailure { .. }));
        assert_eq!(seen, 0, "nW-scale bracket cannot calibrate the sparsest density");
    }

    #[test]
    fn rows_are_emitted_incrementally() {
        // A sink error after the first row aborts the sweep with exactly
        // that row delivered; later densities never run.
        let cfg = tiny_config();
        let mut seen = Vec::new();
        let err = run_sweep(&cfg, |row| {
            seen.push(row.clone());
            if seen.len() == 1 {
                Err(Error::InvalidConfig("sink full".into()))
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        assert_eq!(seen.len(), 1);
        assert_relative_eq!(seen[0].realized_density_per_km2, 25.0);
    }

    #[test]
    fn fit_roundtrip_through_sweep_file_text() {
        // Synthesize a sweep table holding exact power laws and check the
        // fits recover them in per-m² units.
        let cfg = RunConfig::default();
        let mut text = sweep_header_text(&cfg);
        for i in 0..12 {
            let x_km2 = 10.0 * 2f64.powi(i);
            let x_m2 = x_km2 * 1e-6;
            let ase = 0.02 * x_m2.powf(1.1);
            let ptx = 3e-9 * x_m2.powf(-1.8);
            let row = SweepRow {
                density_per_km2: x_km2,
                realized_density_per_km2: x_km2,
                layout: "grid".into(),
                model: "single_slope".into(),
                ptx_w: ptx,
                ptx_dbm: linear_to_db(ptx) + 30.0,
                gap_db: 0.1,
                ase_bps_hz_m2: ase,
                mean_cell_se: ase / x_m2,
                sir_p80_db: 10.0,
                sinr_p80_db: 9.9,
                n_snapshots: 50,
                seed: 1,
                calib_iterations: 12,
            };
            text.push_str(&row.to_csv_line());
            text.push('\n');
        }
        let table = Table::parse(&text).unwrap();
        let fits = fit_sweep_table(&table, &[10.0, 60.0, 400.0, 8000.0]).unwrap();
        assert_eq!(fits.len(), 6);
        for f in &fits {
            match f.metric.as_str() {
                "ase" => {
                    assert_relative_eq!(f.b, 1.1, epsilon = 1e-9);
                    assert_relative_eq!(f.a, 0.02, max_relative = 1e-9);
                }
                "ptx" => {
                    assert_relative_eq!(f.b, -1.8, epsilon = 1e-9);
                    assert_relative_eq!(f.a, 3e-9, max_relative = 1e-9);
                }
                other => panic!("unexpected metric {other}"),
            }
        }
    }

    #[test]
    fn energy_report_from_tabulated_fits() {
        let fits = vec![
            FitRow { metric: "ase".into(), x_lo_per_m2: 1e-5, x_hi_per_m2: 6e-5, a: 3.98e1, b: 1.25, r2: 1.0 },
            FitRow { metric: "ase".into(), x_lo_per_m2: 6e-5, x_hi_per_m2: 4e-4, a: 1.64e-2, b: 0.45, r2: 1.0 },
            FitRow { metric: "ase".into(), x_lo_per_m2: 4e-4, x_hi_per_m2: 8e-3, a: 1.30e-1, b: 0.72, r2: 1.0 },
            FitRow { metric: "ptx".into(), x_lo_per_m2: 1e-5, x_hi_per_m2: 6e-5, a: 4.516e-8, b: -1.90, r2: 1.0 },
            FitRow { metric: "ptx".into(), x_lo_per_m2: 6e-5, x_hi_per_m2: 4e-4, a: 7.210e-17, b: -4.01, r2: 1.0 },
            FitRow { metric: "ptx".into(), x_lo_per_m2: 4e-4, x_hi_per_m2: 8e-3, a: 5.949e-9, b: -1.70, r2: 1.0 },
        ];
        let report = energy_from_fits(&fits, &[2.0, 10.0], 10.0, 1e6, 1e7, 120).unwrap();
        assert_eq!(report.rows.len(), 6);

        let d2_p2 = &report.rows[1];
        assert_eq!(d2_p2.segment, "D2");
        let x_opt = d2_p2.x_opt_per_km2().unwrap();
        assert!((60.0..400.0).contains(&x_opt), "D2 optimum {x_opt}");
        assert_eq!(d2_p2.x_opt_in_segment(), Some(true));

        let d3_p2 = &report.rows[2];
        assert_eq!(d3_p2.x_opt_in_segment(), Some(false));
        assert!(d3_p2.x_opt_per_km2().unwrap() < 400.0);

        let d1_p2 = &report.rows[0];
        assert_eq!(d1_p2.regime, Regime::MonotoneIncreasing { saturates: false });

        // p0 = 10 curve sits below p0 = 2 pointwise.
        let (p2, p10): (Vec<_>, Vec<_>) = report.curve.iter().partition(|c| c.p0_w == 2.0);
        assert_eq!(p2.len(), p10.len());
        for (a, b) in p2.iter().zip(&p10) {
            assert!(b.ee_bits_per_joule < a.ee_bits_per_joule);
        }
    }

    #[test]
    fn energy_refuses_wrong_sign_exponents() {
        let fits = vec![
            FitRow { metric: "ase".into(), x_lo_per_m2: 1e-5, x_hi_per_m2: 1e-3, a: 1.0, b: -0.2, r2: 1.0 },
            FitRow { metric: "ptx".into(), x_lo_per_m2: 1e-5, x_hi_per_m2: 1e-3, a: 1e-9, b: -1.0, r2: 1.0 },
        ];
        assert!(matches!(
            energy_from_fits(&fits, &[2.0], 10.0, 1e6, 1e7, 10),
            Err(Error::Domain(_))
        ));
    }
}
