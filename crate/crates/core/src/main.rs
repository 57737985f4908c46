//! Command-line front end: sweep, fit, energy, losprob.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use densecell::config::RunConfig;
use densecell::error::{Error, Result};
use densecell::output::{
    config_hash_hex, read_fits, write_fits, FileMeta, Table, FITS_COLUMNS, FITS_UNITS,
    TOOL_NAME, TOOL_VERSION,
};
use densecell::pipeline::{
    curve_rows_csv, energy_from_fits, energy_rows_csv, fit_sweep_table, run_sweep_observed,
    sweep_header_text, CURVE_COLUMNS, CURVE_UNITS, ENERGY_COLUMNS, ENERGY_UNITS,
};
use densecell::propagation::{los_probability, CombinedLosNlosModel};

/// Environment variable overriding the output directory of every command.
const OUT_DIR_ENV: &str = "DENSECELL_OUT_DIR";

#[derive(Parser)]
#[command(name = TOOL_NAME, version, about = "Dense small-cell network simulator: ASE and energy-efficiency scaling")]
struct Cli {
    /// Cap on simulation worker threads (default: all cores). Results are
    /// identical for any value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the density sweep: calibrate power and measure ASE per density.
    Sweep {
        /// key = value configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for sweep.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write per-snapshot link tables under <out>/snapshots/.
        #[arg(long)]
        dump_snapshots: bool,
    },
    /// Fit piecewise power laws to a sweep file.
    Fit {
        /// Input sweep.csv.
        #[arg(long = "in")]
        input: PathBuf,
        /// Segment edges in BS per km².
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 60.0, 400.0, 8000.0])]
        breakpoints: Vec<f64>,
        /// Output fits.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify energy-efficiency regimes and tabulate the curve.
    Energy {
        /// Input fits.csv.
        #[arg(long)]
        fits: PathBuf,
        /// Static per-BS power values in W.
        #[arg(long, value_delimiter = ',', default_values_t = [2.0, 10.0])]
        p0: Vec<f64>,
        /// Amplifier loss factor (inverse efficiency).
        #[arg(long, default_value_t = 10.0)]
        krf: f64,
        /// Output energy.csv; the curve table lands next to it.
        #[arg(long)]
        out: PathBuf,
        /// Points of the tabulated energy-efficiency curve.
        #[arg(long, default_value_t = 200)]
        curve_points: usize,
    },
    /// Print the LOS probability for a list of distances.
    Losprob {
        /// Distances in km.
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<f64>,
    },
}

fn out_dir_override(dir: &Path) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| dir.to_path_buf())
}

fn out_file_override(file: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => {
            let name = file.file_name().unwrap_or_default();
            PathBuf::from(dir).join(name)
        }
        None => file.to_path_buf(),
    }
}

fn cmd_sweep(config: Option<&Path>, out: &Path, dump_snapshots: bool) -> Result<()> {
    let cfg = match config {
        Some(path) => RunConfig::from_text(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;

    let dir = out_dir_override(out);
    fs::create_dir_all(&dir)?;
    let sweep_path = dir.join("sweep.csv");
    let mut file = BufWriter::new(File::create(&sweep_path)?);
    file.write_all(sweep_header_text(&cfg).as_bytes())?;
    file.flush()?;

    let snap_dir = dir.join("snapshots");
    if dump_snapshots {
        fs::create_dir_all(&snap_dir)?;
    }
    let noise_w = cfg.noise.noise_power_w();

    let started = Instant::now();
    let mut density_start = Instant::now();
    eprintln!(
        "{TOOL_NAME} {TOOL_VERSION}: sweep over {} densities, layout {}, model {}, seed {}",
        cfg.densities_per_km2.len(),
        cfg.layout_name(),
        cfg.model_name(),
        cfg.seed
    );

    let summary = run_sweep_observed(
        &cfg,
        |row| {
            writeln!(file, "{}", row.to_csv_line())?;
            file.flush()?;
            eprintln!(
                "  density {:>7.1}/km2 -> ptx {:>8.2} dBm, gap {:.3} dB, ase {:.4e} bit/s/Hz/m2 ({:.1}s)",
                row.density_per_km2,
                row.ptx_dbm,
                row.gap_db,
                row.ase_bps_hz_m2,
                density_start.elapsed().as_secs_f64()
            );
            density_start = Instant::now();
            Ok(())
        },
        |density_idx, batch, ptx_w| {
            if !dump_snapshots {
                return Ok(());
            }
            for (k, snap) in batch.snapshots.iter().enumerate() {
                let path = snap_dir.join(format!("density{density_idx:03}_snapshot{k:03}.csv"));
                let mut out = BufWriter::new(File::create(path)?);
                writeln!(out, "user_id,serving_bs,sir_db,sinr_db")?;
                writeln!(out, "-,-,dB,dB")?;
                for (u, ((&s, &g), &i)) in snap
                    .serving
                    .iter()
                    .zip(&snap.gain_serving)
                    .zip(&snap.interference)
                    .enumerate()
                {
                    let sir = densecell::propagation::linear_to_db(g / i);
                    let sinr =
                        densecell::propagation::linear_to_db(ptx_w * g / (ptx_w * i + noise_w));
                    writeln!(out, "{u},{s},{sir},{sinr}")?;
                }
            }
            Ok(())
        },
    )?;

    writeln!(file, "# sppp_empty_redraws = {}", summary.sppp_empty_redraws)?;
    file.flush()?;
    eprintln!(
        "wrote {} ({} rows, {:.1}s total)",
        sweep_path.display(),
        summary.rows.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_fit(input: &Path, breakpoints: &[f64], out: &Path) -> Result<()> {
    let table = Table::read(input)?;
    let rows = fit_sweep_table(&table, breakpoints)?;

    let meta = FileMeta {
        config_hash: table
            .meta
            .get("config_hash")
            .cloned()
            .unwrap_or_else(|| "unknown".into()),
        seed: table
            .meta
            .get("seed")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0),
        cfg_lines: table.cfg.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        extra: vec![(
            "breakpoints_per_km2".into(),
            breakpoints
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(","),
        )],
    };
    let path = out_file_override(out);
    fs::write(&path, write_fits(&meta, &rows))?;
    eprintln!("wrote {} ({} fitted segments)", path.display(), rows.len());
    for r in &rows {
        eprintln!(
            "  {} [{:.3e}, {:.3e}) per m2: a = {:.4e}, b = {:+.4}, r2 = {:.5}",
            r.metric, r.x_lo_per_m2, r.x_hi_per_m2, r.a, r.b, r.r2
        );
    }
    Ok(())
}

fn curve_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "energy".into());
    let ext = out
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}_curve.{ext}"))
}

fn cmd_energy(fits: &Path, p0: &[f64], krf: f64, out: &Path, curve_points: usize) -> Result<()> {
    let table = Table::read(fits)?;
    let fit_rows = read_fits(&table)?;
    let bw_hz = table.cfg_f64("bandwidth_hz")?;
    let side_km = table.cfg_f64("area_side_km")?;
    let area_m2 = side_km * side_km * 1e6;

    let report = energy_from_fits(&fit_rows, p0, krf, area_m2, bw_hz, curve_points)?;

    let meta = FileMeta {
        config_hash: table
            .meta
            .get("config_hash")
            .cloned()
            .unwrap_or_else(|| "unknown".into()),
        seed: table
            .meta
            .get("seed")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0),
        cfg_lines: table.cfg.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        extra: vec![
            (
                "p0_w".into(),
                p0.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("k_rf".into(), krf.to_string()),
        ],
    };

    let energy_path = out_file_override(out);
    let mut text = meta.header();
    text.push_str(ENERGY_COLUMNS);
    text.push('\n');
    text.push_str(ENERGY_UNITS);
    text.push('\n');
    text.push_str(&energy_rows_csv(&report.rows));
    fs::write(&energy_path, text)?;

    let curve_file = curve_path(&energy_path);
    let mut text = meta.header();
    text.push_str(CURVE_COLUMNS);
    text.push('\n');
    text.push_str(CURVE_UNITS);
    text.push('\n');
    text.push_str(&curve_rows_csv(&report.curve));
    fs::write(&curve_file, text)?;

    eprintln!(
        "wrote {} and {}",
        energy_path.display(),
        curve_file.display()
    );
    for r in &report.rows {
        match r.x_opt_per_km2() {
            Some(x_km2) => eprintln!(
                "  p0 {:>5} W, {}: {} at x = {:.4e} per m2 ({:.1} per km2), inside segment: {}",
                r.p0_w,
                r.segment,
                r.regime.label(),
                x_km2 * 1e-6,
                x_km2,
                if r.x_opt_in_segment() == Some(true) { "yes" } else { "no" }
            ),
            None => eprintln!(
                "  p0 {:>5} W, {}: {}",
                r.p0_w,
                r.segment,
                r.regime.label()
            ),
        }
    }
    Ok(())
}

fn cmd_losprob(distances: &[f64]) -> Result<()> {
    let model = CombinedLosNlosModel::default();
    let mut values = Vec::with_capacity(distances.len());
    for &d in distances {
        values.push((d, los_probability(d, &model)?));
    }
    println!("d_km,p_los");
    println!("km,-");
    for (d, p) in values {
        println!("{d},{p}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Sweep {
            config,
            out,
            dump_snapshots,
        } => cmd_sweep(config.as_deref(), out, *dump_snapshots),
        Cmd::Fit {
            input,
            breakpoints,
            out,
        } => cmd_fit(input, breakpoints, out),
        Cmd::Energy {
            fits,
            p0,
            krf,
            out,
            curve_points,
        } => cmd_energy(fits, p0, *krf, out, *curve_points),
        Cmd::Losprob { d } => cmd_losprob(d),
    }
}

fn main() {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .expect("failed to build worker pool");
    // Silence an unused-function warning when the hash is only used by lib
    // callers; the binary stamps it indirectly through sweep_header_text.
    let _ = config_hash_hex;
    match pool.install(|| run(cli)) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
