//! Command-line driver: config parsing, orchestration, deterministic CSV and
//! JSON emission. Exit codes: 0 ok, 2 config error, 3 computational failure.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use geompress_core::conformal::{
    conformality_defect, lap_interior_test_intervals, patterson_sullivan,
    star_defect_at_no_points,
};
use geompress_core::inducing::{
    build_nice_couple, enumerate_branches, equilibrium_projection, induced_pressure, solve_p,
};
use geompress_core::orbit::{weak_isolation_check, CYLINDER_BUDGET};
use geompress_core::pressure::{
    chi_bounds, default_base_points, pressure_curve, tree_pressure, Methods,
};
use geompress_core::registry::{self, MapConfig, System};
use geompress_core::repeller::singular_set;
use geompress_core::symbolic::{
    default_exceptional_seeds, default_partition, exceptional_scan, spectral_entropy,
    transition_matrix, transitivity_flags,
};
use geompress_core::tce::{tce_report, TceConfig};
use geompress_core::{report, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "geompress",
    about = "Geometric pressure workbench for piecewise-monotone interval maps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct MapArgs {
    /// Registry name: cheb3, logistic4, logistic:<lambda>, notwi
    #[arg(long, default_value = "cheb3")]
    map: String,
    /// TOML map config (overrides --map)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed fixing all sampling
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pressure curve CSV over a t-grid (tree, periodic, Markov columns)
    Pressure {
        #[command(flatten)]
        common: MapArgs,
        /// Grid as lo:hi:step
        #[arg(long, default_value = "-2:3:0.25")]
        t_grid: String,
        /// Tree depth / periodic period
        #[arg(long, default_value_t = 12)]
        depth: u32,
        /// Comma list of methods: tree, per, markov
        #[arg(long, default_value = "tree,per")]
        methods: String,
    },
    /// Hyperbolicity-condition report (JSON)
    Tce {
        #[command(flatten)]
        common: MapArgs,
        #[arg(long, default_value_t = 10)]
        n_max: u32,
        #[arg(long, default_value_t = 2000)]
        rule_ii_steps: u32,
    },
    /// Weighted backward-orbit measure: atoms, CDF and defect report
    Conformal {
        #[command(flatten)]
        common: MapArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1.001)]
        lambda: f64,
        #[arg(long, default_value_t = 12)]
        depth: u32,
        /// Base point; defaults to a certified periodic point
        #[arg(long)]
        z0: Option<f64>,
        /// Where to write the CDF samples CSV
        #[arg(long)]
        cdf_out: Option<PathBuf>,
    },
    /// Nice couple, induced branches, two-variable pressure and projection
    Induce {
        #[command(flatten)]
        common: MapArgs,
        #[arg(long, default_value_t = 0.15)]
        radius: f64,
        #[arg(long, default_value_t = 14)]
        depth_cap: u32,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 200)]
        horizon: u32,
        /// Where to write the projected-equilibrium histogram CSV
        #[arg(long)]
        hist_out: Option<PathBuf>,
    },
    /// Markov coding report: transition matrix, entropy, transitivity
    Coding {
        #[command(flatten)]
        common: MapArgs,
    },
    /// Exceptional-set scan and weak-isolation report
    Exceptional {
        #[command(flatten)]
        common: MapArgs,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        /// Weak-isolation scan period cap
        #[arg(long, default_value_t = 6)]
        wi_period: u32,
    },
    /// Run every report with defaults into --out-dir
    All {
        #[command(flatten)]
        common: MapArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e
                .downcast_ref::<Error>()
                .map(|core| matches!(core, Error::Config(_)))
                .unwrap_or(false)
                || e.to_string().contains("config");
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn load_system(common: &MapArgs) -> anyhow::Result<System> {
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("config: cannot read {}", path.display()))?;
        let cfg: MapConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        Ok(cfg.build()?)
    } else {
        Ok(registry::by_name(&common.map)?)
    }
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("t-grid `{spec}` must be lo:hi:step")).into());
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("t-grid lo `{}`", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("t-grid hi `{}`", parts[1])))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("t-grid step `{}`", parts[2])))?;
    if step <= 0.0 || hi < lo {
        return Err(Error::Config(format!("t-grid `{spec}` is empty")).into());
    }
    let n = ((hi - lo) / step).round() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

fn emit(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, content)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Pressure {
            common,
            t_grid,
            depth,
            methods,
        } => {
            let sys = load_system(&common)?;
            let grid = parse_grid(&t_grid)?;
            if depth < 4 {
                return Err(Error::Config("depth must be at least 4".into()).into());
            }
            let m = Methods {
                tree: methods.contains("tree"),
                periodic: methods.contains("per"),
                markov: methods.contains("markov"),
            };
            let curve = pressure_curve(&sys.map, &sys.repeller, &grid, m, depth, CYLINDER_BUDGET)?;
            let chi = chi_bounds(&sys.map, &sys.repeller, depth.min(10), CYLINDER_BUDGET)?;
            emit(&common.out, &report::pressure_csv(&curve, Some(&chi)))?;
            Ok(())
        }
        Command::Tce {
            common,
            n_max,
            rule_ii_steps,
        } => {
            let sys = load_system(&common)?;
            let grid: Vec<f64> = vec![0.5, 1.0, 1.5, 2.0, 2.5];
            let curve = pressure_curve(
                &sys.map,
                &sys.repeller,
                &grid,
                Methods {
                    tree: true,
                    periodic: false,
                    markov: false,
                },
                10,
                CYLINDER_BUDGET,
            )?;
            let cfg = TceConfig {
                n_max_periodic: n_max,
                rule_ii_steps,
                seed: common.seed,
                ..TceConfig::default()
            };
            let rep = tce_report(&sys, Some(&curve.samples), cfg)?;
            emit(
                &common.out,
                &report::json_report("tce", &sys.map.name, common.seed, rep),
            )?;
            Ok(())
        }
        Command::Conformal {
            common,
            t,
            lambda,
            depth,
            z0,
            cdf_out,
        } => {
            let sys = load_system(&common)?;
            let sset = singular_set(&sys.map, &sys.repeller);
            let z0 = match z0 {
                Some(z) => z,
                None => default_base_points(&sys.map, &sys.repeller, 1, CYLINDER_BUDGET)?[0],
            };
            let mu = patterson_sullivan(&sys.map, &sys.repeller, z0, t, lambda, depth)?;
            let ivs = lap_interior_test_intervals(&sys.map, 20, common.seed);
            let defect = conformality_defect(&sys.map, &mu, t, lambda, &ivs, &sset.all)?;
            let star = star_defect_at_no_points(&sys.map, &mu, t, lambda, &sset.no_points);
            if let Some(path) = &cdf_out {
                let span = sys.repeller.span();
                emit(
                    &Some(path.clone()),
                    &report::measure_cdf_csv(&mu, span.lo, span.hi, 512),
                )?;
            }
            let meta = serde_json::json!({
                "t": t,
                "lambda": lambda,
                "depth": depth,
                "z0": z0,
                "atoms": mu.atoms.len(),
                "skipped_branches": mu.skipped_branches,
                "defect_max_over_20_intervals": defect,
                "star_defects": star,
            });
            emit(
                &common.out,
                &report::json_report("conformal", &sys.map.name, common.seed, meta),
            )?;
            Ok(())
        }
        Command::Induce {
            common,
            radius,
            depth_cap,
            t,
            horizon,
            hist_out,
        } => {
            let sys = load_system(&common)?;
            let sset = singular_set(&sys.map, &sys.repeller);
            let couple = build_nice_couple(&sys, &sset, radius, horizon, CYLINDER_BUDGET)?;
            let system = enumerate_branches(&sys, &sset, &couple, depth_cap, 80_000_000)?;
            let p_tree = tree_pressure(
                &sys.map,
                &sys.repeller,
                default_base_points(&sys.map, &sys.repeller, 1, CYLINDER_BUDGET)?[0],
                t,
                12,
            )?;
            let bracket = induced_pressure(&system, t, p_tree.value)?;
            let root = solve_p(&system, t, 1e-4);
            if let Some(path) = &hist_out {
                let p = root.as_ref().copied().unwrap_or(p_tree.value);
                let hist = equilibrium_projection(&system, &sys.map, t, p, 256)?;
                emit(&Some(path.clone()), &report::histogram_csv(&hist))?;
            }
            let meta = serde_json::json!({
                "t": t,
                "tree_pressure": p_tree.value,
                "bracket_at_tree_pressure": bracket,
                "solve_p": root.ok(),
                "summary": report::induced_summary(&system),
            });
            emit(
                &common.out,
                &report::json_report("induce", &sys.map.name, common.seed, meta),
            )?;
            Ok(())
        }
        Command::Coding { common } => {
            let sys = load_system(&common)?;
            let partition = default_partition(&sys.map, &sys.repeller);
            let matrix = transition_matrix(&sys.map, &sys.repeller, &partition)?;
            let entropy = spectral_entropy(&matrix);
            let flags = transitivity_flags(&matrix);
            let meta = serde_json::json!({
                "partition": matrix.symbol_meanings,
                "entries": matrix.entries,
                "markov_residual": matrix.residual,
                "entropy": entropy,
                "irreducible": flags.irreducible,
                "primitive": flags.primitive,
            });
            emit(
                &common.out,
                &report::json_report("coding", &sys.map.name, common.seed, meta),
            )?;
            Ok(())
        }
        Command::Exceptional {
            common,
            depth,
            wi_period,
        } => {
            let sys = load_system(&common)?;
            let sset = singular_set(&sys.map, &sys.repeller);
            // the scan runs against the full singular set S = Crit ∪ ∂Î
            let mut sigma = sset.crit.clone();
            for c in &sys.repeller.components {
                sigma.push(c.lo);
                sigma.push(c.hi);
            }
            sigma.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sigma.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let seeds = default_exceptional_seeds(&sys.map, depth);
            let scan = exceptional_scan(&sys.map, &sys.repeller, &sigma, &seeds, depth);
            let wi = weak_isolation_check(&sys, wi_period, 0.06, CYLINDER_BUDGET)?;
            let meta = serde_json::json!({
                "scan": scan,
                "weak_isolation": wi,
            });
            emit(
                &common.out,
                &report::json_report("exceptional", &sys.map.name, common.seed, meta),
            )?;
            Ok(())
        }
        Command::All { common, out_dir } => {
            let name = common.map.clone();
            let sub = |out: &str| MapArgs {
                out: Some(out_dir.join(out)),
                ..common.clone()
            };
            run(Cli {
                command: Command::Pressure {
                    common: sub(&format!("{name}-pressure.csv")),
                    t_grid: "-2:3:0.25".into(),
                    depth: 12,
                    methods: "tree,per".into(),
                },
            })?;
            run(Cli {
                command: Command::Tce {
                    common: sub(&format!("{name}-tce.json")),
                    n_max: 10,
                    rule_ii_steps: 2000,
                },
            })?;
            run(Cli {
                command: Command::Conformal {
                    common: sub(&format!("{name}-conformal.json")),
                    t: 1.0,
                    lambda: 1.001,
                    depth: 12,
                    z0: None,
                    cdf_out: Some(out_dir.join(format!("{name}-conformal-cdf.csv"))),
                },
            })?;
            run(Cli {
                command: Command::Induce {
                    common: sub(&format!("{name}-induce.json")),
                    radius: 0.15,
                    depth_cap: 14,
                    t: 1.0,
                    horizon: 200,
                    hist_out: Some(out_dir.join(format!("{name}-equilibrium.csv"))),
                },
            })?;
            run(Cli {
                command: Command::Coding {
                    common: sub(&format!("{name}-coding.json")),
                },
            })?;
            run(Cli {
                command: Command::Exceptional {
                    common: sub(&format!("{name}-exceptional.json")),
                    depth: 8,
                    wi_period: 6,
                },
            })?;
            Ok(())
        }
    }
}
