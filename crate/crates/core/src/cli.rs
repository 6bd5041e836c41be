//! `tentwave` command-line driver.
//!
//! Every subcommand computes all of its outputs in memory first and only
//! then writes them, so a failing run leaves no partial files behind.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::ctcs_ref::ctcs_run;
use crate::error::{Error, Result};
use crate::marcher::march;
use crate::stability::{empirical_blowup, spectral_sweep_with_cap, POWER_CAP};
use crate::verify::{
    convergence_study, ibp_identity_check, ibp_reference, nonclosed_sum_demo, trace_check, trace_corpus, Poly2,
    Scheme, TraceQuadrature,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tentwave", version, about = "Explicit tent-pitching solver for 1D wave systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pitch the space-time mesh and export it as JSON.
    Mesh(ConfigArgs),
    /// Pitch and march; write snapshots and, when an exact solution is known, the error history.
    Solve(ConfigArgs),
    /// Run the staggered leapfrog reference scheme.
    Ctcs(ConfigArgs),
    /// Von Neumann sweep of the uniform stencil.
    Stability {
        #[arg(long)]
        ac: f64,
        #[arg(long, default_value_t = 256)]
        thetas: usize,
        #[arg(long, default_value_t = POWER_CAP)]
        cap: usize,
        /// Also run an empirical blow-up test with this many steps.
        #[arg(long)]
        blowup_steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace inequality, integration-by-parts and non-closed-sum checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "verify")]
        output_prefix: String,
    },
    /// Refinement study on the Gaussian pulse problem.
    Converge {
        #[arg(long, value_parser = parse_scheme, default_value = "tp")]
        scheme: Scheme,
        /// Coarsest mesh is `h = 2^-min_level`.
        #[arg(long, default_value_t = 3)]
        min_level: u32,
        #[arg(long, default_value_t = 9)]
        max_level: u32,
        #[arg(long, default_value_t = 0.9)]
        k_ratio: f64,
        #[arg(long = "t", default_value_t = 0.5)]
        t_eval: f64,
        #[arg(long, default_value = "converge")]
        output_prefix: String,
    },
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    config: PathBuf,
    /// Overrides `output_prefix` from the config.
    #[arg(long)]
    output_prefix: Option<String>,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s {
        "tp" => Ok(Scheme::Tp),
        "ctcs" => Ok(Scheme::Ctcs),
        _ => Err(format!("unknown scheme `{s}` (expected tp or ctcs)")),
    }
}

/// Files staged in memory and written together.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn names(&self) -> Vec<String> {
        self.files.iter().map(|(p, _)| p.display().to_string()).collect()
    }

    fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            let res = path
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .map_or(Ok(()), std::fs::create_dir_all)
                .and_then(|_| std::fs::write(&path, &bytes));
            if let Err(e) = res {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Error::Io(e));
            }
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn with_suffix(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

#[derive(Serialize)]
struct SnapshotRow {
    x: f64,
    u1: f64,
    u2: f64,
}

#[derive(Serialize)]
struct ErrorRow {
    t: f64,
    l2err: f64,
}

#[derive(Serialize)]
struct StabilityRow {
    theta: f64,
    spectral_radius: f64,
    max_power_norm: f64,
}

struct Loaded {
    config: RunConfig,
    text: String,
    prefix: String,
}

fn load(args: &ConfigArgs) -> Result<Loaded> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::config(args.config.display().to_string(), e.to_string()))?;
    let config = RunConfig::from_json(&text)?;
    let prefix = args.output_prefix.clone().unwrap_or_else(|| config.output_prefix.clone());
    Ok(Loaded { config, text, prefix })
}

fn meta(command: &str, loaded: Option<&Loaded>, seed: Option<u64>, summary: Value, files: Vec<String>) -> Result<Vec<u8>> {
    let (config, text) = match loaded {
        Some(l) => (serde_json::from_str::<Value>(&l.text)?, Value::String(l.text.clone())),
        None => (Value::Null, Value::Null),
    };
    let m = json!({
        "tentwave_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config": config,
        "config_text": text,
        "summary": summary,
        "files": files,
    });
    Ok(serde_json::to_vec_pretty(&m)?)
}

fn config_seed(c: &RunConfig) -> Option<u64> {
    match c.mesh {
        crate::config::MeshSpec::Pitched { seed, .. } => Some(seed),
        crate::config::MeshSpec::UniformStencil { .. } => None,
    }
}

fn cmd_mesh(args: &ConfigArgs) -> Result<Vec<PathBuf>> {
    let l = load(args)?;
    let tm = l.config.tent_mesh()?;
    let mut out = Outputs::default();
    out.add(with_suffix(&l.prefix, "_mesh.json"), serde_json::to_vec(&tm.to_export())?);
    let summary = json!({
        "n_tents": tm.n_tents(),
        "n_vertices": tm.vertices().len(),
        "covered_time": tm.covered_time(),
        "min_angle_degrees": tm.min_angle_degrees(),
    });
    let m = meta("mesh", Some(&l), config_seed(&l.config), summary, out.names())?;
    out.add(with_suffix(&l.prefix, "_meta.json"), m);
    out.commit()
}

fn cmd_solve(args: &ConfigArgs) -> Result<Vec<PathBuf>> {
    let l = load(args)?;
    let cfg = &l.config;
    if cfg.scheme == Scheme::Ctcs {
        return cmd_ctcs_loaded(l);
    }
    let tm = cfg.tent_mesh()?;
    let problem = cfg.problem()?;
    let sol = march(&tm, &problem, &cfg.march_options())?;
    let t_final = cfg.problem.t_final;
    let mut out = Outputs::default();
    let mut snaps = Vec::new();
    for (i, &t) in cfg.snapshot_times.iter().enumerate() {
        let tr = sol.snapshot(t)?;
        let rows = tr.x.iter().zip(&tr.u).map(|(&x, u)| SnapshotRow { x, u1: u[0], u2: u[1] });
        let path = with_suffix(&l.prefix, &format!("_snapshot_{i}.csv"));
        snaps.push(json!({"t": t, "file": path.display().to_string(), "energy": sol.energy(t)?}));
        out.add(path, csv_bytes(rows)?);
    }
    let mut final_error = Value::Null;
    if let Some(exact) = problem.exact.as_deref() {
        let hist = sol.error_history(t_final, cfg.error_samples.max(1), exact)?;
        final_error = json!(hist.last().map(|r| r.1));
        out.add(
            with_suffix(&l.prefix, "_errors.csv"),
            csv_bytes(hist.into_iter().map(|(t, l2err)| ErrorRow { t, l2err }))?,
        );
    }
    let summary = json!({
        "n_tents": tm.n_tents(),
        "closed_form_tents": sol.closed_form_tents(),
        "covered_time": sol.covered_time(),
        "energy_initial": sol.energy(0.0)?,
        "energy_final": sol.energy(t_final)?,
        "l2_error_final": final_error,
        "snapshots": snaps,
    });
    let m = meta("solve", Some(&l), config_seed(cfg), summary, out.names())?;
    out.add(with_suffix(&l.prefix, "_meta.json"), m);
    out.commit()
}

fn cmd_ctcs(args: &ConfigArgs) -> Result<Vec<PathBuf>> {
    cmd_ctcs_loaded(load(args)?)
}

/// Writes the `(t, l2err)` history and the final state; `u2` on the
/// integer nodes is the average of the neighbouring staggered values, with
/// the impedance condition supplying the end values.
fn cmd_ctcs_loaded(l: Loaded) -> Result<Vec<PathBuf>> {
    let cfg = &l.config;
    let grid = cfg.ctcs_grid()?;
    let problem = cfg.ctcs_problem()?;
    let t_final = cfg.problem.t_final;
    let n = cfg.error_samples.max(1);
    let samples: Vec<f64> = if problem.exact.is_some() {
        (0..=n).map(|i| t_final * i as f64 / n as f64).collect()
    } else {
        Vec::new()
    };
    let rec = ctcs_run(&grid, &problem, &samples, cfg.bootstrap)?;
    let (u, v) = (&rec.u_final, &rec.v_final);
    let m = grid.cells;
    let v_at = |i: usize| -> f64 {
        if i == 0 {
            problem.z_left * u[0]
        } else if i == m {
            -problem.z_right * u[m]
        } else {
            0.5 * (v[i - 1] + v[i])
        }
    };
    let mut out = Outputs::default();
    out.add(
        with_suffix(&l.prefix, "_ctcs_final.csv"),
        csv_bytes((0..=m).map(|i| SnapshotRow { x: grid.x(i), u1: u[i], u2: v_at(i) }))?,
    );
    if !samples.is_empty() {
        out.add(
            with_suffix(&l.prefix, "_ctcs_errors.csv"),
            csv_bytes(rec.times.iter().zip(&rec.errors).map(|(&t, &l2err)| ErrorRow { t, l2err }))?,
        );
    }
    let summary = json!({
        "steps": rec.steps,
        "courant": grid.courant(),
        "l2_error_final": rec.errors.last(),
    });
    let mt = meta("ctcs", Some(&l), None, summary, out.names())?;
    out.add(with_suffix(&l.prefix, "_meta.json"), mt);
    out.commit()
}

fn cmd_stability(
    ac: f64,
    thetas: usize,
    cap: usize,
    blowup_steps: Option<usize>,
    seed: u64,
    path: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    if !ac.is_finite() {
        return Err(Error::config("--ac", "must be finite"));
    }
    let report = spectral_sweep_with_cap(ac, 1.0, thetas, cap);
    let csv = csv_bytes(report.rows.iter().map(|r| StabilityRow {
        theta: r.theta,
        spectral_radius: r.spectral_radius,
        max_power_norm: r.max_power_norm,
    }))?;
    let blowup = blowup_steps.map(|n| empirical_blowup(ac, 256, n, seed));
    let summary = json!({
        "ac": ac,
        "verdict": report.verdict,
        "max_spectral_radius": report.max_spectral_radius,
        "max_power_norm": report.max_power_norm,
        "min_det_r": report.min_det_r,
        "blowup": blowup,
    });
    match path {
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&csv)?;
            eprintln!("{}", serde_json::to_string(&summary)?);
            Ok(Vec::new())
        }
        Some(p) => {
            let mut out = Outputs::default();
            out.add(p.to_path_buf(), csv);
            let m = meta("stability", None, Some(seed), summary, out.names())?;
            let meta_path = p.with_extension("meta.json");
            out.add(meta_path, m);
            out.commit()
        }
    }
}

#[derive(Serialize)]
struct TraceRow<'a> {
    name: &'a str,
    weighted_inflow: f64,
    weighted_outflow: f64,
    difference: f64,
    graph_norm_sq: f64,
    ratio: f64,
}

fn cmd_verify(seed: u64, count: usize, prefix: &str) -> Result<Vec<PathBuf>> {
    use rand::SeedableRng;
    let corpus = trace_corpus(count, seed);
    let quad = TraceQuadrature::Graded { layers: 40, points: 12 };
    let reports: Vec<_> = corpus.iter().map(|(name, w, dw)| (name.as_str(), trace_check(&**w, &**dw, quad))).collect();
    let max_ratio = reports.iter().map(|r| r.1.ratio).fold(0.0, f64::max);
    let trace_csv = csv_bytes(reports.iter().map(|(name, r)| TraceRow {
        name,
        weighted_inflow: r.weighted_inflow,
        weighted_outflow: r.weighted_outflow,
        difference: r.difference,
        graph_norm_sq: r.graph_norm_sq,
        ratio: r.ratio,
    }))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut ibp_max = 0.0f64;
    for _ in 0..count {
        let (w, v) = (Poly2::random(3, &mut rng), Poly2::random(3, &mut rng));
        ibp_max = ibp_max.max(ibp_reference(&w, &v).relative);
    }
    let tent = crate::mesh1d::Tent {
        center: 1,
        tent_type: crate::mesh1d::TentType::Interior,
        x: 0.5,
        t_bottom: 0.1,
        k: 0.3,
        h_l: 0.4,
        h_r: 0.3,
        p_l: 0.5,
        p_r: 0.25,
    };
    let mut ibp_tent_max = 0.0f64;
    for _ in 0..count {
        let (w, v) = (Poly2::random(3, &mut rng), Poly2::random(3, &mut rng));
        ibp_tent_max = ibp_tent_max.max(ibp_identity_check(&w, &v, &tent)?.relative);
    }
    let rows = nonclosed_sum_demo(64)?;
    let mut out = Outputs::default();
    out.add(with_suffix(prefix, "_trace.csv"), trace_csv);
    out.add(with_suffix(prefix, "_nonclosed.csv"), csv_bytes(rows.iter())?);
    let summary = json!({
        "trace_functions": reports.len(),
        "trace_max_ratio": max_ratio,
        "ibp_reference_max_relative": ibp_max,
        "ibp_tent_max_relative": ibp_tent_max,
    });
    let m = meta("verify", None, Some(seed), summary, out.names())?;
    out.add(with_suffix(prefix, "_meta.json"), m);
    out.commit()
}

fn cmd_converge(scheme: Scheme, min_level: u32, max_level: u32, k_ratio: f64, t_eval: f64, prefix: &str) -> Result<Vec<PathBuf>> {
    if max_level <= min_level || max_level > 20 {
        return Err(Error::config("--max-level", "need min_level < max_level <= 20"));
    }
    if !(k_ratio > 0.0 && k_ratio < 1.0) {
        return Err(Error::config("--k-ratio", "must lie in (0, 1)"));
    }
    if !(t_eval > 0.0 && t_eval.is_finite()) {
        return Err(Error::config("--t", "must be positive"));
    }
    let hs: Vec<f64> = (min_level..=max_level).map(|l| 0.5f64.powi(l as i32)).collect();
    let table = convergence_study(scheme, &hs, k_ratio, t_eval)?;
    let mut out = Outputs::default();
    out.add(with_suffix(prefix, "_convergence.csv"), csv_bytes(table.rows.iter())?);
    let summary = json!({
        "scheme": scheme,
        "k_ratio": k_ratio,
        "t_eval": t_eval,
        "slope": table.slope,
        "monotone": table.monotone,
    });
    let m = meta("converge", None, None, summary, out.names())?;
    out.add(with_suffix(prefix, "_meta.json"), m);
    out.commit()
}

fn dispatch(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Mesh(a) => cmd_mesh(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Ctcs(a) => cmd_ctcs(&a),
        Command::Stability { ac, thetas, cap, blowup_steps, seed, out } => {
            cmd_stability(ac, thetas, cap, blowup_steps, seed, out.as_deref())
        }
        Command::Verify { seed, count, output_prefix } => cmd_verify(seed, count, &output_prefix),
        Command::Converge { scheme, min_level, max_level, k_ratio, t_eval, output_prefix } => {
            cmd_converge(scheme, min_level, max_level, k_ratio, t_eval, &output_prefix)
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}
