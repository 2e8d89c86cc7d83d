use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use micromorph::config::{parse_config, RunConfig};
use micromorph::dispersion::band_structure;
use micromorph::dynamics::{cfl_timestep, check_compatibility, run_simulation};
use micromorph::error::ConfigViolation;
use micromorph::initial::{random_modes, RandomModes};
use micromorph::mms::{convergence_study, manufactured_case, mms_parameters, StudyOptions};
use micromorph::ops::identity_defects;
use micromorph::output::{convergence_csv, dispersion_table, energy_table, probe_table, OutputDir};
use micromorph::probe::{h_sweep_probe, ProbeTable};
use micromorph::snapshot::{list_snapshots, read_snapshot, Snapshot};
use micromorph::{Error, Result};
use serde_json::{json, Value};

const IDENTITY_TOL: f64 = 1e-12;
const COMPATIBILITY_TOL: f64 = 1e-8;
const MMS_ORDER_RANGE: (f64, f64) = (1.8, 2.2);

#[derive(Parser)]
#[command(name = "micromorph", version, about = "Relaxed micromorphic simulator and diagnostics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Configuration file (alternative to the positional argument).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for randomized data and diagnostics; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate in time; writes the energy series and optional snapshots.
    Simulate {
        #[arg(id = "config_file", value_name = "CONFIG")]
        config: Option<PathBuf>,
    },
    /// Plane-wave branches and band gaps.
    Dispersion {
        #[arg(id = "config_file", value_name = "CONFIG")]
        config: Option<PathBuf>,
    },
    /// Localized difference-quotient energies over a stored trajectory: `probe [config] <trajectory dir>`.
    Probe {
        #[arg(num_args = 1..=2, required = true)]
        paths: Vec<PathBuf>,
    },
    /// Manufactured-solution convergence study.
    Mms {
        case: String,
        #[arg(required = true)]
        resolutions: Vec<usize>,
        /// Final time.
        #[arg(long, default_value_t = 0.5)]
        t_final: f64,
    },
    /// Parameter validation, compatibility of the initial data and a discrete-identity self-test.
    Check {
        #[arg(id = "config_file", value_name = "CONFIG")]
        config: Option<PathBuf>,
    },
}

fn load(global: &Global, positional: Option<&PathBuf>) -> Result<(RunConfig, PathBuf)> {
    let path = match (positional, &global.config) {
        (Some(p), None) | (None, Some(p)) => p.clone(),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument("configuration given both positionally and with --config".into()))
        }
        (None, None) => return Err(Error::InvalidArgument("no configuration file given".into())),
    };
    let mut cfg = parse_config(&path)?;
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn out_dir(global: &Global, cfg: Option<&RunConfig>, base: &Path) -> PathBuf {
    if let Some(d) = &global.out_dir {
        return d.clone();
    }
    match cfg.and_then(|c| c.outputs.directory.as_ref()) {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => base.join(d),
        None => PathBuf::from("out"),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn simulate(global: &Global, config: Option<&PathBuf>) -> Result<Value> {
    let (cfg, base) = load(global, config)?;
    let spec = cfg.run_spec(&base)?;
    let traj = run_simulation(&spec)?;
    let mut out = OutputDir::create(&out_dir(global, Some(&cfg), &base), to_json(&cfg))?;
    let (h, rows) = energy_table(&traj);
    out.csv("energy.csv", &h, &rows)?;
    let every = cfg.outputs.snapshot_every;
    let last = traj.steps.last().copied().unwrap_or(0);
    let mut snapshots = 0;
    for (step, s) in traj.steps.iter().zip(&traj.states) {
        if every > 0 && (step % every == 0 || *step == last) {
            out.snapshot(&format!("snapshot_{step:08}"), &Snapshot::from_state(s))?;
            snapshots += 1;
        }
    }
    let first = traj.energies.first().map(|e| e.total).unwrap_or(0.0);
    let final_e = traj.energies.last().map(|e| e.total).unwrap_or(0.0);
    let summary = json!({
        "dt": traj.dt,
        "steps": last,
        "records": traj.times.len(),
        "snapshots": snapshots,
        "initial_energy": first,
        "final_energy": final_e,
        "final_discrete_energy": traj.discrete_energies.last(),
    });
    out.json("summary.json", &summary)?;
    Ok(json!({"command": "simulate", "output": out.root, "summary": summary}))
}

fn dispersion(global: &Global, config: Option<&PathBuf>) -> Result<Value> {
    let (cfg, base) = load(global, config)?;
    let d = &cfg.dispersion;
    let res = band_structure(&cfg.parameters, d.direction, cfg.dispersion_k_max()?, d.samples)?;
    let mut out = OutputDir::create(&out_dir(global, Some(&cfg), &base), to_json(&cfg))?;
    out.json("dispersion.json", &res)?;
    let (h, rows) = dispersion_table(&res);
    out.csv("dispersion.csv", &h, &rows)?;
    Ok(json!({
        "command": "dispersion",
        "output": out.root,
        "max_frequency": res.max_frequency(),
        "gaps": res.gaps,
    }))
}

fn probe(global: &Global, paths: &[PathBuf]) -> Result<Value> {
    let (config, traj_dir) = match paths {
        [t] => (None, t),
        [c, t] => (Some(c), t),
        _ => return Err(Error::InvalidArgument("expected [config] <trajectory dir>".into())),
    };
    let (cfg, base) = load(global, config)?;
    let pc = cfg
        .probe
        .clone()
        .ok_or_else(|| Error::Config(vec![ConfigViolation {
            pointer: "/probe".into(),
            message: "the probe subcommand needs a `probe` section".into(),
        }]))?;
    let grid = cfg.grid()?;
    let stems = list_snapshots(traj_dir)?;
    if stems.is_empty() {
        return Err(Error::InvalidArgument(format!("no snapshots in {}", traj_dir.display())));
    }
    let states = stems
        .iter()
        .map(|s| {
            let snap = read_snapshot(s)?;
            if snap.grid != grid {
                return Err(Error::ShapeMismatch(format!("{} lives on a different grid", s.display())));
            }
            snap.state()
        })
        .collect::<Result<Vec<_>>>()?;
    let spacing = grid.spacing();
    let mut table = ProbeTable {
        rows: Vec::new(),
        axis_ratios: Vec::new(),
        max_ratio: 1.0,
    };
    for &a in &pc.axes {
        let multiples: Vec<usize> = pc.h.iter().map(|h| (h / spacing[a]).round() as usize).collect();
        let t = h_sweep_probe(&states, &cfg.parameters, &pc.cutoff, &[a], &multiples)?;
        table.rows.extend(t.rows);
        table.axis_ratios.extend(t.axis_ratios);
        table.max_ratio = table.max_ratio.max(t.max_ratio);
    }
    let mut out = OutputDir::create(&out_dir(global, Some(&cfg), &base), to_json(&cfg))?;
    out.json("probe.json", &table)?;
    let (h, rows) = probe_table(&table);
    out.csv("probe.csv", &h, &rows)?;
    Ok(json!({
        "command": "probe",
        "output": out.root,
        "states": states.len(),
        "axis_ratios": table.axis_ratios,
        "max_ratio": table.max_ratio,
    }))
}

fn mms(global: &Global, case: &str, resolutions: &[usize], t_final: f64) -> Result<Value> {
    let (params, base, cfg_json) = match &global.config {
        Some(_) => {
            let (cfg, base) = load(global, None)?;
            (cfg.parameters, base, to_json(&cfg))
        }
        None => (mms_parameters(), PathBuf::new(), Value::Null),
    };
    let c = manufactured_case(case, &params, [1.0; 3])?;
    let opts = StudyOptions {
        t_final,
        ..Default::default()
    };
    let table = convergence_study(&c, resolutions, &opts)?;
    let in_range = |q: &str| {
        table
            .fit(q)
            .and_then(|f| f.order)
            .map(|o| o >= MMS_ORDER_RANGE.0 && o <= MMS_ORDER_RANGE.1)
    };
    let floor = ["u_interior", "u_global", "p_interior", "p_global"]
        .iter()
        .all(|q| table.fit(q).is_some_and(|f| f.at_floor));
    let summary = json!({
        "case": case,
        "parameters": to_json(&params),
        "fits": table.fits,
        "floor_reached": floor,
        "interior_orders_in_range": {
            "range": [MMS_ORDER_RANGE.0, MMS_ORDER_RANGE.1],
            "u": in_range("u_interior"),
            "p": in_range("p_interior"),
        },
        "non_monotone": table.non_monotone(),
    });
    let resolved = json!({
        "case": case,
        "resolutions": resolutions,
        "options": to_json(&opts),
        "parameters": to_json(&params),
        "config": cfg_json,
    });
    let dir = global.out_dir.clone().unwrap_or_else(|| base.join("out"));
    let mut out = OutputDir::create(&dir, resolved)?;
    let (h, rows) = convergence_csv(&table);
    out.csv("convergence.csv", &h, &rows)?;
    out.json("convergence.json", &json!({"table": to_json(&table), "summary": summary}))?;
    Ok(json!({"command": "mms", "output": out.root, "rows": table.rows, "summary": summary}))
}

/// Returns the report and whether every check passed.
fn check(global: &Global, config: Option<&PathBuf>) -> Result<(Value, bool)> {
    let (cfg, base) = load(global, config)?;
    let grid = cfg.grid()?;
    let spec = cfg.run_spec(&base)?;
    let s = &spec.initial;
    let compat = check_compatibility(&s.u, &s.u_t, &s.p, &s.p_t, &spec.bc, COMPATIBILITY_TOL)?;
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..4 {
        let f = random_modes(
            &grid,
            &RandomModes {
                seed: cfg.seed.wrapping_add(i),
                with_velocity: false,
                ..Default::default()
            },
        );
        let (a, b) = identity_defects(&f.u, &f.p);
        worst = (worst.0.max(a), worst.1.max(b));
    }
    let identities_ok = worst.0 <= IDENTITY_TOL && worst.1 <= IDENTITY_TOL;
    let passed = compat.passed() && identities_ok;
    let report = json!({
        "command": "check",
        "parameters": {"valid": true, "values": to_json(&cfg.parameters)},
        "cfl_timestep": cfl_timestep(&cfg.parameters, &grid, cfg.time.cfl_safety)?,
        "compatibility": to_json(&compat),
        "identities": {
            "div_curl_relative": worst.0,
            "curl_grad_relative": worst.1,
            "tolerance": IDENTITY_TOL,
            "passed": identities_ok,
        },
        "passed": passed,
    });
    if let Some(d) = &global.out_dir {
        let mut out = OutputDir::create(d, to_json(&cfg))?;
        out.json("check.json", &report)?;
    }
    Ok((report, passed))
}

fn error_json(e: &Error) -> Value {
    let mut v = json!({"error": e.kind(), "message": e.to_string()});
    match e {
        Error::Config(list) => v["violations"] = to_json(list),
        Error::InvalidParameters(list) => v["violations"] = to_json(list),
        _ => {}
    }
    v
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({"error": "threads", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    }
    let g = &cli.global;
    let result = match &cli.command {
        Command::Simulate { config } => simulate(g, config.as_ref()).map(|v| (v, true)),
        Command::Dispersion { config } => dispersion(g, config.as_ref()).map(|v| (v, true)),
        Command::Probe { paths } => probe(g, paths).map(|v| (v, true)),
        Command::Mms {
            case,
            resolutions,
            t_final,
        } => mms(g, case, resolutions, *t_final).map(|v| (v, true)),
        Command::Check { config } => check(g, config.as_ref()),
    };
    match result {
        Ok((v, ok)) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&error_json(&e)).unwrap_or_default());
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
