//! Subcommand bodies. Each returns a JSON document for stdout and a short
//! human-readable summary for stderr; data files go to the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use igo_core::format::{fixed12, round12};
use igo_core::numerics::eig3::C64;
use igo_core::poincare::fixed_point_analytic;
use igo_core::{
    design_for_target, optimize_slopes, simulate, slope_sweep, transient_metrics, CycleClass,
    Execution, FixedPoint, Mat3, Modulation, ModulationKind, StabilityReport, StateVec,
};
use serde_json::{json, Value};

use crate::config::{Config, Format};
use crate::CliError;

/// Fallback when neither `--out`, the config, nor `IGO_OUT_DIR` names a directory.
pub const DEFAULT_OUT_DIR: &str = "igo-out";

pub struct Outcome {
    pub json: Value,
    pub summary: String,
}

impl Outcome {
    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(&self.json).expect("json renders")
    }
}

/// `--out` (already merged into the config), then the config, then `env_dir`.
pub fn output_dir(cfg: &Config, env_dir: Option<PathBuf>) -> PathBuf {
    cfg.output
        .directory
        .clone()
        .or(env_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn vec_json(v: &StateVec) -> Value {
    json!([round12(v[0]), round12(v[1]), round12(v[2])])
}

fn mat_json(m: &Mat3) -> Value {
    Value::Array((0..3).map(|i| vec_json(&m.row(i).transpose())).collect())
}

fn complex_json(z: &C64) -> Value {
    json!([round12(z.re), round12(z.im)])
}

fn fixed_point_json(fp: &FixedPoint) -> Value {
    json!({
        "X": vec_json(&fp.state),
        "y0": round12(fp.output),
        "lambda": round12(fp.spec.weight),
        "T": round12(fp.spec.period),
    })
}

fn report_json(r: &StabilityReport) -> Value {
    json!({
        "Fp": round12(r.f_slope),
        "Phip": round12(r.phi_slope),
        "J": vec_json(&r.j),
        "D": vec_json(&r.d),
        "jacobian": mat_json(&r.jacobian),
        "eigenvalues": r.eigen.values.iter().map(complex_json).collect::<Vec<_>>(),
        "rho": round12(r.spectral_radius),
        "lhs_linear": round12(r.criterion_linear_lhs),
        "chi_at_minus_1": round12(r.chi_at_minus_1),
        "border": { "c_J": round12(r.border.c_j), "c_D": round12(r.border.c_d) },
        "spectral_floor": round12(r.spectral_floor),
        "verdict_linear": r.verdict_linear,
        "verdict_det": r.verdict_det,
        "verdict_eigen": r.verdict_eigen,
        "stable": r.stable(),
    })
}

pub fn fixed_point(cfg: &Config) -> Result<Outcome, CliError> {
    let fp = fixed_point_analytic(&cfg.plant()?, cfg.cycle()?)?;
    Ok(Outcome {
        summary: format!(
            "fixed point X = ({}, {}, {}), y0 = {}",
            fixed12(fp.state[0]),
            fixed12(fp.state[1]),
            fixed12(fp.state[2]),
            fixed12(fp.output)
        ),
        json: fixed_point_json(&fp),
    })
}

/// Designed modulation of the configured kind with its fixed point and report.
fn designed(cfg: &Config) -> Result<(Modulation, FixedPoint, StabilityReport), CliError> {
    let plant = cfg.plant()?;
    let s = cfg.modulation.slopes;
    let d = design_for_target(&plant, cfg.cycle()?, s.f, s.phi, cfg.bounds())?;
    let modulation = match cfg.modulation.kind {
        ModulationKind::SaturatedAffine => d.modulation,
        ModulationKind::Hill => {
            let m = d.modulation;
            Modulation::hill(
                m.anchor_y,
                m.weight,
                m.period,
                m.f_slope,
                m.phi_slope,
                m.bounds,
            )
        }
        ModulationKind::Constant => Modulation::constant(cfg.cycle.lambda, cfg.cycle.period),
    };
    modulation.ensure_valid()?;
    let y0 = d.fixed_point.output;
    let report = StabilityReport::evaluate(
        &plant,
        &d.fixed_point,
        modulation.f_slope_at(y0),
        modulation.phi_slope_at(y0),
    )?;
    Ok((modulation, d.fixed_point, report))
}

pub fn stability(cfg: &Config) -> Result<Outcome, CliError> {
    let (_, fp, report) = designed(cfg)?;
    let mut json = report_json(&report);
    json["X"] = vec_json(&fp.state);
    json["y0"] = json!(round12(fp.output));
    json["lambda"] = json!(round12(fp.spec.weight));
    json["T"] = json!(round12(fp.spec.period));
    Ok(Outcome {
        summary: format!(
            "slopes F'={} Phi'={}: rho = {}, {} (linear {}, det {}, eigen {})",
            fixed12(report.f_slope),
            fixed12(report.phi_slope),
            fixed12(report.spectral_radius),
            if report.stable() {
                "stable"
            } else {
                "unstable"
            },
            report.verdict_linear,
            report.verdict_det,
            report.verdict_eigen
        ),
        json,
    })
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<String, CliError> {
    let (path, mut w) = create(dir, name)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(name.to_string())
}

/// Largest cycle multiplicity searched for.
const MAX_MULTIPLICITY: usize = 8;
const CYCLE_TOL: f64 = 1e-6;

pub fn simulate_cmd(cfg: &Config, out: &Path) -> Result<Outcome, CliError> {
    let plant = cfg.plant()?;
    let (modulation, fp, _) = designed(cfg)?;
    let x0 = cfg.initial_state(&fp.state);
    let trace = simulate(&plant, &modulation, &x0, cfg.horizon(), cfg.sim.sample_step)?;

    let n = trace.events.len();
    let m_max = MAX_MULTIPLICITY.min(n / 4);
    let class = if m_max == 0 {
        None
    } else {
        Some(trace.classify(m_max, CYCLE_TOL)?)
    };
    let (label, cycle_period) = match class {
        None => ("undetermined".to_string(), Value::Null),
        Some(CycleClass::Aperiodic) => ("aperiodic".to_string(), Value::Null),
        Some(CycleClass::Period(m)) => {
            let total: f64 = trace.events[n - m..].iter().map(|e| e.period).sum();
            (format!("{m}-cycle"), json!(round12(total)))
        }
    };
    let transient = match transient_metrics(&trace, &fp) {
        Ok(t) => json!({
            "ratio": t.ratio.map(round12),
            "overshoot": t.overshoot,
            "converged": t.converged,
        }),
        Err(_) => Value::Null,
    };

    let mut files = Vec::new();
    if cfg.wants(Format::Csv) {
        files.push(write_file(out, "trace.csv", |w| {
            trace.write_samples_csv(w)
        })?);
        files.push(write_file(out, "events.csv", |w| {
            trace.write_events_csv(w)
        })?);
    }
    let final_time = trace.samples.last().map(|s| s.t).unwrap_or(0.0);
    let mut json = json!({
        "classification": label,
        "cycle_period": cycle_period,
        "firings": n,
        "final_time": round12(final_time),
        "x0": vec_json(&x0),
        "fixed_point": vec_json(&fp.state),
        "transient": transient,
        "files": files,
    });
    if cfg.wants(Format::Json) {
        let body = serde_json::to_string_pretty(&json).expect("json renders");
        let name = write_file(out, "simulate.json", |w| writeln!(w, "{body}"))?;
        json["files"]
            .as_array_mut()
            .expect("array")
            .push(json!(name));
    }
    Ok(Outcome {
        summary: format!("{n} firings up to t = {}: {label}", fixed12(final_time)),
        json,
    })
}

pub fn sweep(cfg: &Config, out: &Path, exec: Execution) -> Result<Outcome, CliError> {
    let grid = slope_sweep(&cfg.plant()?, cfg.cycle()?, &cfg.sweep_spec()?, exec)?;
    let summary = grid.border_summary();
    let mut json = serde_json::to_value(&summary).expect("summary serializes");
    if let Some([c_j, c_d]) = cfg.reference_border {
        json["reference_border"] = json!({
            "c_J": c_j,
            "c_D": c_d,
            "delta_c_J": round12(grid.border.c_j - c_j),
            "delta_c_D": round12(grid.border.c_d - c_d),
        });
    }
    let mut files = Vec::new();
    if cfg.wants(Format::Csv) {
        files.push(write_file(out, "sweep.csv", |w| grid.write_csv(w))?);
    }
    if cfg.wants(Format::Json) {
        let body = serde_json::to_string_pretty(&json).expect("json renders");
        files.push(write_file(out, "border.json", |w| writeln!(w, "{body}"))?);
    }
    json["files"] = json!(files);
    let mut text = format!(
        "{} of {} cells stable; border: {}",
        summary.stable_cells, summary.cells, summary.inequality
    );
    if let Some([c_j, c_d]) = cfg.reference_border {
        text.push_str(&format!("; reference coefficients ({c_j}, {c_d})"));
    }
    Ok(Outcome {
        json,
        summary: text,
    })
}

pub fn design(cfg: &Config, exec: Execution) -> Result<Outcome, CliError> {
    let (modulation, fp, report) = designed(cfg)?;
    let plant = cfg.plant()?;
    let spec = cfg.sweep_spec()?;
    let best = optimize_slopes(&plant, cfg.cycle()?, spec.slopes, exec);
    let optimized = match &best {
        Ok(o) => json!({
            "Fp": round12(o.f_slope),
            "Phip": round12(o.phi_slope),
            "rho": round12(o.rho),
            "coarse_rho": round12(o.coarse_rho),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let b = modulation.bounds;
    let json = json!({
        "fixed_point": fixed_point_json(&fp),
        "modulation": {
            "kind": serde_json::to_value(modulation.kind).expect("kind serializes"),
            "y0": round12(modulation.anchor_y),
            "F_y0": round12(modulation.eval_f(fp.output)),
            "Phi_y0": round12(modulation.eval_phi(fp.output)),
            "Fp": round12(modulation.f_slope),
            "Phip": round12(modulation.phi_slope),
            "bounds": {
                "F1": round12(b.f_min),
                "F2": round12(b.f_max),
                "Phi1": round12(b.phi_min),
                "Phi2": round12(b.phi_max),
            },
        },
        "stability": report_json(&report),
        "optimized": optimized,
    });
    let tail = match best {
        Ok(o) => format!(
            "; minimal rho {} at F'={} Phi'={}",
            fixed12(o.rho),
            fixed12(o.f_slope),
            fixed12(o.phi_slope)
        ),
        Err(e) => format!("; {e}"),
    };
    Ok(Outcome {
        summary: format!(
            "designed y0 = {}, rho = {} ({}){tail}",
            fixed12(fp.output),
            fixed12(report.spectral_radius),
            if report.stable() {
                "stable"
            } else {
                "unstable"
            }
        ),
        json,
    })
}
