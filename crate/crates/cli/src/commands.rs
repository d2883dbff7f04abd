//! The six subcommands. Each writes its artifacts under the output directory
//! and returns the JSON report it wrote.

use crate::config::{RunConfig, StVerifySection};
use fraclap::diagnostics::{
    classify_dichotomy, concentration_report, decay_profile, ConcentrationReport, DEFAULT_EPSILON,
};
use fraclap::domain::{AnyField, BoundaryCondition, Field, Scalar, Topology};
use fraclap::energy::{el_residuals, EnergyParams};
use fraclap::io::{render_pgm, render_ppm, FieldFile, Marker, REPORT_VERSION};
use fraclap::solver::{minimize, sweep_r, Init, Solution};
use fraclap::spectral::{apply_fraclap, symbol};
use fraclap::stx::{cutoff_energy_defect, neumann_trace, st_energy, st_extend, TGrid};
use fraclap::tiling::{extend_field, structure_map, verify_extension};
use fraclap::Error;
use ndarray::Array2;
use num_complex::Complex64;
use serde_json::{json, Value};
use std::path::Path;
use std::sync::Arc;

/// Command failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Convergence(_) | Error::ZeroField => EXIT_CONVERGENCE,
            Error::Io(_) | Error::Format(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_IO, message: e.to_string() }
    }
}

pub type Outcome = Result<Value, Failure>;

fn validation(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_VALIDATION, message: msg.into() }
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(v).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn to_value<S: serde::Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn name(opt: &Option<String>, default: &str) -> String {
    opt.clone().unwrap_or_else(|| default.to_string())
}

fn report(command: &str, body: Value) -> Value {
    let mut v = json!({ "report_version": REPORT_VERSION, "command": command });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    v
}

fn solution_file<T: Scalar>(sol: &Solution<T>, provenance: Value) -> FieldFile
where
    AnyField: From<Field<T>>,
{
    let mut f = FieldFile::new(sol.field.clone().into());
    f.header.bc = Some(sol.bc.clone());
    f.header.s = Some(sol.params.s);
    f.header.q = Some(sol.params.q);
    f.header.lambda = Some(sol.lambda);
    f.header.residual = Some(sol.residual);
    f.header.provenance = provenance;
    f
}

fn solution_json<T: Scalar>(sol: &Solution<T>, conc: &ConcentrationReport) -> Value {
    json!({
        "lambda": sol.lambda,
        "residual": sol.residual,
        "dual_residual": sol.dual_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "start": sol.start,
        "constraint_active": sol.constraint_active,
        "constraint_fraction": sol.constraint_fraction,
        "concentration": to_value(conc),
    })
}

// ---------------------------------------------------------------- solve

pub fn solve(cfg: &RunConfig, out: &Path) -> Outcome {
    if cfg.bc.admits_real() {
        solve_typed::<f64>(cfg, out)
    } else {
        solve_typed::<Complex64>(cfg, out)
    }
}

fn solve_typed<T: Scalar>(cfg: &RunConfig, out: &Path) -> Outcome
where
    AnyField: From<Field<T>>,
{
    let grid = Arc::new(cfg.grid.build(&cfg.domain)?);
    let sol: Solution<T> = minimize(&grid, &cfg.bc, &cfg.solve)?;
    let conc = concentration_report(&sol.field, &sol.bc, cfg.solve.params.q, DEFAULT_EPSILON)?;
    let field_name = name(&cfg.output.field, "solution.fld");
    solution_file(&sol, json!({ "command": "solve", "seed": cfg.seed })).save(out.join(&field_name))?;
    let mut body = solution_json(&sol, &conc);
    body["field"] = json!(field_name);
    body["config"] = to_value(cfg);
    let v = report("solve", body);
    write_json(&out.join(name(&cfg.output.report, "report.json")), &v)?;
    if !sol.converged {
        return Err(Failure {
            code: EXIT_CONVERGENCE,
            message: format!(
                "no convergence after {} iterations (residual {:e}); partial report written",
                sol.iterations, sol.residual
            ),
        });
    }
    Ok(v)
}

// ---------------------------------------------------------------- sweep

pub fn sweep(cfg: &RunConfig, out: &Path) -> Outcome {
    if cfg.bc.admits_real() {
        sweep_typed::<f64>(cfg, out)
    } else {
        sweep_typed::<Complex64>(cfg, out)
    }
}

fn sweep_typed<T: Scalar>(cfg: &RunConfig, out: &Path) -> Outcome
where
    AnyField: From<Field<T>>,
{
    let section = cfg.sweep.as_ref().ok_or_else(|| validation("sweep needs a `sweep` section with `scales`"))?;
    let entries = sweep_r::<T>(&cfg.domain, &section.scales, cfg.grid, &cfg.bc, &cfg.solve, &section.options())?;
    let stem = name(&cfg.output.field, "solution.fld");
    let stem = stem.strip_suffix(".fld").unwrap_or(&stem).to_string();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        match &e.result {
            Ok((sol, conc)) => {
                let file = format!("{stem}_{i:02}.fld");
                let prov = json!({ "command": "sweep", "seed": cfg.seed, "scale": e.scale });
                solution_file(sol, prov).save(out.join(&file))?;
                let mut row = solution_json(sol, conc);
                row["scale"] = json!(e.scale);
                row["status"] = json!("ok");
                row["field"] = json!(file);
                row["weight"] = json!(conc.weight);
                row["location_class"] = to_value(&conc.location.as_ref().map(|l| l.class));
                rows.push(row);
                reports.push(conc.clone());
            }
            Err(err) => rows.push(json!({ "scale": e.scale, "status": "failed", "error": err.to_string() })),
        }
    }
    let dichotomy = if reports.len() >= 3 { classify_dichotomy(&reports).ok() } else { None };
    let v = report(
        "sweep",
        json!({
            "entries": rows,
            "failed": entries.iter().filter(|e| e.result.is_err()).count(),
            "dichotomy": to_value(&dichotomy),
            "config": to_value(cfg),
        }),
    );
    write_json(&out.join(name(&cfg.output.report, "sweep.json")), &v)?;
    Ok(v)
}

// ---------------------------------------------------------------- field commands

/// Regime and parameters of a stored field: header first, config second.
fn field_context(
    file: &FieldFile,
    cfg: Option<&RunConfig>,
) -> Result<(BoundaryCondition, Option<EnergyParams>), Failure> {
    let bc = file
        .header
        .bc
        .clone()
        .or_else(|| cfg.map(|c| c.bc.clone()))
        .ok_or_else(|| validation("field header has no boundary condition; pass --config"))?;
    let params = match (file.header.s, file.header.q) {
        (Some(s), Some(q)) => Some(EnergyParams { s, q, allow_critical: true }),
        _ => cfg.map(|c| c.solve.params),
    };
    Ok((bc, params))
}

pub fn extend(input: &Path, cfg: &RunConfig, out: &Path) -> Outcome {
    let file = FieldFile::load(input)?;
    let spec = cfg.tiling.ok_or_else(|| validation("extend needs a `tiling` section"))?;
    let (bc, params) = field_context(&file, Some(cfg))?;
    let params = params.expect("config present");
    let field_name = name(&cfg.output.field, "extended.fld");
    let (check, fundamental, points, periodic) = match &file.field {
        AnyField::Real(u) => extend_typed(u, &bc, &spec, &params, &file, out, &field_name)?,
        AnyField::Complex(u) => extend_typed(u, &bc, &spec, &params, &file, out, &field_name)?,
    };
    let accepted = check.as_ref().map(|c: &fraclap::tiling::ExtensionCheck| c.accepts(fundamental));
    let v = report(
        "extend",
        json!({
            "input": input.display().to_string(),
            "field": field_name,
            "tiling": to_value(&spec),
            "periodic_regime": to_value(&periodic),
            "fundamental_residual": fundamental,
            "extension": check.as_ref().map(to_value),
            "accepted": accepted,
            "structure": to_value(&points),
        }),
    );
    write_json(&out.join(name(&cfg.output.report, "extend.json")), &v)?;
    Ok(v)
}

type ExtendParts =
    (Option<fraclap::tiling::ExtensionCheck>, f64, Vec<fraclap::tiling::StructurePoint>, Option<BoundaryCondition>);

fn extend_typed<T: Scalar>(
    u: &Field<T>,
    bc: &BoundaryCondition,
    spec: &fraclap::tiling::TilingSpec,
    params: &EnergyParams,
    file: &FieldFile,
    out: &Path,
    field_name: &str,
) -> Result<ExtendParts, Failure>
where
    AnyField: From<Field<T>>,
{
    let fundamental = el_residuals(u, &symbol(u.grid(), bc)?, params)?.relative_l2;
    let ext = extend_field(u, bc, spec)?;
    let check = if ext.periodic.is_some() { Some(verify_extension(&ext, params)?) } else { None };
    let points = structure_map(&ext.field, params.q);
    let mut f = FieldFile::new(ext.field.clone().into());
    f.header.bc = ext.periodic.clone();
    f.header.s = Some(params.s);
    f.header.q = Some(params.q);
    f.header.lambda = file.header.lambda;
    f.header.provenance = json!({ "command": "extend", "tiling": to_value(spec) });
    f.save(out.join(field_name))?;
    Ok((check, fundamental, points, ext.periodic))
}

pub fn render(input: &Path, cfg: Option<&RunConfig>, overlay: bool, out: &Path) -> Outcome {
    let file = FieldFile::load(input)?;
    let q = file.header.q.or_else(|| cfg.map(|c| c.solve.params.q));
    let overlay = overlay || cfg.is_some_and(|c| c.output.overlay);
    let markers = |points: Vec<fraclap::tiling::StructurePoint>| -> Vec<Marker> {
        points.iter().map(|p| Marker { index: p.index, positive: p.sign >= 0 }).collect()
    };
    let exponent = || q.ok_or_else(|| validation("overlay needs q from the field header or --config"));
    let (bytes, ext, count) = match &file.field {
        AnyField::Real(u) => {
            let m = if overlay { markers(structure_map(u, exponent()?)) } else { Vec::new() };
            (render_pgm(u, &m), "pgm", m.len())
        }
        AnyField::Complex(u) => {
            let m = if overlay { markers(structure_map(u, exponent()?)) } else { Vec::new() };
            (render_ppm(u, &m), "ppm", m.len())
        }
    };
    let default = format!("render.{ext}");
    let image = cfg.and_then(|c| c.output.image.clone()).unwrap_or(default);
    std::fs::write(out.join(&image), bytes)?;
    let dims = file.field.grid().dims();
    let v = report(
        "render",
        json!({ "input": input.display().to_string(), "image": image, "dims": dims, "markers": count }),
    );
    let report_name = cfg.and_then(|c| c.output.report.clone()).unwrap_or_else(|| "render.json".into());
    write_json(&out.join(report_name), &v)?;
    Ok(v)
}

pub fn diagnose(input: &Path, cfg: Option<&RunConfig>, out: &Path) -> Outcome {
    let file = FieldFile::load(input)?;
    let (bc, params) = field_context(&file, cfg)?;
    let params = params.ok_or_else(|| validation("field header has no s and q; pass --config"))?;
    let body = match &file.field {
        AnyField::Real(u) => diagnose_typed(u, &bc, &params)?,
        AnyField::Complex(u) => diagnose_typed(u, &bc, &params)?,
    };
    let mut v = report("diagnose", body);
    v["input"] = json!(input.display().to_string());
    let report_name = cfg.and_then(|c| c.output.report.clone()).unwrap_or_else(|| "diagnose.json".into());
    write_json(&out.join(report_name), &v)?;
    Ok(v)
}

fn diagnose_typed<T: Scalar>(u: &Field<T>, bc: &BoundaryCondition, p: &EnergyParams) -> Result<Value, Failure> {
    let sym = symbol(u.grid(), bc)?;
    let residuals = el_residuals(u, &sym, p)?;
    let conc = concentration_report(u, bc, p.q, DEFAULT_EPSILON)?;
    let decay = decay_profile(u, conc.x_star, Topology::of(u.grid(), bc));
    Ok(json!({
        "bc": to_value(bc),
        "residuals": to_value(&residuals),
        "concentration": to_value(&conc),
        "decay_profile": decay,
        "structure": to_value(&structure_map(u, p.q)),
    }))
}

// ---------------------------------------------------------------- stverify

pub fn stverify(cfg: &RunConfig, out: &Path) -> Outcome {
    if !matches!(cfg.bc, BoundaryCondition::Neumann | BoundaryCondition::Dirichlet) {
        return Err(validation(format!(
            "the extension oracle is restricted to Neumann and Dirichlet cells, got {}",
            cfg.bc
        )));
    }
    let section = cfg.stverify.clone().unwrap_or_default();
    if section.samples == 0 {
        return Err(validation("stverify.samples must be at least 1"));
    }
    let grid = Arc::new(cfg.grid.build(&cfg.domain)?);
    let sym = symbol(&grid, &cfg.bc)?;
    let tgrid = TGrid::for_symbol(&sym, section.nodes)?;
    let orders = if section.orders.is_empty() { vec![cfg.solve.params.s] } else { section.orders.clone() };
    let mut rows = Vec::new();
    for &s in &orders {
        rows.push(verify_order(&grid, &sym, s, &tgrid, &section, cfg.seed)?);
    }
    let v = report(
        "stverify",
        json!({
            "bc": to_value(&cfg.bc),
            "dims": grid.dims(),
            "t_nodes": section.nodes,
            "t_max": tgrid.t_max(),
            "orders": rows,
        }),
    );
    write_json(&out.join(name(&cfg.output.report, "stverify.json")), &v)?;
    Ok(v)
}

fn verify_order(
    grid: &Arc<fraclap::domain::Grid>,
    sym: &fraclap::spectral::SpectralSymbol,
    s: f64,
    tgrid: &TGrid,
    section: &StVerifySection,
    seed: u64,
) -> Result<Value, Failure> {
    let topology = Topology::of(grid, sym.bc());
    let mut gaps = Vec::new();
    let mut mismatches = Vec::new();
    let mut first = None;
    for k in 0..section.samples {
        let init = Init::ConstantPlusNoise { seed: seed.wrapping_add(k as u64), amplitude: 1.0 };
        let u: Field<f64> = init.build(grid, topology)?;
        let w = st_extend(&u, sym, s, tgrid)?;
        gaps.push(st_energy(&w)?.relative_gap);
        let trace: Field<f64> = neumann_trace(&w)?;
        let exact = apply_fraclap(&u, sym, s)?;
        mismatches.push(trace.axpy(-1.0, &exact)?.norm_l2() / exact.norm_l2());
        first.get_or_insert(u);
    }
    let u = first.expect("at least one sample");
    let conc = concentration_report(&u, sym.bc(), 2.0 + s, DEFAULT_EPSILON)?;
    let diam = grid.diameter();
    let centre = conc.x_star;
    let omega = Array2::from_shape_fn((grid.dims()[0], grid.dims()[1]), |(i, j)| {
        let p = grid.position(i, j);
        (p[0] - centre[0]).hypot(p[1] - centre[1]) <= 0.1 * diam
    });
    let mut defects = Vec::new();
    for frac in [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0] {
        let r = frac * diam;
        if r < 2.0 * grid.spacing() || tgrid.t_max() < 2.0 * r {
            continue;
        }
        defects.push(json!({ "r": r, "defect": cutoff_energy_defect(&u, sym, s, &omega, r, tgrid)? }));
    }
    let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(json!({
        "s": s,
        "energy_gaps": gaps,
        "max_energy_gap": worst(&gaps),
        "trace_mismatches": mismatches,
        "max_trace_mismatch": worst(&mismatches),
        "cutoff_defects": defects,
    }))
}
