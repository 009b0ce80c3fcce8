//! Experiment drivers behind the subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use nematic_core::fem::{ellipticity_check, interpolate, FeSpace, TensorField, TetRule};
use nematic_core::manufactured::{Twisted, UniformUniaxial};
use nematic_core::mesh::{read_gmsh, unit_cube_mesh, TetMesh};
use nematic_core::potential::{f_hessian, f_value, MomentRule};
use nematic_core::solver::{newton_solve, KantorovichOptions, Problem, SolveReport};
use nematic_core::study::{convergence_study, infsup_sweep, StudySetup, ELEVATED_DEGREE};
use nematic_core::tensor::QTensor;

use crate::config::{Boundary, Domain, RunConfig};
use crate::{CliError, ErrorKind};

/// Parsed configuration plus the command-line switches.
pub struct Run {
    pub config: RunConfig,
    pub out: PathBuf,
    pub allow_nonelliptic: bool,
}

pub type CmdResult = Result<(), CliError>;

pub fn csv_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_number).unwrap_or_default()
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(CliError::io)?;
    Ok(path)
}

fn load_mesh(domain: &Domain) -> Result<TetMesh, CliError> {
    match domain {
        Domain::UnitCube(n) => unit_cube_mesh(*n).map_err(CliError::core),
        Domain::Gmsh(p) => read_gmsh(p)
            .with_context(|| format!("cannot load mesh {}", p.display()))
            .map_err(|e| CliError::new(ErrorKind::Config, e)),
    }
}

/// Refuses non-elliptic constants unless explicitly allowed.
fn check_elastic(ctx: &Run) -> CmdResult {
    let report = ellipticity_check(&ctx.config.elastic);
    if report.elliptic {
        return Ok(());
    }
    if ctx.allow_nonelliptic {
        eprintln!(
            "warning: elastic constants violate ellipticity (margin {:e}); continuing",
            report.margin
        );
        return Ok(());
    }
    Err(CliError::core(nematic_core::Error::EllipticityViolated {
        margin: report.margin,
    }))
}

fn build_problem(ctx: &Run, space: Arc<FeSpace>) -> Result<Problem, CliError> {
    let cfg = &ctx.config;
    let bulk = cfg.potential.build().map_err(CliError::config)?;
    let mut p = Problem::new_unchecked(space, cfg.elastic, bulk);
    if let Some(d) = cfg.quadrature_degree {
        p = p.with_rule(TetRule::with_degree(d));
    }
    Ok(p)
}

fn boundary_field(cfg: &RunConfig) -> Box<dyn TensorField> {
    match cfg.boundary {
        Boundary::Uniaxial { s, director } => Box::new(UniformUniaxial { s, director }),
        Boundary::Twisted { s, twist } => Box::new(Twisted { s, twist }),
        Boundary::Manufactured => Box::new(cfg.manufactured),
    }
}

fn report_text(ctx: &Run, problem: &Problem, report: &SolveReport, error: Option<&str>) -> String {
    let cfg = &ctx.config;
    let mesh = problem.space().mesh();
    let mut s = String::new();
    let _ = writeln!(s, "nematic solve report");
    let _ = writeln!(s, "domain: {:?}", cfg.domain);
    let _ = writeln!(
        s,
        "mesh: {} vertices, {} tetrahedra, h_max {:e}, free dofs {}",
        mesh.num_vertices(),
        mesh.num_tets(),
        mesh.h_max(),
        problem.space().num_free()
    );
    let e = &cfg.elastic;
    let _ = writeln!(s, "elastic: L1 {} L2 {} L3 {}", e.l1, e.l2, e.l3);
    let _ = writeln!(s, "potential: {:?}", cfg.potential);
    let _ = writeln!(s, "boundary: {:?}", cfg.boundary);
    let _ = writeln!(
        s,
        "status: {}",
        match error {
            None if report.converged => "converged".to_string(),
            None => "not converged".to_string(),
            Some(msg) => format!("failed: {msg}"),
        }
    );
    let _ = writeln!(s, "energy: {:.16e}", report.final_energy);
    let _ = writeln!(s, "initial residual: {:.16e}", report.initial_residual);
    let _ = writeln!(s, "final residual: {:.16e}", report.final_residual);
    let _ = writeln!(s, "final margin: {:.16e}", report.final_margin);
    if let Some(b1) = report.b1 {
        let _ = writeln!(s, "b1: {b1:.16e}");
    }
    if let Some(k) = &report.kantorovich {
        let opt = |x: Option<f64>| {
            x.map(|v| format!("{v:.16e}"))
                .unwrap_or_else(|| "n/a".into())
        };
        let _ = writeln!(
            s,
            "kantorovich: beta_h {} a1 {} b1 {:.16e} L {:.16e} h* {}",
            opt(k.beta_h),
            opt(k.a1_est),
            k.b1,
            k.l_est,
            opt(k.h_star)
        );
    }
    let _ = writeln!(s, "iterations: {}", report.iterations.len());
    let _ = writeln!(
        s,
        "{:>4} {:>24} {:>24} {:>10} {:>24} {:>24}",
        "k", "residual", "step_h1", "damping", "energy", "min_margin"
    );
    for (k, it) in report.iterations.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>4} {:>24.16e} {:>24.16e} {:>10.3e} {:>24.16e} {:>24.16e}",
            k, it.residual, it.step_h1, it.step_length, it.energy, it.min_margin
        );
    }
    s
}

pub fn solve(ctx: &Run) -> CmdResult {
    check_elastic(ctx)?;
    let cfg = &ctx.config;
    let space = FeSpace::new(load_mesh(&cfg.domain)?);
    let problem = build_problem(ctx, space.clone())?;
    let g = boundary_field(cfg);
    let data = interpolate(&space, g.as_ref());
    let initial = problem
        .initial_iterate(&data, cfg.newton.min_margin)
        .map_err(CliError::core)?;
    let mut newton = cfg.newton.clone();
    if cfg.kantorovich {
        newton.kantorovich = Some(KantorovichOptions::default());
    }
    let title = format!("nematic {} solution", problem.bulk().name());
    match newton_solve(&problem, initial, &newton) {
        Ok((x, report)) => {
            let vtk = ctx.out.join(&cfg.outputs.vtk);
            crate::vtk::write(&vtk, &x, &title)
                .with_context(|| format!("cannot write {}", vtk.display()))
                .map_err(CliError::io)?;
            let text = report_text(ctx, &problem, &report, None);
            write_file(&ctx.out, &cfg.outputs.report, &text)?;
            print!("{text}");
            Ok(())
        }
        Err(failure) => {
            let msg = failure.error.to_string();
            if let Some(best) = &failure.best {
                let vtk = ctx.out.join(&cfg.outputs.vtk);
                // best effort: the solver error is what gets reported
                let _ = crate::vtk::write(&vtk, best, &title);
            }
            let text = report_text(ctx, &problem, &failure.report, Some(&msg));
            write_file(&ctx.out, &cfg.outputs.report, &text)?;
            Err(CliError::core(failure.error))
        }
    }
}

fn study_setup(ctx: &Run) -> Result<StudySetup, CliError> {
    let cfg = &ctx.config;
    let bulk = cfg.potential.build().map_err(CliError::config)?;
    let mut setup = StudySetup::new(cfg.elastic, bulk);
    setup.exact = cfg.manufactured;
    setup.newton = cfg.newton.clone();
    setup.kantorovich = cfg.kantorovich;
    setup.check_ellipticity = !ctx.allow_nonelliptic;
    Ok(setup)
}

pub const CONVERGENCE_HEADER: &str =
    "n,h_max,dofs,h1_error,l2_error,observed_order_h1,observed_order_l2,newton_iters,h_star";

pub fn convergence(ctx: &Run) -> CmdResult {
    if ctx.config.quadrature_degree.is_some() {
        eprintln!("note: convergence uses its own degree-{ELEVATED_DEGREE} error quadrature; quadrature.degree only affects solve");
    }
    check_elastic(ctx)?;
    let setup = study_setup(ctx)?;
    let rows = convergence_study(&ctx.config.levels, &setup).map_err(CliError::core)?;
    let mut csv = String::from(CONVERGENCE_HEADER);
    csv.push('\n');
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            csv_number(r.h_max),
            r.dofs,
            csv_number(r.h1_error),
            csv_number(r.l2_error),
            csv_opt(r.observed_order_h1),
            csv_opt(r.observed_order_l2),
            r.newton_iters,
            csv_opt(r.h_star)
        );
    }
    let name = ctx
        .config
        .outputs
        .csv
        .as_deref()
        .unwrap_or("convergence.csv");
    write_file(&ctx.out, name, &csv)?;
    println!(
        "{:>4} {:>12} {:>8} {:>12} {:>12} {:>8} {:>8} {:>6}",
        "n", "h_max", "dofs", "H1 error", "L2 error", "H1 ord", "L2 ord", "iters"
    );
    for r in &rows {
        let o = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>4} {:>12.4e} {:>8} {:>12.4e} {:>12.4e} {:>8} {:>8} {:>6}",
            r.n,
            r.h_max,
            r.dofs,
            r.h1_error,
            r.l2_error,
            o(r.observed_order_h1),
            o(r.observed_order_l2),
            r.newton_iters
        );
    }
    Ok(())
}

pub const INFSUP_HEADER: &str = "n,h,beta_h";

pub fn infsup(ctx: &Run) -> CmdResult {
    check_elastic(ctx)?;
    let setup = study_setup(ctx)?;
    let rows = infsup_sweep(&ctx.config.levels, &setup).map_err(CliError::core)?;
    let mut csv = format!("{INFSUP_HEADER}\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{}",
            r.n,
            csv_number(r.h_max),
            csv_number(r.beta_h)
        );
        println!(
            "n {:>3}  h {:.4e}  dofs {:>6}  beta_h {:.6e}",
            r.n, r.h_max, r.dofs, r.beta_h
        );
    }
    let name = ctx.config.outputs.csv.as_deref().unwrap_or("infsup.csv");
    write_file(&ctx.out, name, &csv)?;
    Ok(())
}

pub const POTENTIAL_HEADER: &str = "s,lambda_min,f,grad_norm,hess_min_eig,hess_max_eig";

/// One row of the singular potential table at uniaxial order `s` along `e_z`.
pub fn potential_row(rule: &MomentRule, dual_tol: f64, s: f64) -> nematic_core::Result<[f64; 6]> {
    let q = QTensor::uniaxial(s, [0.0, 0.0, 1.0]);
    let margin = q.physicality_margin();
    if !(margin > 0.0) {
        return Err(nematic_core::Error::NotPhysical { margin });
    }
    let state = rule.solve_multiplier(&q, None, dual_tol)?;
    let h = f_hessian(&state)?.symmetric_eigenvalues();
    Ok([
        s,
        q.eigenvalues().min(),
        f_value(&state),
        state.lambda.norm(),
        h.min(),
        h.max(),
    ])
}

pub fn potential_table(ctx: &Run) -> CmdResult {
    let cfg = &ctx.config;
    let rule = MomentRule::with_degree(cfg.potential.lebedev_degree()).map_err(CliError::config)?;
    let mut csv = format!("{POTENTIAL_HEADER}\n");
    for s in cfg.sweep.values() {
        let row = potential_row(&rule, cfg.potential.dual_tol(), s)
            .map_err(|e| CliError::core(e).context(format!("at s = {s}")))?;
        let fields: Vec<String> = row.iter().map(|v| csv_number(*v)).collect();
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    let name = cfg.outputs.csv.as_deref().unwrap_or("potential_table.csv");
    let path = write_file(&ctx.out, name, &csv)?;
    println!(
        "wrote {} rows to {}",
        cfg.sweep.values().len(),
        path.display()
    );
    Ok(())
}
