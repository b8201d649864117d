//! Subcommand pipelines. Each writes its files into the output directory and
//! returns the one-line summary printed on success.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use num_complex::Complex64;
use serde_json::json;

use rammscatter::datastore::{self, emit_table, load_farfield, load_table, save_farfield, save_json, ExperimentConfig};
use rammscatter::dtn::{dtn_direct_matrix, dtn_from_amplitude, DtnError};
use rammscatter::forward::{
    far_field_from_grid, far_field_from_radial, solve_radial, FarField, ForwardError, Potential,
};
use rammscatter::geophysics::{
    lift_halfspace, nonuniqueness_residual, nonuniqueness_source, partial_fraction_residual, surface_trace,
    trace_residual, verify_laplace_identity, GeophysicsError, LiftOptions, TraceGrid,
};
use rammscatter::inversion::{
    inject_noise, loglog_slope, reconstruct_exact, reconstruct_noisy, stability_sweep, InversionError,
};
use rammscatter::obstacle::{
    ball_indicator_fourier, dirichlet_sphere_farfield, green_identity_surface, indicator_pair, lipschitz_table,
    penetrable_limit, reconstruct_indicator, ObstacleError, SphereObstacle,
};
use rammscatter::variety::{growth_ladder, norm3, VarietyError};

use crate::plot::{render, Figure, Series};
use crate::{Command, Common, PlotKind, Solver};

/// A numerical failure detected by the driver itself (exit status 2).
#[derive(Debug)]
struct NumericalFailure(String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn forward_code(e: &ForwardError) -> u8 {
    match e {
        ForwardError::NotConverged { .. } | ForwardError::Stiff { .. } => 2,
        _ => 1,
    }
}

/// Maps an error chain to the exit status.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<ForwardError>() {
            return forward_code(e);
        }
        if let Some(e) = cause.downcast_ref::<InversionError>() {
            return match e {
                InversionError::Singular { .. } | InversionError::TailDominated { .. } => 2,
                InversionError::Forward(f) => forward_code(f),
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<DtnError>() {
            return match e {
                DtnError::Resonance { .. } | DtnError::Singular => 2,
                DtnError::Forward(f) => forward_code(f),
                DtnError::InvalidArgument(_) => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<ObstacleError>() {
            return match e {
                ObstacleError::Forward(f) => forward_code(f),
                _ => 1,
            };
        }
        if cause.downcast_ref::<GeophysicsError>().is_some()
            || cause.downcast_ref::<VarietyError>().is_some()
            || cause.downcast_ref::<datastore::DatastoreError>().is_some()
        {
            return 1;
        }
    }
    1
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if let Some(l) = common.l {
            cfg.solver.l = l;
        }
        if let Some(n) = common.grid_n {
            cfg.solver.grid_n = n;
        }
        if let Some(xi) = common.xi {
            cfg.xi = vec![xi];
        }
        if let Some(d) = common.delta {
            cfg.noise.deltas = vec![d];
        }
        if let Some(o) = &common.out {
            cfg.output.dir = o.clone();
        }
        cfg.validate()?;
        fs::create_dir_all(&cfg.output.dir)
            .with_context(|| format!("creating output directory {}", cfg.output.dir.display()))?;
        let out = cfg.output.dir.clone();
        Ok(Self { cfg, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn potential(&self) -> Result<Potential> {
        Ok(self.cfg.potential()?)
    }

    fn radial_farfield(&self, l: usize) -> Result<FarField> {
        let q = self.potential()?;
        let mut ff = far_field_from_radial(&solve_radial(&q, l)?);
        ff.meta.potential_hash = q.hash_hex();
        Ok(ff)
    }

    /// Loads `path` when given, otherwise solves the configured potential.
    fn farfield(&self, path: Option<&Path>) -> Result<FarField> {
        match path {
            Some(p) => {
                let ff = load_farfield(p)?;
                let hash = self.potential()?.hash_hex();
                if !ff.meta.potential_hash.is_empty() && ff.meta.potential_hash != hash {
                    log::warn!(
                        "{} was generated from potential {}, reference values use {}",
                        p.display(),
                        ff.meta.potential_hash,
                        hash
                    );
                }
                Ok(ff)
            }
            None => self.radial_farfield(self.cfg.solver.l),
        }
    }

    fn truth(&self, xi: &[f64; 3]) -> Complex64 {
        Complex64::new(self.cfg.potential.fourier(norm3(xi)), 0.0)
    }
}

fn files(paths: &[&Path]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",")
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn run(common: &Common, cmd: &Command) -> Result<String> {
    if let Some(j) = common.jobs {
        if j == 0 {
            bail!(datastore::DatastoreError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    if let Command::Plot { table, kind, output } = cmd {
        return plot_table(table, *kind, output.as_deref());
    }
    let ctx = Context::new(common)?;
    match cmd {
        Command::Simulate { solver } => simulate(&ctx, *solver),
        Command::PhaseShifts => phase_shifts(&ctx),
        Command::InvertExact { farfield } => invert_exact(&ctx, farfield.as_deref()),
        Command::InvertNoisy { farfield } => invert_noisy(&ctx, farfield.as_deref()),
        Command::StabilitySweep { farfield } => sweep(&ctx, farfield.as_deref()),
        Command::ObstacleLimit => obstacle_limit(&ctx),
        Command::ReconstructShape => reconstruct_shape(&ctx),
        Command::Dtn { farfield } => dtn(&ctx, farfield.as_deref()),
        Command::Nonuniqueness { m_trunc } => nonuniqueness(&ctx, *m_trunc),
        Command::Lift { target, radius, depth } => lift(&ctx, target, *radius, *depth),
        Command::Plot { .. } => unreachable!(),
    }
}

fn simulate(ctx: &Context, solver: Solver) -> Result<String> {
    let l = ctx.cfg.solver.l;
    let ff = match solver {
        Solver::Radial => ctx.radial_farfield(l)?,
        Solver::Grid => far_field_from_grid(&ctx.potential()?, l, &ctx.cfg.grid_options())?,
    };
    let ff_path = ctx.path("farfield.json");
    save_farfield(&ff, &ff_path)?;
    let (rec, opt, uni) = (ff.reciprocity_residual(), ff.optical_residual(), ff.unitarity_residual());
    let report_path = ctx.path("report.json");
    save_json(
        &json!({
            "solver": ff.meta.solver,
            "L": ff.l,
            "a": ff.a,
            "potential_hash": ff.meta.potential_hash,
            "reciprocity_residual": rec,
            "optical_residual": opt,
            "unitarity_residual": uni,
        }),
        &report_path,
    )?;
    Ok(format!(
        "simulate: reciprocity={rec:.3e} optical={opt:.3e} unitarity={uni:.3e} -> {}",
        files(&[&ff_path, &report_path])
    ))
}

fn phase_shifts(ctx: &Context) -> Result<String> {
    let ps = solve_radial(&ctx.potential()?, ctx.cfg.solver.l)?;
    let rows: Vec<Vec<f64>> = ps
        .delta
        .iter()
        .zip(&ps.a_ell)
        .enumerate()
        .map(|(l, (d, a))| vec![l as f64, *d, a.re, a.im])
        .collect();
    let path = ctx.path("phase_shifts.csv");
    emit_table(&["ell", "delta", "a_re", "a_im"], &rows, &path)?;
    Ok(format!(
        "phase-shifts: delta_0={:.6e} unitarity_defect={:.3e} -> {}",
        ps.delta[0],
        ps.unitarity_defect(),
        files(&[&path])
    ))
}

fn invert_exact(ctx: &Context, ff_path: Option<&Path>) -> Result<String> {
    let ff = ctx.farfield(ff_path)?;
    let spec = ctx.cfg.annulus_spec();
    let lad = &ctx.cfg.ladder;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for xi in &ctx.cfg.xi {
        let start = lad.start.unwrap_or(norm3(xi).max(2.0));
        let ladder = growth_ladder(*xi, lad.steps, start, lad.factor)?;
        let truth = ctx.truth(xi);
        let reports = reconstruct_exact(&ff, *xi, &ladder, &spec, lad.reg, Some(truth))?;
        let th: Vec<f64> = reports.iter().map(|r| r.theta_norm).collect();
        let err: Vec<f64> = reports.iter().map(|r| r.error_vs_truth.map_or(0.0, |e| e.norm())).collect();
        slopes.push(loglog_slope(&th, &err));
        for r in &reports {
            rows.push(vec![
                norm3(xi),
                r.theta_norm,
                r.q_hat.re,
                r.q_hat.im,
                truth.re,
                r.error_vs_truth.map_or(0.0, |e| e.norm()),
                r.rho_norm,
                r.nu_norm,
                r.tail_estimate,
            ]);
        }
    }
    let path = ctx.path("ladder.csv");
    emit_table(
        &["xi_norm", "theta_norm", "q_hat_re", "q_hat_im", "truth", "abs_error", "rho_norm", "nu_norm", "tail"],
        &rows,
        &path,
    )?;
    Ok(format!("invert-exact: slopes={} -> {}", fmt_list(&slopes), files(&[&path])))
}

fn invert_noisy(ctx: &Context, ff_path: Option<&Path>) -> Result<String> {
    let ff = ctx.farfield(ff_path)?;
    let ncfg = ctx.cfg.noisy_config();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut violated = 0usize;
    for (k, &delta) in ctx.cfg.noise.deltas.iter().enumerate() {
        let nd = inject_noise(&ff, delta, ctx.cfg.seed.wrapping_add(k as u64))?;
        for xi in &ctx.cfg.xi {
            let truth = ctx.truth(xi);
            let r = reconstruct_noisy(&nd, *xi, &ncfg, Some(truth))?;
            let err = r.error_vs_truth.map_or(0.0, |e| e.norm());
            worst = worst.max(err);
            violated += r.constraint_violated as usize;
            rows.push(vec![
                norm3(xi),
                delta,
                r.truncation.unwrap_or(0) as f64,
                r.theta_norm,
                r.q_hat.re,
                r.q_hat.im,
                truth.re,
                err,
                r.budget.unwrap_or(0.0),
                flag(r.constraint_violated),
            ]);
        }
    }
    let path = ctx.path("noisy.csv");
    emit_table(
        &["xi_norm", "delta", "n_trunc", "theta_norm", "q_hat_re", "q_hat_im", "truth", "abs_error", "budget", "violated"],
        &rows,
        &path,
    )?;
    if violated > 0 {
        return Err(NumericalFailure(format!(
            "{violated} reconstructions exceed the budget {}; see {}",
            ncfg.c_budget,
            path.display()
        ))
        .into());
    }
    Ok(format!("invert-noisy: sup_error={worst:.3e} -> {}", files(&[&path])))
}

fn sweep(ctx: &Context, ff_path: Option<&Path>) -> Result<String> {
    let ff = ctx.farfield(ff_path)?;
    let ncfg = ctx.cfg.noisy_config();
    let rows = stability_sweep(&ff, |xi| ctx.truth(xi), &ctx.cfg.noise.deltas, &ctx.cfg.xi, &ncfg, ctx.cfg.seed)?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                r.delta,
                r.n_trunc as f64,
                r.theta_norm,
                r.sup_error,
                r.field_error,
                r.envelope_log,
                r.envelope_exp,
                flag(r.violated),
            ]
        })
        .collect();
    let path = ctx.path("stability.csv");
    emit_table(
        &["delta", "n_trunc", "theta_norm", "sup_error", "field_error", "envelope_log", "envelope_exp", "violated"],
        &table,
        &path,
    )?;
    let errs: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
    Ok(format!("stability-sweep: sup_error={} -> {}", fmt_list(&errs), files(&[&path])))
}

fn obstacle_limit(ctx: &Context) -> Result<String> {
    let ob = &ctx.cfg.obstacle;
    let tab = penetrable_limit(ob.radius, &ob.t_list, ob.l, ob.n_angles)?;
    let rows: Vec<Vec<f64>> = tab
        .rows
        .iter()
        .map(|r| vec![r.t, r.interior_norm, r.amplitude_distance])
        .collect();
    let pen = ctx.path("penetrable.csv");
    emit_table(&["t", "interior_norm", "amplitude_distance"], &rows, &pen)?;
    let lip = lipschitz_table(ob.radius, &ob.lipschitz_t, ob.l, ob.n_angles)?;
    let lrows: Vec<Vec<f64>> = lip.iter().map(|r| vec![r.t1, r.t2, r.distance, r.ratio]).collect();
    let lip_path = ctx.path("lipschitz.csv");
    emit_table(&["t1", "t2", "distance", "ratio"], &lrows, &lip_path)?;
    if !tab.skipped.is_empty() {
        log::warn!("heights skipped as too stiff: {:?}", tab.skipped);
    }
    if tab.rows.len() < 2 {
        return Err(NumericalFailure(format!("fewer than two heights solved; skipped {:?}", tab.skipped)).into());
    }
    let ts: Vec<f64> = tab.rows.iter().map(|r| r.t).collect();
    let s_int = loglog_slope(&ts, &tab.rows.iter().map(|r| r.interior_norm).collect::<Vec<_>>());
    let s_amp = loglog_slope(&ts, &tab.rows.iter().map(|r| r.amplitude_distance).collect::<Vec<_>>());
    let c_lip = lip.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(format!(
        "obstacle-limit: interior_slope={s_int:.3} amplitude_slope={s_amp:.3} lipschitz_const={c_lip:.4} -> {}",
        files(&[&pen, &lip_path])
    ))
}

fn reconstruct_shape(ctx: &Context) -> Result<String> {
    let ob = &ctx.cfg.obstacle;
    let ff = dirichlet_sphere_farfield(&SphereObstacle::new(ob.radius)?, ob.l)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for xi in &ctx.cfg.xi {
        let xn = norm3(xi);
        let pair = indicator_pair(*xi, ob.growth)?;
        let chi = reconstruct_indicator(&ff, ob.radius, *xi, &pair, ob.reg)?;
        let truth = ball_indicator_fourier(ob.radius, xn);
        let rel = (chi - truth).norm() / truth.abs();
        let green = green_identity_surface(ob.radius, &pair);
        let green_rel = (green + 0.5 * xn * xn * truth).norm() / (0.5 * xn * xn * truth).abs();
        worst = worst.max(rel);
        rows.push(vec![xn, chi.re, chi.im, truth, rel, green_rel]);
    }
    let path = ctx.path("shape.csv");
    emit_table(&["xi_norm", "chi_re", "chi_im", "truth", "rel_error", "green_rel_error"], &rows, &path)?;
    Ok(format!("reconstruct-shape: max_rel_error={worst:.3e} -> {}", files(&[&path])))
}

fn dtn(ctx: &Context, ff_path: Option<&Path>) -> Result<String> {
    let d = ctx.cfg.dtn;
    let ff = match ff_path {
        Some(_) => ctx.farfield(ff_path)?,
        None => ctx.radial_farfield(d.l.max(ctx.cfg.solver.l))?,
    };
    let from_amp = dtn_from_amplitude(&ff, d.a, d.l, d.reg)?;
    let direct = dtn_direct_matrix(&ctx.potential()?, d.a, d.l)?;
    let json_path = ctx.path("dtn.json");
    save_json(&from_amp, &json_path)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (l, (x, y)) in direct.mode_values().iter().zip(from_amp.mode_values()).enumerate() {
        let rel = (y - x).norm() / x.norm();
        worst = worst.max(rel);
        rows.push(vec![l as f64, x.re, x.im, y.re, y.im, rel]);
    }
    let path = ctx.path("dtn_modes.csv");
    emit_table(&["ell", "direct_re", "direct_im", "amplitude_re", "amplitude_im", "rel_diff"], &rows, &path)?;
    let cond = match &from_amp.provenance {
        rammscatter::dtn::DtnProvenance::FromAmplitude { conditioning, .. } => conditioning.amplification,
        rammscatter::dtn::DtnProvenance::Direct => f64::NAN,
    };
    Ok(format!(
        "dtn: max_mode_rel_diff={worst:.3e} amplification={cond:.3e} -> {}",
        files(&[&json_path, &path])
    ))
}

fn nonuniqueness(ctx: &Context, m_trunc: usize) -> Result<String> {
    let grid = TraceGrid::default();
    let res = nonuniqueness_residual(&grid, m_trunc)?;
    let c2_control = trace_residual(1.0, 2.01, &nonuniqueness_source(-1.0), &grid, m_trunc)?;
    let sign_control = trace_residual(1.0, 2.0, &nonuniqueness_source(1.0), &grid, m_trunc)?;
    let p_grid: Vec<f64> = (1..=40).map(|k| 0.25 * k as f64).collect();
    let laplace = verify_laplace_identity(&p_grid)?;
    let partial = partial_fraction_residual(&p_grid)?;

    let src = nonuniqueness_source(-1.0);
    let u1 = surface_trace(1.0, &src, &grid, m_trunc)?;
    let u2 = surface_trace(2.0, &src, &grid, m_trunc)?;
    let j = grid.n_x / 3;
    let nx = u1.x1.len();
    let rows: Vec<Vec<f64>> = u1
        .t
        .iter()
        .enumerate()
        .map(|(i, t)| vec![*t, u1.values[i * nx + j], u2.values[i * nx + j]])
        .collect();
    let trace_path = ctx.path("traces.csv");
    emit_table(&["t", "u1", "u2"], &rows, &trace_path)?;
    let svg_path = ctx.path("traces.svg");
    fs::write(&svg_path, render(&trace_figure(&load_table(&trace_path)?, u1.x1[j])?))
        .with_context(|| format!("writing {}", svg_path.display()))?;
    let report_path = ctx.path("nonuniqueness.json");
    save_json(
        &json!({
            "surface_residual": res,
            "control_c2_2.01": c2_control,
            "control_sign_flip": sign_control,
            "laplace_residual": laplace,
            "partial_fraction_residual": partial,
            "m_trunc": m_trunc,
            "grid": grid,
        }),
        &report_path,
    )?;
    let paths = files(&[&report_path, &trace_path, &svg_path]);
    if res >= 1e-8 {
        return Err(NumericalFailure(format!("surface residual {res:.3e} is not below 1e-8; see {paths}")).into());
    }
    Ok(format!(
        "nonuniqueness: residual={res:.3e} laplace={laplace:.3e} controls={c2_control:.3e},{sign_control:.3e} -> {paths}"
    ))
}

fn lift(ctx: &Context, target: &[f64; 3], radius: f64, depth: f64) -> Result<String> {
    if !(depth > 0.0) {
        bail!(GeophysicsError::InvalidArgument(format!("source depth must be positive, got {depth}")));
    }
    let green = |d: f64| Complex64::from_polar(1.0 / (4.0 * PI * d), d);
    let trace = |y: &[f64; 2]| green((y[0] * y[0] + y[1] * y[1] + depth * depth).sqrt());
    let r = lift_halfspace(trace, radius, target, &LiftOptions::default())?;
    let exact = green((target[0].powi(2) + target[1].powi(2) + (target[2] + depth).powi(2)).sqrt());
    let rel = (r.value - exact).norm() / exact.norm();
    let path = ctx.path("lift.json");
    save_json(
        &json!({
            "target": target,
            "radius": radius,
            "depth": depth,
            "value": [r.value.re, r.value.im],
            "exact": [exact.re, exact.im],
            "rel_error": rel,
            "edge_ratio": r.edge_ratio,
            "edge_flagged": r.edge_flagged,
        }),
        &path,
    )?;
    if r.edge_flagged {
        log::warn!("trace has not decayed at the aperture rim (ratio {:.3}); expect truncation bias", r.edge_ratio);
    }
    Ok(format!("lift: rel_error={rel:.3e} edge_ratio={:.3} -> {}", r.edge_ratio, files(&[&path])))
}

fn column(t: &datastore::Table, name: &str, path: &Path) -> Result<Vec<f64>> {
    t.column(name)
        .ok_or_else(|| datastore::DatastoreError::Table {
            path: path.to_path_buf(),
            msg: format!("missing column '{name}'"),
        })
        .map_err(Into::into)
}

/// `c x^p` through the first point of `(xs, ys)`.
fn guide(xs: &[f64], ys: &[f64], p: f64) -> Vec<f64> {
    let c = ys[0] / xs[0].powf(p);
    xs.iter().map(|x| c * x.powf(p)).collect()
}

/// Scales `env` to pass through `anchor[0]`.
fn anchored(env: &[f64], anchor: &[f64]) -> Vec<f64> {
    let c = anchor[0] / env[0];
    env.iter().map(|e| c * e).collect()
}

fn trace_figure(t: &datastore::Table, x1: f64) -> Result<Figure> {
    let p = Path::new("traces");
    let ts = column(t, "t", p)?;
    Ok(Figure {
        title: format!("surface traces at x1 = {x1:.4}"),
        x_label: "t".into(),
        y_label: "u(x1, 0, t)".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series::solid("c = 1", &ts, &column(t, "u1", p)?),
            Series::dashed("c = 2", &ts, &column(t, "u2", p)?),
        ],
    })
}

fn plot_table(path: &Path, kind: PlotKind, output: Option<&Path>) -> Result<String> {
    let t = load_table(path)?;
    let nonempty = |c: &[f64]| -> Result<()> {
        if c.is_empty() {
            bail!(datastore::DatastoreError::Table {
                path: path.to_path_buf(),
                msg: "table has no rows".into(),
            });
        }
        Ok(())
    };
    let fig = match kind {
        PlotKind::Stability => {
            let d = column(&t, "delta", path)?;
            nonempty(&d)?;
            let sup = column(&t, "sup_error", path)?;
            let field = column(&t, "field_error", path)?;
            let env_log = anchored(&column(&t, "envelope_log", path)?, &sup);
            let env_exp = anchored(&column(&t, "envelope_exp", path)?, &field);
            Figure {
                title: "noisy reconstruction error".into(),
                x_label: "delta".into(),
                y_label: "error".into(),
                log_x: true,
                log_y: true,
                series: vec![
                    Series::solid("sup error", &d, &sup),
                    Series::dashed("(ln|ln d|)^2/|ln d|", &d, &env_log),
                    Series::solid("exterior field", &d, &field),
                    Series::dashed("exp(-gamma N)", &d, &env_exp),
                ],
            }
        }
        PlotKind::Penetrable => {
            let ts = column(&t, "t", path)?;
            nonempty(&ts)?;
            let int = column(&t, "interior_norm", path)?;
            let amp = column(&t, "amplitude_distance", path)?;
            Figure {
                title: "penetrable limit".into(),
                x_label: "t".into(),
                y_label: "norm".into(),
                log_x: true,
                log_y: true,
                series: vec![
                    Series::solid("interior norm", &ts, &int),
                    Series::solid("amplitude distance", &ts, &amp),
                    Series::dashed("slope -1/2", &ts, &guide(&ts, &int, -0.5)),
                ],
            }
        }
        PlotKind::Ladder => {
            let th = column(&t, "theta_norm", path)?;
            nonempty(&th)?;
            let xi = column(&t, "xi_norm", path)?;
            let err = column(&t, "abs_error", path)?;
            let mut series = Vec::new();
            let mut seen: Vec<f64> = Vec::new();
            for x in &xi {
                if seen.contains(x) {
                    continue;
                }
                seen.push(*x);
                let idx: Vec<usize> = (0..xi.len()).filter(|k| xi[*k] == *x).collect();
                let a: Vec<f64> = idx.iter().map(|k| th[*k]).collect();
                let b: Vec<f64> = idx.iter().map(|k| err[*k]).collect();
                series.push(Series::solid(&format!("|xi| = {x}"), &a, &b));
                if seen.len() == 1 {
                    series.push(Series::dashed("slope -1", &a, &guide(&a, &b, -1.0)));
                }
            }
            Figure {
                title: "exact-data reconstruction".into(),
                x_label: "|theta|".into(),
                y_label: "|q_hat - q~(xi)|".into(),
                log_x: true,
                log_y: true,
                series,
            }
        }
        PlotKind::Dtn => {
            let l = column(&t, "ell", path)?;
            nonempty(&l)?;
            Figure {
                title: "Dirichlet-to-Neumann diagonal".into(),
                x_label: "degree".into(),
                y_label: "Re Lambda_l".into(),
                log_x: false,
                log_y: false,
                series: vec![
                    Series::solid("direct", &l, &column(&t, "direct_re", path)?),
                    Series::dashed("from amplitude", &l, &column(&t, "amplitude_re", path)?),
                ],
            }
        }
        PlotKind::Trace => {
            nonempty(&column(&t, "t", path)?)?;
            trace_figure(&t, f64::NAN)?
        }
    };
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| path.with_extension("svg"));
    fs::write(&out, render(&fig)).with_context(|| format!("writing {}", out.display()))?;
    Ok(format!("plot: {} series -> {}", fig.series.len(), out.display()))
}
