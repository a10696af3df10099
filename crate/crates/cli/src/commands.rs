//! Subcommand bodies: each maps the resolved config onto library calls and
//! returns a [`Payload`].

use jacobilab::avalanche::{ap_residual, pregner_bound, ApVariant, PartitionScheme};
use jacobilab::complexan::{find_adjusted, multiscale_jensen_residual, zero_count_disk, AdjustSearch};
use jacobilab::ids::{bulk_energies, holder_fit, ids_curve, theorem_gate, wegner_integral};
use jacobilab::lyapunov::estimate_l;
use jacobilab::stats::{phase_grid, seeded_offset};
use jacobilab::transfer::identity_residuals;
use jacobilab::{Complex64, Frequency, IndexInterval, ModelSpec};
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{line_plot, Cell, Payload, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Operation {
    Lyapunov,
    Ids,
    Wegner,
    Holder,
    Zeros,
    Jensen,
    Ap,
    Adjust,
    Identities,
    Gate,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::Lyapunov => "lyapunov",
            Operation::Ids => "ids",
            Operation::Wegner => "wegner",
            Operation::Holder => "holder",
            Operation::Zeros => "zeros",
            Operation::Jensen => "jensen",
            Operation::Ap => "ap",
            Operation::Adjust => "adjust",
            Operation::Identities => "identities",
            Operation::Gate => "gate",
        }
    }

    /// Config fields the operation reads, besides model and frequency.
    fn fields(self) -> &'static [&'static str] {
        match self {
            Operation::Lyapunov => &["scales", "energy_interval", "energy_count", "lyapunov_phases"],
            Operation::Ids => &["scales", "phases", "ids_energy_count"],
            Operation::Wegner => &["scales", "energy_interval", "energy_count", "eta_exponents", "phases", "eps_holder", "rho0"],
            Operation::Holder => &["holder_n", "holder_phases", "holder_etas", "holder_energies", "energy_interval", "eps_holder"],
            Operation::Zeros => &["scales", "energy_interval", "energy_count", "phases"],
            Operation::Jensen => &["block_length", "blocks", "energy_interval", "phases", "jensen_eps", "jensen_divisor"],
            Operation::Ap => &["ap_lengths", "blocks", "energy_interval", "phases", "length_exponent"],
            Operation::Adjust => &["block_length", "energy_interval", "phases", "adjusted_radius_exponent"],
            Operation::Identities => &["identity_scales", "identity_samples", "identity_tolerance"],
            Operation::Gate => &[
                "scales", "energy_interval", "energy_count", "eta_exponents", "phases", "lyapunov_n", "lyapunov_phases", "gamma",
                "eps_holder", "holder_n", "holder_phases", "holder_etas", "holder_energies", "holder_pass_fraction",
            ],
        }
    }

    pub fn inputs(self, cfg: &ExperimentConfig) -> serde_json::Value {
        let full = serde_json::to_value(cfg).expect("config serializes");
        let mut picked = serde_json::Map::new();
        for f in ["schema_version", "model", "frequency", "diophantine_c", "diophantine_alpha", "certify_up_to", "seed"]
            .iter()
            .chain(self.fields())
        {
            picked.insert(f.to_string(), full[f].clone());
        }
        serde_json::Value::Object(picked)
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: ModelSpec,
    omega: Frequency,
    frequency_error: Option<String>,
    seed: u64,
}

fn err_text<T, E: std::fmt::Display>(r: &Result<T, E>) -> Cell {
    match r {
        Ok(_) => Cell::Text(String::new()),
        Err(e) => Cell::Text(e.to_string()),
    }
}

/// Radius `r0 = exp(−(log l)²)` of the adjusted disks.
fn adjusted_r0(l: usize) -> f64 {
    (-(l as f64).ln().powi(2)).exp()
}

/// One spectrum-sampled energy in the configured window.
fn spectrum_energy(ctx: &Ctx, n: usize) -> f64 {
    bulk_energies(&ctx.model, &ctx.omega, n, seeded_offset(ctx.seed), 1, ctx.cfg.energy_interval)
        .ok()
        .and_then(|v| v.first().copied())
        .unwrap_or_else(|| 0.5 * (ctx.cfg.energy_interval.0 + ctx.cfg.energy_interval.1))
}

pub fn run(op: Operation, cfg: &ExperimentConfig) -> anyhow::Result<Payload> {
    let (omega, frequency_error) = cfg.frequency();
    let ctx = Ctx { cfg, model: cfg.model_spec()?, omega, frequency_error, seed: cfg.seed };
    let mut payload = match op {
        Operation::Lyapunov => lyapunov(&ctx),
        Operation::Ids => ids(&ctx),
        Operation::Wegner => wegner(&ctx),
        Operation::Holder => holder(&ctx),
        Operation::Zeros => zeros(&ctx),
        Operation::Jensen => jensen(&ctx),
        Operation::Ap => ap(&ctx),
        Operation::Adjust => adjust(&ctx),
        Operation::Identities => identities(&ctx),
        Operation::Gate => gate(&ctx)?,
    };
    if let serde_json::Value::Null = payload.report {
        payload.report = json!({});
    }
    if let (Some(obj), Some(err)) = (payload.report.as_object_mut(), &ctx.frequency_error) {
        obj.insert("frequency_error".into(), err.clone().into());
    }
    let errors = payload.column("error").map_or(0, |c| payload.rows.iter().filter(|r| r[c] != Cell::Text(String::new())).count());
    if let Some(obj) = payload.report.as_object_mut() {
        obj.insert("row_errors".into(), errors.into());
        obj.insert("p".into(), ctx.model.p().into());
        obj.insert("n_b".into(), ctx.model.n_b().into());
        obj.insert("d0".into(), ctx.model.d0().into());
    }
    Ok(payload)
}

fn lyapunov(ctx: &Ctx) -> Payload {
    let mut p = Payload::new(&["N", "E", "L", "L_a", "D", "std_error", "samples", "seed", "error"]);
    for &n in &ctx.cfg.scales {
        for e in ctx.cfg.energies() {
            let r = estimate_l(&ctx.model, 0.0, &ctx.omega, Complex64::new(e, 0.0), n, ctx.cfg.lyapunov_phases, ctx.seed);
            let est = r.as_ref().ok();
            p.push(vec![
                n.into(),
                e.into(),
                est.map(|v| v.l).into(),
                est.map(|v| v.l_a).into(),
                est.map(|v| v.d).into(),
                est.map(|v| v.std_error).into(),
                ctx.cfg.lyapunov_phases.into(),
                ctx.seed.into(),
                err_text(&r),
            ]);
        }
    }
    p
}

fn ids(ctx: &Ctx) -> Payload {
    let mut p = Payload::new(&["N", "E", "ids", "std_error", "samples", "seed", "error"]);
    let r = ctx.model.spectral_bound();
    let k = ctx.cfg.ids_energy_count.max(2);
    let energies: Vec<f64> = (0..k).map(|i| -r + 2.0 * r * i as f64 / (k - 1) as f64).collect();
    for &n in &ctx.cfg.scales {
        match ids_curve(&ctx.model, &ctx.omega, n, &energies, ctx.cfg.phases, ctx.seed) {
            Ok(c) => {
                for i in 0..c.energies.len() {
                    p.push(vec![n.into(), c.energies[i].into(), c.values[i].into(), c.std_errors[i].into(), c.samples.into(), ctx.seed.into(), "".into()]);
                }
            }
            Err(e) => p.push(vec![n.into(), None::<f64>.into(), None::<f64>.into(), None::<f64>.into(), ctx.cfg.phases.into(), ctx.seed.into(), e.to_string().into()]),
        }
    }
    p
}

fn wegner(ctx: &Ctx) -> Payload {
    let mut p = Payload::new(&[
        "N", "E", "eta", "integral", "std_error", "bound", "pass", "K_size", "pointwise_lhs", "pointwise_rhs", "pointwise_pass", "seed", "error",
    ]);
    let x = seeded_offset(ctx.seed);
    for &n in &ctx.cfg.scales {
        for &t in &ctx.cfg.eta_exponents {
            let eta = (n as f64).powf(-t);
            for e in ctx.cfg.energies() {
                let w = wegner_integral(&ctx.model, &ctx.omega, n, e, eta, ctx.cfg.phases, ctx.seed, ctx.cfg.eps_holder);
                let pw = pregner_bound(&ctx.model, x, &ctx.omega, e, eta, n, ctx.cfg.rho0);
                let (wi, pr) = (w.as_ref().ok(), pw.as_ref().ok());
                let error = match (&w, &pw) {
                    (Err(a), _) => a.to_string(),
                    (_, Err(b)) => format!("pointwise: {b}"),
                    _ => String::new(),
                };
                p.push(vec![
                    n.into(),
                    e.into(),
                    eta.into(),
                    wi.map(|v| v.integral).into(),
                    wi.map(|v| v.std_error).into(),
                    wi.map(|v| v.bound).into(),
                    wi.map(|v| v.pass).into(),
                    pr.map(|v| v.k_size).into(),
                    pr.map(|v| v.lhs_count).into(),
                    pr.map(|v| v.rhs_bound).into(),
                    pr.map(|v| v.holds()).into(),
                    ctx.seed.into(),
                    error.into(),
                ]);
            }
        }
    }
    p
}

fn holder(ctx: &Ctx) -> Payload {
    let c = ctx.cfg;
    let mut p = Payload::new(&[
        "E", "ids", "eta", "modulus", "std_error", "used", "exponent", "r_squared", "predicted_p", "exponent_vs_p", "pass", "seed", "error",
    ]);
    let candidates = bulk_energies(&ctx.model, &ctx.omega, c.holder_n, seeded_offset(ctx.seed), c.holder_energies, c.energy_interval).unwrap_or_default();
    let curve = match ids_curve(&ctx.model, &ctx.omega, c.holder_n, &candidates, c.holder_phases, ctx.seed) {
        Ok(curve) => curve,
        Err(e) => {
            p.report = json!({ "error": e.to_string() });
            return p;
        }
    };
    let mut fits = 0;
    let mut passes = 0;
    for (e, v) in curve.energies.iter().zip(&curve.values) {
        if !(0.2..=0.8).contains(v) {
            continue;
        }
        fits += 1;
        let r = holder_fit(&ctx.model, &ctx.omega, c.holder_n, *e, &c.holder_etas, c.holder_phases, ctx.seed, c.eps_holder);
        match &r {
            Ok(f) => {
                let pass = f.exponent >= f.predicted_p - f.eps_holder && f.r_squared >= 0.9;
                passes += pass as usize;
                for i in 0..f.eta_grid.len() {
                    p.push(vec![
                        (*e).into(),
                        (*v).into(),
                        f.eta_grid[i].into(),
                        f.moduli[i].into(),
                        f.std_errors[i].into(),
                        f.used[i].into(),
                        f.exponent.into(),
                        f.r_squared.into(),
                        f.predicted_p.into(),
                        f.exponent_vs_p.into(),
                        pass.into(),
                        ctx.seed.into(),
                        "".into(),
                    ]);
                }
            }
            Err(err) => {
                let mut row: Vec<Cell> = vec![(*e).into(), (*v).into()];
                row.extend((0..8).map(|_| Cell::Text(String::new())));
                row.extend([false.into(), ctx.seed.into(), err.to_string().into()]);
                p.push(row);
            }
        }
    }
    p.report = json!({ "fits": fits, "passing_fits": passes });
    p
}

fn zeros(ctx: &Ctx) -> Payload {
    let mut p = Payload::new(&["N", "E", "x0", "radius", "count", "bound", "pass", "nodes", "seed", "error"]);
    let xs = phase_grid(ctx.cfg.phases, ctx.seed);
    for &n in &ctx.cfg.scales {
        let lam = IndexInterval::first(n).expect("scale ≥ 2");
        for e in ctx.cfg.energies() {
            let rows: Vec<Vec<Cell>> = xs
                .par_iter()
                .map(|&x0| {
                    let r = zero_count_disk(&ctx.model, &ctx.omega, Complex64::new(e, 0.0), lam, x0, 1.0 / n as f64);
                    let z = r.as_ref().ok();
                    let bound = (n as f64).ln().powi(3);
                    vec![
                        n.into(),
                        e.into(),
                        x0.into(),
                        (1.0 / n as f64).into(),
                        z.map(|v| v.winding.count).into(),
                        bound.into(),
                        z.map(|v| v.winding.count as f64 <= bound).into(),
                        z.map(|v| v.winding.nodes_used).into(),
                        ctx.seed.into(),
                        err_text(&r),
                    ]
                })
                .collect();
            rows.into_iter().for_each(|r| p.push(r));
        }
    }
    p
}

fn jensen(ctx: &Ctx) -> Payload {
    let (l, m) = (ctx.cfg.block_length, ctx.cfg.blocks);
    let mut p = Payload::new(&["E", "x0", "start", "l", "m", "radius", "residual", "seed", "error"]);
    let e = spectrum_energy(ctx, 4 * l * m);
    let r = adjusted_r0(l);
    let ec = Complex64::new(e, 0.0);
    let rows: Vec<Vec<Cell>> = phase_grid(ctx.cfg.phases, ctx.seed)
        .par_iter()
        .map(|&x0| {
            let start = find_adjusted(&ctx.model, &ctx.omega, ec, x0, r, &AdjustSearch::desk_scale(l, 0));
            let res = start.clone().and_then(|s| {
                let scheme = PartitionScheme::uniform(s, m, l)?;
                multiscale_jensen_residual(&ctx.model, &ctx.omega, ec, &scheme.parts, x0, r, ctx.cfg.jensen_eps, ctx.cfg.jensen_divisor)
            });
            vec![
                e.into(),
                x0.into(),
                start.as_ref().ok().copied().into(),
                l.into(),
                m.into(),
                r.into(),
                res.as_ref().ok().copied().into(),
                ctx.seed.into(),
                err_text(&res),
            ]
        })
        .collect();
    rows.into_iter().for_each(|r| p.push(r));
    p
}

fn ap(ctx: &Ctx) -> Payload {
    let m = ctx.cfg.blocks;
    let mut p = Payload::new(&["l", "m", "E", "x", "variant", "residual", "seed", "error"]);
    let e = spectrum_energy(ctx, 400);
    let xs = phase_grid(ctx.cfg.phases, ctx.seed);
    let mut medians = serde_json::Map::new();
    for &l in &ctx.cfg.ap_lengths {
        for variant in [ApVariant::Determinant, ApVariant::Monodromy] {
            let name = match variant {
                ApVariant::Determinant => "determinant",
                ApVariant::Monodromy => "monodromy",
            };
            let results: Vec<jacobilab::Result<f64>> = xs
                .par_iter()
                .map(|&x| {
                    let scheme = PartitionScheme::uniform(0, m, l)?;
                    ap_residual(&ctx.model, Complex64::new(x, 0.0), &ctx.omega, Complex64::new(e, 0.0), &scheme, variant)
                })
                .collect();
            let ok: Vec<f64> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
            medians.insert(format!("{name}_l{l}"), jacobilab::stats::median(&ok).into());
            for (x, r) in xs.iter().zip(&results) {
                p.push(vec![l.into(), m.into(), e.into(), (*x).into(), name.into(), r.as_ref().ok().copied().into(), ctx.seed.into(), err_text(r)]);
            }
        }
    }
    p.report = json!({ "medians": medians });
    p
}

fn adjust(ctx: &Ctx) -> Payload {
    let l = ctx.cfg.block_length;
    let mut p = Payload::new(&["E", "x0", "left", "right", "length", "radius", "count", "bound", "pass", "seed", "error"]);
    let e = spectrum_energy(ctx, 4 * l * l);
    let ec = Complex64::new(e, 0.0);
    let r0 = adjusted_r0(l);
    let radius = r0 * (-(l as f64).ln().powf(ctx.cfg.adjusted_radius_exponent)).exp();
    let bound = 2 * ctx.model.d0();
    let rows: Vec<Vec<Cell>> = phase_grid(ctx.cfg.phases, ctx.seed)
        .par_iter()
        .map(|&x0| {
            let ends = find_adjusted(&ctx.model, &ctx.omega, ec, x0, r0, &AdjustSearch::desk_scale(l, 0)).and_then(|a| {
                let b = find_adjusted(&ctx.model, &ctx.omega, ec, x0, r0, &AdjustSearch::desk_scale(l, (l * l) as i64))?;
                Ok((a, b))
            });
            let count = ends.clone().and_then(|(a, b)| {
                let lam = IndexInterval::new(a, b - 1)?;
                zero_count_disk(&ctx.model, &ctx.omega, ec, lam, x0, radius)
            });
            let c = count.as_ref().ok().map(|z| z.winding.count);
            let ends = ends.ok();
            let error = match &count {
                Err(e) => e.to_string(),
                Ok(_) => String::new(),
            };
            vec![
                e.into(),
                x0.into(),
                ends.map(|v| v.0).into(),
                ends.map(|v| v.1).into(),
                ends.map(|v| v.1 - v.0).into(),
                radius.into(),
                c.into(),
                bound.into(),
                c.map(|v| v <= bound as i64).into(),
                ctx.seed.into(),
                error.into(),
            ]
        })
        .collect();
    rows.into_iter().for_each(|r| p.push(r));
    p
}

fn identities(ctx: &Ctx) -> Payload {
    let tol = ctx.cfg.identity_tolerance;
    let mut p = Payload::new(&["N", "x", "E", "mu_ma", "ma_fa", "ma_fa_phase", "det", "max", "pass", "seed"]);
    let spread = ctx.model.spectral_bound();
    for (i, &n) in ctx.cfg.identity_scales.iter().enumerate() {
        let lam = IndexInterval::first(n).expect("scale ≥ 1");
        let salt = ctx.seed.wrapping_add(1000 * i as u64);
        let xs = phase_grid(ctx.cfg.identity_samples, salt);
        let es = phase_grid(ctx.cfg.identity_samples, salt.wrapping_add(1));
        // decorrelate the two grids
        let samples: Vec<(f64, f64)> = xs.iter().zip(es.iter().rev()).map(|(x, u)| (*x, spread * (2.0 * u - 1.0))).collect();
        let rows: Vec<Vec<Cell>> = samples
            .par_iter()
            .map(|&(x, e)| {
                let r = identity_residuals(&ctx.model, Complex64::new(x, 0.0), &ctx.omega, Complex64::new(e, 0.0), lam);
                let max = [r.mu_ma.unwrap_or(0.0), r.ma_fa, r.ma_fa_phase, r.det].into_iter().fold(0.0, f64::max);
                vec![n.into(), x.into(), e.into(), r.mu_ma.into(), r.ma_fa.into(), r.ma_fa_phase.into(), r.det.into(), max.into(), (max < tol).into(), ctx.seed.into()]
            })
            .collect();
        rows.into_iter().for_each(|r| p.push(r));
    }
    p
}

fn gate(ctx: &Ctx) -> anyhow::Result<Payload> {
    let gc = ctx.cfg.gate_config()?;
    let report = theorem_gate(&gc);
    let mut p = Payload::new(&["stage", "N", "E", "eta", "value", "bound", "pass", "detail"]);
    let blank = || Cell::Text(String::new());
    for row in &report.lyapunov {
        p.push(vec!["lyapunov".into(), gc.lyapunov_n.into(), row.e.into(), blank(), row.l.into(), gc.gamma.into(), row.above_floor.into(), format!("stderr {:?}", row.std_error).into()]);
    }
    for row in &report.wegner {
        match &row.result {
            Ok(w) => p.push(vec!["wegner".into(), row.n.into(), row.e.into(), row.eta.into(), w.integral.into(), w.bound.into(), w.pass.into(), blank()]),
            Err(e) => p.push(vec!["wegner".into(), row.n.into(), row.e.into(), row.eta.into(), blank(), blank(), false.into(), e.to_string().into()]),
        }
    }
    for row in &report.holder {
        match &row.result {
            Ok(f) => p.push(vec![
                "holder".into(),
                gc.holder_n.into(),
                row.e.into(),
                blank(),
                f.exponent.into(),
                (f.predicted_p - f.eps_holder).into(),
                row.pass.into(),
                format!("r2 {:?}", f.r_squared).into(),
            ]),
            Err(e) => p.push(vec!["holder".into(), gc.holder_n.into(), row.e.into(), blank(), blank(), blank(), false.into(), e.to_string().into()]),
        }
    }
    p.push(vec![
        "summary".into(),
        blank(),
        blank(),
        blank(),
        report.holder_fraction.into(),
        gc.holder_pass_fraction.into(),
        report.passed.into(),
        if report.hypothesis_violated { "hypothesis violated" } else { "" }.into(),
    ]);
    p.hypothesis_violated = report.hypothesis_violated;
    p.report = serde_json::to_value(&report)?;
    Ok(p)
}

/// SVG documents derived from a payload: `(file stem, document)`.
pub fn plots(op: Operation, p: &Payload) -> Vec<(String, String)> {
    let col = |n: &str| p.column(n);
    let num = |row: &[Cell], c: Option<usize>| c.and_then(|c| row[c].as_f64());
    let group = |key: &str, x: &str, y: &str| -> Vec<Series> {
        let (k, xc, yc) = (col(key), col(x), col(y));
        let mut out: Vec<Series> = Vec::new();
        for row in &p.rows {
            let (Some(kv), Some(xv), Some(yv)) = (num(row, k), num(row, xc), num(row, yc)) else { continue };
            let label = format!("{key} = {kv:.6}");
            match out.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((xv, yv)),
                None => out.push(Series { label, points: vec![(xv, yv)] }),
            }
        }
        out
    };
    match op {
        Operation::Ids => vec![("ids_staircase".into(), line_plot("Integrated density of states", "E", "IDS", &group("N", "E", "ids"), false, true))],
        Operation::Holder => vec![(
            "holder_modulus".into(),
            line_plot("Modulus of continuity", "eta", "N(E+eta) - N(E-eta)", &group("E", "eta", "modulus"), true, false),
        )],
        Operation::Gate => {
            let Some(report) = p.report.get("holder").and_then(|h| h.as_array()) else { return Vec::new() };
            let series: Vec<Series> = report
                .iter()
                .filter_map(|row| {
                    let fit = row.get("result")?.get("Ok")?;
                    let etas: Vec<f64> = serde_json::from_value(fit.get("eta_grid")?.clone()).ok()?;
                    let moduli: Vec<f64> = serde_json::from_value(fit.get("moduli")?.clone()).ok()?;
                    Some(Series { label: format!("E = {:.6}", row.get("e")?.as_f64()?), points: etas.into_iter().zip(moduli).collect() })
                })
                .collect();
            vec![("gate_modulus".into(), line_plot("Modulus of continuity", "eta", "N(E+eta) - N(E-eta)", &series, true, false))]
        }
        _ => Vec::new(),
    }
}
