//! One function per subcommand; each resolves its settings, computes, and
//! returns a finished table.

use anyhow::{anyhow, bail, Result};
use ising_diag::probe::{exact_scans, radii_grid, smoothness_probe};
use ising_diag::toeplitz::ToeplitzSymbol;
use ising_diag::{
    fredholm_det, k_from_temperature, magnetization_squared, radial_scan, s_n_form, sweep, Chi,
    ChiOptions, Coupling, Flag, Form, Proxy, RadialScan, Route, Spec,
};

use crate::args::{ComplexArg, EpsArg, RadiiArg};
use crate::config::Config;
use crate::table::{Row, Table};
use crate::{exclusive, Command, CouplingArgs, QuadArgs, RouteArgs, Status};

pub fn execute(cmd: &Command, cfg: &Config) -> Result<(Table, Status)> {
    match cmd {
        Command::Correlation { coupling, n } => correlation(cfg, coupling, *n),
        Command::GcboCheck {
            coupling,
            n_max,
            tol,
        } => gcbo_check(cfg, coupling, *n_max, *tol),
        Command::Chi { coupling, route } => chi(cfg, coupling, route),
        Command::Sn {
            kappa,
            n,
            form,
            quad,
        } => sn(cfg, *kappa, *n, form.clone(), quad),
        Command::BoundaryScan {
            eps,
            n,
            ell,
            radii,
            proxy,
            quad,
        } => boundary_scan(cfg, *eps, *n, *ell, *radii, proxy.clone(), quad),
        Command::Smoothness {
            eps,
            ell_max,
            radii,
            proxy,
            quad,
        } => smoothness(cfg, *eps, *ell_max, *radii, proxy.clone(), quad),
        Command::Sweep { grid, route } => sweep_cmd(cfg, grid.clone(), route),
    }
}

fn flags_cell(flags: &[Flag]) -> String {
    flags
        .iter()
        .map(|f| f.as_str())
        .collect::<Vec<_>>()
        .join(";")
}

fn status_of(flags: &[Flag]) -> Status {
    if flags.iter().any(|f| f.is_convergence()) {
        Status::Flagged
    } else {
        Status::Ok
    }
}

/// Flag values take precedence as a pair over the file, so `--beta-j` on
/// the command line is not rejected because the file sets `k`.
fn resolve_coupling(cfg: &Config, args: &CouplingArgs) -> Result<Coupling> {
    let (k, beta_j) = if args.k.is_some() || args.beta_j.is_some() {
        (args.k, args.beta_j)
    } else {
        (
            cfg.pick::<ComplexArg>(None, "k")?,
            cfg.pick::<f64>(None, "beta-j")?,
        )
    };
    match (k, beta_j) {
        (Some(k), None) => Ok(Coupling::new(k.0)?),
        (None, Some(bj)) => Ok(k_from_temperature(bj)?),
        (Some(_), Some(_)) => bail!("give either k or beta-j, not both"),
        (None, None) => bail!("missing required value --k or --beta-j (flag or config key)"),
    }
}

fn correlation(cfg: &Config, coupling: &CouplingArgs, n: Option<usize>) -> Result<(Table, Status)> {
    let k = resolve_coupling(cfg, coupling)?;
    let n: usize = cfg.require(n, "n")?;
    let m2 = magnetization_squared(&k);
    let r = ToeplitzSymbol::new(&k, n).correlation(n);
    let mut t = Table::new(&[
        "k_re",
        "k_im",
        "n",
        "d_re",
        "d_im",
        "m2_re",
        "m2_im",
        "deviation_re",
        "deviation_im",
        "cond_estimate",
        "flags",
    ]);
    t.push(
        Row::new()
            .complex(k.k())
            .cell(n)
            .complex(r.value)
            .complex(m2)
            .complex(r.value - m2)
            .cell(r.cond_estimate)
            .cell(flags_cell(&r.flags)),
    );
    Ok((t, status_of(&r.flags)))
}

fn gcbo_check(
    cfg: &Config,
    coupling: &CouplingArgs,
    n_max: Option<usize>,
    tol: Option<f64>,
) -> Result<(Table, Status)> {
    let k = resolve_coupling(cfg, coupling)?;
    let n_max: usize = cfg.pick(n_max, "n-max")?.unwrap_or(8);
    let tol: f64 = cfg.pick(tol, "tol")?.unwrap_or(1e-14);
    if n_max == 0 {
        bail!("n-max must be positive");
    }
    let m2 = magnetization_squared(&k);
    let symbol = ToeplitzSymbol::new(&k, n_max);
    let mut t = Table::new(&[
        "n",
        "d_re",
        "d_im",
        "det_re",
        "det_im",
        "m2_det_re",
        "m2_det_im",
        "rel_residual",
        "cutoff_used",
        "cond_estimate",
        "flags",
    ]);
    let mut status = Status::Ok;
    for n in 1..=n_max {
        let d = symbol.correlation(n);
        let f = fredholm_det(&k, n, tol)?;
        let rhs = m2 * f.det_value;
        let residual = (d.value - rhs).norm() / d.value.norm();
        if status_of(&d.flags) == Status::Flagged {
            status = Status::Flagged;
        }
        t.push(
            Row::new()
                .cell(n)
                .complex(d.value)
                .complex(f.det_value)
                .complex(rhs)
                .cell(residual)
                .cell(f.cutoff_used)
                .cell(d.cond_estimate)
                .cell(flags_cell(&d.flags)),
        );
    }
    Ok((t, status))
}

struct RouteSettings {
    route: Route,
    tol: f64,
    opts: ChiOptions<f64>,
}

fn resolve_route(cfg: &Config, a: &RouteArgs) -> Result<RouteSettings> {
    let route: Route = match cfg.pick::<String>(a.route.clone(), "route")? {
        Some(s) => s.parse()?,
        None => Route::Fredholm,
    };
    let tol = cfg.pick(a.tol, "tol")?.unwrap_or(1e-12);
    let d = ChiOptions::<f64>::default();
    let opts = ChiOptions {
        toeplitz_n_max: cfg
            .pick(a.toeplitz_n_max, "toeplitz-n-max")?
            .unwrap_or(d.toeplitz_n_max),
        integral_n_max: cfg
            .pick(a.integral_n_max, "integral-n-max")?
            .unwrap_or(d.integral_n_max),
        spec: match cfg.pick(a.nodes, "nodes")? {
            Some(nodes) => Spec::tensor(nodes),
            None => d.spec,
        },
    };
    Ok(RouteSettings { route, tol, opts })
}

const CHI_HEADER: &[&str] = &[
    "k_re",
    "k_im",
    "route",
    "status",
    "beta_inv_chi_d_re",
    "beta_inv_chi_d_im",
    "terms_used",
    "est_error",
    "flags",
    "message",
];

fn chi_row(r: &Chi) -> Row {
    let status = if status_of(&r.flags) == Status::Flagged {
        "flagged"
    } else {
        "ok"
    };
    Row::new()
        .complex(r.k)
        .cell(r.route.as_str())
        .cell(status)
        .complex(r.beta_inv_chi_d)
        .cell(r.terms_used)
        .cell(r.est_error)
        .cell(flags_cell(&r.flags))
        .cell("")
}

fn chi(cfg: &Config, coupling: &CouplingArgs, route: &RouteArgs) -> Result<(Table, Status)> {
    let k = resolve_coupling(cfg, coupling)?;
    let s = resolve_route(cfg, route)?;
    let r = ising_diag::chi_d_with(&k, s.tol, s.route, &s.opts)?;
    let mut t = Table::new(CHI_HEADER);
    t.push(chi_row(&r));
    Ok((t, status_of(&r.flags)))
}

/// Failed points become rows with empty values and the error text. Any
/// domain error makes the whole sweep exit 1; otherwise a convergence
/// failure or flag gives 2.
fn sweep_cmd(
    cfg: &Config,
    grid: Option<crate::args::GridArg>,
    route: &RouteArgs,
) -> Result<(Table, Status)> {
    let grid = cfg.require(grid, "grid")?;
    let s = resolve_route(cfg, route)?;
    let rows = sweep(&grid.0, s.route, s.tol, &s.opts);
    let mut t = Table::new(CHI_HEADER);
    let mut flagged = false;
    let mut domain: Option<String> = None;
    for row in &rows {
        match &row.outcome {
            Ok(r) => {
                flagged |= status_of(&r.flags) == Status::Flagged;
                t.push(chi_row(r));
            }
            Err(e) => {
                let tag = if e.is_convergence() {
                    flagged = true;
                    "convergence_error"
                } else {
                    domain.get_or_insert_with(|| format!("k = {}: {e}", row.k));
                    "domain_error"
                };
                t.push(
                    Row::new()
                        .complex(row.k)
                        .cell(s.route.as_str())
                        .cell(tag)
                        .cell("")
                        .cell("")
                        .cell("")
                        .cell("")
                        .cell("")
                        .cell(e.to_string()),
                );
            }
        }
    }
    if let Some(msg) = domain {
        // the table still goes out; the first bad point is reported
        eprintln!("error: {msg}");
        return Ok((t, Status::DomainError));
    }
    Ok((t, if flagged { Status::Flagged } else { Status::Ok }))
}

fn resolve_spec(cfg: &Config, q: &QuadArgs, default_nodes: usize) -> Result<Spec> {
    let nodes = cfg.pick(q.nodes, "nodes")?;
    let samples = cfg.pick(q.mc_samples, "mc-samples")?;
    // a flag for one method overrides a file setting for the other
    let (nodes, samples) = match (q.nodes.is_some(), q.mc_samples.is_some()) {
        (true, false) => (nodes, None),
        (false, true) => (None, samples),
        _ => (nodes, samples),
    };
    exclusive(nodes.is_some(), samples.is_some(), "nodes and mc-samples")?;
    let mut spec = match samples {
        Some(m) => Spec::monte_carlo(m, cfg.pick(q.seed, "seed")?.unwrap_or(Spec::default().seed)),
        None => Spec::tensor(nodes.unwrap_or(default_nodes)),
    };
    if let Some(levels) = cfg.pick(q.grading, "grading")? {
        spec = spec.with_grading(levels);
    }
    if let Some(target) = cfg.pick(q.target, "target")? {
        if !(target > 0.0) {
            bail!("target must be positive");
        }
        spec.target_rel_error = target;
    }
    Ok(spec)
}

fn parse_form(s: Option<String>) -> Result<Form> {
    match s.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None | Some("sn2") | Some("vandermonde") => Ok(Form::Vandermonde),
        Some("sn1") | Some("cauchy") => Ok(Form::Cauchy),
        Some(other) => Err(anyhow!("unknown form {other:?} (expected Sn1 or Sn2)")),
    }
}

fn sn(
    cfg: &Config,
    kappa: Option<ComplexArg>,
    n: Option<usize>,
    form: Option<String>,
    quad: &QuadArgs,
) -> Result<(Table, Status)> {
    let kappa: ComplexArg = cfg.require(kappa, "kappa")?;
    let n: usize = cfg.require(n, "n")?;
    let form = parse_form(cfg.pick(form, "form")?)?;
    let spec = resolve_spec(cfg, quad, 64)?;
    let r = s_n_form(kappa.0, n, form, &spec)?;
    let mut t = Table::new(&[
        "n",
        "kappa_re",
        "kappa_im",
        "form",
        "method",
        "value_re",
        "value_im",
        "abs_error_est",
        "rel_error_est",
        "std_error",
        "flags",
    ]);
    t.push(
        Row::new()
            .cell(n)
            .complex(r.kappa)
            .cell(r.form.as_str())
            .cell(r.method.as_str())
            .complex(r.value)
            .cell(r.abs_error_est)
            .cell(r.rel_error_est)
            .opt(r.std_error)
            .cell(flags_cell(&r.flags)),
    );
    Ok((t, status_of(&r.flags)))
}

fn parse_proxy(s: Option<String>) -> Result<Proxy> {
    match s
        .as_deref()
        .map(|s| s.to_ascii_lowercase().replace('-', "_"))
        .as_deref()
    {
        None | Some("main_term") | Some("main") => Ok(Proxy::MainTerm),
        Some("exact") => Ok(Proxy::Exact),
        Some(other) => Err(anyhow!(
            "unknown proxy {other:?} (expected main_term or exact)"
        )),
    }
}

fn radii(cfg: &Config, r: Option<RadiiArg>) -> Result<(Vec<u32>, Vec<f64>)> {
    let r = cfg.pick(r, "radii")?.unwrap_or(RadiiArg { j0: 4, j1: 10 });
    Ok(((r.j0..=r.j1).collect(), radii_grid(r.j0, r.j1)))
}

fn boundary_scan(
    cfg: &Config,
    eps: Option<EpsArg>,
    n: Option<usize>,
    ell: Option<u32>,
    radii_arg: Option<RadiiArg>,
    proxy: Option<String>,
    quad: &QuadArgs,
) -> Result<(Table, Status)> {
    let eps: EpsArg = cfg.require(eps, "eps")?;
    let n: usize = cfg.require(n, "n")?;
    let ell: u32 = cfg.require(ell, "ell")?;
    let proxy = parse_proxy(cfg.pick(proxy, "proxy")?)?;
    let (js, radii) = radii(cfg, radii_arg)?;
    let spec = resolve_spec(cfg, quad, 64)?;
    let scan: RadialScan<f64> = match proxy {
        Proxy::MainTerm => radial_scan(eps.0, n, ell, &radii, &spec)?,
        Proxy::Exact => exact_scans(eps.0, n, ell, &radii, &spec)?
            .pop()
            .expect("one scan per order"),
    };
    let mut t = Table::new(&[
        "eps",
        "n",
        "ell",
        "proxy",
        "j",
        "radius",
        "value_re",
        "value_im",
        "abs_error_est",
        "fit_slope",
        "fit_intercept",
        "fit_r2",
        "fit_slope_se",
        "growth",
        "flags",
    ]);
    let eps_text = format!("{}/{}", eps.0.p, eps.0.q);
    for (i, j) in js.iter().enumerate() {
        t.push(
            Row::new()
                .cell(eps_text.as_str())
                .cell(n)
                .cell(ell)
                .cell(proxy.as_str())
                .cell(*j)
                .cell(radii[i])
                .complex(scan.values[i])
                .cell(scan.errors[i])
                .cell(scan.fit_slope)
                .cell(scan.fit_intercept)
                .cell(scan.fit_r2)
                .cell(scan.fit_slope_se)
                .cell(scan.growth.as_str())
                .cell(flags_cell(&scan.flags)),
        );
    }
    Ok((t, status_of(&scan.flags)))
}

fn smoothness(
    cfg: &Config,
    eps: Option<EpsArg>,
    ell_max: Option<u32>,
    radii_arg: Option<RadiiArg>,
    proxy: Option<String>,
    quad: &QuadArgs,
) -> Result<(Table, Status)> {
    let eps = match cfg.pick::<EpsArg>(eps, "eps")? {
        Some(e) => e.0,
        None => ising_diag::Root::new(1, 2)?,
    };
    let ell_max: u32 = cfg.pick(ell_max, "ell-max")?.unwrap_or(7);
    let proxy = parse_proxy(cfg.pick(proxy, "proxy")?)?;
    let (_, radii) = radii(cfg, radii_arg)?;
    let spec = resolve_spec(cfg, quad, 64)?;
    let report = smoothness_probe(ell_max, eps, &spec, proxy, &radii)?;
    let mut t = Table::new(&[
        "eps",
        "proxy",
        "ell",
        "growth",
        "s1_growth",
        "s1_fit_slope",
        "s1_fit_r2",
        "s2_growth",
        "s2_fit_slope",
        "s2_fit_r2",
        "flags",
    ]);
    let mut all_flags = Vec::new();
    for row in &report.rows {
        let mut flags: Vec<Flag> = Vec::new();
        for c in &row.components {
            for f in &c.flags {
                if !flags.contains(f) {
                    flags.push(*f);
                }
            }
        }
        all_flags.extend(flags.iter().copied());
        let mut r = Row::new()
            .cell(format!("{}/{}", eps.p, eps.q))
            .cell(proxy.as_str())
            .cell(row.ell)
            .cell(row.growth.as_str());
        for c in &row.components {
            r = r.cell(c.growth.as_str()).cell(c.fit_slope).cell(c.fit_r2);
        }
        t.push(r.cell(flags_cell(&flags)));
    }
    Ok((t, status_of(&all_flags)))
}
