//! Experiment runners.
//!
//! Each runner turns a validated [`Config`] into CSV rows plus an itemized
//! audit entry per row, pushing into a shared [`RunState`] so an error
//! mid-run still leaves the finished rows available for a partial flush.
//! All randomness is ChaCha-seeded from the run seed with one stream per
//! instance; reductions in the library are deterministic, so a fixed
//! config and seed reproduce every byte.

use ldev::bounds::{self, TailBudgetParams};
use ldev::covering::{self, fourier};
use ldev::entropy::Bernoulli;
use ldev::functionals::{BudgetSums, Functional};
use ldev::oracle::{self, McTail};
use ldev::variational::{self, RateQuery};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{BuiltFunctional, Config};
use crate::output::{Row, RunState};
use crate::CliError;

pub fn run_experiment(cfg: &Config, state: &mut RunState) -> Result<(), CliError> {
    match cfg.experiment.as_str() {
        "rate" => run_rate(cfg, state),
        "sandwich" => run_sandwich(cfg, state),
        "free-energy" | "ergm" => run_free_energy(cfg, state),
        "net-audit" => run_net_audit(cfg, state),
        "triangles" => run_triangles(cfg, state),
        "ap3" => run_ap3(cfg, state),
        other => Err(CliError::Config(format!("unknown experiment {other:?}"))),
    }
}

fn state_budget(cfg: &Config) -> u64 {
    1u64 << cfg.run.budget_states
}

fn enumerable(n: usize, cfg: &Config) -> bool {
    n < 63 && (n as u32) <= cfg.run.budget_states
}

fn bern(p: f64) -> Result<Bernoulli, CliError> {
    Bernoulli::new(p).map_err(CliError::from)
}

/// Threshold axis of the config, as per-coordinate levels. Ratios need the
/// closed-form mean, so resolution happens per functional.
fn thresholds(cfg: &Config, f: &dyn Functional, p: Bernoulli) -> Result<Vec<f64>, CliError> {
    if !cfg.grid.u.is_empty() {
        let mean = f.mean_under(p).ok_or_else(|| {
            CliError::Config(format!(
                "{} has no closed-form mean; use grid.t instead of grid.u",
                f.name()
            ))
        })?;
        Ok(cfg.grid.u.iter().map(|u| u * mean / f.dim() as f64).collect())
    } else {
        Ok(cfg.grid.t.clone())
    }
}

/// Product tilt from a solver optimizer, pulled strictly inside (0,1) so
/// the likelihood ratio stays finite.
fn tilt_point(optimizer: &[f64]) -> Vec<f64> {
    optimizer.iter().map(|&v| v.clamp(1e-6, 1.0 - 1e-6)).collect()
}

/// Log estimate and log-scale standard error of a Monte Carlo tail,
/// when the estimate is positive.
fn mc_log(mc: &McTail) -> (Option<f64>, Option<f64>) {
    if mc.estimate > 0.0 {
        (Some(mc.estimate.ln()), Some(mc.std_error / mc.estimate))
    } else {
        (None, None)
    }
}

/// Tightest valid gradient-net size for the budget terms: the cube
/// quantization bound always applies, and the structured constructions
/// (spectral for subgraph counts, frequency rounding for progressions)
/// take over when they are smaller.
fn budget_net_log(
    built: &BuiltFunctional,
    sums: &BudgetSums,
    resolution: f64,
) -> Result<(f64, Value), CliError> {
    let cube = covering::cube_net_size_log(sums, resolution)?;
    let family = match built {
        BuiltFunctional::Edge(f) => {
            let tau = covering::edge_net_tau(
                f.graph().edge_count(),
                f.graph().vertex_count(),
                resolution,
            );
            if tau > 0.0 && tau.is_finite() {
                covering::spectral_net_size_log(tau, f.n_vertices())
            } else {
                f64::INFINITY
            }
        }
        BuiltFunctional::Ap3(f) => {
            let n = f.dim();
            let gamma = fourier::DEFAULT_C_QUANT * resolution * resolution * (n as f64).sqrt();
            fourier::fourier_net_size_log(n, gamma)
        }
        _ => f64::INFINITY,
    };
    let chosen = cube.min(family);
    let audit = json!({
        "resolution": resolution,
        "cube_log": cube,
        "family_log": if family.is_finite() { Value::from(family) } else { Value::Null },
        "chosen_log": chosen,
    });
    Ok((chosen, audit))
}

fn planted_upper(
    built: &BuiltFunctional,
    p: Bernoulli,
    t: f64,
) -> Option<variational::PlantedBound> {
    match built {
        BuiltFunctional::Edge(f) => variational::planted_clique_upper(f, p, t).ok(),
        BuiltFunctional::Ap3(f) => variational::planted_interval_upper_ap3(f.dim(), p, t).ok(),
        _ => None,
    }
}

fn run_rate(cfg: &Config, state: &mut RunState) -> Result<(), CliError> {
    let opts = cfg.solver.to_options(cfg.run.seed);
    for &p_val in &cfg.grid.p {
        let p = bern(p_val)?;
        let built = cfg.functional.build(None)?;
        let f = built.as_dyn();
        let n = f.dim();
        for t in thresholds(cfg, f, p)? {
            let q = RateQuery::new(f, p, t)?;
            let planted = planted_upper(&built, p, t);
            let mut local = opts.clone();
            if let Some(pl) = &planted {
                local.extra_starts.push(pl.point.clone());
            }
            let solve = variational::solve_rate(&q, &local)?;
            let dual = if enumerable(n, cfg) {
                Some(variational::dual_rate_lower_bound(f, p, t, state_budget(cfg))?)
            } else {
                None
            };
            let mut row = Row::new("rate", n, cfg.run.seed);
            row.p = Some(p_val);
            row.t = Some(t);
            row.phi_hat = solve.value.is_finite().then_some(solve.value);
            row.lower = dual.as_ref().map(|d| d.value);
            row.upper = planted.as_ref().map(|pl| pl.value);
            state.rows.push(row);
            state.audit_entries.push(json!({
                "kind": "rate",
                "functional": f.name(),
                "n": n,
                "p": p_val,
                "t": t,
                "solve": solve,
                "dual": dual,
                "planted": planted,
            }));
        }
    }
    Ok(())
}

fn run_sandwich(cfg: &Config, state: &mut RunState) -> Result<(), CliError> {
    let opts = cfg.solver.to_options(cfg.run.seed);
    let budget = state_budget(cfg);
    for &p_val in &cfg.grid.p {
        let p = bern(p_val)?;
        let built = cfg.functional.build(None)?;
        let f = built.as_dyn();
        let n = f.dim();
        if !enumerable(n, cfg) {
            return Err(CliError::Budget(format!(
                "the sandwich experiment checks against exact enumeration; \
                 {n} coordinates exceed the 2^{} state budget",
                cfg.run.budget_states
            )));
        }
        let sums = f.deriv_bounds().sums(n);
        for t in thresholds(cfg, f, p)? {
            let (eps0, delta0) = bounds::tail_lower_slack(&sums, p);
            let delta = cfg.budget.delta_frac * t;
            if !(delta > 0.0) {
                return Err(CliError::Config(format!(
                    "threshold {t} gives a nonpositive budget window {delta}"
                )));
            }

            // feasible witness above the window: certifies the interval's
            // lower end
            let q_hi = RateQuery::new(f, p, t + delta0)?;
            let mut local = opts.clone();
            if let Some(pl) = planted_upper(&built, p, t + delta0) {
                local.extra_starts.push(pl.point);
            }
            let s_hi = variational::solve_rate(&q_hi, &local)?;
            let phi_upper = if matches!(s_hi.status, variational::SolveStatus::Infeasible) {
                f64::INFINITY
            } else {
                s_hi.value
            };

            // certified lower rate below the window: the interval's upper end
            let t_lo = (t - delta).max(0.0);
            let dual = variational::dual_rate_lower_bound(f, p, t_lo, budget)?;

            let q_at = RateQuery::new(f, p, t)?;
            let s_at = variational::solve_rate(&q_at, &opts)?;

            // rate level driving the budget: largest certified finite rate
            let k_rate = [phi_upper, s_at.value, dual.value]
                .into_iter()
                .find(|v| v.is_finite())
                .map(|v| (v / n as f64).max(0.0))
                .unwrap_or(0.0);
            let params = TailBudgetParams::new(p, t, delta, cfg.budget.epsilon, k_rate)?;
            let (net_log, net_audit) = match params.net_resolution() {
                Some(r) => budget_net_log(&built, &sums, r)?,
                None => (0.0, Value::Null),
            };
            let sandwich = bounds::tail_sandwich(&params, &sums, net_log, dual.value, phi_upper)
                .map_err(|e| match e {
                    ldev::Error::Infeasible(msg) => CliError::Certificate(msg),
                    other => CliError::from(other),
                })?;
            let exact = oracle::enumerate_tail(f, p, t, budget)?;

            let mut row = Row::new("sandwich", n, cfg.run.seed);
            row.p = Some(p_val);
            row.t = Some(t);
            row.phi_hat = s_at.value.is_finite().then_some(s_at.value);
            row.lower = Some(sandwich.lower);
            row.upper = Some(sandwich.upper);
            row.exact_or_mc = Some(exact.log_prob);
            state.rows.push(row);
            state.audit_entries.push(json!({
                "kind": "sandwich",
                "functional": f.name(),
                "n": n,
                "p": p_val,
                "t": t,
                "eps0": eps0,
                "delta0": delta0,
                "solve_at_t": s_at,
                "solve_above": s_hi,
                "dual_below": dual,
                "net": net_audit,
                "sandwich": sandwich,
                "exact": exact,
                "contained": exact.log_prob >= sandwich.lower
                    && exact.log_prob <= sandwich.upper,
            }));
        }
    }
    Ok(())
}

fn run_free_energy(cfg: &Config, state: &mut RunState) -> Result<(), CliError> {
    let budget = state_budget(cfg);
    for &beta in &cfg.grid.beta {
        let built = cfg.functional.build(Some(beta))?;
        let f = built.as_dyn();
        let n = f.dim();
        if !enumerable(n, cfg) {
            return Err(CliError::Budget(format!(
                "free-energy experiments enumerate all states; {n} coordinates \
                 exceed the 2^{} state budget",
                cfg.run.budget_states
            )));
        }
        let sums = f.deriv_bounds().sums(n);
        let exact = oracle::enumerate_free_energy(f, budget)?;

        // constant profiles seed the solver with the symmetric family,
        // which contains the optimum for ferromagnetic couplings
        let mut opts = cfg.solver.to_options(cfg.run.seed);
        for i in 1..20 {
            opts.extra_starts.push(vec![0.05 * i as f64; n]);
        }
        let mf = variational::solve_mean_field(f, &opts)?;

        let (net_log, net_audit) = budget_net_log(&built, &sums, cfg.budget.epsilon)?;
        let fe = bounds::free_energy_upper_terms(&sums, cfg.budget.epsilon, net_log);
        let lower = mf.value - fe.lower_slack;
        let upper = mf.value + fe.upper_total;

        let mut row = Row::new(&cfg.experiment, n, cfg.run.seed);
        row.t = Some(beta);
        row.phi_hat = Some(mf.value);
        row.lower = Some(lower);
        row.upper = Some(upper);
        row.exact_or_mc = Some(exact);
        state.rows.push(row);

        let mut entry = json!({
            "kind": cfg.experiment,
            "functional": f.name(),
            "n": n,
            "beta": beta,
            "mean_field": mf,
            "exact_free_energy": exact,
            "budget": fe,
            "net": net_audit,
            "lower_holds": exact >= lower - 1e-9,
            "upper_holds": exact <= upper + 1e-9,
        });
        if let BuiltFunctional::Ergm(h) = &built {
            let cert = covering::ergm_product_net(h, cfg.budget.epsilon, &mf.optimizer)?;
            entry["product_net"] = json!({
                "per_term": cert.per_term,
                "fidelity": cert.fidelity,
                "claimed_bound": cert.claimed_bound,
                "passes": cert.passes(),
            });
        }
        state.audit_entries.push(entry);
    }
    Ok(())
}

fn run_net_audit(cfg: &Config, state: &mut RunState) -> Result<(), CliError> {
    let net = &cfg.net;
    let mut stream: u64 = 0;
    match net.kind.as_str() {
        "spectral" => {
            for &nv in &net.n {
                for &tau in &net.tau {
                    for _ in 0..net.count {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
                        rng.set_stream(stream);
                        stream += 1;
                        let m = DMatrix::from_fn(nv, nv, |_, _| rng.random::<f64>());
                        let cert = covering::spectral_round(&m, tau)?;
                        let report = cert.report();
                        push_net_row(state, cfg, nv, tau, &report, stream - 1);
                    }
                }
            }
        }
        "gradient" => {
            for &nv in &net.n {
                let f = ldev::functionals::graphs::EdgeFunctional::new(
                    ldev::functionals::graphs::Graph::triangle(),
                    nv,
                )
                .map_err(CliError::from)?;
                for &eps in &net.epsilon {
                    for _ in 0..net.count {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
                        rng.set_stream(stream);
                        stream += 1;
                        let x: Vec<f64> = (0..f.dim()).map(|_| rng.random::<f64>()).collect();
                        let cert = covering::subgraph_gradient_net(&f, eps, &x)?;
                        let report = cert.report();
                        push_net_row(state, cfg, f.dim(), eps, &report, stream - 1);
                    }
                }
            }
        }
        "fourier" => {
            for &nv in &net.n {
                let f = ldev::functionals::ap3::Ap3::new(nv);
                for &eps in &net.epsilon {
                    for _ in 0..net.count {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
                        rng.set_stream(stream);
                        stream += 1;
                        let x: Vec<f64> = (0..nv).map(|_| rng.random::<f64>()).collect();
                        let cert = fourier::fourier_round(&f, eps, &x, fourier::DEFAULT_C_QUANT)?;
                        let report = cert.report();
                        push_net_row(state, cfg, nv, eps, &report, stream - 1);
                    }
                }
            }
        }
        other => return Err(CliError::Config(format!("unknown net.kind {other:?}"))),
    }
    Ok(())
}

fn push_net_row(
    state: &mut RunState,
    cfg: &Config,
    n: usize,
    tolerance: f64,
    report: &covering::CertificateReport,
    stream: u64,
) {
    let mut row = Row::new("net-audit", n, cfg.run.seed);
    row.t = Some(tolerance);
    row.phi_hat = Some(report.size_log_bound);
    row.lower = Some(report.fidelity);
    row.upper = Some(report.claimed_bound);
    state.rows.push(row);
    state.audit_entries.push(json!({
        "kind": "net-audit",
        "net": cfg.net.kind,
        "n": n,
        "tolerance": tolerance,
        "stream": stream,
        "report": report,
        "passes": report.fidelity <= report.claimed_bound,
    }));
}

/// Shared tail-table body for the two large-instance experiments: solver
/// rate, planted upper bound, dual lower bound when enumerable, and exact
/// or importance-sampled tail probability.
#[allow(clippy::too_many_arguments)]
fn tail_row(
    cfg: &Config,
    state: &mut RunState,
    experiment: &str,
    built: &BuiltFunctional,
    p_val: f64,
    t: f64,
    overlay: Option<f64>,
) -> Result<(), CliError> {
    let p = bern(p_val)?;
    let f = built.as_dyn();
    let n = f.dim();
    let q = RateQuery::new(f, p, t)?;
    let planted = planted_upper(built, p, t);
    let mut opts = cfg.solver.to_options(cfg.run.seed);
    if let Some(pl) = &planted {
        opts.extra_starts.push(pl.point.clone());
    }
    let solve = variational::solve_rate(&q, &opts)?;

    let (dual, exact) = if enumerable(n, cfg) {
        (
            Some(variational::dual_rate_lower_bound(f, p, t, state_budget(cfg))?),
            Some(oracle::enumerate_tail(f, p, t, state_budget(cfg))?),
        )
    } else {
        (None, None)
    };
    let mc = if exact.is_none() && solve.value.is_finite() {
        let tilt = tilt_point(&solve.optimizer);
        Some(oracle::tilted_monte_carlo_tail(f, p, t, &tilt, cfg.mc.samples, cfg.run.seed)?)
    } else {
        None
    };

    let mut row = Row::new(experiment, n, cfg.run.seed);
    row.p = Some(p_val);
    row.t = Some(t);
    row.phi_hat = solve.value.is_finite().then_some(solve.value);
    row.lower = dual.as_ref().map(|d| d.value);
    row.upper = planted.as_ref().map(|pl| pl.value);
    row.lz_overlay = overlay;
    if let Some(ex) = &exact {
        row.exact_or_mc = Some(ex.log_prob);
    } else if let Some(mc) = &mc {
        let (est, se) = mc_log(mc);
        row.exact_or_mc = est;
        row.stderr = se;
    }
    state.rows.push(row);
    state.audit_entries.push(json!({
        "kind": experiment,
        "functional": f.name(),
        "n": n,
        "p": p_val,
        "t": t,
        "solve": solve,
        "planted": planted,
        "dual": dual,
        "exact": exact,
        "mc": mc,
        "lz_overlay": overlay,
    }));
    Ok(())
}

fn run_triangles(cfg: &Config, state: &mut RunState) -> Result<(), CliError> {
    for &p_val in &cfg.grid.p {
        let p = bern(p_val)?;
        let built = cfg.functional.build(None)?;
        let f = built.as_dyn();
        let mean = f.mean_under(p).ok_or_else(|| {
            CliError::Config(format!("{} has no closed-form mean", f.name()))
        })?;
        let nv = match &built {
            BuiltFunctional::Edge(ef) => ef.n_vertices(),
            _ => unreachable!("validation pinned the functional kind"),
        };
        for &delta in &cfg.grid.delta {
            let t = (1.0 + delta) * mean / f.dim() as f64;
            let overlay = cfg
                .run
                .lz_overlay
                .then(|| variational::lz_overlay(delta, nv, p));
            tail_row(cfg, state, "triangles", &built, p_val, t, overlay)?;
        }
    }
    Ok(())
}

fn run_ap3(cfg: &Config, state: &mut RunState) -> Result<(), CliError> {
    for &p_val in &cfg.grid.p {
        let p = bern(p_val)?;
        let built = cfg.functional.build(None)?;
        let f = built.as_dyn();
        for t in thresholds(cfg, f, p)? {
            tail_row(cfg, state, "ap3", &built, p_val, t, None)?;
        }
    }
    Ok(())
}
