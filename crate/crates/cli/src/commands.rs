use std::fs;
use std::path::Path;

use kelly_core::adaptive::run_adaptive;
use kelly_core::approx::{approximate, ApproxMethod};
use kelly_core::config::ENUMERATION_BUDGET;
use kelly_core::drawdown::exact::sequence_count;
use kelly_core::drawdown::{
    coin_drawdown_probability, convexity_probe, exact_probability, exact_summary, maximize_growth_constrained,
    simplex_grid, ConstrainedConfig, ConstraintKind, ConstraintSpec, Estimate, MonteCarloConfig, Scenarios,
};
use kelly_core::gamble::{independent, is_feasible, make_coin};
use kelly_core::growth::{annualized_return, log_growth, maximize_growth};
use kelly_core::market::{load_prices, to_returns};
use kelly_core::{Execution, GambleModel};

use crate::output::{header, print_table, vector, write_csv, write_json, write_table, Config, Format};
use crate::{
    AdaptiveArgs, ConstrainedArgs, DrawdownArgs, Failure, IngestArgs, ModelArgs, OptimizeArgs, ProbeArgs, SimArgs,
    EXIT_NO_CONVERGENCE,
};

fn load_model(args: &ModelArgs, config: &mut Config) -> Result<GambleModel, Failure> {
    if let Some(path) = &args.model {
        config.set("model", path.display());
        return Ok(GambleModel::load_json(path)?);
    }
    if args.coin.is_empty() {
        return Err(Failure::validation("give a model with --model FILE or --coin win,loss,p"));
    }
    let coins = args
        .coin
        .iter()
        .map(|c| make_coin(c.win, c.loss, c.p))
        .collect::<Result<Vec<_>, _>>()?;
    let spec: Vec<String> = args.coin.iter().map(|c| format!("{},{},{}", c.win, c.loss, c.p)).collect();
    config.set("coin", spec.join(" x "));
    Ok(if coins.len() == 1 {
        coins.into_iter().next().unwrap()
    } else {
        independent(&coins)?
    })
}

fn sim_config(sim: &SimArgs, config: &mut Config) -> MonteCarloConfig {
    config.set("n", sim.n).set("paths", sim.paths).set("seed", sim.seed);
    MonteCarloConfig::new(sim.paths, sim.seed)
}

fn check_dt(dt: f64) -> Result<(), Failure> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Failure::validation(format!("--dt must be positive, got {dt}")))
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn fixed(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("{v}")
    }
}

pub fn optimize(a: &OptimizeArgs) -> Result<(), Failure> {
    let mut config = Config::new("optimize");
    let model = load_model(&a.model, &mut config)?;
    check_dt(a.dt)?;
    config.set("dt", a.dt).set("tol", a.tol);
    let best = maximize_growth(&model, a.tol)?;

    let hdr = header(&["method", "k", "g", "r", "note"]);
    let row = |name: &str, k: &[f64], note: String| -> Result<Vec<String>, Failure> {
        let (g, r) = if is_feasible(k, &model)? {
            let g = log_growth(k, &model)?;
            (fixed(g), fixed(annualized_return(g, a.dt)))
        } else {
            ("-".into(), "-".into())
        };
        Ok(vec![name.to_string(), vector(k), g, r, note])
    };
    let mut rows = vec![
        row(
            "kelly",
            &best.k_star,
            format!("{} iterations{}", best.iterations, if best.converged { "" } else { ", not converged" }),
        )?,
        row(
            "full",
            &vec![1.0 / model.dim() as f64; model.dim()],
            if model.dim() == 1 { String::new() } else { "equal split".into() },
        )?,
    ];
    for (name, method) in [("taylor", ApproxMethod::Taylor), ("gbm", ApproxMethod::Gbm)] {
        match approximate(&model, method) {
            Ok(sol) => {
                let feasible = is_feasible(&sol.kappa_raw, &model)?;
                rows.push(row(name, &sol.kappa_raw, if feasible { "raw".into() } else { "raw, infeasible".into() })?);
                rows.push(row(&format!("{name}-repaired"), &sol.k_repaired, format!("{:?}", sol.repair).to_lowercase())?);
            }
            Err(e) => rows.push(vec![name.to_string(), "-".into(), "-".into(), "-".into(), e.to_string()]),
        }
    }

    config.echo();
    print_table(&hdr, &rows);
    if let Some(path) = &a.out {
        match a.format {
            Format::Csv => write_csv(path, &config, &hdr, &rows)?,
            Format::Json => {
                let approx: Vec<_> = [ApproxMethod::Taylor, ApproxMethod::Gbm]
                    .into_iter()
                    .filter_map(|m| approximate(&model, m).ok())
                    .collect();
                let doc = serde_json::json!({ "kelly": best, "approximations": approx, "table": crate::output::rows_to_json(&hdr, &rows) });
                write_json(path, &config, &doc)?;
            }
        }
    }
    if !best.converged {
        return Err(Failure::new(
            EXIT_NO_CONVERGENCE,
            anyhow::anyhow!("growth maximization did not converge in {} iterations", best.iterations),
        ));
    }
    Ok(())
}

/// The even-money coin `±1`, whose drawdown law has a closed form.
fn even_coin_p(model: &GambleModel) -> Option<f64> {
    if model.dim() != 1 || model.atom_count() != 2 {
        return None;
    }
    let win = model.atoms().iter().find(|a| a.x[0] == 1.0)?;
    model.atoms().iter().any(|a| a.x[0] == -1.0).then_some(win.p)
}

pub fn drawdown(a: &DrawdownArgs) -> Result<(), Failure> {
    let mut config = Config::new("drawdown");
    let model = load_model(&a.model, &mut config)?;
    let mc = sim_config(&a.sim, &mut config);
    let grid: Vec<Vec<f64>> = if model.dim() == 1 {
        if a.k.is_empty() {
            if !(a.k_step > 0.0 && a.k_step <= 1.0) {
                return Err(Failure::validation(format!("--k-step must lie in (0, 1], got {}", a.k_step)));
            }
            config.set("k_step", a.k_step);
            let cells = (1.0 / a.k_step).round() as usize;
            (0..=cells).map(|j| vec![j as f64 / cells as f64]).collect()
        } else {
            config.set("k", a.k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            a.k.iter().map(|&v| vec![v]).collect()
        }
    } else {
        if !a.k.is_empty() {
            return Err(Failure::validation("--k applies to single-gamble models; use --grid"));
        }
        config.set("grid", a.grid);
        simplex_grid(&model, a.grid)?
    };
    if let Some(eps) = a.eps {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Failure::validation(format!("--eps must lie in (0, 1], got {eps}")));
        }
        config.set("eps", eps);
    }
    if a.exact {
        let count = sequence_count(&model, a.sim.n);
        if count > ENUMERATION_BUDGET {
            return Err(Failure::validation(format!(
                "--exact needs {count} outcome sequences, more than the budget {ENUMERATION_BUDGET}"
            )));
        }
        config.set("exact", true);
    }
    for k in &grid {
        if !is_feasible(k, &model)? {
            return Err(kelly_core::Error::Infeasible(k.clone()).into());
        }
    }
    let coin_p = even_coin_p(&model);

    let mut hdr: Vec<String> = (1..=model.dim()).map(|i| format!("k{i}")).collect();
    hdr.extend(header(&["e_drawdown", "e_drawdown_se"]));
    if a.eps.is_some() {
        hdr.extend(header(&["p_within_eps", "p_within_eps_se"]));
    }
    if coin_p.is_some() {
        hdr.extend(header(&["p_drawdown_ge_k", "p_drawdown_ge_k_se", "analytic_p_drawdown_ge_k"]));
    }
    if a.exact {
        hdr.push("exact_e_drawdown".into());
        if coin_p.is_some() {
            hdr.push("exact_p_drawdown_ge_k".into());
        }
    }

    let sc = Scenarios::generate(&model, a.sim.n, &mc)?;
    let mut rows = Vec::with_capacity(grid.len());
    for k in &grid {
        let stats = sc.drawdowns(&model, k)?;
        let d: Vec<f64> = stats.iter().map(|s| s.max_drawdown).collect();
        let ed = Estimate::from_samples(&d);
        let mut row: Vec<String> = k.iter().map(|&v| num(v)).collect();
        row.extend([num(ed.value), num(ed.std_error)]);
        if let Some(eps) = a.eps {
            let p = Estimate::frequency(&d, |&v| v <= eps);
            row.extend([num(p.value), num(p.std_error)]);
        }
        let ge_k = |v: &f64| k[0] > 0.0 && *v >= k[0] - 1e-12;
        if let Some(p) = coin_p {
            let est = Estimate::frequency(&d, ge_k);
            let analytic = if k[0] > 0.0 { num(coin_drawdown_probability(p, a.sim.n)?) } else { num(0.0) };
            row.extend([num(est.value), num(est.std_error), analytic]);
        }
        if a.exact {
            let s = exact_summary(&model, k, a.sim.n, ENUMERATION_BUDGET, Execution::default())?;
            row.push(num(s.expected_drawdown));
            if coin_p.is_some() {
                let p = exact_probability(&model, k, a.sim.n, ENUMERATION_BUDGET, |s| ge_k(&s.max_drawdown))?;
                row.push(num(p));
            }
        }
        rows.push(row);
    }

    config.echo();
    let shown: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(|c| c.parse::<f64>().map(fixed).unwrap_or_else(|_| c.clone())).collect())
        .collect();
    print_table(&hdr, &shown);
    if let Some(path) = &a.out {
        write_table(path, a.format, &config, &hdr, &rows)?;
    }
    Ok(())
}

fn constraint_spec(kind: ConstraintKind, eps: f64, delta: Option<f64>, config: &mut Config) -> Result<ConstraintSpec, Failure> {
    config.set("kind", format!("{kind:?}").to_lowercase()).set("eps", eps);
    if let Some(d) = delta {
        config.set("delta", d);
    }
    Ok(ConstraintSpec::new(kind, eps, delta)?)
}

pub fn constrained(a: &ConstrainedArgs) -> Result<(), Failure> {
    let mut config = Config::new("constrained");
    let model = load_model(&a.model, &mut config)?;
    let mc = sim_config(&a.sim, &mut config);
    let spec = constraint_spec(a.kind, a.eps, a.delta, &mut config)?;
    check_dt(a.dt)?;
    config.set("dt", a.dt);
    let cfg = ConstrainedConfig::new(mc);
    let r = maximize_growth_constrained(&model, a.sim.n, &spec, &cfg)?;

    let g = r.growth.g_star;
    let rows = vec![
        vec!["k".into(), vector(&r.growth.k_star)],
        vec!["g".into(), fixed(g)],
        vec!["r".into(), fixed(annualized_return(g, a.dt))],
        vec!["constraint".into(), fixed(r.constraint.value)],
        vec!["constraint_se".into(), fixed(r.constraint.std_error)],
        vec!["slack".into(), fixed(r.slack)],
        vec!["method".into(), serde_json::to_value(r.method)?.as_str().unwrap_or("").to_string()],
        vec!["evaluation".into(), serde_json::to_value(r.evaluation)?.as_str().unwrap_or("").to_string()],
        vec!["unconstrained_k".into(), vector(&r.unconstrained.k_star)],
        vec!["unconstrained_g".into(), fixed(r.unconstrained.g_star)],
    ];
    let hdr = header(&["field", "value"]);
    config.echo();
    print_table(&hdr, &rows);
    if let Some(p) = &r.probe {
        println!(
            "probe: {}/{} grid points in set, {} midpoint checks, {} violations ({} significant)",
            p.in_set_count(),
            p.grid.len(),
            p.checks.len(),
            p.violations,
            p.significant_violations
        );
    }
    if let Some(path) = &a.out {
        match a.format {
            Format::Json => write_json(path, &config, &r)?,
            Format::Csv => write_csv(path, &config, &hdr, &rows)?,
        }
    }
    if r.slack < 0.0 {
        return Err(Failure::new(
            crate::EXIT_INFEASIBLE,
            anyhow::anyhow!("constraint violated at the returned allocation (slack {})", r.slack),
        ));
    }
    Ok(())
}

pub fn probe_convexity(a: &ProbeArgs) -> Result<(), Failure> {
    let mut config = Config::new("probe-convexity");
    let model = load_model(&a.model, &mut config)?;
    let mc = sim_config(&a.sim, &mut config);
    let spec = constraint_spec(a.kind, a.eps, a.delta, &mut config)?;
    if spec.kind == ConstraintKind::Surrogate {
        return Err(Failure::validation("the probe applies to expected and probabilistic constraints"));
    }
    config.set("grid", a.grid).set("pairs", a.pairs);
    let r = convexity_probe(&model, a.sim.n, &spec, a.grid, a.pairs, &mc)?;

    config.echo();
    println!("grid points     {}", r.grid.len());
    println!("in set          {}", r.in_set_count());
    println!("midpoint checks {}", r.checks.len());
    println!("violations      {}", r.violations);
    println!("significant     {}", r.significant_violations);
    println!("inconclusive    {}", r.inconclusive);
    if let Some(path) = &a.out {
        match a.format {
            Format::Json => write_json(path, &config, &r)?,
            Format::Csv => {
                let mut buf = Vec::new();
                r.write_grid_csv(&mut buf)?;
                let mut text = config.lines().join("\n");
                text.push('\n');
                text.push_str(std::str::from_utf8(&buf).expect("csv output is UTF-8"));
                fs::write(path, text)?;
            }
        }
    }
    Ok(())
}

pub fn adaptive(a: &AdaptiveArgs) -> Result<(), Failure> {
    let mut config = Config::new("adaptive");
    config
        .set("p", a.p)
        .set("n", a.n)
        .set("window", a.window)
        .set("runs", a.runs)
        .set("seed", a.seed)
        .set("v0", a.v0);
    if a.runs == 0 {
        return Err(Failure::validation("--runs must be positive"));
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
    }
    let hdr = header(&["seed", "mean_p_hat", "mean_k_hat", "final_wealth", "max_drawdown"]);
    let mut rows = Vec::new();
    let (mut p_sum, mut k_sum, mut count, mut log_w) = (0.0, 0.0, 0usize, 0.0);
    for r in 0..a.runs {
        let seed = a.seed.wrapping_add(r);
        let run = run_adaptive(a.p, a.n, a.window, a.v0, seed)?;
        if let Some(dir) = &a.out {
            let path = dir.join(format!("trace_{seed}.csv"));
            run.write_trace_csv(fs::File::create(&path)?)?;
        }
        let m = run.estimates.len() as f64;
        let mp = run.estimates.iter().sum::<f64>() / m;
        let mk = run.fractions.iter().sum::<f64>() / m;
        p_sum += run.estimates.iter().sum::<f64>();
        k_sum += run.fractions.iter().sum::<f64>();
        count += run.estimates.len();
        let last = *run.path.values.last().expect("path has values");
        log_w += (last / a.v0).ln();
        let dd = kelly_core::drawdown::max_drawdown(&run.path).max_drawdown;
        rows.push(vec![seed.to_string(), num(mp), num(mk), num(last), num(dd)]);
    }

    config.echo();
    println!("runs             {}", a.runs);
    println!("mean p_hat       {}", fixed(p_sum / count as f64));
    println!("mean k_hat       {}", fixed(k_sum / count as f64));
    println!("mean log growth  {}", fixed(log_w / a.runs as f64 / a.n as f64));
    if let Some(dir) = &a.out {
        write_csv(&dir.join("summary.csv"), &config, &hdr, &rows)?;
    }
    Ok(())
}

pub fn ingest(a: &IngestArgs) -> Result<(), Failure> {
    let mut config = Config::new("ingest");
    config.set("prices", a.prices.display());
    let columns = (!a.symbol.is_empty()).then_some(a.symbol.as_slice());
    let report = load_prices(&a.prices, columns)?;
    let pmf = to_returns(&report.series)?;
    let json = pmf.to_json();
    let p = &pmf.provenance;
    let summary = [
        format!("symbols         {}", p.symbols.join(",")),
        format!("dates           {} .. {}", p.start, p.end),
        format!("aligned rows    {}", p.rows),
        format!("atoms           {}", pmf.model.atom_count()),
        format!("dropped rows    {}", report.dropped_rows.len()),
        format!("unmatched dates {}", p.unmatched_dates),
    ];
    match &a.out {
        Some(path) => {
            write_model(path, &json)?;
            config.set("out", path.display());
            config.echo();
            for line in summary {
                println!("{line}");
            }
        }
        None => {
            for line in config.lines().iter().chain(&summary) {
                eprintln!("{line}");
            }
            println!("{json}");
        }
    }
    Ok(())
}

fn write_model(path: &Path, json: &str) -> Result<(), Failure> {
    fs::write(path, format!("{json}\n"))?;
    Ok(())
}
