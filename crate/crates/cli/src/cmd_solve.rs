//! `pspin solve`: minimize the free-energy functional over k-step order
//! parameters and write the result as JSON plus a human-readable summary.

use crate::config::{self, MixtureTermCfg, SolveCfg};
use crate::output;
use crate::{Failure, RunArgs};
use pspin_core::optimizer::{optimize, OptimizeOptions};
use pspin_core::parisi::infimum_over_b;
use serde::Serialize;

#[derive(Serialize)]
struct OrderParameterOut {
    k: usize,
    m: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Serialize)]
struct ProvidedOut {
    value: f64,
    b_star: f64,
}

#[derive(Serialize)]
struct SolveReport {
    command: &'static str,
    mixture: Vec<MixtureTermCfg>,
    k_max: usize,
    seed: u64,
    value: f64,
    b_star: f64,
    converged: bool,
    order_parameter: OrderParameterOut,
    per_k: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    provided: Option<ProvidedOut>,
    timestamp: u64,
}

pub fn run(args: &RunArgs) -> Result<u8, Failure> {
    let raw = config::read_config(&args.config)?;
    let cfg: SolveCfg = config::parse(&raw)?;
    let mix = config::build_mixture(&cfg.mixture)?;
    if cfg.k_max < 1 {
        return Err(Failure::config("k_max must be at least 1"));
    }

    // A provided order parameter is validated and evaluated as a reference
    // point; the optimizer still searches from scratch.
    let provided = match &cfg.order_parameter {
        Some(op) => {
            let f = config::build_order_parameter(op)?;
            let eval = infimum_over_b(&mix, &f).map_err(Failure::from_core)?;
            Some(ProvidedOut {
                value: eval.value,
                b_star: eval.b_star,
            })
        }
        None => None,
    };

    let seed = args.master_seed(cfg.seed);
    let opts = OptimizeOptions {
        restarts: cfg.restarts.unwrap_or(8),
        tol: cfg.tol.unwrap_or(1e-9),
        max_iter: cfg.max_iter.unwrap_or(600),
        seed,
    };
    let sweep_tol = cfg.sweep_tol.unwrap_or(1e-9);
    let result = optimize(&mix, cfg.k_max, sweep_tol, &opts).map_err(Failure::from_core)?;

    let report = SolveReport {
        command: "solve",
        mixture: cfg.mixture.clone(),
        k_max: cfg.k_max,
        seed,
        value: result.value,
        b_star: result.evaluation.b_star,
        converged: result.converged,
        order_parameter: OrderParameterOut {
            k: result.best.k(),
            m: result.best.m().to_vec(),
            q: result.best.q().to_vec(),
        },
        per_k: result.per_k_values.clone(),
        provided,
        timestamp: output::unix_timestamp(),
    };

    let dir = args.out_dir(cfg.out_dir.as_deref());
    let json_path = output::write_json(&dir, "solve.json", &report)?;

    let mut summary = String::new();
    summary.push_str(&format!("free energy value : {:.10}\n", report.value));
    summary.push_str(&format!("levels (k)        : {}\n", report.order_parameter.k));
    summary.push_str(&format!("q                 : {:?}\n", report.order_parameter.q));
    summary.push_str(&format!("m                 : {:?}\n", report.order_parameter.m));
    summary.push_str(&format!("b*                : {:.10}\n", report.b_star));
    summary.push_str(&format!("converged         : {}\n", report.converged));
    for (k, v) in &report.per_k {
        summary.push_str(&format!("  k={k}: {v:.10}\n"));
    }
    if let Some(p) = &report.provided {
        summary.push_str(&format!("provided point    : {:.10}\n", p.value));
    }
    output::write_file(&dir, "solve.txt", summary.as_bytes())?;
    print!("{summary}");
    println!("wrote {}", json_path.display());

    if result.converged {
        Ok(0)
    } else {
        eprintln!("warning: optimizer hit its iteration cap; best-so-far written");
        Ok(2)
    }
}
