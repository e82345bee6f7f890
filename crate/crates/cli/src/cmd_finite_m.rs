//! `pspin finite-m`: evaluate the finite-M recursive functional at each
//! requested M, next to the limit-functional reference value.

use crate::config::{self, FiniteMCfg, MixtureTermCfg, OrderParameterCfg};
use crate::output;
use crate::{Failure, RunArgs};
use pspin_core::finite_m::{pm_value, FiniteMConfig};
use pspin_core::parisi::infimum_over_b;
use serde::Serialize;

#[derive(Serialize)]
struct PerM {
    m: usize,
    pm: f64,
    error_estimate: f64,
}

#[derive(Serialize)]
struct FiniteMReport {
    command: &'static str,
    mixture: Vec<MixtureTermCfg>,
    order_parameter: OrderParameterCfg,
    parisi_value: f64,
    per_m: Vec<PerM>,
    timestamp: u64,
}

pub fn run(args: &RunArgs) -> Result<u8, Failure> {
    let raw = config::read_config(&args.config)?;
    let cfg: FiniteMCfg = config::parse(&raw)?;
    let mix = config::build_mixture(&cfg.mixture)?;
    let f = config::build_order_parameter(&cfg.order_parameter)?;
    if cfg.m_values.is_empty() {
        return Err(Failure::config("m_values must list at least one M"));
    }

    let reference = infimum_over_b(&mix, &f).map_err(Failure::from_core)?;

    let mut per_m = Vec::with_capacity(cfg.m_values.len());
    for &m in &cfg.m_values {
        let mut qcfg = FiniteMConfig::with_m(m);
        if let Some(v) = cfg.r_grid_size {
            qcfg.r_grid_size = v;
        }
        if let Some(v) = cfg.r_max_sigmas {
            qcfg.r_max_sigmas = v;
        }
        if let Some(v) = cfg.gh_nodes {
            qcfg.gh_nodes = v;
        }
        if let Some(v) = cfg.chi_nodes {
            qcfg.chi_nodes = v;
        }
        let out = pm_value(&mix, &f, &qcfg).map_err(Failure::from_core)?;
        per_m.push(PerM {
            m,
            pm: out.pm,
            error_estimate: out.error_estimate,
        });
    }

    let report = FiniteMReport {
        command: "finite-m",
        mixture: cfg.mixture.clone(),
        order_parameter: cfg.order_parameter.clone(),
        parisi_value: reference.value,
        per_m,
        timestamp: output::unix_timestamp(),
    };

    let dir = args.out_dir(cfg.out_dir.as_deref());
    let json_path = output::write_json(&dir, "finite_m.json", &report)?;

    let mut summary = String::new();
    summary.push_str(&format!("limit value P(x̄)  : {:.10}\n", report.parisi_value));
    summary.push_str("     M          pm   error_est     |pm - P|\n");
    for row in &report.per_m {
        summary.push_str(&format!(
            "{:6}  {:10.6}  {:10.2e}  {:10.3e}\n",
            row.m,
            row.pm,
            row.error_estimate,
            (row.pm - report.parisi_value).abs()
        ));
    }
    output::write_file(&dir, "finite_m.txt", summary.as_bytes())?;
    print!("{summary}");
    println!("wrote {}", json_path.display());
    Ok(0)
}
