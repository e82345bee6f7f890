//! `pspin simulate`: Monte Carlo estimators and diagnostics, reported as CSV
//! rows (quantity, value, stderr, N, M, seed, wall_time). The config's
//! `task` field selects one of free-energy, gg-stats, ass-bracket, or
//! cavity-check.

use crate::config::{
    self, AssBracketCfg, CavityCheckCfg, FreeEnergyCfg, GgStatsCfg, TaskPeek,
};
use crate::output::{self, Row};
use crate::{Failure, RunArgs};
use pspin_core::simulator::{
    ass_bracket_estimate, cavity_decompose, free_energy_mc, gibbs_mcmc, hamiltonian,
    overlap_statistics, sample_disorder, AssBracketOptions, GibbsChain, OverlapMonomial,
    PerturbationSpec, PhiSpec,
};
use pspin_core::sphere::sample_sphere;
use std::time::Instant;

pub fn run(args: &RunArgs) -> Result<u8, Failure> {
    let raw = config::read_config(&args.config)?;
    let peek: TaskPeek = config::parse(&raw)?;
    match peek.task.as_str() {
        "free-energy" => free_energy(args, &raw),
        "gg-stats" => gg_stats(args, &raw),
        "ass-bracket" => ass_bracket(args, &raw),
        "cavity-check" => cavity_check(args, &raw),
        other => Err(Failure::config(format!(
            "unknown simulate task {other:?}; expected one of \"free-energy\", \
             \"gg-stats\", \"ass-bracket\", \"cavity-check\""
        ))),
    }
}

/// Print warnings and resolve the final exit code under --strict.
fn finish(args: &RunArgs, warnings: &[String]) -> Result<u8, Failure> {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if args.strict && !warnings.is_empty() {
        eprintln!("sampler-health warnings escalated by --strict");
        return Ok(3);
    }
    Ok(0)
}

fn free_energy(args: &RunArgs, raw: &str) -> Result<u8, Failure> {
    let cfg: FreeEnergyCfg = config::parse(raw)?;
    let mix = config::build_mixture(&cfg.mixture)?;
    let seed = args.master_seed(cfg.seed);
    let t0 = Instant::now();
    let fe = free_energy_mc(&mix, cfg.n, cfg.n_config, cfg.n_disorder, seed)
        .map_err(Failure::from_core)?;
    let wall = t0.elapsed().as_secs_f64();

    let rows = [Row {
        quantity: "free_energy".into(),
        value: fe.estimate,
        stderr: Some(fe.stderr),
        n: cfg.n,
        m: 0,
        seed,
        wall_time: wall,
    }];
    let dir = args.out_dir(cfg.out_dir.as_deref());
    let path = output::write_csv(&dir, "simulate.csv", &rows)?;

    println!(
        "free energy estimate {:.6} ± {:.6} (N={}, {} configs × {} disorders)",
        fe.estimate, fe.stderr, cfg.n, cfg.n_config, cfg.n_disorder
    );
    println!("min effective sample size {:.1}", fe.min_ess);
    println!("caveat: {}", fe.bias_note);
    println!("wrote {}", path.display());
    finish(args, &fe.warnings)
}

fn phi_quantity(p: u32, n: usize, f: &[(usize, usize, u32)]) -> String {
    let fdesc = if f.is_empty() {
        "1".to_string()
    } else {
        f.iter()
            .map(|&(a, b, e)| {
                if e == 1 {
                    format!("R{a}.{b}")
                } else {
                    format!("R{a}.{b}^{e}")
                }
            })
            .collect::<Vec<_>>()
            .join("x")
    };
    format!("phi_p{p}_n{n}_f{fdesc}")
}

fn gg_stats(args: &RunArgs, raw: &str) -> Result<u8, Failure> {
    let cfg: GgStatsCfg = config::parse(raw)?;
    let mix = config::build_mixture(&cfg.mixture)?;
    let seed = args.master_seed(cfg.seed);

    let pert = match cfg.perturbation_p_max {
        Some(p_max) if p_max > 0 => {
            PerturbationSpec::uniform(p_max, seed ^ 0x70_65_72_74)
        }
        _ => PerturbationSpec::disabled(),
    };

    let mut specs = Vec::with_capacity(cfg.phi.len());
    for phi in &cfg.phi {
        let f = if phi.f.is_empty() {
            OverlapMonomial::one()
        } else {
            OverlapMonomial::new(phi.f.iter().copied()).map_err(Failure::from_core)?
        };
        specs.push(PhiSpec {
            p: phi.p,
            n: phi.n,
            f,
        });
    }

    let t0 = Instant::now();
    let mut warnings = Vec::new();
    let mut groups: Vec<Vec<GibbsChain>> = Vec::with_capacity(cfg.groups);
    for gi in 0..cfg.groups {
        let d = sample_disorder(&mix, cfg.n, seed.wrapping_add(gi as u64))
            .map_err(Failure::from_core)?;
        let mut chains = Vec::with_capacity(cfg.chains_per_group);
        for ci in 0..cfg.chains_per_group {
            let chain_seed = seed.wrapping_add((gi * cfg.chains_per_group + ci) as u64);
            let chain = gibbs_mcmc(
                &d,
                &pert,
                cfg.n,
                cfg.steps,
                cfg.burn_in,
                cfg.thin,
                chain_seed,
            )
            .map_err(Failure::from_core)?;
            for w in &chain.warnings {
                warnings.push(format!("group {gi}, chain {ci}: {w}"));
            }
            chains.push(chain);
        }
        groups.push(chains);
    }

    let eta = cfg.eta.unwrap_or(3.0 / (cfg.n as f64).sqrt());
    let report =
        overlap_statistics(&groups, &specs, eta, seed).map_err(Failure::from_core)?;
    let wall = t0.elapsed().as_secs_f64();

    let row = |quantity: String, value: f64, stderr: f64| Row {
        quantity,
        value,
        stderr: Some(stderr),
        n: cfg.n,
        m: 0,
        seed,
        wall_time: wall,
    };
    let mut rows = Vec::new();
    for (phi_cfg, est) in cfg.phi.iter().zip(&report.phi) {
        rows.push(row(
            phi_quantity(phi_cfg.p, phi_cfg.n, &phi_cfg.f),
            est.phi,
            est.stderr,
        ));
    }
    rows.push(row(
        "ultrametric_violation".into(),
        report.ultrametric_violation,
        report.ultrametric_stderr,
    ));
    rows.push(row(
        "overlap_mean".into(),
        report.overlap_first.0,
        report.overlap_first.1,
    ));
    rows.push(row(
        "overlap_second_moment".into(),
        report.overlap_second.0,
        report.overlap_second.1,
    ));
    rows.push(row(
        "mean_energy".into(),
        report.mean_energy.0,
        report.mean_energy.1,
    ));

    let dir = args.out_dir(cfg.out_dir.as_deref());
    let path = output::write_csv(&dir, "simulate.csv", &rows)?;

    if cfg.dump_chains {
        let chain_dir = dir.join("chains");
        let mut dumped = 0usize;
        for (gi, chains) in groups.iter().enumerate() {
            for (ci, chain) in chains.iter().enumerate() {
                let bytes = output::sphchain_bytes(&chain.samples, cfg.n);
                output::write_file(&chain_dir, &format!("chain_g{gi}_c{ci}.sphchain"), &bytes)?;
                dumped += 1;
            }
        }
        println!("dumped {dumped} chains to {}", chain_dir.display());
    }

    println!(
        "overlap statistics from {} groups × {} chains ({} stored samples each, η = {:.4})",
        report.n_groups, cfg.chains_per_group, report.samples_per_chain, eta
    );
    for r in &rows {
        println!("  {} = {:.6} ± {:.6}", r.quantity, r.value, r.stderr.unwrap());
    }
    println!("wrote {}", path.display());
    finish(args, &warnings)
}

fn ass_bracket(args: &RunArgs, raw: &str) -> Result<u8, Failure> {
    let cfg: AssBracketCfg = config::parse(raw)?;
    let mix = config::build_mixture(&cfg.mixture)?;
    let seed = args.master_seed(cfg.seed);

    let defaults = AssBracketOptions::default();
    let opts = AssBracketOptions {
        n_rep: cfg.n_rep.unwrap_or(defaults.n_rep),
        n_gauss: cfg.n_gauss.unwrap_or(defaults.n_gauss),
        n_dis: cfg.n_dis.unwrap_or(defaults.n_dis),
        burn_in: cfg.burn_in.unwrap_or(defaults.burn_in),
        thin: cfg.thin.unwrap_or(defaults.thin),
        delta: cfg.delta.unwrap_or(defaults.delta),
    };
    let t0 = Instant::now();
    let br =
        ass_bracket_estimate(&mix, cfg.m, cfg.n, &opts, seed).map_err(Failure::from_core)?;
    let wall = t0.elapsed().as_secs_f64();

    let row = |quantity: &str, value: f64, stderr: Option<f64>| Row {
        quantity: quantity.into(),
        value,
        stderr,
        n: cfg.n,
        m: cfg.m,
        seed,
        wall_time: wall,
    };
    let rows = [
        row("ass_lower_bound", br.lower_bound, Some(br.stderr)),
        row("ass_bracket", br.lower_bound - br.correction, Some(br.stderr)),
        row("ass_term_z", br.term_z, Some(br.term_z_stderr)),
        row("ass_term_y", br.term_y, Some(br.term_y_stderr)),
        row("ass_correction", br.correction, None),
    ];
    let dir = args.out_dir(cfg.out_dir.as_deref());
    let path = output::write_csv(&dir, "simulate.csv", &rows)?;

    println!(
        "lower bound {:.6} ± {:.6} at (M, N) = ({}, {}), δ = {}",
        br.lower_bound, br.stderr, cfg.m, cfg.n, opts.delta
    );
    println!(
        "  bracket (term_z − term_y)/M = {:.6}, correction = {:.6}",
        br.lower_bound - br.correction,
        br.correction
    );
    println!("wrote {}", path.display());
    finish(args, &[])
}

fn cavity_check(args: &RunArgs, raw: &str) -> Result<u8, Failure> {
    let cfg: CavityCheckCfg = config::parse(raw)?;
    let mix = config::build_mixture(&cfg.mixture)?;
    let seed = args.master_seed(cfg.seed);
    let n_configs = cfg.n_configs.unwrap_or(100);
    if n_configs < 1 {
        return Err(Failure::config("n_configs must be at least 1"));
    }
    let total = cfg.m + cfg.n;

    let t0 = Instant::now();
    let d = sample_disorder(&mix, total, seed).map_err(Failure::from_core)?;
    let configs = sample_sphere(total, n_configs, seed).map_err(Failure::from_core)?;
    let mut worst = 0.0f64;
    let mut sum = 0.0f64;
    for rho in &configs {
        let dec = cavity_decompose(&d, rho, cfg.m).map_err(Failure::from_core)?;
        let linear: f64 = (0..cfg.m).map(|i| rho[cfg.n + i] * dec.z_terms[i]).sum();
        let reassembled = dec.h_mn + linear + dec.gamma;
        let direct = hamiltonian(&d, rho, total).map_err(Failure::from_core)?;
        let rel = (reassembled - direct).abs() / direct.abs().max(1.0);
        worst = worst.max(rel);
        sum += rel;
    }
    let wall = t0.elapsed().as_secs_f64();

    let row = |quantity: &str, value: f64| Row {
        quantity: quantity.into(),
        value,
        stderr: None,
        n: cfg.n,
        m: cfg.m,
        seed,
        wall_time: wall,
    };
    let rows = [
        row("cavity_max_rel_error", worst),
        row("cavity_mean_rel_error", sum / n_configs as f64),
    ];
    let dir = args.out_dir(cfg.out_dir.as_deref());
    let path = output::write_csv(&dir, "simulate.csv", &rows)?;

    println!(
        "reconstruction checked on {} configurations at (M, N) = ({}, {}): max relative error {:.3e}",
        n_configs, cfg.m, cfg.n, worst
    );
    println!("wrote {}", path.display());
    finish(args, &[])
}
