use std::path::PathBuf;

use anyhow::Result;
use skewlab_core::checks::{run_check, CheckContext, CheckSizes};
use skewlab_core::fiber::{sigma2_capital, BumpObservable};
use skewlab_core::mc::{derive_seed, Estimate};
use skewlab_core::scenery::{
    ks_limit_law, limit_variance, occupation_weighted_law, residual_exceedance, rwrs_law, LimitGrid, SceneryConfig,
};
use skewlab_core::skew::{SkewObservable, SkewSystem};
use skewlab_core::stats::{
    char_fn_distance, correlation_constant, correlation_series, corollary_constant, ks_distance, linspace, mixing_scan,
    occupation_scan, tail_scan, variance_scan,
};
use skewlab_core::torus::{green_kubo_sigma2, green_kubo_sigma2_exact, homoclinic_sum, TrigObservable, TrigTerm};

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{num, opt_num, Report};

pub struct Setup {
    pub sys: SkewSystem,
    pub phi: BumpObservable,
    pub sigma: f64,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let sys = cfg.system()?;
        let phi = BumpObservable::new(sys.group(), cfg.system.bump).map_err(|e| ConfigError(format!("system.bump: {e}")))?;
        let sigma = green_kubo_sigma2_exact(sys.automorphism(), sys.roof()).sqrt();
        if !(sigma > 0.0) {
            return Err(ConfigError("system.roof: sigma^2(f) is zero".into()));
        }
        Ok(Self { sys, phi, sigma })
    }

    fn observable(&self) -> SkewObservable {
        SkewObservable::fiber_only(self.phi.clone())
    }

    /// The configured value, or a fresh estimate.
    fn big_sigma2(&self, cfg: &ExperimentConfig) -> Result<Estimate> {
        if let Some(v) = cfg.run.big_sigma2 {
            return Ok(Estimate::new(v, 0.0));
        }
        log::info!("estimating Sigma^2 with {} samples", cfg.run.sigma2_samples);
        Ok(sigma2_capital(&self.phi, self.sys.group(), &cfg.sigma2_config())?.sigma2)
    }
}

pub fn constants(cfg: &ExperimentConfig) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let m = s.sys.automorphism();
    let f = s.sys.roof();
    let exact = green_kubo_sigma2_exact(m, f);
    let gk = green_kubo_sigma2(m, f, 40, cfg.run.samples, derive_seed(cfg.run.seed, "green-kubo"))?;
    let hom = homoclinic_sum(m, f, 60)?;
    let cap = sigma2_capital(&s.phi, s.sys.group(), &cfg.sigma2_config())?;
    let cc = corollary_constant(exact, cap.sigma2.value);

    let mut r = Report::new(&["quantity", "value", "stderr"]);
    r.row(vec!["sigma2_exact".into(), num(exact), num(0.0)]);
    r.row(vec!["sigma2_monte_carlo".into(), num(gk.value), num(gk.stderr)]);
    r.row(vec!["homoclinic_sum".into(), num(hom.value), num(hom.tail_bound)]);
    r.row(vec!["big_sigma2".into(), num(cap.sigma2.value), num(cap.sigma2.stderr)]);
    r.row(vec!["big_sigma2_tail_bound".into(), num(cap.tail_bound), String::new()]);
    r.row(vec![
        "corollary_constant".into(),
        num(cc),
        num(cc * cap.sigma2.stderr / cap.sigma2.value.abs()),
    ]);
    r.row(vec!["mean_offset".into(), num(s.phi.mean_offset()), String::new()]);
    r.extra("decay_fit", cap.decay);
    r.extra("rho", &cap.rho);
    println!("sigma^2(f) = {exact:.6} (Monte Carlo {:.4} +- {:.4})", gk.value, gk.stderr);
    println!("homoclinic sum = {:.6}", hom.value);
    println!("Sigma^2(phi) = {:.5} +- {:.5}", cap.sigma2.value, cap.sigma2.stderr);
    println!("(8/3) Sigma^2 / (sqrt(2 pi) sigma) = {cc:.5}");
    Ok(r)
}

pub fn correlations(cfg: &ExperimentConfig) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let k = &cfg.run.k;
    let series = correlation_series(&s.sys, &s.observable(), k, cfg.run.samples, cfg.run.fiber_starts, cfg.run.seed)?;
    let range = (k[0] as f64, *k.last().expect("validated") as f64);
    let fit = series.fit(range);
    let mut r = Report::new(&["k", "value", "stderr", "constant", "constant_stderr", "fit_exponent", "fit_stderr"]);
    for (i, &lag) in k.iter().enumerate() {
        let c = correlation_constant(&series, lag, s.sigma);
        r.row(vec![
            lag.to_string(),
            num(series.values[i]),
            num(series.stderrs[i]),
            opt_num(c.map(|c| c.value)),
            opt_num(c.map(|c| c.stderr)),
            opt_num(fit.as_ref().ok().map(|f| f.exponent)),
            opt_num(fit.as_ref().ok().map(|f| f.fit_stderr)),
        ]);
    }
    match &fit {
        Ok(f) => {
            println!("exponent {:.3} +- {:.3} over k in [{}, {}]", f.exponent, f.fit_stderr, range.0, range.1);
            r.extra("fit", f);
        }
        Err(e) => {
            println!("no fit: {e}");
            r.extra("fit_error", e.to_string());
        }
    }
    Ok(r)
}

pub fn variance(cfg: &ExperimentConfig, base_only: bool) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let (phi, predicted) = if base_only {
        let base = TrigObservable::new(vec![TrigTerm {
            freq: (0, 1),
            cos: 1.0,
            sin: 0.0,
        }])?;
        (SkewObservable::base_only(s.sys.group(), base), None)
    } else {
        let cap = s.big_sigma2(cfg)?;
        (s.observable(), Some(corollary_constant(s.sigma * s.sigma, cap.value)))
    };
    let scan = variance_scan(&s.sys, &phi, &cfg.run.variance_n, cfg.run.samples, cfg.run.seed)?;
    let mut r = Report::new(&["n", "variance", "stderr", "over_n_three_halves", "fit_exponent", "fit_constant", "predicted_constant"]);
    for (i, &n) in scan.series.ns.iter().enumerate() {
        r.row(vec![
            n.to_string(),
            num(scan.series.values[i]),
            num(scan.series.stderrs[i]),
            num(scan.series.values[i] / (n as f64).powf(1.5)),
            opt_num(scan.fit.map(|f| f.exponent)),
            opt_num(scan.fit.map(|f| f.constant())),
            opt_num(predicted),
        ]);
    }
    match &scan.fit {
        Some(f) => println!("exponent {:.3} +- {:.3}, constant {:.5}", f.exponent, f.fit_stderr, f.constant()),
        None => println!("no fit: {}", scan.fit_error.clone().unwrap_or_default()),
    }
    if let Some(p) = predicted {
        println!("predicted constant {p:.5}");
    }
    r.extra("fit", scan.fit);
    r.extra("fit_error", &scan.fit_error);
    Ok(r)
}

pub fn distribution(cfg: &ExperimentConfig) -> Result<(Report, Vec<PathBuf>)> {
    let s = Setup::new(cfg)?;
    let cap = s.big_sigma2(cfg)?.value;
    let seed = cfg.run.seed;
    let n = cfg.run.law_n;
    let samples = cfg.run.samples;
    let phi = s.observable();
    let dynamical = s.sys.sample_normalized_sums(&phi, n, samples, derive_seed(seed, "dynamical"), 0.75)?;
    let scenery = SceneryConfig::lazy(s.sigma * s.sigma, cap)?;
    let rwrs = rwrs_law(&scenery, n, samples, derive_seed(seed, "rwrs"))?;
    let limit = ks_limit_law(s.sigma, cap, LimitGrid::default(), samples, derive_seed(seed, "limit"))?;
    let occ = occupation_weighted_law(&s.sys, &phi, cfg.run.charfn_n, samples, derive_seed(seed, "occupation"))?;
    let rwrs_c = rwrs_law(&scenery, cfg.run.charfn_n, samples, derive_seed(seed, "rwrs-charfn"))?;

    let mut r = Report::new(&["comparison", "metric", "value"]);
    let ks = [
        ("dynamical_vs_rwrs", ks_distance(&dynamical, &rwrs)),
        ("dynamical_vs_limit", ks_distance(&dynamical, &limit)),
        ("rwrs_vs_limit", ks_distance(&rwrs, &limit)),
    ];
    for (name, d) in ks {
        println!("KS {name}: {d:.4}");
        r.row(vec![name.into(), "ks".into(), num(d)]);
    }
    let cf = char_fn_distance(&occ, &rwrs_c, &linspace(-3.0, 3.0, 61));
    println!("char fn occupation_vs_rwrs at n = {}: {cf:.4}", cfg.run.charfn_n);
    r.row(vec!["occupation_vs_rwrs".into(), "char_fn".into(), num(cf)]);
    for (name, law) in [("dynamical", &dynamical), ("rwrs", &rwrs), ("limit", &limit), ("occupation", &occ)] {
        r.row(vec![name.into(), "variance".into(), num(law.variance())]);
    }
    r.row(vec!["limit".into(), "predicted_variance".into(), num(limit_variance(s.sigma, cap))]);

    let dir = &cfg.output.path;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, law) in [("dynamical", &dynamical), ("rwrs", &rwrs), ("limit", &limit), ("occupation", &occ)] {
        let p = dir.join(format!("distribution.{name}.json"));
        law.save_json(&p)?;
        files.push(p);
    }
    Ok((r, files))
}

pub fn lemmas(cfg: &ExperimentConfig) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let run = &cfg.run;
    let mut r = Report::new(&["lemma", "parameter", "value", "stderr"]);

    let tail = tail_scan(&s.sys, &run.tail_n, run.beta, s.sigma * s.sigma, run.clones, run.replicas, derive_seed(run.seed, "tail"))?;
    for p in &tail.points {
        r.row(vec!["tail_probability".into(), p.n.to_string(), num(p.prob.value), num(p.prob.stderr)]);
    }
    r.row(vec!["tail_slope".into(), String::new(), num(tail.slope), String::new()]);
    println!(
        "tail: strictly decreasing {}, slope {:.3}, 95% interval ({:.3}, {:.3})",
        tail.strictly_decreasing(),
        tail.slope,
        tail.slope_interval.0,
        tail.slope_interval.1
    );

    let pair = [(&s.phi, 0.0), (&s.phi, 0.0)];
    let mix = mixing_scan(s.sys.group(), &pair, &pair, &run.gaps, run.mixing_samples, derive_seed(run.seed, "mixing"))?;
    for (t, c) in mix.gaps.iter().zip(&mix.covariances) {
        r.row(vec!["multi_covariance".into(), t.to_string(), num(c.value), num(c.stderr)]);
    }
    if let Some(f) = mix.fit {
        r.row(vec!["mixing_rate".into(), String::new(), num(f.slope), num(f.slope_stderr)]);
        println!("mixing rate {:.3} +- {:.3}", f.slope, f.slope_stderr);
    }

    let occ = occupation_scan(&s.sys, &run.moment_n, run.epsilon, run.samples, derive_seed(run.seed, "moments"))?;
    for m in &occ.moments {
        for (name, e) in [
            ("moment1", m.mean),
            ("moment2", m.second),
            ("moment3", m.third),
            ("cross_ij", m.cross_ij),
            ("cross_jk", m.cross_jk),
        ] {
            r.row(vec![name.into(), m.n.to_string(), num(e.value), num(e.stderr)]);
        }
    }
    for (name, f) in [("moment1_exponent", occ.mean_fit), ("moment2_exponent", occ.second_fit), ("moment3_exponent", occ.third_fit)] {
        if let Some(f) = f {
            r.row(vec![name.into(), String::new(), num(f.exponent), num(f.fit_stderr)]);
            println!("{name} {:.3} +- {:.3}", f.exponent, f.fit_stderr);
        }
    }
    r.extra("tail", &tail);
    r.extra("mixing", &mix);
    r.extra("moments", &occ);
    Ok(r)
}

pub fn decomposition(cfg: &ExperimentConfig) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let mut r = Report::new(&["n", "exceedance", "stderr", "mean_abs", "mean_abs_stderr"]);
    for (i, &n) in cfg.run.residual_n.iter().enumerate() {
        let st = residual_exceedance(
            &s.sys,
            &s.observable(),
            n,
            cfg.run.residual_threshold,
            cfg.run.samples,
            derive_seed(cfg.run.seed, &format!("residual-{i}")),
        )?;
        println!("n = {n}: P(|r| > {}) = {:.4}, E|r| = {:.5}", st.threshold, st.exceedance.value, st.mean_abs.value);
        r.row(vec![
            n.to_string(),
            num(st.exceedance.value),
            num(st.exceedance.stderr),
            num(st.mean_abs.value),
            num(st.mean_abs.stderr),
        ]);
    }
    Ok(r)
}

pub fn selftest(cfg: &ExperimentConfig, quick: bool, only: &[u8]) -> Result<Report> {
    let sizes = if quick { CheckSizes::quick() } else { CheckSizes::full() };
    let sys = cfg.system()?;
    let ctx = CheckContext::new(sys, cfg.system.bump, &sizes.sigma2)?;
    println!("Sigma^2 = {:.5} +- {:.5}", ctx.big_sigma2(), ctx.capital.sigma2.stderr);
    let ids: Vec<u8> = if only.is_empty() { (1..=12).collect() } else { only.to_vec() };
    let mut r = Report::new(&["id", "name", "passed", "detail"]);
    let mut all = true;
    for id in ids {
        let res = run_check(id, &ctx, &sizes, cfg.run.seed)?;
        println!("{}", res.line());
        all &= res.passed;
        r.row(vec![res.id.to_string(), res.name, res.passed.to_string(), res.detail]);
    }
    r.passed = Some(all);
    r.extra("quick", quick);
    Ok(r)
}
