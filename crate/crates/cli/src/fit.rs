use std::fs;
use std::path::PathBuf;
use std::thread;

use anyhow::{anyhow, bail, Context, Result};
use modereg::elbmr::{elbmr_log_posterior, fit_elbmr};
use modereg::model::ols_init;
use modereg::nbmr::{default_base_endpoint, fit_nbmr, NbmrHyper};
use modereg::pbmr::{
    default_pbmr_config, fit_pbmr, ols_proposal_scales, pbmr_log_posterior, BetaPrior, PriorSpec, SigmaPrior,
};
use modereg::summary::{render_table, summary_report};
use modereg::window::{data_scales, ScaleSource, WindowRule};
use modereg::{io, Chain, Dataset, ModeParams, Rng, SamplerConfig};

use crate::{write_json, Endpoint, FitArgs, Method};

fn check_flags(args: &FitArgs) -> Result<()> {
    if args.chains == 0 || args.iters == 0 {
        bail!("--chains and --iters must be positive");
    }
    let fixed = args.sigma.is_some() || args.sigma_rule().is_some();
    match args.method {
        Method::Elbmr if !fixed => bail!("elbmr requires --sigma or --sigma-rule"),
        Method::Nbmr if fixed => bail!("nbmr infers the error scale; set the base endpoint with --dp-d instead"),
        _ => {}
    }
    if args.sigma_prior.is_some() && args.method != Method::Pbmr {
        bail!("--sigma-prior applies only to --method pbmr");
    }
    if args.method != Method::Nbmr && (args.truncation.is_some() || args.dp_d.is_some() || args.dp_m_prior.is_some()) {
        bail!("--truncation, --dp-d and --dp-m-prior apply only to --method nbmr");
    }
    Ok(())
}

fn beta_priors(args: &FitArgs, p: usize) -> Result<Vec<BetaPrior<f64>>> {
    let sd = match (args.beta_prior_sd, args.method) {
        (Some(sd), _) => sd,
        (None, Method::Nbmr) => 100.0,
        (None, _) => return Ok(vec![BetaPrior::Flat; p]),
    };
    Ok(vec![BetaPrior::normal(0.0, sd)?; p])
}

/// Everything a chain needs besides its index.
enum Model {
    Pbmr { prior: PriorSpec<f64>, config: SamplerConfig<f64> },
    Nbmr { hyper: NbmrHyper<f64>, config: SamplerConfig<f64> },
    Elbmr { prior: PriorSpec<f64>, sigma: f64, config: SamplerConfig<f64> },
}

impl Model {
    fn config(&self) -> &SamplerConfig<f64> {
        match self {
            Model::Pbmr { config, .. } | Model::Nbmr { config, .. } | Model::Elbmr { config, .. } => config,
        }
    }

    fn start_is_valid(&self, data: &Dataset<f64>, init: &[f64]) -> bool {
        let p = data.p();
        match self {
            Model::Pbmr { prior, .. } => {
                let sigma = init.get(p).copied().unwrap_or(prior.sigma_prior.initial_value());
                ModeParams::new(init[..p].to_vec(), sigma)
                    .and_then(|m| pbmr_log_posterior(&m, data, prior))
                    .is_ok_and(|lp| lp.is_finite())
            }
            Model::Nbmr { hyper, .. } => data.residuals(init).iter().all(|r| r.abs() < hyper.d),
            Model::Elbmr { prior, sigma, .. } => elbmr_log_posterior(init, data, prior, *sigma).is_finite(),
        }
    }

    /// Chain 0 starts at the least-squares fit; later chains start from a
    /// jittered copy when that point is admissible.
    fn run_chain(&self, data: &Dataset<f64>, c: usize, seed: u64) -> Result<(Chain<f64>, bool)> {
        let mut rng = Rng::new(seed);
        let mut config = self.config().clone();
        if c > 0 {
            let mut init = config.init.clone();
            for (x, s) in init.iter_mut().zip(&config.initial_scales).take(data.p()) {
                *x += s * rng.standard_normal::<f64>();
            }
            if self.start_is_valid(data, &init) {
                config.init = init;
            }
        }
        match self {
            Model::Pbmr { prior, .. } => Ok((fit_pbmr(data, prior, &config, &mut rng)?, false)),
            Model::Nbmr { hyper, .. } => {
                let fit = fit_nbmr(data, hyper, &config, &mut rng)?;
                Ok((fit.chain, fit.hit_truncation))
            }
            Model::Elbmr { prior, sigma, .. } => Ok((fit_elbmr(data, prior, *sigma, &config, &mut rng)?, false)),
        }
    }
}

fn build_model(args: &FitArgs, data: &Dataset<f64>) -> Result<Model> {
    let source = if args.raw_scale { ScaleSource::Response } else { ScaleSource::OlsResiduals };
    let scales = data_scales(data, source)?;
    let n = data.n();
    let fixed_sigma = match (args.sigma, args.sigma_rule()) {
        (Some(s), _) => Some(s),
        (None, Some(rule)) => Some(rule.apply(n, &scales)?),
        (None, None) => None,
    };
    let priors = beta_priors(args, data.p())?;
    match args.method {
        Method::Pbmr => {
            let sigma_prior = match fixed_sigma {
                Some(s) => SigmaPrior::fixed(s)?,
                None => {
                    let (lo, hi) = args
                        .sigma_prior
                        .unwrap_or((Endpoint::Rule(WindowRule::Silverman), Endpoint::Rule(WindowRule::Chebyshev)));
                    let value = |e: Endpoint| match e {
                        Endpoint::Value(v) => Ok(v),
                        Endpoint::Rule(r) => r.apply(n, &scales),
                    };
                    SigmaPrior::uniform(value(lo)?, value(hi)?)?
                }
            };
            let prior = PriorSpec { beta_priors: priors, sigma_prior };
            let config = default_pbmr_config(data, &prior, args.burnin, args.iters)?;
            Ok(Model::Pbmr { prior, config })
        }
        Method::Nbmr => {
            let d = match args.dp_d {
                Some(d) => d,
                None => WindowRule::Chebyshev.apply(n, &scales)?.max(default_base_endpoint(data)?),
            };
            let mut hyper = NbmrHyper::new(data.p(), d);
            hyper.beta_priors = priors;
            if let Some(k) = args.truncation {
                hyper.truncation = k;
            }
            if let Some(m) = args.dp_m_prior {
                hyper.m_prior = m;
            }
            let config = SamplerConfig::new(args.burnin, args.iters, ols_init(data)?, ols_proposal_scales(data)?);
            Ok(Model::Nbmr { hyper, config })
        }
        Method::Elbmr => {
            let sigma = fixed_sigma.expect("checked by check_flags");
            let prior = PriorSpec { beta_priors: priors, sigma_prior: SigmaPrior::fixed(sigma)? };
            let config = SamplerConfig::new(args.burnin, args.iters, ols_init(data)?, ols_proposal_scales(data)?);
            Ok(Model::Elbmr { prior, sigma, config })
        }
    }
}

fn prefixed(prefix: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run_fit(args: &FitArgs) -> Result<()> {
    check_flags(args)?;
    let data: Dataset<f64> = io::read_dataset_path(&args.data, &args.response, !args.no_intercept)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let model = build_model(args, &data)?;

    let results: Vec<Result<(Chain<f64>, bool)>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..args.chains)
            .map(|c| {
                let (model, data) = (&model, &data);
                let seed = args.seed.wrapping_add(c as u64);
                scope.spawn(move || model.run_chain(data, c, seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("chain thread panicked")))).collect()
    });
    let mut chains = Vec::with_capacity(args.chains);
    for (c, r) in results.into_iter().enumerate() {
        let (chain, hit) = r.with_context(|| format!("chain {c}"))?;
        if hit {
            eprintln!("warning: chain {c} occupied the last mixture component; consider a larger --truncation");
        }
        chains.push(chain);
    }

    for (c, chain) in chains.iter().enumerate() {
        let path = prefixed(&args.out, &format!(".chain{c}.csv"));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        io::write_chain(file, chain)?;
    }
    let report = summary_report(&chains, args.method.name(), args.seed)?;
    write_json(&prefixed(&args.out, ".summary.json"), &report)?;
    if args.table {
        print!("{}", render_table(&report));
    }
    Ok(())
}
