//! Subcommand implementations: resolve flags against the config file,
//! delegate to the library, write outputs, and echo the effective
//! configuration for replay.

use std::path::{Path, PathBuf};

use regpinn::dataio::{read_dataset, write_dataset, FillValues, RowIssue};
use regpinn::fit::write_fit_report;
use regpinn::models::{DEFAULT_GRID_BZ, DEFAULT_GRID_DP, DEFAULT_GRID_N};
use regpinn::nn::DEFAULT_LAYER_SIZES;
use regpinn::{
    bin_records, filter_range, lambda_sweep, least_squares_fit, mcmc_sample, merge,
    parse_crossings, parse_solarwind, standoff_grid, synth_generate, train_reg_pinn,
    train_vanilla, write_bins, BinSpec, BoundaryModel, CrossingRecord, EmpiricalModel,
    FitProblem, McmcConfig, Mlp, OverfitForm, ParamForm, PenaltyKind, RegModel, ShueForm,
    StopReason, TrainConfig, UniformRange,
};

use crate::config::{
    echo_path, join_floats, parse_float_list, parse_layer_list, resolve, resolve_optional,
    resolve_required, ConfigEcho,
};
use crate::{
    CliError, Context, EvalArgs, FitArgs, GridArgs, IngestArgs, McmcArgs, SweepArgs, SynthArgs,
    TrainArgs, TrainFlags,
};

const TRAIN_KEYS: &[&str] = &[
    "seed",
    "data",
    "eta",
    "epochs",
    "threshold",
    "split",
    "batch",
    "penalty",
    "penalty_strength",
    "elastic_mix",
    "reg",
    "layers",
    "rmsprop_decay",
    "rmsprop_epsilon",
];

fn report_issues(path: &Path, issues: &[RowIssue], verbose: bool) {
    if issues.is_empty() {
        return;
    }
    if verbose {
        for issue in issues {
            eprintln!("{}:{}: {}", path.display(), issue.line, issue.message);
        }
    } else {
        eprintln!(
            "{}: {} row(s) rejected or flagged (rerun with --verbose for details)",
            path.display(),
            issues.len()
        );
    }
}

fn load_dataset(path: &Path, verbose: bool) -> Result<Vec<CrossingRecord>, CliError> {
    let dataset = read_dataset(path)?;
    report_issues(path, &dataset.issues, verbose);
    if dataset.records.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no usable records",
            path.display()
        )));
    }
    Ok(dataset.records)
}

fn finish_echo(echo: &ConfigEcho, path: &Path, verbose: bool) -> Result<(), CliError> {
    echo.write(path)?;
    if verbose {
        say!("{}", echo.render().trim_end());
    }
    Ok(())
}

fn resolve_seed(ctx: &Context) -> Result<u64, CliError> {
    resolve(ctx.seed_flag, &ctx.config, "seed", 0)
}

/// `shue` or `overfit` with published coefficients.
fn resolve_empirical(name: &str) -> Result<EmpiricalModel, CliError> {
    match name {
        "shue" => Ok(EmpiricalModel::Shue(ShueForm::default())),
        "overfit" => Ok(EmpiricalModel::Overfit(OverfitForm::default())),
        other => Err(CliError::Usage(format!(
            "unknown model `{other}`: expected shue or overfit"
        ))),
    }
}

/// `shue`, `overfit`, or a path to a saved network artifact.
fn resolve_model(spec: &str) -> Result<Box<dyn BoundaryModel>, CliError> {
    match spec {
        "shue" | "overfit" => Ok(Box::new(resolve_empirical(spec)?)),
        path => {
            let p = Path::new(path);
            if !p.is_file() {
                return Err(CliError::Usage(format!(
                    "model `{path}` is neither `shue`, `overfit`, nor a model artifact file"
                )));
            }
            Ok(Box::new(Mlp::load(p)?))
        }
    }
}

fn resolve_form(
    flag: &Option<String>,
    ctx: &Context,
    init_flag: &Option<String>,
) -> Result<ParamForm, CliError> {
    let name = resolve(flag.clone(), &ctx.config, "form", "shue".to_string())?;
    let base = match name.as_str() {
        "shue" => ParamForm::Shue(ShueForm::default()),
        "overfit" => ParamForm::Overfit(OverfitForm::default()),
        other => {
            return Err(CliError::Usage(format!(
                "unknown form `{other}`: expected shue or overfit"
            )))
        }
    };
    match resolve_optional(init_flag.clone(), &ctx.config, "init")? {
        None => Ok(base),
        Some(raw) => {
            let values = parse_float_list(&raw, "init")?;
            Ok(base.with_vec(&values)?)
        }
    }
}

/// Free-coefficient mask from a comma-separated name list; absent means
/// every coefficient is free.
fn resolve_free(
    form: &ParamForm,
    flag: &Option<String>,
    ctx: &Context,
) -> Result<Vec<bool>, CliError> {
    let names = form.coefficient_names();
    match resolve_optional::<String>(flag.clone(), &ctx.config, "free")? {
        None => Ok(vec![true; names.len()]),
        Some(raw) => {
            let mut mask = vec![false; names.len()];
            for tok in raw.split(',') {
                let tok = tok.trim();
                let Some(pos) = names.iter().position(|n| *n == tok) else {
                    return Err(CliError::Usage(format!(
                        "unknown coefficient `{tok}` for the {} form (known: {})",
                        form.form_id(),
                        names.join(", ")
                    )));
                };
                mask[pos] = true;
            }
            Ok(mask)
        }
    }
}

fn free_names(form: &ParamForm, mask: &[bool]) -> String {
    form.coefficient_names()
        .iter()
        .zip(mask)
        .filter(|(_, &f)| f)
        .map(|(n, _)| *n)
        .collect::<Vec<_>>()
        .join(",")
}

struct ResolvedTrain {
    data: PathBuf,
    config: TrainConfig,
    penalty_name: String,
    penalty_strength: f64,
    elastic_mix: f64,
    reg_name: String,
}

fn resolve_train_flags(
    flags: &TrainFlags,
    ctx: &Context,
    lambda: Option<f64>,
) -> Result<ResolvedTrain, CliError> {
    let data = resolve_required(flags.data.clone(), &ctx.config, "data")?;
    let penalty_name = resolve(flags.penalty.clone(), &ctx.config, "penalty", "none".to_string())?;
    let penalty_strength =
        resolve(flags.penalty_strength, &ctx.config, "penalty_strength", 1e-4)?;
    let elastic_mix = resolve(flags.elastic_mix, &ctx.config, "elastic_mix", 0.5)?;
    let penalty = match penalty_name.as_str() {
        "none" => PenaltyKind::None,
        "l1" => PenaltyKind::L1 { strength: penalty_strength },
        "l2" => PenaltyKind::L2 { strength: penalty_strength },
        "elastic" => PenaltyKind::Elastic { strength: penalty_strength, mix: elastic_mix },
        other => {
            return Err(CliError::Usage(format!(
                "unknown penalty `{other}`: expected none, l1, l2, or elastic"
            )))
        }
    };
    let reg_name = resolve(flags.reg.clone(), &ctx.config, "reg", "none".to_string())?;
    let regularizer = match reg_name.as_str() {
        "none" => RegModel::None,
        "shue" => RegModel::Shue(ShueForm::default()),
        "overfit" => RegModel::Overfit(OverfitForm::default()),
        other => {
            return Err(CliError::Usage(format!(
                "unknown regularizer `{other}`: expected none, shue, or overfit"
            )))
        }
    };
    let layers = match resolve_optional::<String>(flags.layers.clone(), &ctx.config, "layers")? {
        Some(raw) => parse_layer_list(&raw)?,
        None => DEFAULT_LAYER_SIZES.to_vec(),
    };
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        lambda: lambda.unwrap_or(defaults.lambda),
        eta: resolve(flags.eta, &ctx.config, "eta", defaults.eta)?,
        max_epochs: resolve(flags.epochs, &ctx.config, "epochs", defaults.max_epochs)?,
        epsilon_threshold: resolve(
            flags.threshold,
            &ctx.config,
            "threshold",
            defaults.epsilon_threshold,
        )?,
        split_fraction: resolve(flags.split, &ctx.config, "split", defaults.split_fraction)?,
        seed: resolve_seed(ctx)?,
        batch_size: resolve(flags.batch, &ctx.config, "batch", defaults.batch_size)?,
        penalty,
        regularizer,
        layer_sizes: layers,
        rmsprop_decay: resolve(
            flags.rmsprop_decay,
            &ctx.config,
            "rmsprop_decay",
            defaults.rmsprop_decay,
        )?,
        rmsprop_epsilon: resolve(
            flags.rmsprop_epsilon,
            &ctx.config,
            "rmsprop_epsilon",
            defaults.rmsprop_epsilon,
        )?,
    };
    Ok(ResolvedTrain {
        data,
        config,
        penalty_name,
        penalty_strength,
        elastic_mix,
        reg_name,
    })
}

fn echo_train_keys(echo: &mut ConfigEcho, resolved: &ResolvedTrain) {
    let c = &resolved.config;
    echo.push("data", resolved.data.display());
    echo.push("eta", c.eta);
    echo.push("epochs", c.max_epochs);
    echo.push("threshold", c.epsilon_threshold);
    echo.push("split", c.split_fraction);
    echo.push("batch", c.batch_size);
    echo.push("penalty", &resolved.penalty_name);
    echo.push("penalty_strength", resolved.penalty_strength);
    echo.push("elastic_mix", resolved.elastic_mix);
    echo.push("reg", &resolved.reg_name);
    echo.push(
        "layers",
        c.layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    echo.push("rmsprop_decay", c.rmsprop_decay);
    echo.push("rmsprop_epsilon", c.rmsprop_epsilon);
    echo.push("seed", c.seed);
}

pub fn cmd_ingest(args: &IngestArgs, ctx: &Context) -> Result<(), CliError> {
    ctx.check_keys(
        "ingest",
        &[
            "seed", "crossings", "solarwind", "out", "filter_range", "bins", "bz_width",
            "bz_stride", "dp_width", "dp_stride", "bz_lo", "bz_hi", "dp_lo", "dp_hi",
        ],
    )?;
    let crossings_path: PathBuf =
        resolve_required(args.crossings.clone(), &ctx.config, "crossings")?;
    let solarwind_path: PathBuf =
        resolve_required(args.solarwind.clone(), &ctx.config, "solarwind")?;
    let out: PathBuf = resolve_required(args.out.clone(), &ctx.config, "out")?;
    let do_filter = resolve(args.filter_range, &ctx.config, "filter_range", false)?;
    let bins_out: Option<PathBuf> = resolve_optional(args.bins.clone(), &ctx.config, "bins")?;

    let defaults = BinSpec::default();
    let spec = BinSpec {
        bz_width: resolve(args.bz_width, &ctx.config, "bz_width", defaults.bz_width)?,
        bz_stride: resolve(args.bz_stride, &ctx.config, "bz_stride", defaults.bz_stride)?,
        dp_width: resolve(args.dp_width, &ctx.config, "dp_width", defaults.dp_width)?,
        dp_stride: resolve(args.dp_stride, &ctx.config, "dp_stride", defaults.dp_stride)?,
        bz_range: (
            resolve(args.bz_lo, &ctx.config, "bz_lo", defaults.bz_range.0)?,
            resolve(args.bz_hi, &ctx.config, "bz_hi", defaults.bz_range.1)?,
        ),
        dp_range: (
            resolve(args.dp_lo, &ctx.config, "dp_lo", defaults.dp_range.0)?,
            resolve(args.dp_hi, &ctx.config, "dp_hi", defaults.dp_range.1)?,
        ),
    };
    spec.validate()?;

    let crossings = parse_crossings(&crossings_path)?;
    report_issues(&crossings_path, &crossings.issues, ctx.verbose);
    let solarwind = parse_solarwind(&solarwind_path, FillValues::default())?;
    report_issues(&solarwind_path, &solarwind.issues, ctx.verbose);

    let merged = merge(&crossings.rows, &solarwind.rows);
    let kept_after_merge = merged.records.len();
    let records = if do_filter {
        filter_range(merged.records, &spec)
    } else {
        merged.records
    };

    write_dataset(&out, &records, None)?;
    if let Some(bins_path) = &bins_out {
        let bins = bin_records(&records, &spec)?;
        write_bins(bins_path, &bins)?;
    }

    let mut echo = ConfigEcho::new("ingest");
    echo.push("crossings", crossings_path.display());
    echo.push("solarwind", solarwind_path.display());
    echo.push("out", out.display());
    echo.push("filter_range", do_filter);
    echo.push_optional("bins", bins_out.as_ref().map(|p| p.display()));
    echo.push("bz_width", spec.bz_width);
    echo.push("bz_stride", spec.bz_stride);
    echo.push("dp_width", spec.dp_width);
    echo.push("dp_stride", spec.dp_stride);
    echo.push("bz_lo", spec.bz_range.0);
    echo.push("bz_hi", spec.bz_range.1);
    echo.push("dp_lo", spec.dp_range.0);
    echo.push("dp_hi", spec.dp_range.1);
    finish_echo(&echo, &echo_path(&out), ctx.verbose)?;

    say!(
        "crossings: {} parsed, {} rejected",
        crossings.rows.len(),
        crossings.issues.len()
    );
    say!(
        "solar wind: {} samples, {} with warnings",
        solarwind.rows.len(),
        solarwind.issues.len()
    );
    say!(
        "merged: {} kept, {} dropped (no usable solar-wind window)",
        kept_after_merge, merged.dropped
    );
    if do_filter {
        say!(
            "range filter: {} kept, {} outside the study ranges",
            records.len(),
            kept_after_merge - records.len()
        );
    }
    say!("wrote {} records to {}", records.len(), out.display());
    if let Some(bins_path) = &bins_out {
        say!("wrote bin table to {}", bins_path.display());
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, ctx: &Context) -> Result<(), CliError> {
    ctx.check_keys(
        "synth",
        &[
            "seed", "model", "n", "noise", "out", "truth", "bz_lo", "bz_hi", "dp_lo", "dp_hi",
            "theta_lo", "theta_hi",
        ],
    )?;
    let model_name = resolve(args.model.clone(), &ctx.config, "model", "shue".to_string())?;
    let model = resolve_empirical(&model_name)?;
    let n = resolve(args.n, &ctx.config, "n", 1000)?;
    let noise = resolve(args.noise, &ctx.config, "noise", 0.0)?;
    let seed = resolve_seed(ctx)?;
    let with_truth = resolve(args.truth, &ctx.config, "truth", false)?;
    let out: PathBuf = resolve_required(args.out.clone(), &ctx.config, "out")?;
    let bz = UniformRange::new(
        resolve(args.bz_lo, &ctx.config, "bz_lo", -12.0)?,
        resolve(args.bz_hi, &ctx.config, "bz_hi", 12.0)?,
    )?;
    let dp = UniformRange::new(
        resolve(args.dp_lo, &ctx.config, "dp_lo", 1.0)?,
        resolve(args.dp_hi, &ctx.config, "dp_hi", 7.0)?,
    )?;
    let theta = UniformRange::new(
        resolve(args.theta_lo, &ctx.config, "theta_lo", 0.0)?,
        resolve(args.theta_hi, &ctx.config, "theta_hi", 2.2)?,
    )?;

    let dataset = synth_generate(&model, n, noise, seed, bz, dp, theta)?;
    let truth = with_truth.then_some(dataset.r_true.as_slice());
    write_dataset(&out, &dataset.records, truth)?;

    let mut echo = ConfigEcho::new("synth");
    echo.push("model", &model_name);
    echo.push("n", n);
    echo.push("noise", noise);
    echo.push("seed", seed);
    echo.push("truth", with_truth);
    echo.push("bz_lo", bz.lo);
    echo.push("bz_hi", bz.hi);
    echo.push("dp_lo", dp.lo);
    echo.push("dp_hi", dp.hi);
    echo.push("theta_lo", theta.lo);
    echo.push("theta_hi", theta.hi);
    echo.push("out", out.display());
    finish_echo(&echo, &echo_path(&out), ctx.verbose)?;

    say!(
        "wrote {n} records to {} (model {model_name}, noise {noise}, seed {seed})",
        out.display()
    );
    Ok(())
}

pub fn cmd_fit(args: &FitArgs, ctx: &Context) -> Result<(), CliError> {
    ctx.check_keys(
        "fit",
        &[
            "seed", "data", "form", "free", "init", "bound_scale", "tol", "max_iters", "out",
        ],
    )?;
    let data: PathBuf = resolve_required(args.data.clone(), &ctx.config, "data")?;
    let out: PathBuf = resolve_required(args.out.clone(), &ctx.config, "out")?;
    let form = resolve_form(&args.form, ctx, &args.init)?;
    let free = resolve_free(&form, &args.free, ctx)?;
    let bound_scale = resolve(args.bound_scale, &ctx.config, "bound_scale", 0.5)?;
    let tol = resolve(args.tol, &ctx.config, "tol", 1e-10)?;
    let max_iters = resolve(args.max_iters, &ctx.config, "max_iters", 100)?;

    let records = load_dataset(&data, ctx.verbose)?;
    let problem = FitProblem::with_scaled_bounds(records, form, free.clone(), bound_scale)?;
    let outcome = least_squares_fit(&problem, tol, max_iters)?;
    write_fit_report(&out, &problem, &outcome)?;

    let mut echo = ConfigEcho::new("fit");
    echo.push("data", data.display());
    echo.push("form", form.form_id());
    echo.push("free", free_names(&form, &free));
    echo.push("init", join_floats(&form.to_vec()));
    echo.push("bound_scale", bound_scale);
    echo.push("tol", tol);
    echo.push("max_iters", max_iters);
    echo.push("out", out.display());
    finish_echo(&echo, &echo_path(&out), ctx.verbose)?;

    say!(
        "fit {}: sse {} -> {} in {} iteration(s), converged = {}",
        form.form_id(),
        outcome.initial_sse,
        outcome.sse,
        outcome.n_iters,
        outcome.converged
    );
    let names = outcome.form.coefficient_names();
    for (name, value) in names.iter().zip(outcome.form.to_vec()) {
        say!("  {name} = {value}");
    }
    say!("wrote fit report to {}", out.display());
    Ok(())
}

pub fn cmd_mcmc(args: &McmcArgs, ctx: &Context) -> Result<(), CliError> {
    ctx.check_keys(
        "mcmc",
        &[
            "seed", "data", "form", "free", "init", "bound_scale", "steps", "burn_in",
            "proposal", "likelihood_sigma", "out",
        ],
    )?;
    let data: PathBuf = resolve_required(args.data.clone(), &ctx.config, "data")?;
    let out: PathBuf = resolve_required(args.out.clone(), &ctx.config, "out")?;
    let form = resolve_form(&args.form, ctx, &args.init)?;
    let free = resolve_free(&form, &args.free, ctx)?;
    let bound_scale = resolve(args.bound_scale, &ctx.config, "bound_scale", 0.5)?;
    let steps = resolve(args.steps, &ctx.config, "steps", 20_000)?;
    let burn_in = resolve(args.burn_in, &ctx.config, "burn_in", steps / 5)?;
    let seed = resolve_seed(ctx)?;
    let likelihood_sigma =
        resolve_optional(args.likelihood_sigma, &ctx.config, "likelihood_sigma")?;
    // Default proposal scale: 1% of each free coefficient's magnitude,
    // floored for near-zero coefficients.
    let proposal = match resolve_optional::<String>(args.proposal.clone(), &ctx.config, "proposal")?
    {
        Some(raw) => parse_float_list(&raw, "proposal")?,
        None => form
            .to_vec()
            .iter()
            .zip(&free)
            .filter(|(_, &f)| f)
            .map(|(c, _)| 0.01 * c.abs().max(0.01))
            .collect(),
    };

    let records = load_dataset(&data, ctx.verbose)?;
    let problem = FitProblem::with_scaled_bounds(records, form, free.clone(), bound_scale)?;
    let mcmc_config = McmcConfig {
        n_steps: steps,
        burn_in,
        proposal_sigma: proposal.clone(),
        seed,
        likelihood_sigma,
    };
    let chain = mcmc_sample(&problem, &mcmc_config)?;
    chain.write_csv(&out)?;

    let mut echo = ConfigEcho::new("mcmc");
    echo.push("data", data.display());
    echo.push("form", form.form_id());
    echo.push("free", free_names(&form, &free));
    echo.push("init", join_floats(&form.to_vec()));
    echo.push("bound_scale", bound_scale);
    echo.push("steps", steps);
    echo.push("burn_in", burn_in);
    echo.push("proposal", join_floats(&proposal));
    echo.push_optional("likelihood_sigma", likelihood_sigma);
    echo.push("seed", seed);
    echo.push("out", out.display());
    finish_echo(&echo, &echo_path(&out), ctx.verbose)?;

    if chain.acceptance_rate == 0.0 {
        eprintln!(
            "warning: no proposal was accepted; the chain never moved \
             (proposal scales are likely far too large)"
        );
    }
    say!(
        "sampled {} steps (burn-in {}), acceptance rate {:.3}, noise sigma {}",
        steps, burn_in, chain.acceptance_rate, chain.likelihood_sigma
    );
    for (i, name) in chain.free_names.iter().enumerate() {
        say!(
            "  {name}: posterior mean {} +- {}",
            chain.posterior_mean[i], chain.posterior_std[i]
        );
    }
    say!("wrote chain to {}", out.display());
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, ctx: &Context) -> Result<(), CliError> {
    let mut known: Vec<&str> = TRAIN_KEYS.to_vec();
    known.extend(["lambda", "out_dir"]);
    ctx.check_keys("train", &known)?;
    let lambda = resolve_optional(args.lambda, &ctx.config, "lambda")?;
    let resolved = resolve_train_flags(&args.train, ctx, lambda)?;
    let out_dir: PathBuf = resolve_required(args.out_dir.clone(), &ctx.config, "out_dir")?;

    let records = load_dataset(&resolved.data, ctx.verbose)?;
    // lambda = 0 runs the data-only path; the engine is shared, so the
    // two are bit-identical anyway.
    let result = if resolved.config.lambda == 0.0 {
        train_vanilla(&records, &resolved.config)?
    } else {
        train_reg_pinn(&records, &resolved.config)?
    };
    regpinn::train::write_run_artifacts(&out_dir, &result)?;

    let mut echo = ConfigEcho::new("train");
    echo.push("lambda", resolved.config.lambda);
    echo_train_keys(&mut echo, &resolved);
    echo.push("out_dir", out_dir.display());
    finish_echo(&echo, &out_dir.join("config.txt"), ctx.verbose)?;

    let last = result.history.last();
    say!(
        "trained {} epoch(s), stop reason: {}",
        result.epochs_run, result.stop_reason
    );
    if let Some(b) = last {
        say!(
            "final training loss: l_data {} l_reg {} penalty {} l_total {}",
            b.l_data, b.l_reg, b.penalty, b.l_total
        );
    }
    if let Some(t) = result.test_history.last() {
        say!("final test data loss: {t}");
    }
    say!("wrote run artifacts to {}", out_dir.display());

    if let StopReason::NonFinite { epoch } = result.stop_reason {
        return Err(CliError::Numerical(format!(
            "training loss became non-finite at epoch {epoch}; partial history kept in {}",
            out_dir.display()
        )));
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, ctx: &Context) -> Result<(), CliError> {
    ctx.check_keys("eval", &["seed", "data", "model", "out"])?;
    let data: PathBuf = resolve_required(args.data.clone(), &ctx.config, "data")?;
    let model_spec: String = resolve_required(args.model.clone(), &ctx.config, "model")?;
    let out: PathBuf = resolve_required(args.out.clone(), &ctx.config, "out")?;
    let model = resolve_model(&model_spec)?;

    let records = load_dataset(&data, ctx.verbose)?;
    let dataset_id = data
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| data.display().to_string());
    let report = regpinn::evaluate(model.as_ref(), &records, &dataset_id)?;
    report.write_csv(&out)?;

    let mut echo = ConfigEcho::new("eval");
    echo.push("data", data.display());
    echo.push("model", &model_spec);
    echo.push("out", out.display());
    finish_echo(&echo, &echo_path(&out), ctx.verbose)?;

    say!("{}", report.render_text().trim_end());
    say!("wrote report to {}", out.display());
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, ctx: &Context) -> Result<(), CliError> {
    let mut known: Vec<&str> = TRAIN_KEYS.to_vec();
    known.extend(["lambdas", "out"]);
    ctx.check_keys("sweep", &known)?;
    let resolved = resolve_train_flags(&args.train, ctx, None)?;
    let out: PathBuf = resolve_required(args.out.clone(), &ctx.config, "out")?;
    let lambdas_raw: String = resolve_required(args.lambdas.clone(), &ctx.config, "lambdas")?;
    let lambdas = parse_float_list(&lambdas_raw, "lambdas")?;

    let records = load_dataset(&resolved.data, ctx.verbose)?;
    let sweep = lambda_sweep(&records, &resolved.config, &lambdas)?;
    sweep.write_csv(&out)?;

    let mut echo = ConfigEcho::new("sweep");
    echo.push("lambdas", join_floats(&lambdas));
    echo_train_keys(&mut echo, &resolved);
    echo.push("out", out.display());
    finish_echo(&echo, &echo_path(&out), ctx.verbose)?;

    for row in &sweep.rows {
        say!(
            "lambda {}: rmse {} (80% train) / {} (20% train)",
            row.lambda, row.rmse_mask20, row.rmse_mask80
        );
    }
    if let (Some(a), Some(b)) = (sweep.best_lambda(false), sweep.best_lambda(true)) {
        say!("best lambda: {a} (80% train), {b} (20% train)");
    }
    say!("wrote sweep table to {}", out.display());
    Ok(())
}

pub fn cmd_grid(args: &GridArgs, ctx: &Context) -> Result<(), CliError> {
    ctx.check_keys(
        "grid",
        &[
            "seed", "model", "bz_lo", "bz_hi", "dp_lo", "dp_hi", "n_bz", "n_dp", "out",
        ],
    )?;
    let model_spec: String = resolve_required(args.model.clone(), &ctx.config, "model")?;
    let out: PathBuf = resolve_required(args.out.clone(), &ctx.config, "out")?;
    let bz_lo = resolve(args.bz_lo, &ctx.config, "bz_lo", DEFAULT_GRID_BZ.0)?;
    let bz_hi = resolve(args.bz_hi, &ctx.config, "bz_hi", DEFAULT_GRID_BZ.1)?;
    let dp_lo = resolve(args.dp_lo, &ctx.config, "dp_lo", DEFAULT_GRID_DP.0)?;
    let dp_hi = resolve(args.dp_hi, &ctx.config, "dp_hi", DEFAULT_GRID_DP.1)?;
    let n_bz = resolve(args.n_bz, &ctx.config, "n_bz", DEFAULT_GRID_N)?;
    let n_dp = resolve(args.n_dp, &ctx.config, "n_dp", DEFAULT_GRID_N)?;
    let model = resolve_model(&model_spec)?;

    let grid = standoff_grid(model.as_ref(), (bz_lo, bz_hi), (dp_lo, dp_hi), n_bz, n_dp)?;
    grid.write_csv(&out)?;
    let sidecar = out.with_extension("json");
    grid.write_sidecar(&sidecar)?;

    let mut echo = ConfigEcho::new("grid");
    echo.push("model", &model_spec);
    echo.push("bz_lo", bz_lo);
    echo.push("bz_hi", bz_hi);
    echo.push("dp_lo", dp_lo);
    echo.push("dp_hi", dp_hi);
    echo.push("n_bz", n_bz);
    echo.push("n_dp", n_dp);
    echo.push("out", out.display());
    finish_echo(&echo, &echo_path(&out), ctx.verbose)?;

    say!(
        "wrote {n_bz}x{n_dp} standoff grid for `{model_spec}` to {} (sidecar {})",
        out.display(),
        sidecar.display()
    );
    Ok(())
}
