//! Verb implementations. Each merges flags over `--config`, then calls the library.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use paramprobe::acrt::OptimizerKind;
use paramprobe::acrt::robustness_table as build_table;
use paramprobe::acrt::train_from;
use paramprobe::data::TargetKind;
use paramprobe::indicator::{theorem2_bound, ErrorBoundInput};
use paramprobe::indicator::{DensityValue, EtaDistribution};
use paramprobe::indicator::{estimate_indicator_montecarlo_with, McOptions};
use paramprobe::indicator::estimate_indicator_gradient_split;
use paramprobe::model::{param_groups_by, ActivationKind, Architecture, LossSpec, Normalization};
use paramprobe::report::{render_report, Report, ReportFormat, SvgOptions};
use paramprobe::scan::{ConstraintTemplate, ScanConfig};
use paramprobe::{
    apply_corruption, build_model, eval_loss, load_checkpoint, load_dataset, random_corruption, save_checkpoint,
    AcrtConfig, CorruptionConstraint, Dataset, DatasetKind, DatasetSource, FlatParams, GroupAxis, ModelSpec, Network,
    NormOrder, RngState, Split, Variant,
};
use serde_json::json;

use crate::settings::{merge, parse_enum, resolve_seed};
use crate::{
    AcrtCmd, BoundCmd, CorruptCmd, CorruptionArgs, DataArgs, EtaCmd, InspectCmd, McCmd, ModelArgs, ReportArgs,
    ScanCmd, SubspaceArgs, TableCmd, TrainCmd,
};

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_data(args: &DataArgs, seed: u64) -> Result<Dataset> {
    let kind: DatasetKind = args.dataset.as_deref().unwrap_or("two-moons").parse()?;
    let mut src = DatasetSource::synthetic(kind, args.points.unwrap_or(1000), args.data_seed.unwrap_or(seed));
    src.paths = args.data_path.clone().unwrap_or_default();
    src.noise = args.noise;
    if let Some(f) = args.split_fraction {
        src.split_fraction = f;
    }
    if let Some(t) = &args.targets {
        src.targets = parse_enum::<TargetKind>("target kind", t)?;
    }
    Ok(load_dataset(&src)?)
}

fn output_width(data: &Dataset) -> Result<usize> {
    if let Some(c) = data.classes {
        return Ok(c);
    }
    match &data.train.targets {
        paramprobe::Targets::Values(t) => Ok(t.row_len()),
        paramprobe::Targets::Classes(_) => Err(anyhow!("cannot infer the output width; pass --layers")),
    }
}

fn model_spec(args: &ModelArgs, data: &Dataset, seed: u64) -> Result<ModelSpec> {
    let arch: Architecture = parse_enum("architecture", args.arch.as_deref().unwrap_or("mlp"))?;
    let activation: ActivationKind = parse_enum("activation", args.activation.as_deref().unwrap_or("tanh"))?;
    let normalization: Normalization = parse_enum("normalization", args.normalization.as_deref().unwrap_or("none"))?;
    let default_loss = if data.classes.is_some() { "cross-entropy" } else { "mse" };
    let loss: LossSpec = parse_enum("loss", args.loss.as_deref().unwrap_or(default_loss))?;
    let layer_sizes = match &args.layers {
        Some(l) => l.clone(),
        None => {
            let shape = data.input_shape();
            let out = output_width(data)?;
            match arch {
                Architecture::Mlp => vec![shape.iter().product(), 16, 16, out],
                Architecture::LinearSoftmax => vec![shape.iter().product(), out],
                Architecture::ConvnetSmall => vec![shape[0], 8, out],
            }
        }
    };
    let spec = ModelSpec {
        architecture: arch,
        layer_sizes,
        activation,
        normalization,
        loss,
        seed: args.model_seed.unwrap_or(seed),
    };
    spec.validate()?;
    Ok(spec)
}

/// Model and parameters from `--checkpoint`, or freshly initialized from the spec flags.
fn load_model(args: &ModelArgs, data: &Dataset, seed: u64) -> Result<(Network, FlatParams, ModelSpec)> {
    match &args.checkpoint {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            let (net, _) = build_model(&ck.header.model_spec)?;
            Ok((net, ck.params, ck.header.model_spec))
        }
        None => {
            let spec = model_spec(args, data, seed)?;
            let (net, params) = build_model(&spec)?;
            Ok((net, params, spec))
        }
    }
}

fn norm_order(p: Option<&str>) -> Result<NormOrder> {
    Ok(p.unwrap_or("2").parse()?)
}

fn split(s: Option<&str>, default: Split) -> Result<Split> {
    Ok(match s {
        Some(s) => s.parse()?,
        None => default,
    })
}

fn mask_for(params: &FlatParams, sub: &SubspaceArgs) -> Result<Vec<usize>> {
    let Some(group) = &sub.group else {
        return Ok((0..params.len()).collect());
    };
    let axis: GroupAxis = sub.axis.as_deref().unwrap_or("kind").parse()?;
    param_groups_by(params, axis)
        .into_iter()
        .find(|(label, _)| label == group)
        .map(|(_, mask)| mask)
        .ok_or_else(|| anyhow!("no parameter group `{group}` on the {axis:?} axis"))
}

fn constraint(params: &FlatParams, c: &CorruptionArgs, sub: &SubspaceArgs) -> Result<CorruptionConstraint> {
    let mask = mask_for(params, sub)?;
    let eps = c.epsilon.ok_or_else(|| anyhow!("--epsilon is required"))?;
    let n = c.n.unwrap_or(mask.len());
    Ok(CorruptionConstraint::new(norm_order(c.p.as_deref())?, eps, n, mask)?)
}

fn report_format(r: &ReportArgs) -> Result<ReportFormat> {
    Ok(r.format.as_deref().unwrap_or("csv").parse()?)
}

fn write_report(report: Report<'_>, r: &ReportArgs, svg: &SvgOptions) -> Result<()> {
    let text = render_report(report, report_format(r)?, svg)?;
    match &r.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn run_training(t: &TrainCmd, config: AcrtConfig, data: &Dataset, spec: &ModelSpec, net: &Network, init: FlatParams) -> Result<()> {
    let mut log_file = match &t.schedule.log {
        Some(path) => Some(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?)),
        None => None,
    };
    let outcome = train_from(net, init, data, &config, log_file.as_mut().map(|w| w as &mut dyn Write))?;
    if let Some(mut w) = log_file {
        w.flush()?;
    }
    if let Some(path) = &t.schedule.out {
        save_checkpoint(path, spec, &outcome.params)?;
    }
    let last = outcome.log.last();
    print_json(&json!({
        "meta": outcome.meta,
        "epochs": outcome.log.len(),
        "final": last,
        "checkpoint": t.schedule.out,
    }))
}

fn schedule_config(t: &TrainCmd, seed: u64) -> Result<AcrtConfig> {
    let s = &t.schedule;
    let mut config = AcrtConfig::baseline(s.lr.unwrap_or(0.1), s.epochs.unwrap_or(50), s.batch_size.unwrap_or(32), seed);
    if let Some(o) = &s.optimizer {
        config.optimizer = o.parse::<OptimizerKind>()?;
    }
    if let Some(m) = s.momentum {
        config.momentum = m;
    }
    Ok(config)
}

pub fn train(cmd: &TrainCmd) -> Result<()> {
    let t: TrainCmd = merge(cmd, cmd.common.config.as_deref())?;
    let seed = resolve_seed(t.common.seed)?;
    let data = load_data(&t.data, seed)?;
    let (net, init, spec) = load_model(&t.model, &data, seed)?;
    let config = schedule_config(&t, seed)?;
    run_training(&t, config, &data, &spec, &net, init)
}

pub fn acrt_train(cmd: &AcrtCmd) -> Result<()> {
    let a: AcrtCmd = merge(cmd, cmd.train.common.config.as_deref())?;
    let seed = resolve_seed(a.train.common.seed)?;
    let data = load_data(&a.train.data, seed)?;
    let (net, init, spec) = load_model(&a.train.model, &data, seed)?;
    let base = schedule_config(&a.train, seed)?;
    let variant: Variant = a.variant.as_deref().unwrap_or("direct-lstar").parse()?;
    let epsilon = a.corruption.epsilon.ok_or_else(|| anyhow!("--epsilon is required"))?;
    let alpha = a.alpha.unwrap_or(0.5);
    let mut config = match variant {
        Variant::DirectLstar => base.direct(alpha, epsilon),
        Variant::GradReg => base.grad_reg(a.lambda.unwrap_or(alpha * epsilon), epsilon),
        Variant::Baseline => base,
    };
    config.corruption.p = norm_order(a.corruption.p.as_deref())?;
    config.corruption.n = a.corruption.n;
    if let Some(w) = a.warmup {
        config.warmup_epochs = w;
    }
    if let Some(d) = a.hvp_delta {
        config.hvp_delta = d;
    }
    run_training(&a.train, config, &data, &spec, &net, init)
}

pub fn corrupt(cmd: &CorruptCmd) -> Result<()> {
    let c: CorruptCmd = merge(cmd, cmd.common.config.as_deref())?;
    let seed = resolve_seed(c.common.seed)?;
    let data = load_data(&c.data, seed)?;
    let (net, params, spec) = load_model(&c.model, &data, seed)?;
    let cons = constraint(&params, &c.corruption, &c.subspace)?;
    let batch = data.split(split(c.subspace.grad_split.as_deref(), Split::Train)?);
    let (corrupted, summary) = match c.mode.as_deref().unwrap_or("gradient") {
        "gradient" => {
            let est = estimate_indicator_gradient_split(&net, &params, batch, batch, &cons)?;
            let corrupted = apply_corruption(&params, &est.corruption)?;
            let summary = json!({
                "mode": "gradient",
                "base_loss": est.base_loss,
                "delta_loss": est.delta_loss,
                "first_order": est.first_order,
                "ratio": est.ratio,
                "nnz": est.corruption.nnz(),
            });
            (corrupted, summary)
        }
        "random" => {
            let mut rng = RngState::new(seed);
            let a = random_corruption(&cons, &mut rng)?;
            let corrupted = apply_corruption(&params, &a)?;
            let base_loss = eval_loss(&net, params.values(), batch)?;
            let delta_loss = eval_loss(&net, corrupted.values(), batch)? - base_loss;
            (corrupted, json!({ "mode": "random", "base_loss": base_loss, "delta_loss": delta_loss, "nnz": a.nnz() }))
        }
        other => bail!("unknown corruption mode `{other}` (gradient | random)"),
    };
    if let Some(path) = &c.out {
        save_checkpoint(path, &spec, &corrupted)?;
    }
    print_json(&summary)
}

pub fn mc_random(cmd: &McCmd) -> Result<()> {
    let m: McCmd = merge(cmd, cmd.common.config.as_deref())?;
    let seed = resolve_seed(m.common.seed)?;
    let data = load_data(&m.data, seed)?;
    let (net, params, _) = load_model(&m.model, &data, seed)?;
    let cons = constraint(&params, &m.corruption, &m.subspace)?;
    let batch = data.split(split(m.subspace.grad_split.as_deref(), Split::Train)?);
    let opts = McOptions { jobs: m.jobs.unwrap_or(1), antithetic: m.antithetic.unwrap_or(false) };
    let mut rng = RngState::new(seed);
    let summary = estimate_indicator_montecarlo_with(&net, &params, batch, &cons, m.trials.unwrap_or(1000), &mut rng, opts)?;
    write_report(Report::MonteCarlo(&summary), &m.report, &SvgOptions::default())
}

fn svg_options(bounds: Option<&[f64]>) -> Result<SvgOptions> {
    Ok(SvgOptions {
        bounds: match bounds {
            None => None,
            Some([lo, hi]) if lo < hi => Some((*lo, *hi)),
            Some(_) => bail!("--svg-bounds takes `low,high` with low < high"),
        },
    })
}

pub fn scan(cmd: &ScanCmd) -> Result<()> {
    let s: ScanCmd = merge(cmd, cmd.common.config.as_deref())?;
    let seed = resolve_seed(s.common.seed)?;
    let data = load_data(&s.data, seed)?;
    let (net, params, _) = load_model(&s.model, &data, seed)?;
    let cfg = ScanConfig {
        axis: s.axis.as_deref().unwrap_or("kind").parse()?,
        eps_list: s.eps.clone().unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]),
        template: ConstraintTemplate { p: norm_order(s.p.as_deref())?, n: s.n },
        grad_split: split(s.grad_split.as_deref(), Split::Train)?,
    };
    let report = paramprobe::scan(&net, &params, &data, &cfg)?;
    write_report(Report::Scan(&report), &s.report, &svg_options(s.svg_bounds.as_deref())?)
}

pub fn robustness_table(cmd: &TableCmd) -> Result<()> {
    let t: TableCmd = merge(cmd, cmd.common.config.as_deref())?;
    let seed = resolve_seed(t.common.seed)?;
    let data = load_data(&t.data, seed)?;
    let base_path = t.baseline.as_deref().ok_or_else(|| anyhow!("--baseline is required"))?;
    let acrt_path = t.acrt.as_deref().ok_or_else(|| anyhow!("--acrt is required"))?;
    let base = load_checkpoint(base_path)?;
    let acrt = load_checkpoint(acrt_path)?;
    if base.header.param_group_table != acrt.header.param_group_table {
        bail!("{} and {} hold different parameter layouts", base_path.display(), acrt_path.display());
    }
    let (net, _) = build_model(&base.header.model_spec)?;
    let eps = t.eps.clone().unwrap_or_else(|| vec![0.0, 1e-2, 1e-1, 5e-1]);
    let rows = build_table(
        &net,
        &base.params,
        &acrt.params,
        &data,
        &eps,
        norm_order(t.p.as_deref())?,
        split(t.grad_split.as_deref(), Split::Eval)?,
    )?;
    write_report(Report::Robustness(&rows), &t.report, &SvgOptions::default())
}

pub fn eta(cmd: &EtaCmd, cdf: bool) -> Result<()> {
    let e: EtaCmd = merge(cmd, cmd.common.config.as_deref())?;
    let dist = EtaDistribution::new(e.k.ok_or_else(|| anyhow!("--k is required"))?)?;
    let xs = e.x.clone().ok_or_else(|| anyhow!("--x is required"))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "x,{}", if cdf { "cdf" } else { "density" })?;
    for x in xs {
        let v = if cdf {
            paramprobe::report::format_real(dist.cdf(x)?)
        } else {
            match dist.density(x)? {
                DensityValue::Finite(v) => paramprobe::report::format_real(v),
                DensityValue::Unbounded => "inf".to_string(),
            }
        };
        writeln!(out, "{},{v}", paramprobe::report::format_real(x))?;
    }
    Ok(())
}

pub fn bound(cmd: &BoundCmd) -> Result<()> {
    let b: BoundCmd = merge(cmd, cmd.common.config.as_deref())?;
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| anyhow!("--{flag} is required"));
    let k = b.k.ok_or_else(|| anyhow!("--k is required"))?;
    let input = ErrorBoundInput::new(
        norm_order(b.p.as_deref())?.as_f64(),
        b.n.unwrap_or(k),
        k,
        need(b.epsilon, "epsilon")?,
        need(b.smoothness, "smoothness")?,
        need(b.grad_norm, "grad-norm")?,
    )?;
    print_json(&serde_json::to_value(theorem2_bound(&input)?)?)
}

pub fn inspect(cmd: &InspectCmd) -> Result<()> {
    let ck = load_checkpoint(Path::new(&cmd.path))?;
    let v = ck.params.values();
    let l2 = paramprobe::norms::l2_norm(v);
    let max_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    print_json(&json!({
        "header": ck.header,
        "stats": { "l2": l2, "max_abs": max_abs },
    }))
}
