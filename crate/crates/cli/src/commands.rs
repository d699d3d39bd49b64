use std::collections::BTreeMap;

use causalgrid::falsify::permutation_test;
use causalgrid::gbt::{
    blocked_split, evaluate, evaluate_periods, random_search, BlockedSplit, Metrics, PeriodMetrics, SearchSpace, Trial,
};
use causalgrid::scm::{crisis_impacts, CrisisImpact};
use causalgrid::seed::derive_seed;
use causalgrid::shapflow::{
    build_flow_graph, dependence_data, explain_rows, top_k_edges, EdgeKind, MechanismKind, Method, RankedEdge,
    DEFAULT_ORDERING_CAP,
};
use causalgrid::stratify::{stratified_slopes, write_plot_csv};
use causalgrid::synthgen::{generate, preset};
use causalgrid::timeseries::parse_instant;
use causalgrid::{CausalGraph, EdgeAttribution, FeatureFrame, GbtModel, Hyperparams, LinearScm};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::io::{load_frame, load_inputs, num, usage, CliResult, FileEntry, Outputs};
use crate::{Cli, Command, FlowArgs, GbtArgs, Mechanisms, SplitArgs, DEFAULT_SEED};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let mut out = Outputs::new(&cli.out)?;
    match &cli.command {
        Command::Synth { preset: name, hours } => synth(&mut out, name, *hours, cli.seed),
        Command::Fit { data } => {
            let (g, frame) = load_inputs(data)?;
            fit(&mut out, "", &g, &frame).map(drop)
        }
        Command::Effects { src, dst, data } => {
            let (g, frame) = load_inputs(data)?;
            let (scm, _) = LinearScm::fit(&g, &frame)?;
            effects(&mut out, "effects.json", &scm, &frame, src, dst)
        }
        Command::Impact { data, target, crisis } => {
            let (g, frame) = load_inputs(data)?;
            let (scm, _) = LinearScm::fit(&g, &frame)?;
            impact(&mut out, "", &scm, &frame, target, instant(crisis)?)
        }
        Command::Falsify { data, n_perm, alpha } => {
            let (g, frame) = load_inputs(data)?;
            falsify(&mut out, "falsification.json", &g, &frame, *n_perm, *alpha, seed)
        }
        Command::Simpson { data, x, y, confounder, strata } => {
            let frame = load_frame(data, None, None)?;
            simpson(&mut out, "", &frame, x, y, confounder, *strata)
        }
        Command::Gbt { data, target, gbt: args } => {
            let (g, frame) = load_inputs(data)?;
            let target = resolve_target(&g, target.as_deref())?;
            gbt(&mut out, "", &g, &frame, &target, args, seed).map(drop)
        }
        Command::Shapflow { data, target, flow } => {
            let (g, frame) = load_inputs(data)?;
            let target = resolve_target(&g, target.as_deref())?;
            let sub = ancestral_subgraph(&g, &target)?;
            let split = split_rows(&frame, &flow.split, seed)?;
            let model = match &flow.model {
                Some(path) => GbtModel::load(path)?,
                None => {
                    let model = train_default(&sub, &frame, &target, &split, seed)?;
                    out.write_bytes("model.json", model.to_json()?.as_bytes())?;
                    model
                }
            };
            shapflow(&mut out, "", &sub, &frame, &model, &split, flow, seed)
        }
        Command::Report {
            data,
            target,
            n_perm,
            alpha,
            effects: pairs,
            simpson: strat,
            gbt: gbt_args,
            mechanism,
            instances,
            orderings,
            background,
            k,
        } => {
            let flow = FlowArgs {
                split: gbt_args.split.clone(),
                model: None,
                mechanism: *mechanism,
                instances: *instances,
                orderings: *orderings,
                background: *background,
                k: *k,
            };
            let plan = ReportPlan {
                target: target.as_deref(),
                n_perm: *n_perm,
                alpha: *alpha,
                effects: pairs,
                simpson: strat.as_deref(),
                gbt: gbt_args,
                flow: &flow,
            };
            report(&mut out, data, &plan, seed)
        }
    }
}

fn instant(text: &str) -> CliResult<DateTime<Utc>> {
    parse_instant(text).map_err(|e| usage(format!("--crisis: {e}")))
}

fn join(prefix: &str, name: &str) -> String {
    format!("{prefix}{name}")
}

fn synth(out: &mut Outputs, name: &str, hours: Option<usize>, seed: Option<u64>) -> CliResult<()> {
    let mut spec = preset(name).map_err(|e| usage(e.to_string()))?;
    if let Some(h) = hours {
        spec = spec.with_hours(h);
    }
    if let Some(s) = seed {
        spec = spec.with_seed(s);
    }
    let (frame, truth) = generate(&spec)?;
    out.csv("data.csv", &frame)?;
    out.json("ground_truth.json", &truth)?;
    out.write_bytes("graph.txt", spec.graph.to_dsl().as_bytes())?;
    Ok(())
}

fn fit(out: &mut Outputs, prefix: &str, g: &CausalGraph, frame: &FeatureFrame) -> CliResult<LinearScm> {
    let (scm, report) = LinearScm::fit(g, frame)?;
    out.write_bytes(&join(prefix, "scm.json"), scm.to_json()?.as_bytes())?;
    out.json(&join(prefix, "fit_report.json"), &report)?;
    Ok(scm)
}

fn effects(out: &mut Outputs, rel: &str, scm: &LinearScm, frame: &FeatureFrame, src: &str, dst: &str) -> CliResult<()> {
    let cmp = scm.compare_regression(frame, src, dst)?;
    out.json(rel, &cmp)?;
    Ok(())
}

fn impact(
    out: &mut Outputs,
    prefix: &str,
    scm: &LinearScm,
    frame: &FeatureFrame,
    targets: &[String],
    split: DateTime<Utc>,
) -> CliResult<()> {
    let targets: Vec<String> = if targets.is_empty() {
        scm.graph().sinks().into_iter().map(str::to_string).collect()
    } else {
        targets.to_vec()
    };
    let mut table: BTreeMap<String, Vec<CrisisImpact>> = BTreeMap::new();
    for t in &targets {
        table.insert(t.clone(), crisis_impacts(scm, frame, split, t)?);
    }
    out.json(&join(prefix, "impact.json"), &table)?;
    let rows = table.values().flatten().map(|i| {
        vec![
            i.target.clone(),
            i.source.clone(),
            num(i.coefficient),
            num(i.mean_before),
            num(i.mean_during),
            num(i.delta),
            num(i.impact),
        ]
    });
    out.table(
        &join(prefix, "impact.csv"),
        &["target", "source", "coefficient", "mean_before", "mean_during", "delta", "impact"],
        rows,
    )?;
    Ok(())
}

fn falsify(
    out: &mut Outputs,
    rel: &str,
    g: &CausalGraph,
    frame: &FeatureFrame,
    n_perm: usize,
    alpha: f64,
    seed: u64,
) -> CliResult<()> {
    let report = permutation_test(g, frame, n_perm, alpha, derive_seed(seed, "cli/falsify"))?;
    out.json(rel, &report)?;
    Ok(())
}

fn simpson(
    out: &mut Outputs,
    prefix: &str,
    frame: &FeatureFrame,
    x: &str,
    y: &str,
    confounder: &str,
    strata: usize,
) -> CliResult<()> {
    let fit = stratified_slopes(frame, x, y, confounder, strata)?;
    out.json(&join(prefix, "simpson.json"), &fit)?;
    let mut buf = Vec::new();
    write_plot_csv(frame, &fit, &mut buf)?;
    out.write_bytes(&join(prefix, "simpson.csv"), &buf)?;
    Ok(())
}

fn resolve_target(g: &CausalGraph, target: Option<&str>) -> CliResult<String> {
    match target {
        Some(t) => {
            g.index_of(t)?;
            Ok(t.to_string())
        }
        None => match g.sinks().as_slice() {
            [only] => Ok(only.to_string()),
            many => Err(usage(format!("graph has sinks {}; pick one with --target", many.join(", ")))),
        },
    }
}

/// `target` with its ancestors, in the original node order.
fn ancestral_subgraph(g: &CausalGraph, target: &str) -> CliResult<CausalGraph> {
    let t = g.index_of(target)?;
    let mut keep = g.ancestors_mask(t);
    keep[t] = true;
    let nodes: Vec<&str> = (0..g.n_nodes()).filter(|&i| keep[i]).map(|i| g.name(i)).collect();
    let edges: Vec<(&str, &str)> = g
        .edge_indices()
        .iter()
        .filter(|&&(a, b)| keep[a] && keep[b])
        .map(|&(a, b)| (g.name(a), g.name(b)))
        .collect();
    Ok(CausalGraph::new(nodes, edges)?)
}

fn features_of<'a>(sub: &'a CausalGraph, target: &str) -> Vec<&'a str> {
    sub.nodes().iter().map(String::as_str).filter(|n| *n != target).collect()
}

/// The same seed gives the `gbt` and `shapflow` stages the same split.
fn split_rows(frame: &FeatureFrame, args: &SplitArgs, seed: u64) -> CliResult<BlockedSplit> {
    Ok(blocked_split(frame.n_rows(), args.block_hours, args.test_frac, derive_seed(seed, "cli/split"))?)
}

fn train_default(
    sub: &CausalGraph,
    frame: &FeatureFrame,
    target: &str,
    split: &BlockedSplit,
    seed: u64,
) -> CliResult<GbtModel> {
    let features = features_of(sub, target);
    Ok(GbtModel::train(
        frame,
        &features,
        target,
        &split.train,
        &Hyperparams::default(),
        derive_seed(seed, "cli/shapflow/model"),
    )?)
}

#[derive(Serialize)]
struct SplitSummary {
    block_hours: usize,
    test_frac: f64,
    n_blocks: usize,
    n_train: usize,
    n_test: usize,
    realized_test_frac: f64,
    test_blocks: Vec<usize>,
}

#[derive(Serialize)]
struct GbtReport {
    target: String,
    features: Vec<String>,
    split: SplitSummary,
    best_index: usize,
    best: Hyperparams,
    train: Metrics,
    test: Metrics,
    /// Test-set metrics before and during the crisis.
    test_periods: Vec<PeriodMetrics>,
    train_loss_non_increasing: bool,
    trials: Vec<Trial>,
}

fn gbt(
    out: &mut Outputs,
    prefix: &str,
    g: &CausalGraph,
    frame: &FeatureFrame,
    target: &str,
    args: &GbtArgs,
    seed: u64,
) -> CliResult<(GbtModel, BlockedSplit)> {
    let crisis = instant(&args.crisis)?;
    let sub = ancestral_subgraph(g, target)?;
    let features = features_of(&sub, target);
    let split = split_rows(frame, &args.split, seed)?;
    let res = random_search(
        &SearchSpace::default(),
        args.trials,
        frame,
        &features,
        target,
        &split,
        derive_seed(seed, "cli/gbt/search"),
    )?;
    let report = GbtReport {
        target: target.to_string(),
        features: features.iter().map(|f| f.to_string()).collect(),
        split: SplitSummary {
            block_hours: split.block_hours,
            test_frac: split.test_frac,
            n_blocks: split.n_blocks(),
            n_train: split.train.len(),
            n_test: split.test.len(),
            realized_test_frac: split.realized_test_frac(),
            test_blocks: (0..split.n_blocks()).filter(|&b| split.test_blocks[b]).collect(),
        },
        best_index: res.best_index,
        best: res.best,
        train: evaluate(&res.model, frame, &split.train)?,
        test: evaluate(&res.model, frame, &split.test)?,
        test_periods: evaluate_periods(&res.model, frame, &split.test, crisis)?,
        train_loss_non_increasing: res.model.train_loss.windows(2).all(|w| w[1] <= w[0]),
        trials: res.trials.clone(),
    };
    out.write_bytes(&join(prefix, "gbt_model.json"), res.model.to_json()?.as_bytes())?;
    out.json(&join(prefix, "gbt_report.json"), &report)?;
    Ok((res.model, split))
}

#[derive(Serialize)]
struct ShapflowReport<'a> {
    target: &'a str,
    mechanism: MechanismKind,
    method: Method,
    n_background: usize,
    /// Natural log of the number of depth-first orderings.
    log_orderings: f64,
    attributions: &'a [EdgeAttribution],
}

fn kind_name(kind: EdgeKind) -> &'static str {
    match kind {
        EdgeKind::Source => "source",
        EdgeKind::Noise => "noise",
        EdgeKind::Causal => "causal",
        EdgeKind::Model => "model",
    }
}

#[allow(clippy::too_many_arguments)]
fn shapflow(
    out: &mut Outputs,
    prefix: &str,
    sub: &CausalGraph,
    frame: &FeatureFrame,
    model: &GbtModel,
    split: &BlockedSplit,
    args: &FlowArgs,
    seed: u64,
) -> CliResult<()> {
    if args.instances == 0 {
        return Err(usage("--instances must be positive"));
    }
    let kind = match args.mechanism {
        Mechanisms::Gbt => MechanismKind::Gbt,
        Mechanisms::Linear => MechanismKind::Linear,
    };
    let fg = build_flow_graph(
        sub,
        frame,
        kind,
        model,
        &split.train,
        args.background,
        derive_seed(seed, "cli/shapflow/flow"),
    )?;
    let pool = if split.test.is_empty() { &split.train } else { &split.test };
    let rows: Vec<usize> = if args.instances >= pool.len() {
        pool.clone()
    } else {
        (0..args.instances).map(|i| pool[i * pool.len() / args.instances]).collect()
    };
    let log_orderings = fg.log_orderings();
    let method = if log_orderings <= DEFAULT_ORDERING_CAP.ln() {
        Method::Exact
    } else {
        Method::MonteCarlo { n_orderings: args.orderings, seed: derive_seed(seed, "cli/shapflow/orderings") }
    };
    let attrs = explain_rows(&fg, frame, &rows, method)?;
    out.json(
        &join(prefix, "attributions.json"),
        &ShapflowReport {
            target: fg.sink_name(),
            mechanism: kind,
            method,
            n_background: fg.background().len(),
            log_orderings,
            attributions: &attrs,
        },
    )?;
    let top: Vec<RankedEdge> = top_k_edges(&attrs, args.k)?;
    out.json(&join(prefix, "top_edges.json"), &top)?;
    out.table(
        &join(prefix, "top_edges.csv"),
        &["rank", "from", "to", "kind", "mean_abs", "mean"],
        top.iter().map(|r| {
            vec![
                r.rank.to_string(),
                r.from.clone(),
                r.to.clone(),
                kind_name(r.kind).to_string(),
                num(r.mean_abs),
                num(r.mean),
            ]
        }),
    )?;
    for r in &top {
        let data = dependence_data(&attrs, &r.from, &r.to)?;
        out.table(
            &join(prefix, &format!("dependence/{}--{}.csv", r.from, r.to)),
            &["instance", "source_value", "flow"],
            attrs.iter().zip(&data).map(|(a, &(x, f))| {
                vec![a.instance.map_or(String::new(), |i| i.to_string()), num(x), num(f)]
            }),
        )?;
    }
    Ok(())
}

struct ReportPlan<'a> {
    target: Option<&'a str>,
    n_perm: usize,
    alpha: f64,
    effects: &'a [String],
    simpson: Option<&'a str>,
    gbt: &'a GbtArgs,
    flow: &'a FlowArgs,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    targets: &'a [String],
    crisis: String,
    alpha: f64,
    n_perm: usize,
    /// Every file in the report directory except this manifest.
    files: &'a [FileEntry],
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Deserialize)]
struct PreviousManifest {
    files: Vec<PreviousFile>,
}

#[derive(Deserialize)]
struct PreviousFile {
    path: String,
}

/// Deletes what an earlier report in `root` listed, so a rerun with fewer
/// stages leaves no stale files behind. Anything else in `root` is kept.
fn clear_previous_report(root: &std::path::Path) {
    let manifest = root.join(MANIFEST);
    let Ok(text) = std::fs::read_to_string(&manifest) else {
        return;
    };
    if let Ok(prev) = serde_json::from_str::<PreviousManifest>(&text) {
        for f in prev.files {
            let rel = std::path::Path::new(&f.path);
            if rel.components().all(|c| matches!(c, std::path::Component::Normal(_))) {
                let _ = std::fs::remove_file(root.join(rel));
            }
        }
    }
    let _ = std::fs::remove_file(manifest);
}

fn report(out: &mut Outputs, data: &crate::DataArgs, plan: &ReportPlan<'_>, seed: u64) -> CliResult<()> {
    let crisis = instant(&plan.gbt.crisis)?;
    // validate cheap arguments before the expensive stages
    let pairs = plan
        .effects
        .iter()
        .map(|p| match p.split_once(':') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
            _ => Err(usage(format!("--effect expects SRC:DST, got `{p}`"))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    let strat = plan
        .simpson
        .map(|s| match s.split(':').collect::<Vec<_>>().as_slice() {
            [x, y, c] if !x.is_empty() && !y.is_empty() && !c.is_empty() => Ok((x.to_string(), y.to_string(), c.to_string())),
            _ => Err(usage(format!("--simpson expects X:Y:CONFOUNDER, got `{s}`"))),
        })
        .transpose()?;

    let (g, frame) = load_inputs(data)?;
    let targets: Vec<String> = match plan.target {
        Some(t) => vec![resolve_target(&g, Some(t))?],
        None => g.sinks().into_iter().map(str::to_string).collect(),
    };
    clear_previous_report(out.root());

    let scm = fit(out, "fit/", &g, &frame)?;
    for (a, b) in &pairs {
        effects(out, &format!("effects/{a}--{b}.json"), &scm, &frame, a, b)?;
    }
    impact(out, "impact/", &scm, &frame, &targets, crisis)?;
    falsify(out, "falsify/falsification.json", &g, &frame, plan.n_perm, plan.alpha, seed)?;
    if let Some((x, y, c)) = &strat {
        simpson(out, "simpson/", &frame, x, y, c, causalgrid::stratify::DEFAULT_STRATA)?;
    }
    for t in &targets {
        let (model, split) = gbt(out, &format!("gbt/{t}/"), &g, &frame, t, plan.gbt, seed)?;
        let sub = ancestral_subgraph(&g, t)?;
        shapflow(out, &format!("shapflow/{t}/"), &sub, &frame, &model, &split, plan.flow, seed)?;
    }
    let files = out.files().to_vec();
    out.json(
        MANIFEST,
        &Manifest {
            seed,
            targets: &targets,
            crisis: causalgrid::timeseries::format_instant(&crisis),
            alpha: plan.alpha,
            n_perm: plan.n_perm,
            files: &files,
        },
    )?;
    Ok(())
}
