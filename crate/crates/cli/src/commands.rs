use std::path::Path;

use pota_core::labels::labels_from_plan;
use pota_core::metrics::{accuracy, nmi, LabelPair};
use pota_core::pipeline::{pseudo_label_bench, run_pota, synth_dataset, BenchReport, Dataset, Labeler, RunConfig};
use pota_core::similarity::cosine_matrix;
use pota_core::solver::{caot_solve, BInit, CaotParams, OtProblem};
use pota_core::Mat;
use serde::Serialize;

use crate::config;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::{BenchArgs, DataArgs, EmbeddingFormat, EvalArgs, RunArgs, SolveArgs, SynthArgs};

#[derive(Serialize)]
struct SolveReport<'a> {
    n: usize,
    k: usize,
    params: &'a CaotParams,
    objective: f64,
    b: &'a [f64],
    objective_trace: &'a [f64],
    step_sizes: &'a [f64],
    labels: &'a [usize],
}

pub fn solve(args: &SolveArgs) -> CliResult<()> {
    let p = io::read_matrix(&args.probs)?;
    let s = match &args.similarity {
        Some(path) => io::read_matrix(path)?,
        None => cosine_matrix(&p)?,
    };
    let params = CaotParams {
        eps1: args.eps1,
        eps2: args.eps2,
        eps3: args.eps3,
        t1: args.t1,
        t2: args.t2,
        newton_iters: args.newton_iters,
        b_init: args.seed.map_or(BInit::Uniform, BInit::Random),
        ..CaotParams::default()
    };
    params.validate()?;
    let prob = OtProblem::with_uniform_marginal(p, s)?;
    let plan = caot_solve(&prob, &params)?;
    let labels = labels_from_plan(&plan.q).into_vec();

    let out = &args.out;
    io::write(&out.join("coupling.csv"), io::matrix_csv(&plan.q, false))?;
    io::write(&out.join("marginal.txt"), io::values_text(&plan.b))?;
    io::write(&out.join("trace.txt"), io::values_text(&plan.objective_trace))?;
    io::write(&out.join("labels.txt"), io::labels_text(&labels))?;
    let objective = *plan.objective_trace.last().expect("trace holds the initial value");
    io::write_json(
        &out.join("report.json"),
        &SolveReport {
            n: prob.n(),
            k: prob.k(),
            params: &params,
            objective,
            b: &plan.b,
            objective_trace: &plan.objective_trace,
            step_sizes: &plan.step_sizes,
            labels: &labels,
        },
    )?;
    println!("solved {}x{} problem: objective {:.6}, {} outer steps", prob.n(), prob.k(), objective, plan.step_sizes.len());
    println!("b = [{}]", plan.b.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "));
    Ok(())
}

fn load_dataset(args: &DataArgs) -> CliResult<Dataset> {
    if let Some(spec) = &args.synth {
        return Ok(synth_dataset(&config::parse_synth(spec)?)?);
    }
    let path = args
        .embeddings
        .as_ref()
        .ok_or_else(|| CliError::Input("missing embeddings: pass --embeddings PATH or --synth SPEC".into()))?;
    let v0 = io::read_matrix(path)?;
    let view = |p: &Option<std::path::PathBuf>| p.as_deref().map_or_else(|| Ok(v0.clone()), io::read_matrix);
    let v1 = view(&args.view1)?;
    let v2 = view(&args.view2)?;
    let y = args.labels.as_deref().map(io::read_labels).transpose()?;
    let k = match (args.k, &y) {
        (Some(k), _) => k,
        (None, Some(y)) => y.iter().max().map_or(0, |m| m + 1),
        (None, None) => return Err(CliError::Input("--k is required when no labels are given".into())),
    };
    Ok(Dataset::new(v0, v1, v2, y, k)?)
}

#[derive(Serialize)]
struct PipelineOutput<'a> {
    resolved_config: String,
    report: &'a pota_core::pipeline::RunReport,
}

pub fn pipeline(args: &RunArgs) -> CliResult<()> {
    let cfg = config::load(args.config.as_deref(), &args.overrides)?;
    let data = load_dataset(&args.data)?;
    let report = run_pota(&data, &cfg)?;
    let resolved = config::render(&cfg);
    let out = &args.out;
    io::write(&out.join("config.resolved"), &resolved)?;
    io::write(&out.join("labels.txt"), io::labels_text(&report.labels))?;
    io::write_json(&out.join("report.json"), &PipelineOutput { resolved_config: resolved.clone(), report: &report })?;

    print!("{resolved}");
    let warm = report.epochs.iter().filter(|e| e.stage == pota_core::losses::Stage::Warmup).count();
    println!("epochs: {} ({} warm-up)", report.epochs.len(), warm);
    if let Some(last) = report.epochs.last() {
        println!("last epoch loss: {:.6}", last.total);
    }
    if let (Some(acc), Some(nmi), Some(km)) = (report.final_acc, report.final_nmi, report.kmeans_acc) {
        println!("k-means ACC {km:.4}");
        println!("final ACC {acc:.4}  NMI {nmi:.4}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SeedScores {
    seed: u64,
    acc: [f64; 3],
    nmi: [f64; 3],
}

#[derive(Serialize)]
struct BenchOutput<'a> {
    methods: [&'static str; 3],
    resolved_config: String,
    seeds: Vec<SeedScores>,
    mean_acc: [f64; 3],
    mean_nmi: [f64; 3],
    first: &'a BenchReport,
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    if args.seeds == 0 {
        return Err(CliError::Input("--seeds must be at least 1".into()));
    }
    let base_cfg = config::load(args.run.config.as_deref(), &args.run.overrides)?;
    let base_synth = args.run.data.synth.as_deref().map(config::parse_synth).transpose()?;
    let fixed = if base_synth.is_none() { Some(load_dataset(&args.run.data)?) } else { None };
    if fixed.as_ref().is_some_and(|d| d.y_true.is_none()) {
        return Err(CliError::Input("the benchmark needs ground-truth labels (--labels)".into()));
    }

    let mut reports = Vec::new();
    let mut seeds = Vec::new();
    for i in 0..args.seeds {
        let cfg = RunConfig { seed: base_cfg.seed + i, ..base_cfg.clone() };
        let data = match &base_synth {
            Some(spec) => {
                let mut spec = spec.clone();
                spec.seed += i;
                synth_dataset(&spec)?
            }
            None => fixed.clone().expect("loaded above"),
        };
        let rep = pseudo_label_bench(&data, &cfg)?;
        let pick = |f: fn(&pota_core::pipeline::LabelerScore) -> f64| Labeler::ALL.map(|m| f(rep.score(m)));
        seeds.push(SeedScores { seed: cfg.seed, acc: pick(|s| s.acc), nmi: pick(|s| s.nmi) });
        reports.push(rep);
    }
    let mean = |f: fn(&SeedScores) -> [f64; 3]| {
        let mut m = [0.0; 3];
        for s in &seeds {
            for (acc, v) in m.iter_mut().zip(f(s)) {
                *acc += v / seeds.len() as f64;
            }
        }
        m
    };
    let (mean_acc, mean_nmi) = (mean(|s| s.acc), mean(|s| s.nmi));
    let first = &reports[0];
    let out = &args.run.out;
    for m in Labeler::ALL {
        io::write(&out.join(format!("coupling_{}.csv", m.name())), io::matrix_csv(&first.score(m).coupling, false))?;
    }
    io::write(&out.join("subset.txt"), io::labels_text(&first.subset))?;
    io::write_json(
        &out.join("bench.json"),
        &BenchOutput {
            methods: Labeler::ALL.map(Labeler::name),
            resolved_config: config::render(&base_cfg),
            seeds,
            mean_acc,
            mean_nmi,
            first,
        },
    )?;
    println!("{:<12} {:>8} {:>8}", "method", "ACC", "NMI");
    for (i, m) in Labeler::ALL.iter().enumerate() {
        println!("{:<12} {:>8.4} {:>8.4}", m.name(), mean_acc[i], mean_nmi[i]);
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    n: usize,
    acc: f64,
    nmi: f64,
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let truth = io::read_labels(&args.truth)?;
    let pred = io::read_labels(&args.pred)?;
    let pair = LabelPair::new(&truth, &pred)?;
    let report = EvalReport { n: truth.len(), acc: accuracy(&pair), nmi: nmi(&pair) };
    println!("ACC {:.4}", report.acc);
    println!("NMI {:.4}", report.nmi);
    if let Some(path) = &args.out {
        io::write_json(path, &report)?;
    }
    Ok(())
}

fn write_embedding(path: &Path, m: &Mat, format: EmbeddingFormat) -> CliResult<()> {
    match format {
        EmbeddingFormat::Csv => io::write(path, io::matrix_csv(m, true)),
        EmbeddingFormat::Bin => io::write(path, io::embedding_binary(m)),
    }
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let data = synth_dataset(&config::parse_synth(&args.spec)?)?;
    let ext = match args.format {
        EmbeddingFormat::Csv => "csv",
        EmbeddingFormat::Bin => "bin",
    };
    for (name, m) in [("v0", &data.v0), ("v1", &data.v1), ("v2", &data.v2)] {
        write_embedding(&args.out.join(format!("{name}.{ext}")), m, args.format)?;
    }
    io::write(&args.out.join("labels.txt"), io::labels_text(data.y_true.as_deref().unwrap_or_default()))?;
    println!("wrote {} samples of dimension {} to {}", data.n(), data.dim(), args.out.display());
    Ok(())
}
