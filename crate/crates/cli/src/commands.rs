use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use trustgnn::graph::{sidecar_path, TrustGraph};
use trustgnn::model::{predict_distributions, Checkpoint, ModelParams, TrustGnn};
use trustgnn::ndiff::kernels::argmax;
use trustgnn::selfcheck::{run_selfcheck, SelfCheckOptions};
use trustgnn::train::{
    self, evaluate, prepare_data, repeat_report, repeat_runs, report_file_name, write_json, DataSplit, RunReport,
    SweepAxis, TrainConfig,
};

use crate::config::CliConfig;
use crate::{ChecksFailed, UsageError};

fn require_file(path: &Path, what: &str) -> Result<(), UsageError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!(
            "{what} {} does not exist or is not a file",
            path.display()
        )))
    }
}

fn prepare_dir(path: &Path) -> Result<()> {
    if path.exists() && !path.is_dir() {
        return Err(UsageError(format!("{} exists and is not a directory", path.display())).into());
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn load_graph(path: &Path, num_relations: usize) -> Result<TrustGraph> {
    let graph = TrustGraph::load_any(path, num_relations).with_context(|| format!("reading {}", path.display()))?;
    log::info!(
        "{}: {} nodes, {} edges, level counts {:?}",
        path.display(),
        graph.num_nodes(),
        graph.num_edges(),
        graph.relation_histogram()
    );
    Ok(graph)
}

pub fn convert(input: &Path, output: &Path, num_relations: usize) -> Result<()> {
    require_file(input, "input")?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }
    let graph = if sidecar_path(input).is_file() {
        TrustGraph::load_any(input, num_relations)
    } else {
        fs::File::open(input)
            .map_err(Into::into)
            .and_then(|f| TrustGraph::read_raw(f, num_relations))
    }
    .with_context(|| format!("reading {}", input.display()))?;
    graph
        .save(output)
        .with_context(|| format!("writing {}", output.display()))?;
    log::info!(
        "wrote {} ({} nodes, {} edges) and {}",
        output.display(),
        graph.num_nodes(),
        graph.num_edges(),
        sidecar_path(output).display()
    );
    Ok(())
}

fn history_tsv(history: &train::History) -> String {
    let mut out = String::from("epoch\ttrain_loss\tval_loss\n");
    for (e, loss) in history.train_loss.iter().enumerate() {
        let val = history.val_loss.get(e).map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{e}\t{loss}\t{val}\n"));
    }
    out
}

pub fn train(cfg: &CliConfig, repeat: bool, workers: usize) -> Result<()> {
    let dataset = cfg.require_dataset()?;
    require_file(dataset, "dataset")?;
    let out_dir = cfg.require_output_dir()?;
    prepare_dir(out_dir)?;
    let tc = &cfg.train;
    let ckpt_path = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| out_dir.join(report_file_name("checkpoint", tc.variant, tc.seed, "json")));
    if let Some(dir) = ckpt_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }

    let graph = load_graph(dataset, tc.num_relations)?;
    let outcome = train::train(&graph, tc)?;
    Checkpoint::new(tc, &outcome.model, &outcome.params)
        .with_graph(&graph)
        .write(&ckpt_path)
        .with_context(|| format!("writing {}", ckpt_path.display()))?;
    let report = RunReport::from_outcome(&outcome);
    write_json(
        out_dir.join(report_file_name("metrics", tc.variant, tc.seed, "json")),
        &report,
    )?;
    fs::write(
        out_dir.join(report_file_name("history", tc.variant, tc.seed, "tsv")),
        history_tsv(&outcome.history),
    )?;
    let m = &outcome.evaluation.metrics;
    log::info!(
        "test micro-F1 {:.4}, MAE {:.4} on {} edges after {} epochs ({:.1}s); checkpoint {}",
        m.micro_f1,
        m.mae,
        m.num_test,
        outcome.history.epochs_run(),
        outcome.runtime_secs,
        ckpt_path.display()
    );

    if repeat {
        let summary = repeat_runs(&graph, tc, workers)?;
        write_json(
            out_dir.join(report_file_name("summary", tc.variant, tc.seed, "json")),
            &repeat_report(&summary),
        )?;
        log::info!(
            "{} runs ({} failed): micro-F1 {}, MAE {}",
            summary.succeeded,
            summary.failed,
            summary.micro_f1_display(),
            summary.mae_display()
        );
    }
    Ok(())
}

/// Checkpoint, dataset and split rebuilt exactly as at training time.
struct Loaded {
    config: TrainConfig,
    model: TrustGnn,
    params: ModelParams,
    graph: TrustGraph,
    data: DataSplit,
}

fn load_trained(cfg: &CliConfig) -> Result<Loaded> {
    let ckpt_path = cfg.require_checkpoint()?;
    require_file(ckpt_path, "checkpoint")?;
    let dataset = cfg.require_dataset()?;
    require_file(dataset, "dataset")?;
    let mut ckpt = Checkpoint::read(ckpt_path).with_context(|| format!("reading {}", ckpt_path.display()))?;
    ckpt.config = cfg.overlay(&ckpt.config)?;
    let (model, params) = ckpt
        .restore()
        .with_context(|| format!("loading {}", ckpt_path.display()))?;
    let graph = load_graph(dataset, ckpt.config.num_relations)?;
    ckpt.check_graph(&graph)
        .with_context(|| format!("{} does not belong to {}", ckpt_path.display(), dataset.display()))?;
    let data = prepare_data(&graph, &ckpt.config)?;
    Ok(Loaded {
        config: ckpt.config,
        model,
        params,
        graph,
        data,
    })
}

pub fn eval(cfg: &CliConfig) -> Result<()> {
    let out_dir = cfg.require_output_dir()?;
    prepare_dir(out_dir)?;
    let l = load_trained(cfg)?;
    let evaluation = evaluate(&l.model, &l.params, &l.data.propagation, &l.data.split.test)?;
    let m = &evaluation.metrics;
    let report = serde_json::json!({
        "config": l.config,
        "variant": l.config.variant,
        "seed": l.config.seed,
        "split": {
            "fit": l.data.fit.len(),
            "val": l.data.val.len(),
            "test": l.data.split.test.len(),
        },
        "metrics": m,
    });
    let path = out_dir.join(report_file_name("eval", l.config.variant, l.config.seed, "json"));
    write_json(&path, &report)?;
    log::info!(
        "test micro-F1 {:.4}, MAE {:.4}; wrote {}",
        m.micro_f1,
        m.mae,
        path.display()
    );
    Ok(())
}

/// `(src, dst, dense pair or why it could not be resolved)`.
type PairRow = (String, String, std::result::Result<(usize, usize), String>);

pub fn predict(cfg: &CliConfig, pairs: &Path, output: &Path) -> Result<()> {
    require_file(pairs, "pairs file")?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }
    let l = load_trained(cfg)?;
    let index = l.graph.node_index();

    let mut rows: Vec<PairRow> = Vec::new();
    let reader = BufReader::new(fs::File::open(pairs)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split('\t').map(str::trim).collect();
        let [src, dst] = fields.as_slice() else {
            return Err(trustgnn::Error::Parse {
                line: i + 1,
                msg: format!("expected `src<TAB>dst`, found {} fields", fields.len()),
            })
            .with_context(|| format!("reading {}", pairs.display()));
        };
        let resolved = match (index.get(src), index.get(dst)) {
            (Some(&u), Some(&v)) => Ok((u, v)),
            (None, _) => Err(format!("unknown node `{src}`")),
            (_, None) => Err(format!("unknown node `{dst}`")),
        };
        rows.push((src.to_string(), dst.to_string(), resolved));
    }

    let emb = l.model.embed(&l.params, &l.data.propagation)?;
    let known: Vec<(usize, usize)> = rows.iter().filter_map(|r| r.2.clone().ok()).collect();
    let mut dists = predict_distributions(&emb.z_final, &known, &l.params)?.into_iter();

    let r = l.config.num_relations;
    let mut w = BufWriter::new(fs::File::create(output).with_context(|| format!("creating {}", output.display()))?);
    let header: Vec<String> = (0..r).map(|c| format!("p{c}")).collect();
    writeln!(w, "src\tdst\tpredicted_level\t{}", header.join("\t"))?;
    let mut errors = 0;
    for (src, dst, resolved) in &rows {
        match resolved {
            Ok(_) => {
                let p = dists.next().expect("one distribution per resolved pair");
                let cols: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{src}\t{dst}\t{}\t{}", argmax(&p), cols.join("\t"))?;
            }
            Err(why) => {
                errors += 1;
                log::warn!("{src} -> {dst}: {why}");
                writeln!(w, "{src}\t{dst}\terror\t{}", vec!["-"; r].join("\t"))?;
            }
        }
    }
    w.flush()?;
    log::info!(
        "scored {} pairs ({errors} errors); wrote {}",
        rows.len() - errors,
        output.display()
    );
    Ok(())
}

pub fn explain(cfg: &CliConfig, top_k: usize) -> Result<()> {
    if top_k == 0 {
        return Err(UsageError("--top-k must be at least 1".into()).into());
    }
    let out_dir = cfg.require_output_dir()?;
    prepare_dir(out_dir)?;
    let l = load_trained(cfg)?;
    let emb = l.model.embed(&l.params, &l.data.propagation)?;
    let report = train::explain(
        &l.model.spec().chains,
        emb.alpha.as_deref(),
        emb.alpha_bar.as_deref(),
        top_k,
    )?;
    let (variant, seed) = (l.config.variant, l.config.seed);
    write_json(
        out_dir.join(report_file_name("explain", variant, seed, "json")),
        &report,
    )?;
    let csv = out_dir.join(report_file_name("explain", variant, seed, "csv"));
    let mut w = BufWriter::new(fs::File::create(&csv)?);
    report.write_csv(&mut w)?;
    w.flush()?;
    for row in &report.rows {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        log::info!(
            "#{} {}: alpha {} alpha_bar {}",
            row.rank,
            row.label,
            fmt(row.alpha),
            fmt(row.alpha_bar)
        );
    }
    log::info!("wrote {}", csv.display());
    Ok(())
}

pub fn sweep(cfg: &CliConfig, axis: &str, values: &[String], workers: usize) -> Result<()> {
    let axis: SweepAxis = axis.parse().map_err(|e: trustgnn::Error| UsageError(e.to_string()))?;
    for v in values {
        axis.apply(&cfg.train, v)
            .map_err(|e| UsageError(format!("--values {v}: {e}")))?;
    }
    let dataset = cfg.require_dataset()?;
    require_file(dataset, "dataset")?;
    let out_dir = cfg.require_output_dir()?;
    prepare_dir(out_dir)?;
    let graph = load_graph(dataset, cfg.train.num_relations)?;
    let table = train::sweep(&graph, &cfg.train, axis, values, workers)?;
    let stem = format!("sweep-{axis}");
    let tc = &cfg.train;
    write_json(
        out_dir.join(report_file_name(&stem, tc.variant, tc.seed, "json")),
        &table,
    )?;
    let tsv: PathBuf = out_dir.join(report_file_name(&stem, tc.variant, tc.seed, "tsv"));
    fs::write(&tsv, table.to_tsv())?;
    for line in table.to_tsv().lines() {
        log::info!("{line}");
    }
    let failed: Vec<&str> = table.cells.iter().filter_map(|c| c.error.as_deref()).collect();
    if failed.len() == table.cells.len() {
        return Err(trustgnn::Error::RunsFailed {
            total: failed.len(),
            first: failed[0].to_string(),
        }
        .into());
    }
    Ok(())
}

pub fn selfcheck(oracle_graphs: usize, seed: u64) -> Result<()> {
    let report = run_selfcheck(&SelfCheckOptions {
        oracle_graphs,
        seed,
        ..SelfCheckOptions::default()
    });
    println!("{}", report.to_string().trim_end());
    let failed = report.failures().count();
    if failed > 0 {
        for f in report.failures() {
            eprintln!("violated: {}: {}", f.name, f.detail);
        }
        return Err(ChecksFailed(failed).into());
    }
    Ok(())
}
