use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::{random_partition, split_edges, Edge, EdgeSplit, TrustGraph};
use crate::model::{predict_distributions, ModelParams, TrustGnn};
use crate::ndiff::{kernels, AdamConfig, AdamState, Tensor};

const VAL_SALT: u64 = 0x7661_6c5f_7370_6c74;
const INIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Edge partition for one run. Messages only travel along `fit` edges, so
/// neither validation nor test labels leak into the representations.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub split: EdgeSplit,
    pub fit: Vec<Edge>,
    pub val: Vec<Edge>,
    pub propagation: TrustGraph,
}

pub fn prepare_data(graph: &TrustGraph, config: &TrainConfig) -> Result<DataSplit> {
    config.validate()?;
    if graph.num_relations() != config.num_relations {
        return Err(Error::invalid(format!(
            "graph has {} relations, configuration expects {}",
            graph.num_relations(),
            config.num_relations
        )));
    }
    let split = split_edges(graph.edges(), config.train_ratio, config.seed)?;
    let (val, fit) = if config.val_fraction > 0.0 {
        random_partition(&split.train, config.val_fraction, config.seed ^ VAL_SALT)
    } else {
        (Vec::new(), split.train.clone())
    };
    if fit.is_empty() {
        return Err(Error::invalid("no edges left to fit after the validation carve-out"));
    }
    let propagation = graph.with_edges(&fit)?;
    Ok(DataSplit {
        split,
        fit,
        val,
        propagation,
    })
}

/// Per-epoch losses. `val_loss[e]` is measured on the parameters that
/// produced `train_loss[e]`, before that epoch's update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl History {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: ModelParams,
    pub history: History,
}

pub fn init_params(model: &TrustGnn, seed: u64) -> ModelParams {
    model.init_params(&mut ChaCha8Rng::seed_from_u64(seed ^ INIT_SALT))
}

fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) {
    let norm = grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Full-batch Adam on `fit`, with early stopping on `val` when it is
/// non-empty. On early stopping the parameters of the best validation epoch
/// are returned.
pub fn fit(
    model: &TrustGnn,
    mut params: ModelParams,
    graph: &TrustGraph,
    fit: &[Edge],
    val: &[Edge],
    config: &TrainConfig,
) -> Result<FitOutcome> {
    let shapes: Vec<[usize; 2]> = params
        .entries()
        .iter()
        .filter(|p| p.trainable)
        .map(|p| p.value.shape())
        .collect();
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &shapes);
    let mut history = History::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut since_best = 0;

    for epoch in 0..config.epochs {
        let (mut tape, pv, fwd, loss) = model.model_loss(&params, graph, fit)?;
        let train_loss = tape.value(loss).item();
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        history.train_loss.push(train_loss);

        if !val.is_empty() {
            let v = model.loss(&mut tape, &fwd, &pv, val)?;
            let val_loss = tape.value(v).item();
            history.val_loss.push(val_loss);
            if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
                best = Some((val_loss, params.clone()));
                history.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    history.stopped_early = true;
                    log::info!("early stop at epoch {epoch}, best epoch {:?}", history.best_epoch);
                    break;
                }
            }
        }
        if epoch % 10 == 0 || epoch + 1 == config.epochs {
            match history.val_loss.last() {
                Some(v) => log::info!("epoch {epoch}: train loss {train_loss:.5}, val loss {v:.5}"),
                None => log::info!("epoch {epoch}: train loss {train_loss:.5}"),
            }
        }

        let mut grads = tape.backward(loss)?;
        drop(fwd);
        let mut flat: Vec<Tensor> = params
            .entries()
            .iter()
            .zip(pv.vars())
            .filter(|(p, _)| p.trainable)
            .map(|(_, &v)| grads.take(v).expect("trainable leaf has a gradient"))
            .collect();
        drop(grads);
        drop(tape);
        if flat.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }
        if let Some(c) = config.grad_clip {
            clip_global_norm(&mut flat, c);
        }
        let mut targets: Vec<&mut Tensor> = params
            .entries_mut()
            .iter_mut()
            .filter(|p| p.trainable)
            .map(|p| &mut p.value)
            .collect();
        let refs: Vec<&Tensor> = flat.iter().collect();
        adam.step(&mut targets, &refs)?;
    }

    if let Some((_, best_params)) = best {
        params = best_params;
    }
    Ok(FitOutcome { params, history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub src: usize,
    pub dst: usize,
    pub truth: usize,
    pub predicted: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub predictions: Vec<Prediction>,
}

/// Scores labelled edges with representations computed on `propagation`.
pub fn evaluate(
    model: &TrustGnn,
    params: &ModelParams,
    propagation: &TrustGraph,
    edges: &[Edge],
) -> Result<Evaluation> {
    if edges.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let emb = model.embed(params, propagation)?;
    let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.src, e.dst)).collect();
    let dists = predict_distributions(&emb.z_final, &pairs, params)?;
    let predictions: Vec<Prediction> = edges
        .iter()
        .zip(dists)
        .map(|(e, p)| Prediction {
            src: e.src,
            dst: e.dst,
            truth: e.rel,
            predicted: kernels::argmax(&p),
            probabilities: p,
        })
        .collect();
    let truth: Vec<usize> = predictions.iter().map(|p| p.truth).collect();
    let predicted: Vec<usize> = predictions.iter().map(|p| p.predicted).collect();
    Ok(Evaluation {
        metrics: Metrics::compute(&truth, &predicted, model.spec().num_relations)?,
        predictions,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub model: TrustGnn,
    pub params: ModelParams,
    pub data: DataSplit,
    pub history: History,
    pub evaluation: Evaluation,
    pub runtime_secs: f64,
}

/// Split, fit and evaluate on the held-out test edges.
pub fn train(graph: &TrustGraph, config: &TrainConfig) -> Result<TrainOutcome> {
    let start = Instant::now();
    let data = prepare_data(graph, config)?;
    let model = TrustGnn::new(config.model_spec(graph.num_nodes())?)?;
    let params = init_params(&model, config.seed);
    log::info!(
        "training {} on {} fit / {} val / {} test edges, {} chain types, {} parameters",
        config.variant,
        data.fit.len(),
        data.val.len(),
        data.split.test.len(),
        model.spec().chains.len(),
        params.num_scalars()
    );
    let FitOutcome { params, history } = fit(&model, params, &data.propagation, &data.fit, &data.val, config)?;
    let mut evaluation = evaluate(&model, &params, &data.propagation, &data.split.test)?;
    let runtime_secs = start.elapsed().as_secs_f64();
    evaluation.metrics.loss_history = history.train_loss.clone();
    evaluation.metrics.runtime_secs = runtime_secs;
    Ok(TrainOutcome {
        config: config.clone(),
        model,
        params,
        data,
        history,
        evaluation,
        runtime_secs,
    })
}
