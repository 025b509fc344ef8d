use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use super::{ModelParams, ModelSpec, ParamVars, Variant};
use crate::error::{Error, Result};
use crate::graph::{ChainType, Direction, Edge, TrustGraph};
use crate::ndiff::{kernels, Tape, Tensor, Var};

/// Guard for unit normalization of relation embeddings.
pub const UNIT_EPS: f64 = 1e-12;

/// `H = X_node W_node` and `r_i = normalize(x_edge_i W_edge_i)` for every
/// relation.
pub fn transform_attributes(tape: &mut Tape, pv: &ParamVars, num_relations: usize) -> Result<(Var, Vec<Var>)> {
    let h = tape.matmul(pv.get("node_attr")?, pv.get("w_node")?)?;
    let edge_attr = pv.get("edge_attr")?;
    let mut relations = Vec::with_capacity(num_relations);
    for i in 0..num_relations {
        let x = tape.gather_rows(edge_attr, &[i])?;
        let raw = tape.matmul(x, pv.edge(i)?)?;
        relations.push(tape.unit_normalize(raw, UNIT_EPS)?);
    }
    Ok((h, relations))
}

/// `r_t1 ∘ ... ∘ r_tk`.
pub fn compose_rotation(tape: &mut Tape, relations: &[Var], chain: &ChainType) -> Result<Var> {
    let mut rels = chain.rels().iter();
    let first = *rels.next().ok_or_else(|| Error::invalid("empty chain type"))?;
    let mut rho = relations[first];
    for &t in rels {
        rho = tape.complex_mul(rho, relations[t])?;
    }
    Ok(rho)
}

/// Caches walk sums by hop prefix so chain types sharing a prefix (trustee)
/// or suffix (trustor) share sparse products. Valid for a single `H`.
#[derive(Debug, Default)]
pub struct ReachMemo {
    cache: HashMap<(Direction, Vec<usize>), Var>,
}

impl ReachMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reach(
        &mut self,
        tape: &mut Tape,
        graph: &TrustGraph,
        chain: &ChainType,
        direction: Direction,
        h: Var,
    ) -> Result<Var> {
        graph.check_chain(chain)?;
        let hops = TrustGraph::hop_order(chain, direction);
        let mut x = h;
        for i in 1..=hops.len() {
            let key = (direction, hops[..i].to_vec());
            x = match self.cache.get(&key) {
                Some(&cached) => cached,
                None => {
                    let step = Arc::new(graph.relation_step(hops[i - 1], direction));
                    let next = tape.linear_map(x, step)?;
                    self.cache.insert(key, next);
                    next
                }
            };
        }
        Ok(x)
    }
}

/// Rotated walk sum for one chain type: `reach(H) ∘ ρ` for the trustee role,
/// `reach(H) ∘ conj(ρ)` for the trustor role.
pub fn propagate_chain_type(
    tape: &mut Tape,
    graph: &TrustGraph,
    chain: &ChainType,
    direction: Direction,
    h: Var,
    relations: &[Var],
    memo: &mut ReachMemo,
) -> Result<Var> {
    let reach = memo.reach(tape, graph, chain, direction, h)?;
    let mut rho = compose_rotation(tape, relations, chain)?;
    if direction == Direction::Trustor {
        rho = tape.conj(rho)?;
    }
    tape.complex_mul(reach, rho)
}

/// `(H + messages) W_P`.
pub fn aggregate_chain_type(tape: &mut Tape, h: Var, messages: Var, w_chain: Var) -> Result<Var> {
    let summed = tape.add(h, messages)?;
    tape.matmul(summed, w_chain)
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub w: Var,
    pub b: Var,
    pub q: Var,
}

impl AttentionVars {
    pub fn from_params(pv: &ParamVars, trustor: bool) -> Result<Self> {
        let suffix = if trustor { "_bar" } else { "" };
        Ok(Self {
            w: pv.get(&format!("attn_w{suffix}"))?,
            b: pv.get(&format!("attn_b{suffix}"))?,
            q: pv.get(&format!("attn_q{suffix}"))?,
        })
    }
}

/// Softmax over chain types of `mean_v qᵀ tanh(h_v^P W + b)`, as a
/// `1 x #types` row.
pub fn attention_weights(tape: &mut Tape, per_type: &[Var], attn: &AttentionVars) -> Result<Var> {
    if per_type.is_empty() {
        return Err(Error::invalid("attention over zero chain types"));
    }
    let mut scores = Vec::with_capacity(per_type.len());
    for &hp in per_type {
        let proj = tape.matmul(hp, attn.w)?;
        let shifted = tape.add_row(proj, attn.b)?;
        let act = tape.tanh(shifted)?;
        let s = tape.matmul(act, attn.q)?;
        scores.push(tape.mean(s)?);
    }
    let row = tape.concat(&scores)?;
    tape.softmax(row)
}

/// `Σ_j weights[j] · per_type[j]`.
fn weighted_sum(tape: &mut Tape, per_type: &[Var], weights: Var) -> Result<Var> {
    let mut acc = tape.scale_by_entry(per_type[0], weights, 0)?;
    for (j, &hp) in per_type.iter().enumerate().skip(1) {
        let term = tape.scale_by_entry(hp, weights, j)?;
        acc = tape.add(acc, term)?;
    }
    Ok(acc)
}

/// Role sums `Z`, `Z̄` and `Z_final = (Z ∥ Z̄) W_fuse`. A missing role is
/// left out of the concatenation.
pub fn fuse_roles(
    tape: &mut Tape,
    trustee: Option<(&[Var], Var)>,
    trustor: Option<(&[Var], Var)>,
    w_fuse: Var,
) -> Result<(Option<Var>, Option<Var>, Var)> {
    let z = trustee.map(|(types, w)| weighted_sum(tape, types, w)).transpose()?;
    let z_bar = trustor.map(|(types, w)| weighted_sum(tape, types, w)).transpose()?;
    let parts: Vec<Var> = z.iter().chain(z_bar.iter()).copied().collect();
    let joined = match parts.as_slice() {
        [] => return Err(Error::invalid("no role to fuse")),
        [single] => *single,
        _ => tape.concat(&parts)?,
    };
    let z_final = tape.matmul(joined, w_fuse)?;
    Ok((z, z_bar, z_final))
}

#[derive(Debug, Clone, Copy)]
pub struct PredictorVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl PredictorVars {
    pub fn from_params(pv: &ParamVars) -> Result<Self> {
        Ok(Self {
            w1: pv.get("mlp_w1")?,
            b1: pv.get("mlp_b1")?,
            w2: pv.get("mlp_w2")?,
            b2: pv.get("mlp_b2")?,
        })
    }
}

/// Class logits for ordered pairs: `relu((z_u ∥ z_v) W1 + b1) W2 + b2`.
pub fn predict_logits(tape: &mut Tape, z_final: Var, pairs: &[(usize, usize)], pred: &PredictorVars) -> Result<Var> {
    let n = tape.value(z_final).rows();
    for &(u, v) in pairs {
        if u == v {
            return Err(Error::invalid(format!("cannot score node {u} against itself")));
        }
        if u >= n || v >= n {
            return Err(Error::invalid(format!("pair ({u}, {v}) outside 0..{n}")));
        }
    }
    let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let zu = tape.gather_rows(z_final, &us)?;
    let zv = tape.gather_rows(z_final, &vs)?;
    let x = tape.concat(&[zu, zv])?;
    let hidden = tape.matmul(x, pred.w1)?;
    let hidden = tape.add_row(hidden, pred.b1)?;
    let hidden = tape.relu(hidden)?;
    let logits = tape.matmul(hidden, pred.w2)?;
    tape.add_row(logits, pred.b2)
}

/// Class distributions for ordered pairs, off the tape.
pub fn predict_distributions(
    z_final: &Tensor,
    pairs: &[(usize, usize)],
    params: &ModelParams,
) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::with_finite_checks(false);
    let z = tape.constant(z_final.clone());
    let mut constant = |name: &str| -> Result<Var> {
        let t = params
            .get(name)
            .ok_or_else(|| Error::invalid(format!("no parameter named `{name}`")))?;
        Ok(tape.constant(t.clone()))
    };
    let pred = PredictorVars {
        w1: constant("mlp_w1")?,
        b1: constant("mlp_b1")?,
        w2: constant("mlp_w2")?,
        b2: constant("mlp_b2")?,
    };
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let logits = predict_logits(&mut tape, z, pairs, &pred)?;
    let logits = tape.value(logits);
    Ok((0..logits.rows()).map(|i| kernels::softmax(logits.row(i))).collect())
}

/// Class distribution for one ordered pair.
pub fn predict_pair(z_final: &Tensor, u: usize, v: usize, params: &ModelParams) -> Result<Vec<f64>> {
    Ok(predict_distributions(z_final, &[(u, v)], params)?.remove(0))
}

#[derive(Debug, Clone)]
pub struct RoleVars {
    /// Messages per chain type, before aggregation.
    pub messages: Vec<Var>,
    /// `h^P` (or `h̄^P`) per chain type.
    pub per_type: Vec<Var>,
    /// Chain-type weights, `1 x #types`.
    pub weights: Var,
    pub z: Var,
}

#[derive(Debug, Clone)]
pub struct ForwardVars {
    pub h: Var,
    pub relations: Vec<Var>,
    pub trustee: Option<RoleVars>,
    pub trustor: Option<RoleVars>,
    pub z_final: Var,
}

/// Model wiring for one spec.
#[derive(Debug, Clone)]
pub struct TrustGnn {
    spec: ModelSpec,
}

impl TrustGnn {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let d = spec.dims;
        if !d.hidden.is_multiple_of(2) {
            return Err(Error::OddDimension(d.hidden));
        }
        if [d.node_attr, d.edge_attr, d.hidden, d.embed, d.attention].contains(&0) {
            return Err(Error::invalid("all model dimensions must be positive"));
        }
        if spec.chains.num_relations() != spec.num_relations {
            return Err(Error::invalid(
                "chain index and model disagree on the number of relations",
            ));
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn init_params(&self, rng: &mut impl Rng) -> ModelParams {
        ModelParams::init(&self.spec, rng)
    }

    pub fn forward(&self, tape: &mut Tape, pv: &ParamVars, graph: &TrustGraph) -> Result<ForwardVars> {
        let pinned = (self.spec.variant == Variant::UniformSum).then(|| Tensor::filled(1, self.spec.chains.len(), 1.0));
        self.forward_with_weights(tape, pv, graph, pinned.as_ref())
    }

    /// Forward pass; `pinned` replaces both roles' attention weights.
    pub fn forward_with_weights(
        &self,
        tape: &mut Tape,
        pv: &ParamVars,
        graph: &TrustGraph,
        pinned: Option<&Tensor>,
    ) -> Result<ForwardVars> {
        if graph.num_nodes() != self.spec.num_nodes || graph.num_relations() != self.spec.num_relations {
            return Err(Error::invalid(format!(
                "graph has {} nodes / {} relations, model expects {} / {}",
                graph.num_nodes(),
                graph.num_relations(),
                self.spec.num_nodes,
                self.spec.num_relations
            )));
        }
        if let Some(p) = pinned {
            if p.shape() != [1, self.spec.chains.len()] {
                return Err(Error::Shape {
                    op: "pinned attention",
                    left: [1, self.spec.chains.len()],
                    right: p.shape(),
                });
            }
        }
        let (h, relations) = transform_attributes(tape, pv, self.spec.num_relations)?;
        let mut memo = ReachMemo::new();
        let variant = self.spec.variant;

        let mut role = |tape: &mut Tape, direction: Direction| -> Result<(Vec<Var>, Vec<Var>, Var)> {
            let trustor = direction == Direction::Trustor;
            let mut messages = Vec::with_capacity(self.spec.chains.len());
            let mut per_type = Vec::with_capacity(self.spec.chains.len());
            for (j, chain) in self.spec.chains.types().iter().enumerate() {
                let msg = propagate_chain_type(tape, graph, chain, direction, h, &relations, &mut memo)?;
                messages.push(msg);
                per_type.push(aggregate_chain_type(tape, h, msg, pv.chain(j, trustor)?)?);
            }
            let weights = match pinned {
                Some(p) => tape.constant(p.clone()),
                None => attention_weights(tape, &per_type, &AttentionVars::from_params(pv, trustor)?)?,
            };
            Ok((messages, per_type, weights))
        };

        let trustee = variant
            .uses_trustee()
            .then(|| role(tape, Direction::Trustee))
            .transpose()?;
        let trustor = variant
            .uses_trustor()
            .then(|| role(tape, Direction::Trustor))
            .transpose()?;

        let (z, z_bar, z_final) = fuse_roles(
            tape,
            trustee.as_ref().map(|(_, types, w)| (types.as_slice(), *w)),
            trustor.as_ref().map(|(_, types, w)| (types.as_slice(), *w)),
            pv.get("w_fuse")?,
        )?;
        let finish = |role: Option<(Vec<Var>, Vec<Var>, Var)>, z: Option<Var>| {
            role.zip(z).map(|((messages, per_type, weights), z)| RoleVars {
                messages,
                per_type,
                weights,
                z,
            })
        };
        let trustee = finish(trustee, z);
        let trustor = finish(trustor, z_bar);
        Ok(ForwardVars {
            h,
            relations,
            trustee,
            trustor,
            z_final,
        })
    }

    /// Mean cross-entropy over labelled ordered pairs.
    pub fn loss(&self, tape: &mut Tape, fwd: &ForwardVars, pv: &ParamVars, edges: &[Edge]) -> Result<Var> {
        if edges.is_empty() {
            return Err(Error::invalid("loss over an empty batch"));
        }
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.src, e.dst)).collect();
        let labels: Vec<usize> = edges.iter().map(|e| e.rel).collect();
        let logits = predict_logits(tape, fwd.z_final, &pairs, &PredictorVars::from_params(pv)?)?;
        tape.cross_entropy(logits, &labels)
    }

    /// Full forward pass plus loss on `edges`, returning the tape for
    /// backward.
    pub fn model_loss(
        &self,
        params: &ModelParams,
        graph: &TrustGraph,
        edges: &[Edge],
    ) -> Result<(Tape, ParamVars, ForwardVars, Var)> {
        let mut tape = Tape::new();
        let pv = params.record(&mut tape);
        let fwd = self.forward(&mut tape, &pv, graph)?;
        let loss = self.loss(&mut tape, &fwd, &pv, edges)?;
        Ok((tape, pv, fwd, loss))
    }

    /// Untaped embeddings and attention weights.
    pub fn embed(&self, params: &ModelParams, graph: &TrustGraph) -> Result<Embeddings> {
        let mut tape = Tape::with_finite_checks(false);
        let pv = params.record(&mut tape);
        let fwd = self.forward(&mut tape, &pv, graph)?;
        let weights = |r: &Option<RoleVars>| r.as_ref().map(|r| tape.value(r.weights).data().to_vec());
        Ok(Embeddings {
            alpha: weights(&fwd.trustee),
            alpha_bar: weights(&fwd.trustor),
            z_final: tape.value(fwd.z_final).clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub z_final: Tensor,
    pub alpha: Option<Vec<f64>>,
    pub alpha_bar: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_chain_types, ChainMode};
    use crate::model::{EdgeAttrMode, ModelDims};
    use crate::ndiff::{complex_conjugate, complex_hadamard, ComplexView};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(graph: &TrustGraph, variant: Variant, dim: usize, k: usize) -> ModelSpec {
        ModelSpec {
            num_nodes: graph.num_nodes(),
            num_relations: graph.num_relations(),
            dims: ModelDims::uniform(dim, dim),
            variant,
            edge_attr_mode: EdgeAttrMode::Learnable,
            chains: enumerate_chain_types(graph.num_relations(), k, ChainMode::UpToK).unwrap(),
        }
    }

    fn setup(graph: &TrustGraph, variant: Variant) -> (TrustGnn, ModelParams) {
        let model = TrustGnn::new(spec(graph, variant, 6, 2)).unwrap();
        let params = model.init_params(&mut ChaCha8Rng::seed_from_u64(3));
        (model, params)
    }

    fn line() -> TrustGraph {
        TrustGraph::new(3, 2, vec![Edge::new(0, 1, 1), Edge::new(1, 2, 0)]).unwrap()
    }

    #[test]
    fn identity_node_transform_keeps_attributes() {
        let g = line();
        let (_, mut params) = setup(&g, Variant::Full);
        *params.get_mut("w_node").unwrap() = Tensor::identity(6);
        let mut tape = Tape::new();
        let pv = params.record(&mut tape);
        let (h, rels) = transform_attributes(&mut tape, &pv, 2).unwrap();
        assert_eq!(tape.value(h), params.get("node_attr").unwrap());
        for r in rels {
            let view = ComplexView::new(tape.value(r)).unwrap();
            for k in 0..view.width() {
                assert!((view.modulus(0, k) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_edge_messages_rotate_the_neighbour() {
        let g = line();
        let (_, params) = setup(&g, Variant::Full);
        let mut tape = Tape::new();
        let pv = params.record(&mut tape);
        let (h, rels) = transform_attributes(&mut tape, &pv, 2).unwrap();
        let chain = ChainType::new(vec![1]).unwrap();
        let mut memo = ReachMemo::new();
        let to = propagate_chain_type(&mut tape, &g, &chain, Direction::Trustee, h, &rels, &mut memo).unwrap();
        let from = propagate_chain_type(&mut tape, &g, &chain, Direction::Trustor, h, &rels, &mut memo).unwrap();
        let hv = tape.value(h);
        let r = tape.value(rels[1]);
        let h0 = Tensor::row_vector(hv.row(0).to_vec());
        let h1 = Tensor::row_vector(hv.row(1).to_vec());
        // 0 -> 1 at level 1: node 1 hears h_0 ∘ r, node 0 hears h_1 ∘ conj(r)
        let want_to = complex_hadamard(&h0, r).unwrap();
        let want_from = complex_hadamard(&h1, &complex_conjugate(r).unwrap()).unwrap();
        assert!(Tensor::row_vector(tape.value(to).row(1).to_vec()).max_abs_diff(&want_to) < 1e-14);
        assert!(Tensor::row_vector(tape.value(from).row(0).to_vec()).max_abs_diff(&want_from) < 1e-14);
        assert_eq!(tape.value(to).row(0), &[0.0; 6]);
        assert_eq!(tape.value(from).row(2), &[0.0; 6]);
    }

    #[test]
    fn two_hop_rotation_composes() {
        let g = line();
        let (_, params) = setup(&g, Variant::Full);
        let mut tape = Tape::new();
        let pv = params.record(&mut tape);
        let (h, rels) = transform_attributes(&mut tape, &pv, 2).unwrap();
        let chain = ChainType::new(vec![1, 0]).unwrap();
        let msg = propagate_chain_type(
            &mut tape,
            &g,
            &chain,
            Direction::Trustee,
            h,
            &rels,
            &mut ReachMemo::new(),
        )
        .unwrap();
        let rho = complex_hadamard(tape.value(rels[1]), tape.value(rels[0])).unwrap();
        let h0 = Tensor::row_vector(tape.value(h).row(0).to_vec());
        let want = complex_hadamard(&h0, &rho).unwrap();
        assert!(Tensor::row_vector(tape.value(msg).row(2).to_vec()).max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn zero_messages_reduce_to_a_linear_map() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::from_fn(3, 2, |r, c| (r * 2 + c) as f64));
        let zero = tape.constant(Tensor::zeros(3, 2));
        let w = tape.constant(Tensor::identity(2));
        let out = aggregate_chain_type(&mut tape, h, zero, w).unwrap();
        assert_eq!(tape.value(out), tape.value(h));
    }

    #[test]
    fn attention_follows_its_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tape = Tape::new();
        let mut rnd = |r, c| Tensor::from_fn(r, c, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let types: Vec<Tensor> = (0..3).map(|_| rnd(4, 2)).collect();
        let (w, b, q) = (rnd(2, 3), rnd(1, 3), rnd(3, 1));
        let attn = AttentionVars {
            w: tape.constant(w.clone()),
            b: tape.constant(b.clone()),
            q: tape.constant(q.clone()),
        };
        let vars: Vec<Var> = types.iter().map(|t| tape.constant(t.clone())).collect();
        let got = attention_weights(&mut tape, &vars, &attn).unwrap();
        let scores: Vec<f64> = types
            .iter()
            .map(|hp| {
                let mut s = 0.0;
                for v in 0..4 {
                    for a in 0..3 {
                        let pre: f64 = (0..2).map(|i| hp.get(v, i) * w.get(i, a)).sum::<f64>() + b.get(0, a);
                        s += q.get(a, 0) * pre.tanh();
                    }
                }
                s / 4.0
            })
            .collect();
        let want = kernels::softmax(&scores);
        for (g, w) in tape.value(got).data().iter().zip(&want) {
            assert!((g - w).abs() < 1e-14);
        }
        // identical chain types share weight evenly; a single type takes all
        let same = vec![vars[0]; 4];
        let even = attention_weights(&mut tape, &same, &attn).unwrap();
        assert!(tape.value(even).data().iter().all(|x| (x - 0.25).abs() < 1e-15));
        let one = attention_weights(&mut tape, &vars[..1], &attn).unwrap();
        assert_eq!(tape.value(one).data(), &[1.0]);
    }

    #[test]
    fn fusing_with_a_selector_returns_the_trustee_sum() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_fn(2, 2, |r, c| (r + c) as f64));
        let b = tape.constant(Tensor::filled(2, 2, 5.0));
        let w = tape.constant(Tensor::row_vector(vec![1.0]));
        let mut sel = Tensor::zeros(4, 2);
        sel.set(0, 0, 1.0);
        sel.set(1, 1, 1.0);
        let sel = tape.constant(sel);
        let (z, z_bar, fin) = fuse_roles(&mut tape, Some((&[a], w)), Some((&[b], w)), sel).unwrap();
        assert_eq!(tape.value(fin), tape.value(z.unwrap()));
        assert_eq!(tape.value(z_bar.unwrap()), tape.value(b));
    }

    #[test]
    fn pair_scores_are_directed_distributions() {
        let g = line();
        let (model, params) = setup(&g, Variant::Full);
        let z = model.embed(&params, &g).unwrap().z_final;
        let uv = predict_pair(&z, 0, 1, &params).unwrap();
        let vu = predict_pair(&z, 1, 0, &params).unwrap();
        assert!((uv.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(uv, vu);
        assert!(predict_pair(&z, 1, 1, &params).is_err());
        assert!(predict_pair(&z, 0, 9, &params).is_err());
    }

    #[test]
    fn zero_output_layer_gives_uniform_loss() {
        let g = line();
        let (model, mut params) = setup(&g, Variant::Full);
        *params.get_mut("mlp_w2").unwrap() = Tensor::zeros(6, 2);
        *params.get_mut("mlp_b2").unwrap() = Tensor::zeros(1, 2);
        let (tape, _, _, loss) = model.model_loss(&params, &g, g.edges()).unwrap();
        assert!((tape.value(loss).item() - 2f64.ln()).abs() < 1e-14);
        let mut tape = Tape::new();
        let pv = params.record(&mut tape);
        let fwd = model.forward(&mut tape, &pv, &g).unwrap();
        assert!(model.loss(&mut tape, &fwd, &pv, &[]).is_err());
    }

    #[test]
    fn uniform_variant_equals_pinned_unit_weights() {
        let g = line();
        let (full, params) = setup(&g, Variant::Full);
        let (plain, _) = setup(&g, Variant::UniformSum);
        let a = plain.embed(&params, &g).unwrap();
        let mut tape = Tape::new();
        let pv = params.record(&mut tape);
        let ones = Tensor::filled(1, full.spec().chains.len(), 1.0);
        let fwd = full.forward_with_weights(&mut tape, &pv, &g, Some(&ones)).unwrap();
        assert_eq!(&a.z_final, tape.value(fwd.z_final));
        assert!(a.alpha.unwrap().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn single_role_variants_leave_the_other_role_untouched() {
        let g = line();
        for (variant, dead) in [(Variant::TrusteeOnly, "_bar"), (Variant::TrustorOnly, "")] {
            let (model, params) = setup(&g, variant);
            let (tape, pv, fwd, loss) = model.model_loss(&params, &g, g.edges()).unwrap();
            let grads = tape.backward(loss).unwrap();
            for p in params.entries() {
                let is_dead = if dead.is_empty() {
                    (p.name.starts_with("w_chain.") || p.name.starts_with("attn_")) && !p.name.contains("_bar")
                } else {
                    p.name.contains(dead)
                };
                if is_dead {
                    let g = grads.get(pv.get(&p.name).unwrap()).unwrap();
                    assert_eq!(g.max_abs(), 0.0, "{variant} {}", p.name);
                }
            }
            assert_eq!(fwd.trustee.is_some(), variant.uses_trustee());
            assert_eq!(fwd.trustor.is_some(), variant.uses_trustor());
        }
    }

    #[test]
    fn chain_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = crate::toy::random_graph(&mut rng, 8, 2, 0.3);
        let (model, params) = setup(&g, Variant::Full);
        let j = model.spec().chains.len();
        let order: Vec<usize> = (0..j).rev().collect();
        let mut spec = model.spec().clone();
        spec.chains = spec.chains.permuted(&order).unwrap();
        let permuted_model = TrustGnn::new(spec).unwrap();
        let mut permuted = params.clone();
        for trustor in [false, true] {
            for (new, &old) in order.iter().enumerate() {
                let name = super::super::params::chain_name(new, trustor);
                *permuted.get_mut(&name).unwrap() = params
                    .get(&super::super::params::chain_name(old, trustor))
                    .unwrap()
                    .clone();
            }
        }
        let a = model.embed(&params, &g).unwrap();
        let b = permuted_model.embed(&permuted, &g).unwrap();
        assert!(a.z_final.max_abs_diff(&b.z_final) < 1e-12);
        let alpha_a = a.alpha.unwrap();
        let alpha_b = b.alpha.unwrap();
        for (new, &old) in order.iter().enumerate() {
            assert!((alpha_a[old] - alpha_b[new]).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_must_match_the_spec() {
        let g = line();
        let (model, params) = setup(&g, Variant::Full);
        let other = TrustGraph::new(4, 2, vec![]).unwrap();
        assert!(model.embed(&params, &other).is_err());
    }
}
