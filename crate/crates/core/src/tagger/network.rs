//! Forward pass, masked cross-entropy and hand-written backpropagation for the
//! BiLSTM tagger.

use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus_io::TagId;
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, sigmoid, Scalar};

use super::features::FeatureVector;
use super::model::{LstmParams, Matrix, Params, TaggerModel};

/// Activations of one LSTM direction, indexed by processing step.
#[derive(Debug, Clone)]
struct DirectionCache<T> {
    /// Token position processed at each step.
    order: Vec<usize>,
    /// steps x 4H, post-activation (sigmoid for i/f/o, tanh for g).
    gates: Vec<T>,
    /// steps x H
    cells: Vec<T>,
    tanh_cells: Vec<T>,
    hidden: Vec<T>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    len: usize,
    /// len x D, after dropout.
    inputs: Vec<T>,
    input_mask: Option<Vec<T>>,
    fwd: DirectionCache<T>,
    bwd: DirectionCache<T>,
    /// len x 2H, after dropout.
    concat: Vec<T>,
    concat_mask: Option<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct Forward<T> {
    /// len x |tags|
    pub scores: Matrix<T>,
    pub cache: ForwardCache<T>,
}

/// Gradient of the loss. Embedding gradients are kept per touched row.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub word_rows: BTreeMap<u32, Vec<T>>,
    pub affix_rows: BTreeMap<u32, Vec<T>>,
    pub fwd: LstmParams<T>,
    pub bwd: LstmParams<T>,
    pub out_w: Matrix<T>,
    pub out_b: Matrix<T>,
}

impl<T: Scalar> Gradients<T> {
    fn zeros(params: &Params<T>) -> Self {
        let like = |m: &Matrix<T>| Matrix::zeros(m.rows, m.cols);
        let lstm = |p: &LstmParams<T>| LstmParams { w: like(&p.w), u: like(&p.u), b: like(&p.b) };
        Gradients {
            word_rows: BTreeMap::new(),
            affix_rows: BTreeMap::new(),
            fwd: lstm(&params.fwd),
            bwd: lstm(&params.bwd),
            out_w: like(&params.out_w),
            out_b: like(&params.out_b),
        }
    }

    /// Dense blocks in [`Params::blocks`] order, skipping the two embeddings.
    pub fn dense_blocks(&self) -> [&Matrix<T>; 8] {
        [&self.fwd.w, &self.fwd.u, &self.fwd.b, &self.bwd.w, &self.bwd.u, &self.bwd.b, &self.out_w, &self.out_b]
    }

    pub fn dense_blocks_mut(&mut self) -> [&mut Matrix<T>; 8] {
        [
            &mut self.fwd.w,
            &mut self.fwd.u,
            &mut self.fwd.b,
            &mut self.bwd.w,
            &mut self.bwd.u,
            &mut self.bwd.b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn squared_norm(&self) -> f64 {
        let mut s = 0.0;
        for rows in [&self.word_rows, &self.affix_rows] {
            for v in rows.values() {
                s += v.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>();
            }
        }
        for b in self.dense_blocks() {
            s += b.data.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>();
        }
        s
    }

    pub fn scale(&mut self, k: T) {
        for rows in [&mut self.word_rows, &mut self.affix_rows] {
            for v in rows.values_mut() {
                v.iter_mut().for_each(|x| *x *= k);
            }
        }
        for b in self.dense_blocks_mut() {
            b.data.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Gradient entry at (block, row, col) using [`super::model::BLOCK_NAMES`] numbering.
    pub fn get(&self, block: usize, row: usize, col: usize) -> T {
        match block {
            0 => self.word_rows.get(&(row as u32)).map_or(T::zero(), |v| v[col]),
            1 => self.affix_rows.get(&(row as u32)).map_or(T::zero(), |v| v[col]),
            b => self.dense_blocks()[b - 2].get(row, col),
        }
    }
}

fn dropout_mask<T: Scalar, R: Rng>(n: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..n).map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep }).collect()
}

fn run_direction<T: Scalar>(p: &LstmParams<T>, inputs: &[T], d: usize, order: Vec<usize>) -> DirectionCache<T> {
    let h = p.hidden();
    let g4 = 4 * h;
    let n = order.len();
    let mut cache = DirectionCache {
        order,
        gates: vec![T::zero(); n * g4],
        cells: vec![T::zero(); n * h],
        tanh_cells: vec![T::zero(); n * h],
        hidden: vec![T::zero(); n * h],
    };
    let zero_h = vec![T::zero(); h];
    for step in 0..n {
        let pos = cache.order[step];
        let x = &inputs[pos * d..(pos + 1) * d];
        let (h_prev, c_prev) = if step == 0 {
            (zero_h.clone(), zero_h.clone())
        } else {
            (
                cache.hidden[(step - 1) * h..step * h].to_vec(),
                cache.cells[(step - 1) * h..step * h].to_vec(),
            )
        };
        let gates = &mut cache.gates[step * g4..(step + 1) * g4];
        for (r, z) in gates.iter_mut().enumerate() {
            let pre = p.b.data[r] + dot(p.w.row(r), x) + dot(p.u.row(r), &h_prev);
            *z = if r < 3 * h { sigmoid(pre) } else { pre.tanh() };
        }
        for k in 0..h {
            let (i, f, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let c = f * c_prev[k] + i * g;
            let tc = c.tanh();
            cache.cells[step * h + k] = c;
            cache.tanh_cells[step * h + k] = tc;
            cache.hidden[step * h + k] = o * tc;
        }
    }
    cache
}

/// Backpropagate `d_hidden` (indexed by token position, len x H) through one
/// direction, accumulating into `grad` and `d_inputs` (len x D).
fn backprop_direction<T: Scalar>(
    p: &LstmParams<T>,
    cache: &DirectionCache<T>,
    inputs: &[T],
    d: usize,
    d_hidden: &[T],
    grad: &mut LstmParams<T>,
    d_inputs: &mut [T],
) {
    let h = p.hidden();
    let g4 = 4 * h;
    let n = cache.order.len();
    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let mut dz = vec![T::zero(); g4];
    let one = T::one();
    for step in (0..n).rev() {
        let pos = cache.order[step];
        let gates = &cache.gates[step * g4..(step + 1) * g4];
        for k in 0..h {
            let (i, f, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_cells[step * h + k];
            let c_prev = if step == 0 { T::zero() } else { cache.cells[(step - 1) * h + k] };
            let dh = d_hidden[pos * h + k] + dh_next[k];
            let dc = dh * o * (one - tc * tc) + dc_next[k];
            dz[k] = dc * g * i * (one - i);
            dz[h + k] = dc * c_prev * f * (one - f);
            dz[2 * h + k] = dh * tc * o * (one - o);
            dz[3 * h + k] = dc * i * (one - g * g);
            dc_next[k] = dc * f;
        }
        let x = &inputs[pos * d..(pos + 1) * d];
        let dx = &mut d_inputs[pos * d..(pos + 1) * d];
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == T::zero() {
                continue;
            }
            grad.b.data[r] += dzr;
            axpy(dzr, x, grad.w.row_mut(r));
            axpy(dzr, p.w.row(r), dx);
            if step > 0 {
                let h_prev = &cache.hidden[(step - 1) * h..step * h];
                axpy(dzr, h_prev, grad.u.row_mut(r));
                axpy(dzr, p.u.row(r), &mut dh_next);
            }
        }
    }
}

impl<T: Scalar> TaggerModel<T> {
    /// Score every token. `dropout` carries the RNG for training mode; `None`
    /// runs inference.
    pub fn forward<R: Rng>(&self, sentence: &[FeatureVector], dropout: Option<&mut R>) -> Forward<T> {
        let cfg = &self.config;
        let p = &self.params;
        let n = sentence.len();
        let (dw, da) = (cfg.word_embedding_size, cfg.affix_embedding_size);
        let d = dw + da;
        let h = cfg.direction_size();
        let k_tags = self.tagset.len();

        let mut inputs = vec![T::zero(); n * d];
        for (t, fv) in sentence.iter().enumerate() {
            let x = &mut inputs[t * d..(t + 1) * d];
            x[..dw].copy_from_slice(p.word_emb.row(fv.word as usize));
            if !fv.affixes.is_empty() {
                let w = T::one() / T::of(fv.affixes.len() as f64);
                for &a in &fv.affixes {
                    axpy(w, p.affix_emb.row(a as usize), &mut x[dw..]);
                }
            }
        }

        let active = dropout.is_some() && cfg.dropout_rate > 0.0;
        let (mut input_mask, mut concat_mask) = (None, None);
        let mut rng = dropout;
        if active && cfg.dropout_layers >= 1 {
            let m: Vec<T> = dropout_mask(n * d, cfg.dropout_rate, rng.as_mut().unwrap());
            inputs.iter_mut().zip(&m).for_each(|(x, k)| *x *= *k);
            input_mask = Some(m);
        }

        let fwd = run_direction(&p.fwd, &inputs, d, (0..n).collect());
        let bwd = run_direction(&p.bwd, &inputs, d, (0..n).rev().collect());

        let mut concat = vec![T::zero(); n * 2 * h];
        for step in 0..n {
            let pf = fwd.order[step];
            concat[pf * 2 * h..pf * 2 * h + h].copy_from_slice(&fwd.hidden[step * h..(step + 1) * h]);
            let pb = bwd.order[step];
            concat[pb * 2 * h + h..(pb + 1) * 2 * h].copy_from_slice(&bwd.hidden[step * h..(step + 1) * h]);
        }
        if active && cfg.dropout_layers >= 2 {
            let m: Vec<T> = dropout_mask(n * 2 * h, cfg.dropout_rate, rng.as_mut().unwrap());
            concat.iter_mut().zip(&m).for_each(|(x, k)| *x *= *k);
            concat_mask = Some(m);
        }

        let mut scores = Matrix::zeros(n, k_tags);
        for t in 0..n {
            let hv = &concat[t * 2 * h..(t + 1) * 2 * h];
            for k in 0..k_tags {
                scores.data[t * k_tags + k] = p.out_b.data[k] + dot(p.out_w.row(k), hv);
            }
        }
        Forward { scores, cache: ForwardCache { len: n, inputs, input_mask, fwd, bwd, concat, concat_mask } }
    }

    /// Inference-mode scores.
    pub fn scores(&self, sentence: &[FeatureVector]) -> Matrix<T> {
        self.forward::<rand_chacha::ChaCha8Rng>(sentence, None).scores
    }

    pub fn backward(&self, sentence: &[FeatureVector], cache: &ForwardCache<T>, d_scores: &Matrix<T>) -> Gradients<T> {
        let cfg = &self.config;
        let p = &self.params;
        let n = cache.len;
        let (dw, da) = (cfg.word_embedding_size, cfg.affix_embedding_size);
        let d = dw + da;
        let h = cfg.direction_size();
        let k_tags = self.tagset.len();
        let mut grad = Gradients::zeros(p);

        let mut d_concat = vec![T::zero(); n * 2 * h];
        for t in 0..n {
            let hv = &cache.concat[t * 2 * h..(t + 1) * 2 * h];
            let dhv = &mut d_concat[t * 2 * h..(t + 1) * 2 * h];
            for k in 0..k_tags {
                let ds = d_scores.data[t * k_tags + k];
                if ds == T::zero() {
                    continue;
                }
                grad.out_b.data[k] += ds;
                axpy(ds, hv, grad.out_w.row_mut(k));
                axpy(ds, p.out_w.row(k), dhv);
            }
        }
        if let Some(m) = &cache.concat_mask {
            d_concat.iter_mut().zip(m).for_each(|(x, k)| *x *= *k);
        }
        let mut d_fwd = vec![T::zero(); n * h];
        let mut d_bwd = vec![T::zero(); n * h];
        for t in 0..n {
            d_fwd[t * h..(t + 1) * h].copy_from_slice(&d_concat[t * 2 * h..t * 2 * h + h]);
            d_bwd[t * h..(t + 1) * h].copy_from_slice(&d_concat[t * 2 * h + h..(t + 1) * 2 * h]);
        }

        let mut d_inputs = vec![T::zero(); n * d];
        backprop_direction(&p.fwd, &cache.fwd, &cache.inputs, d, &d_fwd, &mut grad.fwd, &mut d_inputs);
        backprop_direction(&p.bwd, &cache.bwd, &cache.inputs, d, &d_bwd, &mut grad.bwd, &mut d_inputs);
        if let Some(m) = &cache.input_mask {
            d_inputs.iter_mut().zip(m).for_each(|(x, k)| *x *= *k);
        }

        for (t, fv) in sentence.iter().enumerate() {
            let dx = &d_inputs[t * d..(t + 1) * d];
            let row = grad.word_rows.entry(fv.word).or_insert_with(|| vec![T::zero(); dw]);
            axpy(T::one(), &dx[..dw], row);
            if !fv.affixes.is_empty() {
                let w = T::one() / T::of(fv.affixes.len() as f64);
                for &a in &fv.affixes {
                    let row = grad.affix_rows.entry(a).or_insert_with(|| vec![T::zero(); da]);
                    axpy(w, &dx[dw..], row);
                }
            }
        }
        grad
    }

    /// Per-token argmax; ties go to the smaller tag index.
    pub fn predict(&self, sentence: &[FeatureVector]) -> Vec<TagId> {
        argmax_rows(&self.scores(sentence))
    }

    /// Loss (masked mean cross-entropy) and its gradient for one sentence in
    /// inference mode.
    pub fn loss_and_gradient(&self, sentence: &[FeatureVector], tags: &[Option<TagId>]) -> Result<(T, Gradients<T>)> {
        let fw = self.forward::<rand_chacha::ChaCha8Rng>(sentence, None);
        let (loss, d_scores) = masked_loss(&fw.scores, tags)?;
        Ok((loss, self.backward(sentence, &fw.cache, &d_scores)))
    }
}

pub fn argmax_rows<T: Scalar>(scores: &Matrix<T>) -> Vec<TagId> {
    (0..scores.rows)
        .map(|t| {
            let row = scores.row(t);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            TagId(best as u16)
        })
        .collect()
}

/// Mean softmax cross-entropy over positions with a tag. NULL positions add
/// nothing to the loss and get a zero gradient row.
pub fn masked_loss<T: Scalar>(scores: &Matrix<T>, tags: &[Option<TagId>]) -> Result<(T, Matrix<T>)> {
    if tags.len() != scores.rows {
        return Err(Error::InvalidArgument(format!(
            "{} tags for {} score rows",
            tags.len(),
            scores.rows
        )));
    }
    let mut grad = Matrix::zeros(scores.rows, scores.cols);
    let active = tags.iter().filter(|t| t.is_some()).count();
    if active == 0 {
        return Ok((T::zero(), grad));
    }
    let inv = T::one() / T::of(active as f64);
    let mut loss = T::zero();
    for (t, tag) in tags.iter().enumerate() {
        let Some(tag) = tag else { continue };
        if tag.index() >= scores.cols {
            return Err(Error::InvalidArgument(format!("tag index {} out of range", tag.index())));
        }
        let row = scores.row(t);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let z: T = row.iter().map(|&s| (s - max).exp()).sum();
        let log_z = max + z.ln();
        loss += log_z - row[tag.index()];
        let g = grad.row_mut(t);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (row[k] - log_z).exp() * inv;
        }
        g[tag.index()] -= inv;
    }
    Ok((loss * inv, grad))
}
