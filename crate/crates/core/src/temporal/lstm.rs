//! Single-layer peephole LSTM with a softmax head, trained by truncated BPTT.
//!
//! Gate equations (sigma is the logistic function, peepholes are diagonal and
//! read the previous cell state, including the output gate):
//!
//! ```text
//! i_t = sigma(W_xi x_t + W_hi h_{t-1} + w_ci . c_{t-1} + b_i)
//! f_t = sigma(W_xf x_t + W_hf h_{t-1} + w_cf . c_{t-1} + b_f)
//! c_t = f_t . c_{t-1} + i_t . tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = sigma(W_xo x_t + W_ho h_{t-1} + w_co . c_{t-1} + b_o)
//! h_t = o_t . tanh(c_t)
//! ```
//!
//! Classification is many-to-one: the final hidden state (after inverted
//! dropout in training mode) feeds the softmax output layer.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::feature::FeatureVec;
use crate::rng::RandomSeed;
use crate::vten::{atomic_write, Tensor};

/// One labelled descriptor sequence.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    pub vectors: Vec<FeatureVec>,
    pub label: usize,
}

/// Weights of the LSTM layer plus the softmax output layer.
#[derive(Debug, Clone)]
pub struct LstmModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub dropout_prob: f64,

    pub w_xi: Array2<f64>,
    pub w_hi: Array2<f64>,
    pub w_ci: Array1<f64>,
    pub b_i: Array1<f64>,

    pub w_xf: Array2<f64>,
    pub w_hf: Array2<f64>,
    pub w_cf: Array1<f64>,
    pub b_f: Array1<f64>,

    pub w_xc: Array2<f64>,
    pub w_hc: Array2<f64>,
    pub b_c: Array1<f64>,

    pub w_xo: Array2<f64>,
    pub w_ho: Array2<f64>,
    pub w_co: Array1<f64>,
    pub b_o: Array1<f64>,

    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

/// Training hyperparameters; all surfaced in run reports since none are
/// pinned upstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmTrainConfig {
    pub hidden: usize,
    pub dropout_prob: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for LstmTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            dropout_prob: 0.8,
            epochs: 60,
            learning_rate: 0.1,
            batch_size: 8,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

/// Activations captured by a forward pass, needed for BPTT.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub xs: Vec<Array1<f64>>,
    pub i_gates: Vec<Array1<f64>>,
    pub f_gates: Vec<Array1<f64>>,
    pub g_cands: Vec<Array1<f64>>,
    pub o_gates: Vec<Array1<f64>>,
    pub cells: Vec<Array1<f64>>,
    pub tanh_cells: Vec<Array1<f64>>,
    pub hiddens: Vec<Array1<f64>>,
    /// Inverted-dropout mask on the final hidden state (training mode only).
    pub dropout_mask: Option<Array1<f64>>,
    pub h_dropped: Array1<f64>,
    pub probs: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Array1<f64> = logits.mapv(|v| (v - max).exp());
    let sum = exps.sum();
    exps / sum
}

impl LstmModel {
    pub fn zeros(input_dim: usize, hidden: usize, classes: usize, dropout_prob: f64) -> Self {
        Self {
            input_dim,
            hidden,
            classes,
            dropout_prob,
            w_xi: Array2::zeros((hidden, input_dim)),
            w_hi: Array2::zeros((hidden, hidden)),
            w_ci: Array1::zeros(hidden),
            b_i: Array1::zeros(hidden),
            w_xf: Array2::zeros((hidden, input_dim)),
            w_hf: Array2::zeros((hidden, hidden)),
            w_cf: Array1::zeros(hidden),
            b_f: Array1::zeros(hidden),
            w_xc: Array2::zeros((hidden, input_dim)),
            w_hc: Array2::zeros((hidden, hidden)),
            b_c: Array1::zeros(hidden),
            w_xo: Array2::zeros((hidden, input_dim)),
            w_ho: Array2::zeros((hidden, hidden)),
            w_co: Array1::zeros(hidden),
            b_o: Array1::zeros(hidden),
            w_out: Array2::zeros((classes, hidden)),
            b_out: Array1::zeros(classes),
        }
    }

    /// Uniform init scaled by 1/sqrt(fan_in); forget bias starts at one so
    /// early training does not erase the cell state.
    pub fn init(
        input_dim: usize,
        hidden: usize,
        classes: usize,
        dropout_prob: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut model = Self::zeros(input_dim, hidden, classes, dropout_prob);
        let fill2 = |m: &mut Array2<f64>, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (m.ncols() as f64).sqrt();
            for v in m.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        };
        fill2(&mut model.w_xi, rng);
        fill2(&mut model.w_hi, rng);
        fill2(&mut model.w_xf, rng);
        fill2(&mut model.w_hf, rng);
        fill2(&mut model.w_xc, rng);
        fill2(&mut model.w_hc, rng);
        fill2(&mut model.w_xo, rng);
        fill2(&mut model.w_ho, rng);
        fill2(&mut model.w_out, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        for v in model
            .w_ci
            .iter_mut()
            .chain(model.w_cf.iter_mut())
            .chain(model.w_co.iter_mut())
        {
            *v = rng.gen_range(-bound..bound);
        }
        model.b_f.fill(1.0);
        model
    }

    /// Parameter tensors in a fixed order, for flattening and updates.
    fn matrices(&self) -> [&Array2<f64>; 9] {
        [
            &self.w_xi, &self.w_hi, &self.w_xf, &self.w_hf, &self.w_xc, &self.w_hc, &self.w_xo,
            &self.w_ho, &self.w_out,
        ]
    }

    fn matrices_mut(&mut self) -> [&mut Array2<f64>; 9] {
        [
            &mut self.w_xi,
            &mut self.w_hi,
            &mut self.w_xf,
            &mut self.w_hf,
            &mut self.w_xc,
            &mut self.w_hc,
            &mut self.w_xo,
            &mut self.w_ho,
            &mut self.w_out,
        ]
    }

    fn vectors(&self) -> [&Array1<f64>; 8] {
        [
            &self.w_ci, &self.b_i, &self.w_cf, &self.b_f, &self.b_c, &self.w_co, &self.b_o,
            &self.b_out,
        ]
    }

    fn vectors_mut(&mut self) -> [&mut Array1<f64>; 8] {
        [
            &mut self.w_ci,
            &mut self.b_i,
            &mut self.w_cf,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.w_co,
            &mut self.b_o,
            &mut self.b_out,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.matrices().iter().map(|m| m.len()).sum::<usize>()
            + self.vectors().iter().map(|v| v.len()).sum::<usize>()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for m in self.matrices() {
            out.extend(m.iter());
        }
        for v in self.vectors() {
            out.extend(v.iter());
        }
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut it = flat.iter();
        for m in self.matrices_mut() {
            for v in m.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
        for arr in self.vectors_mut() {
            for v in arr.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
    }

    /// self += alpha * other (same shapes).
    pub fn add_scaled(&mut self, other: &LstmModel, alpha: f64) {
        for (m, o) in self.matrices_mut().into_iter().zip(other.matrices()) {
            m.zip_mut_with(o, |a, b| *a += alpha * b);
        }
        for (v, o) in self.vectors_mut().into_iter().zip(other.vectors()) {
            v.zip_mut_with(o, |a, b| *a += alpha * b);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        let mut acc = 0.0;
        for m in self.matrices() {
            acc += m.iter().map(|v| v * v).sum::<f64>();
        }
        for v in self.vectors() {
            acc += v.iter().map(|v| v * v).sum::<f64>();
        }
        acc.sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        for m in self.matrices_mut() {
            m.mapv_inplace(|v| v * alpha);
        }
        for v in self.vectors_mut() {
            v.mapv_inplace(|v| v * alpha);
        }
    }

    /// Persists the flattened parameters as one VTEN tensor plus a JSON
    /// manifest with shapes, dropout, seed, and class names.
    pub fn save(
        &self,
        tensor_path: &Path,
        manifest_path: &Path,
        seed: u64,
        class_names: &[String],
    ) -> Result<()> {
        Tensor::f64(vec![self.param_count()], self.flatten())?.save(tensor_path)?;
        let manifest = serde_json::json!({
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "classes": self.classes,
            "dropout_prob": self.dropout_prob,
            "seed": seed,
            "class_names": class_names,
        });
        atomic_write(manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(())
    }

    pub fn load(tensor_path: &Path, manifest_path: &Path) -> Result<(Self, Vec<String>)> {
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let get = |k: &str| -> Result<usize> {
            manifest[k]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Format(format!("model manifest missing `{k}`")))
        };
        let mut model = Self::zeros(
            get("input_dim")?,
            get("hidden")?,
            get("classes")?,
            manifest["dropout_prob"].as_f64().unwrap_or(0.0),
        );
        let t = Tensor::load(tensor_path)?;
        let flat = t.to_f64();
        if flat.len() != model.param_count() {
            return Err(Error::Shape(format!(
                "model tensor holds {} params, manifest implies {}",
                flat.len(),
                model.param_count()
            )));
        }
        model.assign_from_flat(&flat);
        let class_names = manifest["class_names"]
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(|v| v.as_str().map(str::to_string))
                    .collect()
            })
            .unwrap_or_default();
        Ok((model, class_names))
    }
}

/// Many-to-one forward pass from zero initial state. In training mode an
/// inverted-dropout mask (drop probability `dropout_prob`, survivors scaled
/// by 1/(1-p)) is applied to the final hidden state before the output layer;
/// in inference mode `rng` is never touched.
pub fn lstm_forward(
    model: &LstmModel,
    sample: &SequenceSample,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, ForwardCache)> {
    assert!(!sample.vectors.is_empty(), "sequence must be nonempty");
    let n = sample.vectors.len();
    let mut cache = ForwardCache {
        xs: Vec::with_capacity(n),
        i_gates: Vec::with_capacity(n),
        f_gates: Vec::with_capacity(n),
        g_cands: Vec::with_capacity(n),
        o_gates: Vec::with_capacity(n),
        cells: Vec::with_capacity(n),
        tanh_cells: Vec::with_capacity(n),
        hiddens: Vec::with_capacity(n),
        dropout_mask: None,
        h_dropped: Array1::zeros(model.hidden),
        probs: Array1::zeros(model.classes),
    };

    let mut h = Array1::<f64>::zeros(model.hidden);
    let mut c = Array1::<f64>::zeros(model.hidden);
    for v in &sample.vectors {
        if v.dim() != model.input_dim {
            return Err(Error::Shape(format!(
                "sequence vector dim {} != model input {}",
                v.dim(),
                model.input_dim
            )));
        }
        let x = Array1::from_vec(v.as_slice().to_vec());
        let i_gate = (&model.w_xi.dot(&x) + &model.w_hi.dot(&h) + &(&model.w_ci * &c)
            + &model.b_i)
            .mapv(sigmoid);
        let f_gate = (&model.w_xf.dot(&x) + &model.w_hf.dot(&h) + &(&model.w_cf * &c)
            + &model.b_f)
            .mapv(sigmoid);
        let g_cand = (&model.w_xc.dot(&x) + &model.w_hc.dot(&h) + &model.b_c).mapv(f64::tanh);
        let o_gate = (&model.w_xo.dot(&x) + &model.w_ho.dot(&h) + &(&model.w_co * &c)
            + &model.b_o)
            .mapv(sigmoid);
        let c_new = &(&f_gate * &c) + &(&i_gate * &g_cand);
        let tanh_c = c_new.mapv(f64::tanh);
        let h_new = &o_gate * &tanh_c;

        cache.xs.push(x);
        cache.i_gates.push(i_gate);
        cache.f_gates.push(f_gate);
        cache.g_cands.push(g_cand);
        cache.o_gates.push(o_gate);
        cache.cells.push(c_new.clone());
        cache.tanh_cells.push(tanh_c);
        cache.hiddens.push(h_new.clone());
        c = c_new;
        h = h_new;
    }

    let h_final = if train_mode && model.dropout_prob > 0.0 {
        assert!(
            model.dropout_prob < 1.0,
            "drop probability must be below 1"
        );
        let keep = 1.0 - model.dropout_prob;
        let mask: Array1<f64> = Array1::from_iter(
            (0..model.hidden).map(|_| {
                if rng.gen::<f64>() < model.dropout_prob {
                    0.0
                } else {
                    1.0 / keep
                }
            }),
        );
        let dropped = &h * &mask;
        cache.dropout_mask = Some(mask);
        dropped
    } else {
        h
    };
    let logits = model.w_out.dot(&h_final) + &model.b_out;
    let probs = softmax(&logits);
    cache.h_dropped = h_final;
    cache.probs = probs.clone();
    Ok((probs.to_vec(), cache))
}

/// Cross-entropy loss of a cached forward pass. Non-finite probabilities
/// (diverged weights) propagate as NaN rather than being clamped away.
pub fn cross_entropy(cache: &ForwardCache, label: usize) -> f64 {
    let p = cache.probs[label];
    if !p.is_finite() {
        return f64::NAN;
    }
    -p.max(f64::MIN_POSITIVE).ln()
}

/// Exact reverse-mode gradients of the cross-entropy loss through every
/// timestep. Returns a same-shaped gradient accumulator.
pub fn lstm_backward(
    model: &LstmModel,
    sample: &SequenceSample,
    cache: &ForwardCache,
) -> LstmModel {
    let n = cache.xs.len();
    let mut g = LstmModel::zeros(
        model.input_dim,
        model.hidden,
        model.classes,
        model.dropout_prob,
    );

    // Output layer: dL/dlogits = p - y.
    let mut dlogits = cache.probs.clone();
    dlogits[sample.label] -= 1.0;
    for ci in 0..model.classes {
        let row = dlogits[ci];
        for hj in 0..model.hidden {
            g.w_out[[ci, hj]] += row * cache.h_dropped[hj];
        }
        g.b_out[ci] += row;
    }
    let mut dh = model.w_out.t().dot(&dlogits);
    if let Some(mask) = &cache.dropout_mask {
        dh = &dh * mask;
    }

    let zeros = Array1::<f64>::zeros(model.hidden);
    let mut dc_carry = Array1::<f64>::zeros(model.hidden);
    for t in (0..n).rev() {
        let c_prev = if t == 0 { &zeros } else { &cache.cells[t - 1] };
        let h_prev = if t == 0 { &zeros } else { &cache.hiddens[t - 1] };
        let i_gate = &cache.i_gates[t];
        let f_gate = &cache.f_gates[t];
        let g_cand = &cache.g_cands[t];
        let o_gate = &cache.o_gates[t];
        let tanh_c = &cache.tanh_cells[t];

        let do_raw = &(&dh * tanh_c) * &(o_gate * &(1.0 - o_gate));
        let dc = &(&dh * o_gate) * &tanh_c.mapv(|v| 1.0 - v * v) + &dc_carry;
        let di_raw = &(&dc * g_cand) * &(i_gate * &(1.0 - i_gate));
        let df_raw = &(&dc * c_prev) * &(f_gate * &(1.0 - f_gate));
        let dg_raw = &(&dc * i_gate) * &g_cand.mapv(|v| 1.0 - v * v);

        let x = &cache.xs[t];
        accumulate_gate(&mut g.w_xi, &mut g.b_i, &di_raw, x);
        accumulate_hidden(&mut g.w_hi, &di_raw, h_prev);
        accumulate_gate(&mut g.w_xf, &mut g.b_f, &df_raw, x);
        accumulate_hidden(&mut g.w_hf, &df_raw, h_prev);
        accumulate_gate(&mut g.w_xc, &mut g.b_c, &dg_raw, x);
        accumulate_hidden(&mut g.w_hc, &dg_raw, h_prev);
        accumulate_gate(&mut g.w_xo, &mut g.b_o, &do_raw, x);
        accumulate_hidden(&mut g.w_ho, &do_raw, h_prev);
        g.w_ci.zip_mut_with(&(&di_raw * c_prev), |a, b| *a += b);
        g.w_cf.zip_mut_with(&(&df_raw * c_prev), |a, b| *a += b);
        g.w_co.zip_mut_with(&(&do_raw * c_prev), |a, b| *a += b);

        dh = model.w_hi.t().dot(&di_raw)
            + model.w_hf.t().dot(&df_raw)
            + model.w_hc.t().dot(&dg_raw)
            + model.w_ho.t().dot(&do_raw);
        dc_carry = &(&dc * f_gate)
            + &(&(&model.w_ci * &di_raw) + &(&model.w_cf * &df_raw) + &(&model.w_co * &do_raw));
    }
    g
}

fn accumulate_gate(
    w_x: &mut Array2<f64>,
    b: &mut Array1<f64>,
    draw: &Array1<f64>,
    x: &Array1<f64>,
) {
    for (r, &d) in draw.iter().enumerate() {
        let mut row = w_x.row_mut(r);
        for (w, &xv) in row.iter_mut().zip(x.iter()) {
            *w += d * xv;
        }
        b[r] += d;
    }
}

fn accumulate_hidden(w_h: &mut Array2<f64>, draw: &Array1<f64>, h_prev: &Array1<f64>) {
    for (r, &d) in draw.iter().enumerate() {
        let mut row = w_h.row_mut(r);
        for (w, &hv) in row.iter_mut().zip(h_prev.iter()) {
            *w += d * hv;
        }
    }
}

/// Result of training: the model and the per-epoch mean loss curve.
#[derive(Debug)]
pub struct LstmTrainOutput {
    pub model: LstmModel,
    pub loss_curve: Vec<f64>,
}

/// Mini-batch SGD with global-norm gradient clipping and a seeded shuffle per
/// epoch. Fails with `Diverged` naming the epoch if the loss goes non-finite.
pub fn train_lstm(
    dataset: &[SequenceSample],
    num_classes: usize,
    config: &LstmTrainConfig,
) -> Result<LstmTrainOutput> {
    if dataset.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if num_classes < 2 {
        return Err(Error::Config("training needs at least two classes".into()));
    }
    let input_dim = dataset[0].vectors[0].dim();
    let seed = RandomSeed(config.seed);
    let mut init_rng = seed.stream("lstm.init");
    let mut model = LstmModel::init(
        input_dim,
        config.hidden,
        num_classes,
        config.dropout_prob,
        &mut init_rng,
    );
    let mut shuffle_rng = seed.stream("lstm.shuffle");
    let mut dropout_rng = seed.stream("lstm.dropout");

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut grad = LstmModel::zeros(input_dim, config.hidden, num_classes, 0.0);
            let mut batch_loss = 0.0;
            for &idx in batch {
                let sample = &dataset[idx];
                let (_, cache) = lstm_forward(&model, sample, true, &mut dropout_rng)?;
                batch_loss += cross_entropy(&cache, sample.label);
                let g = lstm_backward(&model, sample, &cache);
                grad.add_scaled(&g, 1.0);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.scale(scale);
            let norm = grad.grad_norm();
            if config.clip_norm > 0.0 && norm > config.clip_norm {
                grad.scale(config.clip_norm / norm);
            }
            model.add_scaled(&grad, -config.learning_rate);
            epoch_loss += batch_loss;
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        loss_curve.push(mean_loss);
    }
    Ok(LstmTrainOutput { model, loss_curve })
}

/// Inference: argmax class (ties to the lowest index) and the probabilities.
pub fn lstm_predict(model: &LstmModel, sample: &SequenceSample) -> Result<(usize, Vec<f64>)> {
    let mut rng = RandomSeed(0).stream("lstm.unused");
    let (probs, _) = lstm_forward(model, sample, false, &mut rng)?;
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    Ok((best, probs))
}
