use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{PolicyConfig, PolicyError, PolicyOutput};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    /// `(rows, cols)`; biases are `(rows, 1)`.
    pub shape: (usize, usize),
    pub offset: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where each weight matrix and bias vector lives in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    pub total: usize,
}

impl Layout {
    pub fn entry(&self, name: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    inp: usize,
    out: usize,
    w: usize,
    b: usize,
}

impl Dense {
    fn weights<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.out, self.inp), &p[self.w..self.w + self.out * self.inp])
            .expect("layout offsets are consistent")
    }

    fn bias<'a>(&self, p: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&p[self.b..self.b + self.out])
    }

    fn forward(&self, p: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights(p).t()) + &self.bias(p)
    }

    /// Accumulates parameter gradients for upstream `g` (pre-activation) and
    /// returns the gradient with respect to the layer input.
    fn backward(&self, p: &[f64], x: ArrayView2<f64>, g: ArrayView2<f64>, grad: &mut [f64]) -> Array2<f64> {
        let dw = g.t().dot(&x);
        for (dst, v) in grad[self.w..self.w + self.out * self.inp].iter_mut().zip(dw.iter()) {
            *dst += v;
        }
        for (dst, v) in grad[self.b..self.b + self.out].iter_mut().zip(g.sum_axis(Axis(0)).iter()) {
            *dst += v;
        }
        g.dot(&self.weights(p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layers {
    front: [Dense; 2],
    rear: [Dense; 2],
    trunk: Vec<Dense>,
    heads: Dense,
    value: Dense,
}

fn build_layout(config: &PolicyConfig) -> (Layout, Layers) {
    let mut entries = Vec::new();
    let mut offset = 0;
    let mut dense = |name: &str, inp: usize, out: usize| {
        let w = offset;
        entries.push(LayoutEntry {
            name: format!("{name}.w"),
            shape: (out, inp),
            offset: w,
        });
        offset += out * inp;
        let b = offset;
        entries.push(LayoutEntry {
            name: format!("{name}.b"),
            shape: (out, 1),
            offset: b,
        });
        offset += out;
        Dense { inp, out, w, b }
    };
    let sz = &config.sizes;
    let front = [
        dense("front.l0", config.beams, sz.encoder_hidden),
        dense("front.l1", sz.encoder_hidden, sz.encoder_out),
    ];
    let rear = [
        dense("rear.l0", config.beams, sz.encoder_hidden),
        dense("rear.l1", sz.encoder_hidden, sz.encoder_out),
    ];
    let mut fan_in = 2 * sz.encoder_out + config.proprio_dim;
    let mut trunk = Vec::new();
    for (k, &h) in sz.trunk_hidden.iter().enumerate() {
        trunk.push(dense(&format!("trunk.l{k}"), fan_in, h));
        fan_in = h;
    }
    let heads = dense("heads", fan_in, config.logits_dim());
    let value = dense("value", fan_in, 1);
    (
        Layout {
            entries,
            total: offset,
        },
        Layers {
            front,
            rear,
            trunk,
            heads,
            value,
        },
    )
}

/// Batched network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBatch {
    /// `batch x (action_dims * bins)`.
    pub logits: Array2<f64>,
    pub values: Array1<f64>,
}

/// Activations recorded by a forward pass, consumed by [`Policy::backward`].
#[derive(Debug, Clone, Default)]
pub struct Tape {
    record: Option<Record>,
}

#[derive(Debug, Clone)]
struct Record {
    input: Array2<f64>,
    front: [Array2<f64>; 2],
    rear: [Array2<f64>; 2],
    z: Array2<f64>,
    trunk: Vec<Array2<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.record.is_some()
    }

    pub fn batch_size(&self) -> usize {
        self.record.as_ref().map_or(0, |r| r.input.nrows())
    }
}

/// Network shape plus its flat parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    config: PolicyConfig,
    layout: Layout,
    layers: Layers,
    params: Vec<f64>,
}

impl Policy {
    /// All-zero parameters.
    pub fn zeros(config: PolicyConfig) -> Result<Self, PolicyError> {
        let v = config.sizes.violations();
        if !v.is_empty() {
            return Err(PolicyError::InvalidConfig(v.join("; ")));
        }
        let (layout, layers) = build_layout(&config);
        let params = vec![0.0; layout.total];
        Ok(Self {
            config,
            layout,
            layers,
            params,
        })
    }

    /// Orthogonal initialization: gain sqrt(2) for hidden layers, 0.01 for the
    /// action heads and 1 for the value head; biases zero.
    pub fn new(config: PolicyConfig, seed: u64) -> Result<Self, PolicyError> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = std::f64::consts::SQRT_2;
        let mut plan: Vec<(Dense, f64)> = Vec::new();
        plan.extend(p.layers.front.iter().map(|&d| (d, hidden)));
        plan.extend(p.layers.rear.iter().map(|&d| (d, hidden)));
        plan.extend(p.layers.trunk.iter().map(|&d| (d, hidden)));
        plan.push((p.layers.heads, 0.01));
        plan.push((p.layers.value, 1.0));
        for (d, gain) in plan {
            let w = orthogonal(d.out, d.inp, gain, &mut rng);
            p.params[d.w..d.w + d.out * d.inp].copy_from_slice(&w);
        }
        Ok(p)
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), PolicyError> {
        if params.len() != self.layout.total {
            return Err(PolicyError::ParamCount {
                expected: self.layout.total,
                got: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    /// Output for a single feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<PolicyOutput, PolicyError> {
        let x = ArrayView2::from_shape((1, features.len()), features).expect("row vector");
        let out = self.forward_batch(x, None)?;
        Ok(PolicyOutput {
            logits: out.logits.row(0).to_vec(),
            value: out.values[0],
        })
    }

    /// Batched forward pass; records activations into `tape` when given.
    pub fn forward_batch(&self, x: ArrayView2<f64>, tape: Option<&mut Tape>) -> Result<PolicyBatch, PolicyError> {
        let c = &self.config;
        if x.ncols() != c.input_dim() {
            return Err(PolicyError::DimensionMismatch {
                expected: c.input_dim(),
                got: x.ncols(),
            });
        }
        let p = &self.params[..];
        let b = c.beams;
        let encode = |layers: &[Dense; 2], input: ArrayView2<f64>| {
            let h0 = layers[0].forward(p, input).mapv_into(f64::tanh);
            let h1 = layers[1].forward(p, h0.view()).mapv_into(f64::tanh);
            [h0, h1]
        };
        let front = encode(&self.layers.front, x.slice(s![.., 0..b]));
        let rear = encode(&self.layers.rear, x.slice(s![.., b..2 * b]));
        let z = concatenate(
            Axis(1),
            &[front[1].view(), rear[1].view(), x.slice(s![.., 2 * b..])],
        )
        .expect("matching batch sizes");
        let mut trunk: Vec<Array2<f64>> = Vec::with_capacity(self.layers.trunk.len());
        for (k, layer) in self.layers.trunk.iter().enumerate() {
            let input = if k == 0 { z.view() } else { trunk[k - 1].view() };
            trunk.push(layer.forward(p, input).mapv_into(f64::tanh));
        }
        let last = trunk.last().expect("at least one trunk layer").view();
        let logits = self.layers.heads.forward(p, last);
        let values = self.layers.value.forward(p, last).column(0).to_owned();
        if let Some(tape) = tape {
            tape.record = Some(Record {
                input: x.to_owned(),
                front,
                rear,
                z,
                trunk,
            });
        }
        Ok(PolicyBatch { logits, values })
    }

    /// Gradient of a scalar loss whose derivatives with respect to the
    /// recorded outputs are `dlogits` and `dvalues`.
    pub fn backward(
        &self,
        tape: &Tape,
        dlogits: ArrayView2<f64>,
        dvalues: ArrayView1<f64>,
    ) -> Result<Vec<f64>, PolicyError> {
        let r = tape.record.as_ref().ok_or(PolicyError::BackwardBeforeForward)?;
        let n = r.input.nrows();
        let expected = (n, self.config.logits_dim());
        if dlogits.dim() != expected || dvalues.len() != n {
            return Err(PolicyError::GradientShape {
                expected,
                got: dlogits.dim(),
            });
        }
        let p = &self.params[..];
        let mut grad = vec![0.0; self.layout.total];
        let last = r.trunk.last().expect("at least one trunk layer").view();

        let mut g = self.layers.heads.backward(p, last, dlogits, &mut grad);
        let dv = dvalues.to_owned().insert_axis(Axis(1));
        g += &self.layers.value.backward(p, last, dv.view(), &mut grad);

        for k in (0..self.layers.trunk.len()).rev() {
            let pre = tanh_backward(g, &r.trunk[k]);
            let input = if k == 0 { r.z.view() } else { r.trunk[k - 1].view() };
            g = self.layers.trunk[k].backward(p, input, pre.view(), &mut grad);
        }

        let b = self.config.beams;
        let e = self.config.sizes.encoder_out;
        let gz = g;
        for (layers, acts, dz, input) in [
            (&self.layers.front, &r.front, gz.slice(s![.., 0..e]), r.input.slice(s![.., 0..b])),
            (&self.layers.rear, &r.rear, gz.slice(s![.., e..2 * e]), r.input.slice(s![.., b..2 * b])),
        ] {
            let pre1 = tanh_backward(dz.to_owned(), &acts[1]);
            let g0 = layers[1].backward(p, acts[0].view(), pre1.view(), &mut grad);
            let pre0 = tanh_backward(g0, &acts[0]);
            layers[0].backward(p, input, pre0.view(), &mut grad);
        }
        Ok(grad)
    }
}

fn tanh_backward(mut g: Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    g.zip_mut_with(y, |gi, &yi| *gi *= 1.0 - yi * yi);
    g
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever are
/// fewer), scaled by `gain`; row-major.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, m) = if rows >= cols { (cols, rows) } else { (rows, cols) };
    // n vectors of length m, orthonormalized by modified Gram-Schmidt.
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        for u in &vecs {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= d * ui;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            vecs.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (a, v) in vecs.iter().enumerate() {
        for (b, &x) in v.iter().enumerate() {
            let (i, j) = if rows >= cols { (b, a) } else { (a, b) };
            out[i * cols + j] = gain * x;
        }
    }
    out
}
