//! Dense networks with analytic backpropagation, Adam, soft target updates
//! and a versioned binary checkpoint format.
//!
//! Hidden layers use tanh; the output head is tanh for actors and identity
//! for critics. All math is f64.
//!
//! # Checkpoint layout
//!
//! Little-endian throughout:
//!
//! ```text
//! magic   b"MLC1"
//! u32     entry count
//! entry*  u16 name length, name bytes (UTF-8),
//!         u8 output activation (0 = identity, 1 = tanh),
//!         u32 layer count,
//!         layer*: u32 rows, u32 cols,
//!                 rows*cols f64 weights (row-major), rows f64 biases
//! ```

use std::io::{self, Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("non-finite gradients; step refused")]
    NonFiniteGradient,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

/// Hidden widths used by the full-size actor/critic networks.
pub const DEFAULT_HIDDEN: [usize; 3] = [256, 512, 512];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }
}

/// Fully-connected network; `weights[i]` is (out x in) for layer i.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub output_activation: Activation,
}

/// Parameter-shaped gradient (or momentum) storage.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    /// self += factor * other.
    pub fn axpy(&mut self, factor: f64, other: &Gradients) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            w.scaled_add(factor, o);
        }
        for (b, o) in self.biases.iter_mut().zip(&other.biases) {
            b.scaled_add(factor, o);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        let mut total = 0.0;
        for w in &self.weights {
            total += w.iter().map(|x| x * x).sum::<f64>();
        }
        for b in &self.biases {
            total += b.iter().map(|x| x * x).sum::<f64>();
        }
        total.sqrt()
    }
}

impl Mlp {
    /// Builds a network with the given layer sizes `[in, hidden.., out]`.
    /// Weights and biases start uniform in +-1/sqrt(fan_in).
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-bound..bound)
            }));
            biases.push(Array1::from_shape_fn(fan_out, |_| {
                rng.random_range(-bound..bound)
            }));
        }
        Self {
            weights,
            biases,
            output_activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().nrows()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.weights.iter().map(|w| w.nrows()));
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Forward pass for a batch laid out as (batch, input_dim).
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.activations(x).pop().unwrap()
    }

    /// Single-sample convenience wrapper.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
        self.forward_batch(input.view()).row(0).to_vec()
    }

    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        assert_eq!(
            x.ncols(),
            self.input_dim(),
            "input width {} does not match first layer {}",
            x.ncols(),
            self.input_dim()
        );
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_owned());
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[i].dot(&w.t()) + b;
            let act = if i == last {
                self.output_activation
            } else {
                Activation::Tanh
            };
            act.apply(&mut z);
            acts.push(z);
        }
        acts
    }

    /// Backpropagates `upstream` (dL/dy per sample) through the network.
    /// Returns parameter gradients summed over the batch and dL/dx per
    /// sample; fold any 1/batch factor into `upstream`.
    pub fn backward_batch(
        &self,
        x: ArrayView2<f64>,
        upstream: ArrayView2<f64>,
    ) -> (Gradients, Array2<f64>) {
        let acts = self.activations(x);
        let last = self.weights.len() - 1;
        assert_eq!(
            upstream.dim(),
            acts[last + 1].dim(),
            "upstream shape does not match output"
        );
        let mut grads = Gradients {
            weights: Vec::with_capacity(self.weights.len()),
            biases: Vec::with_capacity(self.weights.len()),
        };
        let mut delta = match self.output_activation {
            Activation::Identity => upstream.to_owned(),
            Activation::Tanh => {
                let out = &acts[last + 1];
                &upstream.to_owned() * &out.mapv(|a| 1.0 - a * a)
            }
        };
        let mut weight_grads = vec![Array2::zeros((0, 0)); self.weights.len()];
        let mut bias_grads = vec![Array1::zeros(0); self.weights.len()];
        let mut input_grad = Array2::zeros((0, 0));
        for i in (0..=last).rev() {
            // dot on the transposed view can come back column-major;
            // normalize so gradient tensors are always standard layout.
            weight_grads[i] = delta.t().dot(&acts[i]).as_standard_layout().to_owned();
            bias_grads[i] = delta.sum_axis(Axis(0));
            let propagated = delta.dot(&self.weights[i]);
            if i == 0 {
                input_grad = propagated;
            } else {
                delta = &propagated * &acts[i].mapv(|a| 1.0 - a * a);
            }
        }
        grads.weights = weight_grads;
        grads.biases = bias_grads;
        (grads, input_grad)
    }
}

/// Adam state; moments mirror the parameter shapes.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }
}

/// One bias-corrected Adam descent step. Non-finite gradients refuse the
/// step and leave parameters and optimizer state untouched.
pub fn adam_step(params: &mut Mlp, grads: &Gradients, opt: &mut Adam) -> Result<(), NnError> {
    if grads.weights.len() != params.weights.len() {
        return Err(NnError::ShapeMismatch(format!(
            "{} gradient layers vs {} parameter layers",
            grads.weights.len(),
            params.weights.len()
        )));
    }
    if !grads.is_finite() {
        return Err(NnError::NonFiniteGradient);
    }
    opt.step += 1;
    let (beta1, beta2, eps) = (opt.beta1, opt.beta2, opt.eps);
    let bc1 = 1.0 - beta1.powi(opt.step as i32);
    let bc2 = 1.0 - beta2.powi(opt.step as i32);
    let scale = opt.lr / bc1;
    for i in 0..params.weights.len() {
        update_tensor(
            params.weights[i].iter_mut(),
            grads.weights[i].iter(),
            opt.m.weights[i].iter_mut(),
            opt.v.weights[i].iter_mut(),
            (beta1, beta2, eps, scale, bc2),
        );
        update_tensor(
            params.biases[i].iter_mut(),
            grads.biases[i].iter(),
            opt.m.biases[i].iter_mut(),
            opt.v.biases[i].iter_mut(),
            (beta1, beta2, eps, scale, bc2),
        );
    }
    Ok(())
}

fn update_tensor<'a>(
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'a f64>,
    m: impl Iterator<Item = &'a mut f64>,
    v: impl Iterator<Item = &'a mut f64>,
    (beta1, beta2, eps, scale, bc2): (f64, f64, f64, f64, f64),
) {
    for (((p, &g), m), v) in params.zip(grads).zip(m).zip(v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= scale * *m / ((*v / bc2).sqrt() + eps);
    }
}

/// Polyak averaging: target <- tau * online + (1 - tau) * target.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    for (t, o) in target.weights.iter_mut().zip(&online.weights) {
        t.zip_mut_with(o, |t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
    for (t, o) in target.biases.iter_mut().zip(&online.biases) {
        t.zip_mut_with(o, |t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"MLC1";

pub fn write_checkpoint<W: Write>(out: &mut W, entries: &[(&str, &Mlp)]) -> Result<(), NnError> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, net) in entries {
        let bytes = name.as_bytes();
        out.write_all(&(bytes.len() as u16).to_le_bytes())?;
        out.write_all(bytes)?;
        out.write_all(&[match net.output_activation {
            Activation::Identity => 0u8,
            Activation::Tanh => 1u8,
        }])?;
        out.write_all(&(net.weights.len() as u32).to_le_bytes())?;
        for (w, b) in net.weights.iter().zip(&net.biases) {
            out.write_all(&(w.nrows() as u32).to_le_bytes())?;
            out.write_all(&(w.ncols() as u32).to_le_bytes())?;
            for &x in w.iter() {
                out.write_all(&x.to_le_bytes())?;
            }
            for &x in b.iter() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<Vec<(String, Mlp)>, NnError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let count = read_u32(input)? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u16(input)? as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| NnError::Format("name not UTF-8".into()))?;
        let mut act = [0u8; 1];
        input.read_exact(&mut act)?;
        let output_activation = match act[0] {
            0 => Activation::Identity,
            1 => Activation::Tanh,
            other => return Err(NnError::Format(format!("unknown activation tag {other}"))),
        };
        let layers = read_u32(input)? as usize;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for _ in 0..layers {
            let rows = read_u32(input)? as usize;
            let cols = read_u32(input)? as usize;
            let mut w = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                w.push(read_f64(input)?);
            }
            let mut b = Vec::with_capacity(rows);
            for _ in 0..rows {
                b.push(read_f64(input)?);
            }
            weights.push(
                Array2::from_shape_vec((rows, cols), w)
                    .map_err(|e| NnError::Format(e.to_string()))?,
            );
            biases.push(Array1::from_vec(b));
        }
        entries.push((
            name,
            Mlp {
                weights,
                biases,
                output_activation,
            },
        ));
    }
    Ok(entries)
}

fn read_u16<R: Read>(input: &mut R) -> Result<u16, NnError> {
    let mut buf = [0u8; 2];
    input.read_exact(&mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, NnError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64, NnError> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn finite_difference_grads(net: &Mlp, x: &[f64], upstream: &[f64], h: f64) -> Gradients {
        // Loss = sum(output .* upstream); independent central-difference probe
        // of every parameter.
        let loss = |net: &Mlp| -> f64 {
            net.forward(x)
                .iter()
                .zip(upstream)
                .map(|(y, u)| y * u)
                .sum()
        };
        let mut grads = Gradients::zeros_like(net);
        for layer in 0..net.weights.len() {
            for idx in 0..net.weights[layer].len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.weights[layer].as_slice_mut().unwrap()[idx] += h;
                minus.weights[layer].as_slice_mut().unwrap()[idx] -= h;
                grads.weights[layer].as_slice_mut().unwrap()[idx] =
                    (loss(&plus) - loss(&minus)) / (2.0 * h);
            }
            for idx in 0..net.biases[layer].len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.biases[layer][idx] += h;
                minus.biases[layer][idx] -= h;
                grads.biases[layer][idx] = (loss(&plus) - loss(&minus)) / (2.0 * h);
            }
        }
        grads
    }

    fn max_rel_error(a: &Gradients, b: &Gradients) -> f64 {
        let mut worst: f64 = 0.0;
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            for (x, y) in wa.iter().zip(wb.iter()) {
                worst = worst.max((x - y).abs() / (x.abs() + y.abs()).max(1e-8));
            }
        }
        for (ba, bb) in a.biases.iter().zip(&b.biases) {
            for (x, y) in ba.iter().zip(bb.iter()) {
                worst = worst.max((x - y).abs() / (x.abs() + y.abs()).max(1e-8));
            }
        }
        worst
    }

    #[test]
    fn forward_zero_network_is_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[3, 4, 2], Activation::Identity, &mut rng);
        for w in &mut net.weights {
            w.fill(0.0);
        }
        for b in &mut net.biases {
            b.fill(0.0);
        }
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_matches_hand_composition() {
        // 1-1-1 net: y = tanh(w2 * tanh(w1 x + b1) + b2) with tanh output.
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[1, 1, 1], Activation::Tanh, &mut rng);
        net.weights[0][(0, 0)] = 0.7;
        net.biases[0][0] = -0.2;
        net.weights[1][(0, 0)] = 1.3;
        net.biases[1][0] = 0.1;
        let x: f64 = 0.4;
        let want = (1.3 * (0.7 * x - 0.2).tanh() + 0.1).tanh();
        let got = net.forward(&[x])[0];
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn tanh_head_is_bounded() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let net = Mlp::new(&[5, 16, 3], Activation::Tanh, &mut rng);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-10.0..10.0)).collect();
            for y in net.forward(&x) {
                assert!(y > -1.0 && y < 1.0);
            }
        }
    }

    #[test]
    fn backward_zero_upstream_is_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 8, 2], Activation::Identity, &mut rng);
        let x = Array2::from_shape_vec((1, 3), vec![0.3, -0.1, 0.9]).unwrap();
        let upstream = Array2::zeros((1, 2));
        let (grads, dx) = net.backward_batch(x.view(), upstream.view());
        assert!(grads.norm() == 0.0);
        assert!(dx.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let net = Mlp::new(&[4, 6, 3], Activation::Tanh, &mut rng);
        let x = Array2::from_shape_fn((2, 4), |_| rng.random_range(-1.0..1.0));
        let upstream = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let doubled = &upstream * 2.0;
        let (g1, d1) = net.backward_batch(x.view(), upstream.view());
        let (g2, d2) = net.backward_batch(x.view(), doubled.view());
        let mut g1s = g1;
        g1s.scale(2.0);
        assert!(max_rel_error(&g1s, &g2) < 1e-12);
        for (a, b) in d1.iter().zip(d2.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for (input, output) in [(1usize, 1usize), (3, 2), (8, 4)] {
            for act in [Activation::Identity, Activation::Tanh] {
                let net = Mlp::new(&[input, 5, 4, output], act, &mut rng);
                let x: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
                let upstream: Vec<f64> =
                    (0..output).map(|_| rng.random_range(-1.0..1.0)).collect();
                let xv = Array2::from_shape_vec((1, input), x.clone()).unwrap();
                let uv = Array2::from_shape_vec((1, output), upstream.clone()).unwrap();
                let (analytic, _) = net.backward_batch(xv.view(), uv.view());
                let numeric = finite_difference_grads(&net, &x, &upstream, 1e-5);
                let err = max_rel_error(&analytic, &numeric);
                assert!(err < 1e-5, "rel err {err} for {input}->{output} {act:?}");
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let net = Mlp::new(&[4, 6, 2], Activation::Identity, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let upstream = vec![0.8, -0.3];
        let xv = Array2::from_shape_vec((1, 4), x.clone()).unwrap();
        let uv = Array2::from_shape_vec((1, 2), upstream.clone()).unwrap();
        let (_, dx) = net.backward_batch(xv.view(), uv.view());
        let h = 1e-6;
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let loss = |x: &[f64]| -> f64 {
                net.forward(x).iter().zip(&upstream).map(|(y, u)| y * u).sum()
            };
            let numeric = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((dx[(0, i)] - numeric).abs() < 1e-6);
        }
    }

    #[test]
    fn adam_zero_grads_leave_params() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[2, 3, 1], Activation::Identity, &mut rng);
        let before = net.clone();
        let mut opt = Adam::new(&net, 1e-3);
        let zeros = Gradients::zeros_like(&net);
        adam_step(&mut net, &zeros, &mut opt).unwrap();
        assert_eq!(net, before);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn adam_first_step_is_minus_lr() {
        // Scalar parameter with unit gradient: bias-corrected m/sqrt(v) = 1,
        // so the first update is exactly -lr (up to eps).
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[1, 1], Activation::Identity, &mut rng);
        net.weights[0][(0, 0)] = 0.5;
        net.biases[0][0] = 0.0;
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][(0, 0)] = 1.0;
        let mut opt = Adam::new(&net, 1e-2);
        adam_step(&mut net, &grads, &mut opt).unwrap();
        assert!((net.weights[0][(0, 0)] - (0.5 - 1e-2)).abs() < 1e-9);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // Minimize (w - 3)^2 over the single weight.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[1, 1], Activation::Identity, &mut rng);
        net.weights[0][(0, 0)] = -1.0;
        net.biases[0][0] = 0.0;
        let mut opt = Adam::new(&net, 5e-2);
        let loss = |w: f64| (w - 3.0) * (w - 3.0);
        let start = loss(net.weights[0][(0, 0)]);
        for _ in 0..2000 {
            let w = net.weights[0][(0, 0)];
            let mut grads = Gradients::zeros_like(&net);
            grads.weights[0][(0, 0)] = 2.0 * (w - 3.0);
            adam_step(&mut net, &grads, &mut opt).unwrap();
        }
        let end = loss(net.weights[0][(0, 0)]);
        assert!(end < start * 1e-6, "start {start} end {end}");
    }

    #[test]
    fn adam_refuses_non_finite() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[1, 1], Activation::Identity, &mut rng);
        let before = net.clone();
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][(0, 0)] = f64::NAN;
        let mut opt = Adam::new(&net, 1e-2);
        assert!(adam_step(&mut net, &grads, &mut opt).is_err());
        assert_eq!(net, before);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn soft_update_extremes_and_geometric_decay() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let online = Mlp::new(&[2, 3, 1], Activation::Identity, &mut rng);
        let init = Mlp::new(&[2, 3, 1], Activation::Identity, &mut rng);

        let mut target = init.clone();
        soft_update(&mut target, &online, 1.0);
        assert_eq!(target, online);

        let mut target = init.clone();
        soft_update(&mut target, &online, 0.0);
        assert_eq!(target, init);

        // 1000 updates at tau close the gap by (1 - tau)^1000.
        let tau = 0.005;
        let mut target = init.clone();
        for _ in 0..1000 {
            soft_update(&mut target, &online, tau);
        }
        let expected_factor = (1.0 - tau) as f64;
        let shrink = expected_factor.powi(1000);
        let before = init.weights[0][(0, 0)] - online.weights[0][(0, 0)];
        let after = target.weights[0][(0, 0)] - online.weights[0][(0, 0)];
        assert!((after - before * shrink).abs() < 1e-12 * before.abs().max(1.0));
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let a = Mlp::new(&[4, 7, 2], Activation::Tanh, &mut rng);
        let c = Mlp::new(&[6, 5, 1], Activation::Identity, &mut rng);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("actor", &a), ("critic", &c)]).unwrap();
        let entries = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].0, "actor");
        assert_eq!(entries[0].1, a);
        assert_eq!(entries[1].1, c);

        let mut again = Vec::new();
        write_checkpoint(&mut again, &[("actor", &entries[0].1), ("critic", &entries[1].1)])
            .unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(read_checkpoint(&mut &b"nope"[..]).is_err());
    }
}
