//! Dense feed-forward value network: ReLU hidden layers, identity output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out x in`, row-major
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer { weights: Array2::zeros((fan_out, fan_in)), bias: Array1::zeros(fan_out) }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    layers: Vec<Layer>,
}

/// Same shapes as the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Gradients { layers: net.layers.iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect() }
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl QNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let mut layer = Layer::zeros(w[0], w[1]);
                layer.weights.mapv_inplace(|_| rng.random_range(-limit..=limit));
                layer
            })
            .collect();
        Ok(QNetwork { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(QNetwork { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(Error::Config(format!("layer {i}: bias length {} != {}", l.bias.len(), l.fan_out())));
            }
            if i > 0 && layers[i - 1].fan_out() != l.fan_in() {
                return Err(Error::Config(format!("layer {i}: input {} != previous output {}", l.fan_in(), layers[i - 1].fan_out())));
            }
        }
        Ok(QNetwork { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_width()];
        sizes.extend(self.layers.iter().map(Layer::fan_out));
        sizes
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Q-values for one state.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_width() {
            return Err(Error::WidthMismatch { expected: self.input_width(), got: x.len() });
        }
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.bias.to_vec();
            for (o, row) in l.weights.outer_iter().enumerate() {
                let row = row.as_slice().expect("row-major weights");
                z[o] += row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
            }
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        Ok(a)
    }

    /// Q-values for a batch, one state per row.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.trace(x)?.pop().unwrap())
    }

    /// Activations of every layer, input first.
    fn trace(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        if x.ncols() != self.input_width() {
            return Err(Error::WidthMismatch { expected: self.input_width(), got: x.ncols() });
        }
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&l.weights.t());
            z += &l.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// Mean squared error between `targets` and the Q-values of the taken
    /// `actions`, and its exact gradient. Targets are constants.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, f64>, actions: &[usize], targets: &[f64]) -> Result<(f64, Gradients)> {
        let batch = x.nrows();
        if actions.len() != batch || targets.len() != batch || batch == 0 {
            return Err(Error::Config(format!(
                "batch of {batch} states with {} actions and {} targets",
                actions.len(),
                targets.len()
            )));
        }
        let out = self.output_width();
        if let Some(&a) = actions.iter().find(|&&a| a >= out) {
            return Err(Error::InvalidAction { action: a, m: out });
        }
        let acts = self.trace(x)?;
        let q = acts.last().unwrap();
        let mut delta = Array2::<f64>::zeros((batch, out));
        let mut loss = 0.0;
        for i in 0..batch {
            let err = targets[i] - q[[i, actions[i]]];
            loss += err * err;
            delta[[i, actions[i]]] = -2.0 * err / batch as f64;
        }
        loss /= batch as f64;

        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            grads.layers[l].weights = delta.t().dot(input);
            grads.layers[l].bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.layers[l].weights);
                prev.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        Ok((loss, grads))
    }

    /// Plain gradient descent step.
    pub fn apply_sgd(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-lr, &g.weights);
            l.bias.scaled_add(-lr, &g.bias);
        }
    }

    /// All parameters, layer by layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Config(format!("expected {} parameters, got {}", self.num_params(), params.len())));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.iter().chain(l.bias.iter()).map(|g| g * g).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm {
            let f = max_norm / n;
            for l in &mut self.layers {
                l.weights.mapv_inplace(|g| g * f);
                l.bias.mapv_inplace(|g| g * f);
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }
}

/// Adam moment estimates for one network.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(net: &QNetwork) -> Self {
        Adam { m: Gradients::zeros_like(net), v: Gradients::zeros_like(net), t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, net: &mut QNetwork, grads: &Gradients, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (((l, g), m), v) in net.layers.iter_mut().zip(&grads.layers).zip(&mut self.m.layers).zip(&mut self.v.layers) {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut l.weights).and(&g.weights).and(&mut m.weights).and(&mut v.weights).for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut l.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_weights_give_zero_q() {
        let net = QNetwork::zeros(&[4, 8, 3]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn single_layer_is_affine() {
        let mut net = QNetwork::zeros(&[2, 2]).unwrap();
        net.layers_mut()[0].weights = array![[1.0, 2.0], [3.0, 4.0]];
        net.layers_mut()[0].bias = array![0.5, -0.5];
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::WidthMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn perturbing_a_weight_scales_with_its_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = QNetwork::new(&[3, 4, 2], &mut rng).unwrap();
        let x = [0.3, -0.2, 0.9];
        let base = net.forward(&x).unwrap();
        // last-layer weight (1, 2): output 1 moves by eps times hidden unit 2
        let hidden: Vec<f64> = {
            let l = &net.layers()[0];
            (0..4).map(|o| (l.bias[o] + (0..3).map(|i| l.weights[[o, i]] * x[i]).sum::<f64>()).max(0.0)).collect()
        };
        let mut moved = net.clone();
        moved.layers_mut()[1].weights[[1, 2]] += 1e-3;
        let after = moved.forward(&x).unwrap();
        assert!((after[1] - base[1] - 1e-3 * hidden[2]).abs() < 1e-12);
        assert_eq!(after[0], base[0]);
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = QNetwork::new(&[5, 7, 7, 3], &mut rng).unwrap();
        let x = Array2::from_shape_fn((4, 5), |(i, j)| (i as f64 - j as f64) * 0.1);
        let batch = net.forward_batch(x.view()).unwrap();
        for i in 0..4 {
            let single = net.forward(x.row(i).as_slice().unwrap()).unwrap();
            for a in 0..3 {
                assert!((batch[[i, a]] - single[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_error_means_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = QNetwork::new(&[3, 5, 2], &mut rng).unwrap();
        let x = array![[0.1, 0.2, 0.3], [0.5, -0.1, 0.0]];
        let q = net.forward_batch(x.view()).unwrap();
        let (loss, g) = net.loss_and_gradients(x.view(), &[0, 1], &[q[[0, 0]], q[[1, 1]]]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.params().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_net_closed_form() {
        // q = w x + b, loss = (y - q)^2, dL/dw = -2 (y - q) x
        let mut net = QNetwork::zeros(&[1, 1]).unwrap();
        net.layers_mut()[0].weights[[0, 0]] = 0.5;
        net.layers_mut()[0].bias[0] = 0.25;
        let x = array![[2.0]];
        let (loss, g) = net.loss_and_gradients(x.view(), &[0], &[3.0]).unwrap();
        assert_eq!(loss, (3.0f64 - 1.25).powi(2));
        assert_eq!(g.layers[0].weights[[0, 0]], -2.0 * 1.75 * 2.0);
        assert_eq!(g.layers[0].bias[0], -2.0 * 1.75);
        net.apply_sgd(&g, 0.1);
        assert!((net.layers()[0].weights[[0, 0]] - (0.5 + 0.1 * 7.0)).abs() < 1e-15);
        assert!((net.layers()[0].bias[0] - (0.25 + 0.1 * 3.5)).abs() < 1e-15);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::new(&[4, 6, 3], &mut rng).unwrap();
        let mut other = QNetwork::zeros(&[4, 6, 3]).unwrap();
        other.set_params(&net.params()).unwrap();
        assert_eq!(net, other);
        assert!(other.set_params(&[0.0]).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = QNetwork::new(&[10, 20, 3], &mut rng).unwrap();
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(net.layers()[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut net = QNetwork::zeros(&[1, 1]).unwrap();
        let mut adam = Adam::new(&net);
        let x = array![[1.0]];
        let (_, g) = net.loss_and_gradients(x.view(), &[0], &[1.0]).unwrap();
        adam.step(&mut net, &g, 0.01);
        assert!((net.layers()[0].weights[[0, 0]] - 0.01).abs() < 1e-9);
    }
}
