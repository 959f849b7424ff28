//! Minimal differentiable-network substrate: dense layers, a synthesis
//! network with sine or ReLU activations, a ReLU modulation network
//! conditioned on a latent input, exact reverse-mode gradients for all
//! parameters and the latent, and optimizers.
//!
//! The conditional network computes, for latent `z` and coordinate `phi`:
//!
//! ```text
//! alpha_0 = relu(W'_0 z + b'_0)
//! alpha_i = relu(W'_i [alpha_{i-1}; z] + b'_i)
//! h_0 = phi
//! h_i = alpha_i . act(W_i h_{i-1} + b_i)        act = sin(omega0 x) | relu(x)
//! y   = W_out h_L + b_out
//! ```
//!
//! Modulation vectors depend only on `z`, so they are computed once per
//! latent and shared across every coordinate of a molecule. All math is
//! 64-bit.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sine,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sine => "sine",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sine" => Some(Activation::Sine),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetworkDims {
    /// Coordinate input width.
    pub d: usize,
    /// Latent input width.
    pub k: usize,
    /// Hidden width of both networks.
    pub hidden: usize,
    /// Hidden synthesis layer count (the modulation stack has one layer per
    /// synthesis layer; the linear output layer is extra).
    pub layers: usize,
    /// Signal output width.
    pub f: usize,
}

/// Dense layer, weights row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer { in_dim, out_dim, weights: vec![0.0; out_dim * in_dim], biases: vec![0.0; out_dim] }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        for r in 0..self.out_dim {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.biases[r];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out.push(acc);
        }
    }

    /// `out += W^T g`
    fn apply_transposed_add(&self, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.out_dim);
        debug_assert_eq!(out.len(), self.in_dim);
        for r in 0..self.out_dim {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let gr = g[r];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * gr;
            }
        }
    }
}

/// Full conditional network: synthesis stack (hidden layers plus a linear
/// output layer) and its modulation stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalInr {
    pub dims: NetworkDims,
    pub activation: Activation,
    pub omega0: f64,
    /// `dims.layers` hidden layers followed by the output layer.
    pub synthesis: Vec<DenseLayer>,
    /// One modulation layer per hidden synthesis layer.
    pub modulation: Vec<DenseLayer>,
}

/// Sine layers follow the established sinusoidal-network bounds: first layer
/// `U(-1/fan_in, 1/fan_in)`, deeper layers and the output layer
/// `U(-sqrt(6/fan_in)/omega0, ...)`. ReLU layers use `U(+-sqrt(6/fan_in))`.
/// Biases are `U(+-1/sqrt(fan_in))`: nonzero bias draws keep the modulation
/// path responsive at the latent origin.
pub fn init_network(dims: NetworkDims, activation: Activation, omega0: f64, seed: u64) -> ConditionalInr {
    assert!(dims.d >= 1 && dims.k >= 1 && dims.hidden >= 1 && dims.layers >= 1 && dims.f >= 1);
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut draw_layer = |in_dim: usize, out_dim: usize, weight_bound: f64| {
        let mut layer = DenseLayer::zeros(in_dim, out_dim);
        for w in layer.weights.iter_mut() {
            *w = rng.random_range(-weight_bound..weight_bound);
        }
        let bias_bound = 1.0 / (in_dim as f64).sqrt();
        for b in layer.biases.iter_mut() {
            *b = rng.random_range(-bias_bound..bias_bound);
        }
        layer
    };

    let hidden_bound = |fan_in: usize| match activation {
        Activation::Sine => (6.0 / fan_in as f64).sqrt() / omega0,
        Activation::Relu => (6.0 / fan_in as f64).sqrt(),
    };

    let mut synthesis = Vec::with_capacity(dims.layers + 1);
    for i in 0..dims.layers {
        let in_dim = if i == 0 { dims.d } else { dims.hidden };
        let bound = if i == 0 {
            match activation {
                Activation::Sine => 1.0 / in_dim as f64,
                Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            }
        } else {
            hidden_bound(in_dim)
        };
        synthesis.push(draw_layer(in_dim, dims.hidden, bound));
    }
    synthesis.push(draw_layer(dims.hidden, dims.f, hidden_bound(dims.hidden)));

    let mut modulation = Vec::with_capacity(dims.layers);
    for i in 0..dims.layers {
        let in_dim = if i == 0 { dims.k } else { dims.hidden + dims.k };
        modulation.push(draw_layer(in_dim, dims.hidden, (6.0 / in_dim as f64).sqrt()));
    }

    ConditionalInr { dims, activation, omega0, synthesis, modulation }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

/// Activation records for one latent: pre-ReLU values and modulation vectors.
#[derive(Debug, Clone)]
pub struct ModulationTape {
    pub z: Vec<f64>,
    preacts: Vec<Vec<f64>>,
    alphas: Vec<Vec<f64>>,
}

/// Activation records for one coordinate evaluation.
#[derive(Debug, Clone)]
pub struct EvalTape {
    phi: Vec<f64>,
    preacts: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

/// Records for a shared-latent batch of evaluations.
#[derive(Debug, Clone)]
pub struct BatchTape {
    pub mods: ModulationTape,
    pub evals: Vec<EvalTape>,
}

impl ConditionalInr {
    pub fn layer_count(&self) -> usize {
        self.dims.layers
    }

    fn act(&self, u: f64) -> f64 {
        match self.activation {
            Activation::Sine => (self.omega0 * u).sin(),
            Activation::Relu => u.max(0.0),
        }
    }

    fn act_grad(&self, u: f64) -> f64 {
        match self.activation {
            Activation::Sine => self.omega0 * (self.omega0 * u).cos(),
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Modulation vectors for a latent, computed once and shared across all
    /// coordinates evaluated under it.
    pub fn modulation_forward(&self, z: &[f64]) -> ModulationTape {
        assert_eq!(z.len(), self.dims.k, "latent width mismatch");
        let l = self.dims.layers;
        let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(l);
        let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(l);
        let mut input: Vec<f64> = z.to_vec();
        for (i, layer) in self.modulation.iter().enumerate() {
            if i > 0 {
                // [alpha_{i-1}; z]
                input = alphas[i - 1].iter().chain(z.iter()).copied().collect();
            }
            let mut v = Vec::new();
            layer.apply(&input, &mut v);
            let alpha: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
            preacts.push(v);
            alphas.push(alpha);
        }
        ModulationTape { z: z.to_vec(), preacts, alphas }
    }

    fn eval_forward(&self, phi: &[f64], mods: &ModulationTape) -> (Vec<f64>, EvalTape) {
        assert_eq!(phi.len(), self.dims.d, "coordinate width mismatch");
        let l = self.dims.layers;
        let mut preacts = Vec::with_capacity(l);
        let mut activations = Vec::with_capacity(l);
        let mut hidden = Vec::with_capacity(l);
        let mut x: Vec<f64> = phi.to_vec();
        for i in 0..l {
            let mut u = Vec::new();
            self.synthesis[i].apply(&x, &mut u);
            let a: Vec<f64> = u.iter().map(|&v| self.act(v)).collect();
            let h: Vec<f64> = a.iter().zip(&mods.alphas[i]).map(|(av, al)| av * al).collect();
            preacts.push(u);
            activations.push(a);
            x = h.clone();
            hidden.push(h);
        }
        let mut y = Vec::new();
        self.synthesis[l].apply(&x, &mut y);
        (y, EvalTape { phi: phi.to_vec(), preacts, activations, hidden })
    }

    /// Forward over a batch of coordinates sharing one latent.
    pub fn forward_batch(&self, z: &[f64], phis: &[Vec<f64>]) -> (Vec<Vec<f64>>, BatchTape) {
        let mods = self.modulation_forward(z);
        let mut ys = Vec::with_capacity(phis.len());
        let mut evals = Vec::with_capacity(phis.len());
        for phi in phis {
            let (y, tape) = self.eval_forward(phi, &mods);
            ys.push(y);
            evals.push(tape);
        }
        (ys, BatchTape { mods, evals })
    }

    /// Outputs only, no tape.
    pub fn predict_batch(&self, z: &[f64], phis: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mods = self.modulation_forward(z);
        phis.iter().map(|phi| self.eval_forward(phi, &mods).0).collect()
    }

    /// Single-evaluation forward.
    pub fn forward_one(&self, z: &[f64], phi: &[f64]) -> (Vec<f64>, BatchTape) {
        let phis = vec![phi.to_vec()];
        let (mut ys, tape) = self.forward_batch(z, &phis);
        (ys.pop().unwrap(), tape)
    }
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

/// Gradients of one tensor pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerGrad {
    fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrad { weights: vec![0.0; layer.weights.len()], biases: vec![0.0; layer.biases.len()] }
    }
}

/// Parameter gradients mirroring the network plus the latent gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub synthesis: Vec<LayerGrad>,
    pub modulation: Vec<LayerGrad>,
    pub latent: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(net: &ConditionalInr) -> Self {
        GradientBundle {
            synthesis: net.synthesis.iter().map(LayerGrad::zeros_like).collect(),
            modulation: net.modulation.iter().map(LayerGrad::zeros_like).collect(),
            latent: vec![0.0; net.dims.k],
        }
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &GradientBundle) {
        let add = |a: &mut Vec<LayerGrad>, b: &Vec<LayerGrad>| {
            for (x, y) in a.iter_mut().zip(b) {
                for (p, q) in x.weights.iter_mut().zip(&y.weights) {
                    *p += q;
                }
                for (p, q) in x.biases.iter_mut().zip(&y.biases) {
                    *p += q;
                }
            }
        };
        add(&mut self.synthesis, &other.synthesis);
        add(&mut self.modulation, &other.modulation);
        for (p, q) in self.latent.iter_mut().zip(&other.latent) {
            *p += q;
        }
    }

    /// `self *= s`
    pub fn scale(&mut self, s: f64) {
        for grads in self.synthesis.iter_mut().chain(self.modulation.iter_mut()) {
            for w in grads.weights.iter_mut() {
                *w *= s;
            }
            for b in grads.biases.iter_mut() {
                *b *= s;
            }
        }
        for g in self.latent.iter_mut() {
            *g *= s;
        }
    }
}

impl ConditionalInr {
    /// Exact reverse-mode gradients for every weight, bias, and the latent,
    /// summed over the batch with the given per-evaluation output gradients.
    pub fn backward_batch(&self, tape: &BatchTape, dys: &[Vec<f64>]) -> GradientBundle {
        assert_eq!(tape.evals.len(), dys.len(), "tape/output-gradient count mismatch");
        let l = self.dims.layers;
        let h = self.dims.hidden;
        let mut bundle = GradientBundle::zeros_like(self);
        let mut g_alpha = vec![vec![0.0; h]; l];

        for (eval, dy) in tape.evals.iter().zip(dys) {
            assert_eq!(dy.len(), self.dims.f, "output gradient width mismatch");
            // output layer
            let out = &self.synthesis[l];
            let input = if l == 0 { &eval.phi } else { &eval.hidden[l - 1] };
            accumulate_layer(&mut bundle.synthesis[l], dy, input);
            let mut gx = vec![0.0; h];
            out.apply_transposed_add(dy, &mut gx);

            // hidden layers
            for i in (0..l).rev() {
                let alpha = &tape.mods.alphas[i];
                let act = &eval.activations[i];
                let pre = &eval.preacts[i];
                for (ga, (g, a)) in g_alpha[i].iter_mut().zip(gx.iter().zip(act)) {
                    *ga += g * a;
                }
                let g_u: Vec<f64> = gx
                    .iter()
                    .zip(alpha.iter().zip(pre))
                    .map(|(g, (al, &u))| g * al * self.act_grad(u))
                    .collect();
                let input = if i == 0 { &eval.phi } else { &eval.hidden[i - 1] };
                accumulate_layer(&mut bundle.synthesis[i], &g_u, input);
                if i > 0 {
                    let mut next = vec![0.0; h];
                    self.synthesis[i].apply_transposed_add(&g_u, &mut next);
                    gx = next;
                }
            }
        }

        self.modulation_backward(&tape.mods, g_alpha, &mut bundle);
        bundle
    }

    /// Gradient w.r.t. the latent only; parameter gradients are skipped.
    pub fn latent_gradient(&self, tape: &BatchTape, dys: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(tape.evals.len(), dys.len(), "tape/output-gradient count mismatch");
        let l = self.dims.layers;
        let h = self.dims.hidden;
        let mut g_alpha = vec![vec![0.0; h]; l];

        for (eval, dy) in tape.evals.iter().zip(dys) {
            let mut gx = vec![0.0; h];
            self.synthesis[l].apply_transposed_add(dy, &mut gx);
            for i in (0..l).rev() {
                let alpha = &tape.mods.alphas[i];
                let act = &eval.activations[i];
                let pre = &eval.preacts[i];
                for (ga, (g, a)) in g_alpha[i].iter_mut().zip(gx.iter().zip(act)) {
                    *ga += g * a;
                }
                if i > 0 {
                    let g_u: Vec<f64> = gx
                        .iter()
                        .zip(alpha.iter().zip(pre))
                        .map(|(g, (al, &u))| g * al * self.act_grad(u))
                        .collect();
                    let mut next = vec![0.0; h];
                    self.synthesis[i].apply_transposed_add(&g_u, &mut next);
                    gx = next;
                }
            }
        }

        let mut g_z = vec![0.0; self.dims.k];
        self.modulation_backprop_alphas(&tape.mods, g_alpha, &mut g_z, None);
        g_z
    }

    fn modulation_backward(
        &self,
        mods: &ModulationTape,
        g_alpha: Vec<Vec<f64>>,
        bundle: &mut GradientBundle,
    ) {
        let mut g_z = vec![0.0; self.dims.k];
        // Split borrow: modulation grads out of the bundle.
        let mod_grads = &mut bundle.modulation;
        self.modulation_backprop_alphas(mods, g_alpha, &mut g_z, Some(mod_grads));
        bundle.latent = g_z;
    }

    fn modulation_backprop_alphas(
        &self,
        mods: &ModulationTape,
        mut g_alpha: Vec<Vec<f64>>,
        g_z: &mut [f64],
        mut grads: Option<&mut Vec<LayerGrad>>,
    ) {
        let l = self.dims.layers;
        let h = self.dims.hidden;
        let k = self.dims.k;
        for i in (0..l).rev() {
            let g_v: Vec<f64> = g_alpha[i]
                .iter()
                .zip(&mods.preacts[i])
                .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                .collect();
            if let Some(gr) = grads.as_deref_mut() {
                let input: Vec<f64> = if i == 0 {
                    mods.z.clone()
                } else {
                    mods.alphas[i - 1].iter().chain(mods.z.iter()).copied().collect()
                };
                accumulate_layer(&mut gr[i], &g_v, &input);
            }
            if i == 0 {
                self.modulation[0].apply_transposed_add(&g_v, g_z);
            } else {
                let mut back = vec![0.0; h + k];
                self.modulation[i].apply_transposed_add(&g_v, &mut back);
                for (ga, b) in g_alpha[i - 1].iter_mut().zip(&back[..h]) {
                    *ga += b;
                }
                for (gz, b) in g_z.iter_mut().zip(&back[h..]) {
                    *gz += b;
                }
            }
        }
    }
}

fn accumulate_layer(grad: &mut LayerGrad, g_out: &[f64], input: &[f64]) {
    let in_dim = input.len();
    for (r, &g) in g_out.iter().enumerate() {
        let row = &mut grad.weights[r * in_dim..(r + 1) * in_dim];
        for (w, &x) in row.iter_mut().zip(input) {
            *w += g * x;
        }
        grad.biases[r] += g;
    }
}

// ---------------------------------------------------------------------------
// Flat parameter views (serialization, optimizers, finite differences)
// ---------------------------------------------------------------------------

impl ConditionalInr {
    pub fn param_count(&self) -> usize {
        self.synthesis
            .iter()
            .chain(self.modulation.iter())
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Reads the parameter at a flat index (synthesis layers first, weights
    /// before biases, then modulation layers).
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for layer in self.synthesis.iter().chain(self.modulation.iter()) {
            if idx < layer.weights.len() {
                return layer.weights[idx];
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                return layer.biases[idx];
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for layer in self.synthesis.iter_mut().chain(self.modulation.iter_mut()) {
            if idx < layer.weights.len() {
                layer.weights[idx] = value;
                return;
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                layer.biases[idx] = value;
                return;
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Zeroes the modulation stack; the network output then ignores both the
    /// latent and the coordinate (every modulation vector is zero).
    pub fn zero_modulation(&mut self) {
        for layer in self.modulation.iter_mut() {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }
}

impl GradientBundle {
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for layer in self.synthesis.iter().chain(self.modulation.iter()) {
            if idx < layer.weights.len() {
                return layer.weights[idx];
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                return layer.biases[idx];
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

/// Adam with bias correction. Moment accumulators mirror the network's
/// parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &ConditionalInr, lr: f64) -> Self {
        let shapes: Vec<Vec<f64>> = net
            .synthesis
            .iter()
            .chain(net.modulation.iter())
            .flat_map(|l| [vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]])
            .collect();
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: shapes.clone(), v: shapes }
    }
}

/// One Adam update of `net` from `grads`.
pub fn adam_step(net: &mut ConditionalInr, state: &mut AdamState, grads: &GradientBundle) {
    state.step += 1;
    let (lr, beta1, beta2, eps) = (state.lr, state.beta1, state.beta2, state.eps);
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    fn update(
        params: &mut [f64],
        grad: &[f64],
        m: &mut [f64],
        v: &mut [f64],
        (lr, beta1, beta2, eps, bc1, bc2): (f64, f64, f64, f64, f64, f64),
    ) {
        debug_assert_eq!(params.len(), grad.len());
        for i in 0..params.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    let hyper = (lr, beta1, beta2, eps, bc1, bc2);
    let layer_grads = grads.synthesis.iter().chain(grads.modulation.iter());
    let mut slot = 0usize;
    for (layer, grad) in net.synthesis.iter_mut().chain(net.modulation.iter_mut()).zip(layer_grads) {
        update(&mut layer.weights, &grad.weights, &mut state.m[slot], &mut state.v[slot], hyper);
        update(
            &mut layer.biases,
            &grad.biases,
            &mut state.m[slot + 1],
            &mut state.v[slot + 1],
            hyper,
        );
        slot += 2;
    }
}

/// Plain gradient-descent step on a latent vector.
pub fn sgd_latent_step(z: &[f64], grad_z: &[f64], lr: f64) -> Vec<f64> {
    assert_eq!(z.len(), grad_z.len(), "latent/gradient length mismatch");
    z.iter().zip(grad_z).map(|(zi, gi)| zi - lr * gi).collect()
}
