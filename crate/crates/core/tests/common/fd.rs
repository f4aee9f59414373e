//! Central finite differences for the network engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tard_core::netcore::{BatchNorm, BnMode, Dense, Layer, Matrix, Network};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor so gradients that are zero up to rounding do not
/// blow up the relative error.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Scalar probe `L = Σ out ⊙ proj`; its output gradient is `proj`.
fn probe(net: &Network, input: &Matrix, proj: &Matrix) -> f64 {
    let mut net = net.clone();
    let out = net.forward(input).unwrap();
    out.as_slice()
        .iter()
        .zip(proj.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Numerical gradient of every trainable parameter, flattened in
/// `Network::params` order, followed by the input gradient.
pub fn numerical(net: &Network, input: &Matrix, proj: &Matrix) -> (Vec<Vec<f64>>, Vec<f64>) {
    let groups = net.params().len();
    let mut param_grads = Vec::with_capacity(groups);
    for g in 0..groups {
        let len = net.params()[g].len();
        let mut grad = Vec::with_capacity(len);
        for k in 0..len {
            let mut plus = net.clone();
            plus.params_mut()[g][k] += STEP;
            let mut minus = net.clone();
            minus.params_mut()[g][k] -= STEP;
            grad.push((probe(&plus, input, proj) - probe(&minus, input, proj)) / (2.0 * STEP));
        }
        param_grads.push(grad);
    }
    let mut input_grad = Vec::with_capacity(input.as_slice().len());
    for k in 0..input.as_slice().len() {
        let mut plus = input.clone();
        plus.as_mut_slice()[k] += STEP;
        let mut minus = input.clone();
        minus.as_mut_slice()[k] -= STEP;
        input_grad.push((probe(net, &plus, proj) - probe(net, &minus, proj)) / (2.0 * STEP));
    }
    (param_grads, input_grad)
}

/// Worst relative error between analytical and numerical gradients.
pub fn max_rel_error(net: &Network, input: &Matrix, proj: &Matrix) -> f64 {
    let mut recorder = net.clone();
    let (_, tape) = recorder.forward_recorded(input).unwrap();
    let back = net.backward(&tape, proj).unwrap();
    let (num_params, num_input) = numerical(net, input, proj);
    let mut worst: f64 = 0.0;
    for (a, n) in back.grads.slices().iter().zip(&num_params) {
        assert_eq!(a.len(), n.len());
        for (x, y) in a.iter().zip(n) {
            worst = worst.max(rel_err(*x, *y));
        }
    }
    for (x, y) in back.input_grad.as_slice().iter().zip(&num_input) {
        worst = worst.max(rel_err(*x, *y));
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub enum Case {
    Dense,
    BnTrain,
    BnEval,
    BnAdaBn,
    Relu,
    Stack,
}

pub const CASES: [Case; 6] = [
    Case::Dense,
    Case::BnTrain,
    Case::BnEval,
    Case::BnAdaBn,
    Case::Relu,
    Case::Stack,
];

fn bn_with(rng: &mut ChaCha8Rng, dim: usize, mode: BnMode) -> BatchNorm {
    let mut bn = BatchNorm::new(dim);
    for j in 0..dim {
        bn.gamma[j] = rng.random_range(0.5..1.5);
        bn.beta[j] = rng.random_range(-0.5..0.5);
        bn.running_mean[j] = rng.random_range(-1.0..1.0);
        bn.running_var[j] = rng.random_range(0.5..2.0);
    }
    bn.mode = mode;
    bn
}

/// A random instance (≤ 5×5) whose ReLU inputs stay clear of the kink by
/// more than the finite-difference step.
pub fn instance(case: Case, rng: &mut ChaCha8Rng) -> (Network, Matrix, Matrix) {
    loop {
        let rows = rng.random_range(2..=5);
        let cols = rng.random_range(1..=5);
        let input = random_matrix(rng, rows, cols);
        let (net, out_cols) = match case {
            Case::Dense => {
                let out = rng.random_range(1..=5);
                let mut d = Dense::init(cols, out, rng);
                d.bias = (0..out).map(|_| rng.random_range(-1.0..1.0)).collect();
                (Network::new(vec![Layer::Dense(d)]), out)
            }
            Case::BnTrain => (
                Network::new(vec![Layer::BatchNorm(bn_with(rng, cols, BnMode::Train))]),
                cols,
            ),
            Case::BnEval => (
                Network::new(vec![Layer::BatchNorm(bn_with(rng, cols, BnMode::Eval))]),
                cols,
            ),
            Case::BnAdaBn => (
                Network::new(vec![Layer::BatchNorm(bn_with(rng, cols, BnMode::AdaBn))]),
                cols,
            ),
            Case::Relu => (Network::new(vec![Layer::Relu]), cols),
            Case::Stack => {
                let hidden = rng.random_range(2..=5);
                let out = rng.random_range(1..=5);
                let net = Network::new(vec![
                    Layer::Dense(Dense::init(cols, hidden, rng)),
                    Layer::BatchNorm(bn_with(rng, hidden, BnMode::Train)),
                    Layer::Relu,
                    Layer::Dense(Dense::init(hidden, out, rng)),
                ]);
                (net, out)
            }
        };
        if clear_of_kinks(&net, &input) {
            let proj = random_matrix(rng, rows, out_cols);
            return (net, input, proj);
        }
    }
}

fn clear_of_kinks(net: &Network, input: &Matrix) -> bool {
    let mut x = input.clone();
    let mut net = net.clone();
    for layer in net.layers.iter_mut() {
        match layer {
            Layer::Relu => {
                if x.as_slice().iter().any(|v| v.abs() < 1e-3) {
                    return false;
                }
            }
            Layer::Dense(d) => x = d.forward(&x).unwrap(),
            Layer::BatchNorm(bn) => {
                // Near-constant columns make batch statistics ill-conditioned.
                if bn.mode != BnMode::Eval {
                    let mean = x.column_means();
                    if x.column_variances(&mean).iter().any(|&v| v < 1e-2) {
                        return false;
                    }
                }
                x = bn.forward(&x).unwrap().0;
            }
        }
    }
    true
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
