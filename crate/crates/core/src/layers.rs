//! Linear layers, LSTM cells, stacked recurrence, inverted dropout and
//! concatenation merges.

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Glorot/Xavier uniform matrix `[fan_out × fan_in]`.
pub fn glorot_uniform<R: Rng + ?Sized>(fan_out: usize, fan_in: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_out * fan_in)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Tensor::matrix(fan_out, fan_in, data).expect("positive dims")
}

/// Affine map `W·x + b` with identity activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LinearLayer {
    pub fn new(store: &mut ParamStore, name: &str, weight: Tensor, bias: Tensor) -> Result<Self> {
        let (out_dim, in_dim) = weight.dims2()?;
        if weight.shape().len() != 2 || bias.len() != out_dim {
            return Err(Error::shape("linear", weight.shape(), bias.shape()));
        }
        Ok(Self {
            weight: store.add(format!("{name}.weight"), weight),
            bias: store.add(format!("{name}.bias"), bias),
            in_dim,
            out_dim,
        })
    }

    pub fn glorot<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w = glorot_uniform(out_dim, in_dim, rng);
        Self::new(store, name, w, Tensor::zeros(&[out_dim])).expect("consistent shapes")
    }

    pub fn zeros(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize) -> Self {
        Self::new(store, name, Tensor::zeros(&[out_dim, in_dim]), Tensor::zeros(&[out_dim]))
            .expect("consistent shapes")
    }
}

/// `x [B×in] ↦ x·Wᵀ + b`; a vector input gives a `[1×out]` row.
pub fn linear_forward(tape: &mut Tape<'_>, layer: &LinearLayer, x: Var) -> Result<Var> {
    let (_, cols) = tape.value(x).dims2()?;
    if cols != layer.in_dim {
        return Err(Error::shape("linear_forward", &[layer.out_dim, layer.in_dim], tape.value(x).shape()));
    }
    let w = tape.param(layer.weight);
    let b = tape.param(layer.bias);
    let y = tape.matmul_nt(x, w)?;
    tape.add_row(y, b)
}

/// One LSTM layer. Gate blocks in the stacked weights are ordered
/// input, forget, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmLayerParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmLayerParams {
    pub fn new(store: &mut ParamStore, name: &str, w_x: Tensor, w_h: Tensor, bias: Tensor) -> Result<Self> {
        let (rows, input) = w_x.dims2()?;
        let hidden = rows / 4;
        if rows % 4 != 0 || w_h.shape() != [rows, hidden] || bias.len() != rows {
            return Err(Error::shape("lstm params", w_x.shape(), w_h.shape()));
        }
        Ok(Self {
            w_x: store.add(format!("{name}.w_x"), w_x),
            w_h: store.add(format!("{name}.w_h"), w_h),
            bias: store.add(format!("{name}.bias"), bias),
            input,
            hidden,
        })
    }

    /// Glorot-uniform weights, zero bias except the forget slice at 1.0.
    pub fn glorot<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_x = glorot_uniform(4 * hidden, input, rng);
        let w_h = glorot_uniform(4 * hidden, hidden, rng);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        Self::new(store, name, w_x, w_h, bias).expect("consistent shapes")
    }
}

/// Hidden and cell values of one layer, `[B×hidden]` each.
#[derive(Debug, Clone, Copy)]
pub struct LstmCellState {
    pub h: Var,
    pub c: Var,
}

impl LstmCellState {
    pub fn zeros(tape: &mut Tape<'_>, batch: usize, hidden: usize) -> Self {
        Self {
            h: tape.constant(Tensor::zeros(&[batch, hidden])),
            c: tape.constant(Tensor::zeros(&[batch, hidden])),
        }
    }

    pub fn from_values(tape: &mut Tape<'_>, values: &LstmStateValues) -> Self {
        Self {
            h: tape.constant(values.h.clone()),
            c: tape.constant(values.c.clone()),
        }
    }

    pub fn values(&self, tape: &Tape<'_>) -> LstmStateValues {
        LstmStateValues {
            h: tape.value(self.h).clone(),
            c: tape.value(self.c).clone(),
        }
    }
}

/// Detached copy of a layer state, carried across tapes.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStateValues {
    pub h: Tensor,
    pub c: Tensor,
}

/// Per-layer state of a stack.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub layers: Vec<LstmCellState>,
}

impl LstmState {
    pub fn zeros(tape: &mut Tape<'_>, layers: usize, batch: usize, hidden: usize) -> Self {
        Self {
            layers: (0..layers).map(|_| LstmCellState::zeros(tape, batch, hidden)).collect(),
        }
    }

    pub fn values(&self, tape: &Tape<'_>) -> Vec<LstmStateValues> {
        self.layers.iter().map(|l| l.values(tape)).collect()
    }

    pub fn from_values(tape: &mut Tape<'_>, values: &[LstmStateValues]) -> Self {
        Self {
            layers: values.iter().map(|v| LstmCellState::from_values(tape, v)).collect(),
        }
    }
}

/// `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step(tape: &mut Tape<'_>, params: &LstmLayerParams, x: Var, state: LstmCellState) -> Result<LstmCellState> {
    let hsz = params.hidden;
    let (_, cols) = tape.value(x).dims2()?;
    if cols != params.input {
        return Err(Error::shape("lstm_step", &[4 * hsz, params.input], tape.value(x).shape()));
    }
    let w_x = tape.param(params.w_x);
    let w_h = tape.param(params.w_h);
    let bias = tape.param(params.bias);
    let from_x = tape.matmul_nt(x, w_x)?;
    let from_h = tape.matmul_nt(state.h, w_h)?;
    let pre = tape.add(from_x, from_h)?;
    let pre = tape.add_row(pre, bias)?;

    let i = tape.slice_cols(pre, 0, hsz)?;
    let f = tape.slice_cols(pre, hsz, 2 * hsz)?;
    let g = tape.slice_cols(pre, 2 * hsz, 3 * hsz)?;
    let o = tape.slice_cols(pre, 3 * hsz, 4 * hsz)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);

    let keep = tape.hadamard(f, state.c)?;
    let write = tape.hadamard(i, g)?;
    let c = tape.add(keep, write)?;
    let squashed = tape.tanh(c);
    let h = tape.hadamard(o, squashed)?;
    Ok(LstmCellState { h, c })
}

/// Runs one step through every layer of `layers`, dropping out the input
/// of each layer while training, and returns the top hidden output.
#[allow(clippy::too_many_arguments)]
pub fn stacked_lstm_step<R: Rng + ?Sized>(
    tape: &mut Tape<'_>,
    layers: &[LstmLayerParams],
    x: Var,
    state: &mut LstmState,
    dropout_rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    if layers.len() != state.layers.len() {
        return Err(Error::shape("stacked_lstm_step", &[layers.len()], &[state.layers.len()]));
    }
    let mut input = x;
    for (params, slot) in layers.iter().zip(state.layers.iter_mut()) {
        let dropped = dropout(tape, input, dropout_rate, training, rng)?;
        *slot = lstm_step(tape, params, dropped, *slot)?;
        input = slot.h;
    }
    Ok(input)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    Ok(())
}

fn dropout_mask<R: Rng + ?Sized>(shape: &[usize], rate: f64, rng: &mut R) -> Tensor {
    let keep = 1.0 / (1.0 - rate);
    let mut mask = Tensor::zeros(shape);
    for m in mask.data_mut() {
        *m = if rng.random::<f64>() < rate { 0.0 } else { keep };
    }
    mask
}

/// Inverted dropout on a plain tensor. Identity when not training or at rate 0.
pub fn dropout_apply<R: Rng + ?Sized>(x: &Tensor, rate: f64, training: bool, rng: &mut R) -> Result<Tensor> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.shape(), rate, rng);
    x.zip_map(&mask, "dropout", |a, m| a * m)
}

/// Inverted dropout recorded on the tape.
pub fn dropout<R: Rng + ?Sized>(tape: &mut Tape<'_>, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).shape(), rate, rng);
    let mask = tape.constant(mask);
    tape.hadamard(x, mask)
}

/// Concatenates vectors in order.
pub fn concat_merge(parts: &[Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::Empty("concat_merge parts"));
    }
    let mut out = Vec::new();
    for p in parts {
        if p.shape().len() != 1 {
            return Err(Error::InvalidArgument(format!("concat_merge expects vectors, got {:?}", p.shape())));
        }
        out.extend_from_slice(p.data());
    }
    Ok(Tensor::vector(&out))
}

/// Inverse of [`concat_merge`] for known part lengths.
pub fn split_merged(merged: &Tensor, lengths: &[usize]) -> Result<Vec<Tensor>> {
    if lengths.iter().sum::<usize>() != merged.len() || lengths.contains(&0) {
        return Err(Error::shape("split_merged", merged.shape(), lengths));
    }
    let mut offset = 0;
    Ok(lengths
        .iter()
        .map(|&n| {
            let part = Tensor::vector(&merged.data()[offset..offset + n]);
            offset += n;
            part
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_diff_check;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn linear_examples() {
        let mut store = ParamStore::new();
        let ident = LinearLayer::new(&mut store, "id", Tensor::identity(2), Tensor::zeros(&[2])).unwrap();
        let constant = LinearLayer::new(&mut store, "c", Tensor::zeros(&[2, 3]), Tensor::vector(&[1.0, 2.0])).unwrap();
        let sum = LinearLayer::new(&mut store, "s", Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap(), Tensor::zeros(&[1])).unwrap();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::vector(&[0.3, -0.7]));
        let y = linear_forward(&mut tape, &ident, x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.3, -0.7]);
        let x3 = tape.constant(Tensor::vector(&[5.0, 6.0, 7.0]));
        let y = linear_forward(&mut tape, &constant, x3).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);
        let x = tape.constant(Tensor::vector(&[2.0, 3.0]));
        let y = linear_forward(&mut tape, &sum, x).unwrap();
        assert_eq!(tape.value(y).data(), &[5.0]);
        assert!(linear_forward(&mut tape, &constant, x).is_err());
    }

    fn zero_lstm(store: &mut ParamStore, input: usize, hidden: usize) -> LstmLayerParams {
        LstmLayerParams::new(
            store,
            "lstm",
            Tensor::zeros(&[4 * hidden, input]),
            Tensor::zeros(&[4 * hidden, hidden]),
            Tensor::zeros(&[4 * hidden]),
        )
        .unwrap()
    }

    #[test]
    fn lstm_zero_cell() {
        let mut store = ParamStore::new();
        let p = zero_lstm(&mut store, 2, 1);
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::vector(&[0.4, -1.0]));
        let s = LstmCellState::zeros(&mut tape, 1, 1);
        let next = lstm_step(&mut tape, &p, x, s).unwrap();
        assert_eq!(tape.value(next.c).data(), &[0.0]);
        assert_eq!(tape.value(next.h).data(), &[0.0]);
    }

    #[test]
    fn lstm_carries_half_the_cell_with_zero_weights() {
        let mut store = ParamStore::new();
        let p = zero_lstm(&mut store, 1, 1);
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::vector(&[0.0]));
        let s = LstmCellState {
            h: tape.constant(Tensor::zeros(&[1, 1])),
            c: tape.constant(Tensor::full(&[1, 1], 1.0)),
        };
        let next = lstm_step(&mut tape, &p, x, s).unwrap();
        assert_eq!(tape.value(next.c).data(), &[0.5]);
        let h = tape.value(next.h).data()[0];
        assert!((h - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((h - 0.2311).abs() < 1e-4);
    }

    #[test]
    fn lstm_saturated_forget_gate_keeps_cell() {
        let mut store = ParamStore::new();
        let mut bias = Tensor::zeros(&[4]);
        bias.data_mut()[1] = 60.0;
        let p = LstmLayerParams::new(&mut store, "l", Tensor::zeros(&[4, 1]), Tensor::zeros(&[4, 1]), bias).unwrap();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::vector(&[0.0]));
        let s = LstmCellState {
            h: tape.constant(Tensor::zeros(&[1, 1])),
            c: tape.constant(Tensor::full(&[1, 1], 0.8)),
        };
        let next = lstm_step(&mut tape, &p, x, s).unwrap();
        assert!((tape.value(next.c).data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn glorot_lstm_has_unit_forget_bias() {
        let mut store = ParamStore::new();
        let p = LstmLayerParams::glorot(&mut store, "l", 3, 5, &mut rng());
        let b = store.get(p.bias).value.data();
        assert!(b[5..10].iter().all(|&x| x == 1.0));
        assert!(b[..5].iter().chain(&b[10..]).all(|&x| x == 0.0));
        let limit = (6.0f64 / (3.0 + 20.0)).sqrt();
        assert!(store.get(p.w_x).value.data().iter().all(|x| x.abs() <= limit));
    }

    #[test]
    fn stacked_zero_layers_give_zero_output() {
        let mut store = ParamStore::new();
        let l1 = zero_lstm(&mut store, 3, 2);
        let l2 = zero_lstm(&mut store, 2, 2);
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::vector(&[1.0, 0.0, -1.0]));
        let mut state = LstmState::zeros(&mut tape, 2, 1, 2);
        let h = stacked_lstm_step(&mut tape, &[l1, l2], x, &mut state, 0.2, true, &mut rng()).unwrap();
        assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stacked_inference_ignores_dropout() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let layers = [
            LstmLayerParams::glorot(&mut store, "a", 3, 4, &mut r),
            LstmLayerParams::glorot(&mut store, "b", 4, 4, &mut r),
        ];
        let run = |rate: f64, training: bool, seed: u64| {
            let mut tape = Tape::new(&store);
            let x = tape.constant(Tensor::vector(&[0.5, -0.5, 1.0]));
            let mut state = LstmState::zeros(&mut tape, 2, 1, 4);
            let mut rr = ChaCha8Rng::seed_from_u64(seed);
            let h = stacked_lstm_step(&mut tape, &layers, x, &mut state, rate, training, &mut rr).unwrap();
            tape.value(h).clone()
        };
        let reference = run(0.0, false, 1);
        assert_eq!(run(0.2, false, 2), reference);
        assert_eq!(run(0.0, true, 3), reference);
        assert_ne!(run(0.5, true, 4), reference);
    }

    #[test]
    fn dropout_contract() {
        let x = Tensor::vector(&[1.0, 2.0, 3.0]);
        assert_eq!(dropout_apply(&x, 0.0, true, &mut rng()).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.2, false, &mut rng()).unwrap(), x);
        assert!(dropout_apply(&x, 1.0, true, &mut rng()).is_err());
        assert!(dropout_apply(&x, -0.1, false, &mut rng()).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let ones = Tensor::full(&[100_000], 1.0);
        for seed in 0..5 {
            let out = dropout_apply(&ones, 0.2, true, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mean = out.sum() / out.len() as f64;
            assert!((0.98..=1.02).contains(&mean), "seed {seed}: {mean}");
            assert!(out.data().iter().all(|&v| v == 0.0 || v == 1.25));
        }
    }

    #[test]
    fn concat_examples() {
        let m = concat_merge(&[Tensor::vector(&[1.0, 2.0]), Tensor::vector(&[3.0])]).unwrap();
        assert_eq!(m.data(), &[1.0, 2.0, 3.0]);
        let single = Tensor::vector(&[4.0, 5.0]);
        assert_eq!(concat_merge(std::slice::from_ref(&single)).unwrap(), single);
        let onehot4 = Tensor::vector(&[0.0, 1.0, 0.0, 0.0]);
        let onehot2 = Tensor::vector(&[1.0, 0.0]);
        assert_eq!(concat_merge(&[onehot4, onehot2]).unwrap().data(), &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(concat_merge(&[]).is_err());
    }

    #[test]
    fn layer_gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let lin = LinearLayer::glorot(&mut store, "lin", 3, 2, &mut r);
        let cell = LstmLayerParams::glorot(&mut store, "cell", 2, 3, &mut r);
        let x_id = store.add("x", Tensor::matrix(2, 3, vec![0.3, -1.1, 0.8, 1.9, -0.4, 0.0]).unwrap());
        let report = finite_diff_check(&mut store, 1e-5, |tape| {
            let x = tape.param(x_id);
            let y = linear_forward(tape, &lin, x)?;
            let mut s = LstmCellState::zeros(tape, 2, 3);
            for _ in 0..3 {
                s = lstm_step(tape, &cell, y, s)?;
            }
            let sq = tape.hadamard(s.h, s.c)?;
            Ok(tape.sum(sq))
        })
        .unwrap();
        assert!(report.max_relative_error <= 1e-4, "{report:?}");
    }

    proptest! {
        #[test]
        fn lstm_outputs_stay_bounded(
            wx in proptest::collection::vec(-3.0f64..3.0, 8),
            wh in proptest::collection::vec(-3.0f64..3.0, 4),
            b in proptest::collection::vec(-3.0f64..3.0, 4),
            x in proptest::collection::vec(-2.0f64..2.0, 2),
            h in -0.99f64..0.99,
            c in -5.0f64..5.0,
        ) {
            let mut store = ParamStore::new();
            let p = LstmLayerParams::new(
                &mut store, "p",
                Tensor::matrix(4, 2, wx).unwrap(),
                Tensor::matrix(4, 1, wh).unwrap(),
                Tensor::vector(&b),
            ).unwrap();
            let mut tape = Tape::new(&store);
            let xv = tape.constant(Tensor::vector(&x));
            let s = LstmCellState {
                h: tape.constant(Tensor::full(&[1, 1], h)),
                c: tape.constant(Tensor::full(&[1, 1], c)),
            };
            let n = lstm_step(&mut tape, &p, xv, s).unwrap();
            let c2 = tape.value(n.c).data()[0];
            let h2 = tape.value(n.h).data()[0];
            prop_assert!(c2.abs() <= c.abs() + 1.0);
            prop_assert!(h2.abs() < 1.0);
        }

        #[test]
        fn merge_then_split_round_trips(parts in proptest::collection::vec(proptest::collection::vec(-9.0f64..9.0, 1..6), 1..5)) {
            let tensors: Vec<Tensor> = parts.iter().map(|p| Tensor::vector(p)).collect();
            let lengths: Vec<usize> = parts.iter().map(Vec::len).collect();
            let merged = concat_merge(&tensors).unwrap();
            prop_assert_eq!(merged.len(), lengths.iter().sum::<usize>());
            prop_assert_eq!(split_merged(&merged, &lengths).unwrap(), tensors);
        }
    }
}
