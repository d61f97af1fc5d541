//! Reverse-mode tape. Every operation records its inputs; `backward` walks
//! the tape in reverse and accumulates gradients into the nodes that need
//! them.

use std::borrow::Cow;

use super::kernels::{matmul_acc, matmul_at_acc, matmul_bt_acc};
use super::{shape_err, NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Dense { x: Var, w: Var, b: Var },
    Conv1d { x: Var, k: Var, b: Var, pad_left: usize },
    Prelu { x: Var, a: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    Upsample { x: Var, factor: usize },
    Reshape { x: Var },
    TakeRows { x: Var },
}

struct Node<'p, F: Scalar> {
    value: Cow<'p, Tensor<F>>,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation over tensors that may borrow parameters.
pub struct Tape<'p, F: Scalar> {
    nodes: Vec<Node<'p, F>>,
    grads: Vec<Option<Vec<F>>>,
}

impl<'p, F: Scalar> Default for Tape<'p, F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, F: Scalar> Tape<'p, F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, value: Cow<'p, Tensor<F>>, op: Op, needs_grad: bool) -> Var {
        debug_assert!(value.all_finite(), "non-finite activation from {op:?}");
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// An owned leaf (input data). `requires_grad` controls whether its
    /// gradient is computed.
    pub fn input(&mut self, t: Tensor<F>, requires_grad: bool) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, requires_grad)
    }

    /// A borrowed, trainable leaf.
    pub fn param(&mut self, t: &'p Tensor<F>) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `y = x W + b` applied to each row of `x` (`[in]` or `[rows, in]`).
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if ws.len() != 2 || bs.len() != 1 || bs[0] != ws[1] {
            return Err(shape_err("dense", format!("W {ws:?}, b {bs:?}")));
        }
        let (inp, out) = (ws[0], ws[1]);
        let (rows, out_shape) = match xs {
            [i] if *i == inp => (1, vec![out]),
            [r, i] if *i == inp => (*r, vec![*r, out]),
            _ => return Err(shape_err("dense", format!("x {xs:?} vs W {ws:?}"))),
        };
        let mut y = Vec::with_capacity(rows * out);
        let bias = self.value(b).data();
        for _ in 0..rows {
            y.extend_from_slice(bias);
        }
        matmul_acc(self.value(x).data(), self.value(w).data(), &mut y, rows, inp, out);
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        let t = Tensor::new(out_shape, y)?;
        Ok(self.push(Cow::Owned(t), Op::Dense { x, w, b }, needs))
    }

    /// Stride-1 convolution over rows of `x: [L, Cin]` with `kernels: [k, Cin, Cout]`.
    /// Zero padding of `(k-1)/2` rows before and `k/2` after keeps length `L`.
    pub fn conv1d(&mut self, x: Var, kernels: Var, b: Var) -> Result<Var, NnError> {
        let (xs, ks, bs) = (self.shape(x), self.shape(kernels), self.shape(b));
        if xs.len() != 2 || ks.len() != 3 || bs.len() != 1 || ks[1] != xs[1] || ks[2] != bs[0] {
            return Err(shape_err("conv1d", format!("x {xs:?}, kernels {ks:?}, b {bs:?}")));
        }
        let (len, cin) = (xs[0], xs[1]);
        let (k, cout) = (ks[0], ks[2]);
        if k == 0 {
            return Err(shape_err("conv1d", "kernel size 0"));
        }
        let pad_left = (k - 1) / 2;
        let mut y = Vec::with_capacity(len * cout);
        let bias = self.value(b).data();
        for _ in 0..len {
            y.extend_from_slice(bias);
        }
        let xd = self.value(x).data();
        let kd = self.value(kernels).data();
        for t in 0..k {
            // Output row l reads input row l + t - pad_left.
            let Some((lo, hi)) = tap_range(len, t, pad_left) else {
                continue;
            };
            let src = lo + t - pad_left;
            matmul_acc(
                &xd[src * cin..(src + hi - lo) * cin],
                &kd[t * cin * cout..(t + 1) * cin * cout],
                &mut y[lo * cout..hi * cout],
                hi - lo,
                cin,
                cout,
            );
        }
        let needs = self.needs(x) || self.needs(kernels) || self.needs(b);
        let t = Tensor::new(vec![len, cout], y)?;
        Ok(self.push(
            Cow::Owned(t),
            Op::Conv1d {
                x,
                k: kernels,
                b,
                pad_left,
            },
            needs,
        ))
    }

    /// Parametric ReLU with one learnable slope per channel (last axis).
    pub fn prelu(&mut self, x: Var, a: Var) -> Result<Var, NnError> {
        let (xs, as_) = (self.shape(x), self.shape(a));
        let c = *xs.last().ok_or_else(|| shape_err("prelu", "scalar input"))?;
        if as_ != [c] {
            return Err(shape_err("prelu", format!("x {xs:?}, a {as_:?}")));
        }
        let slopes = self.value(a).data();
        let y: Vec<F> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| if v > F::zero() { v } else { slopes[i % c] * v })
            .collect();
        let needs = self.needs(x) || self.needs(a);
        let t = Tensor::new(xs.to_vec(), y)?;
        Ok(self.push(Cow::Owned(t), Op::Prelu { x, a }, needs))
    }

    /// Per-channel maximum over rows; `[L, C] -> [C]`.
    pub fn global_max_pool(&mut self, x: Var) -> Result<Var, NnError> {
        let xs = self.shape(x);
        let (len, c) = match xs {
            [l, c] if *l > 0 => (*l, *c),
            _ => return Err(shape_err("global_max_pool", format!("x {xs:?}"))),
        };
        let xd = self.value(x).data();
        let mut best = xd[..c].to_vec();
        let mut argmax = vec![0usize; c];
        for l in 1..len {
            let row = &xd[l * c..(l + 1) * c];
            for ch in 0..c {
                if row[ch] > best[ch] {
                    best[ch] = row[ch];
                    argmax[ch] = l;
                }
            }
        }
        let needs = self.needs(x);
        let t = Tensor::new(vec![c], best)?;
        Ok(self.push(Cow::Owned(t), Op::MaxPool { x, argmax }, needs))
    }

    /// Repeats each row `factor` times consecutively.
    pub fn upsample_repeat(&mut self, x: Var, factor: usize) -> Result<Var, NnError> {
        if factor < 1 {
            return Err(NnError::Invalid("upsample factor must be >= 1".into()));
        }
        let xs = self.shape(x);
        let (len, c) = match xs {
            [l, c] => (*l, *c),
            _ => return Err(shape_err("upsample_repeat", format!("x {xs:?}"))),
        };
        let xd = self.value(x).data();
        let mut y = Vec::with_capacity(len * factor * c);
        for row in xd.chunks_exact(c.max(1)).take(len) {
            for _ in 0..factor {
                y.extend_from_slice(row);
            }
        }
        let needs = self.needs(x);
        let t = Tensor::new(vec![len * factor, c], y)?;
        Ok(self.push(Cow::Owned(t), Op::Upsample { x, factor }, needs))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, NnError> {
        let t = self.value(x).clone().reshaped(shape)?;
        let needs = self.needs(x);
        Ok(self.push(Cow::Owned(t), Op::Reshape { x }, needs))
    }

    /// Keeps the first `rows` rows of `[L, C]`.
    pub fn take_rows(&mut self, x: Var, rows: usize) -> Result<Var, NnError> {
        let xs = self.shape(x);
        let c = match xs {
            [l, c] if rows <= *l => *c,
            _ => return Err(shape_err("take_rows", format!("x {xs:?}, rows {rows}"))),
        };
        let y = self.value(x).data()[..rows * c].to_vec();
        let needs = self.needs(x);
        let t = Tensor::new(vec![rows, c], y)?;
        Ok(self.push(Cow::Owned(t), Op::TakeRows { x }, needs))
    }

    /// Back-propagates the given output gradients. Previously computed
    /// gradients are discarded.
    pub fn backward(&mut self, seeds: &[(Var, &[F])]) -> Result<(), NnError> {
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        let mut last = 0;
        for &(v, g) in seeds {
            if g.len() != self.value(v).numel() {
                return Err(shape_err("backward", format!("seed for node {} has wrong size", v.0)));
            }
            accumulate(&mut self.grads[v.0], g);
            last = last.max(v.0);
        }
        for i in (0..=last).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(gy) = self.grads[i].take() else {
                continue;
            };
            self.backward_node(i, &gy);
            self.grads[i] = Some(gy);
        }
        Ok(())
    }

    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn add_grad(&mut self, v: Var, g: &[F]) {
        if self.nodes[v.0].needs_grad {
            accumulate(&mut self.grads[v.0], g);
        }
    }

    /// Scratch buffer for `v`'s gradient; `None` when it is not needed.
    fn grad_buf(&self, v: Var) -> Option<Vec<F>> {
        self.nodes[v.0]
            .needs_grad
            .then(|| vec![F::zero(); self.value(v).numel()])
    }

    fn backward_node(&mut self, i: usize, gy: &[F]) {
        match self.nodes[i].op {
            Op::Leaf => {}
            Op::Dense { x, w, b } => {
                let ws = self.shape(w);
                let (inp, out) = (ws[0], ws[1]);
                let rows = gy.len() / out;
                if let Some(mut gx) = self.grad_buf(x) {
                    matmul_bt_acc(gy, self.value(w).data(), &mut gx, rows, out, inp);
                    self.add_grad(x, &gx);
                }
                if let Some(mut gw) = self.grad_buf(w) {
                    matmul_at_acc(self.value(x).data(), gy, &mut gw, rows, inp, out);
                    self.add_grad(w, &gw);
                }
                if let Some(gb) = self.grad_buf(b) {
                    let gb = sum_rows(gy, gb, out);
                    self.add_grad(b, &gb);
                }
            }
            Op::Conv1d { x, k, b, pad_left } => {
                let ks = self.shape(k);
                let (taps, cin, cout) = (ks[0], ks[1], ks[2]);
                let len = gy.len() / cout;
                let block = cin * cout;
                if let Some(mut gx) = self.grad_buf(x) {
                    let kd = self.value(k).data();
                    for t in 0..taps {
                        let Some((lo, hi)) = tap_range(len, t, pad_left) else {
                            continue;
                        };
                        let src = lo + t - pad_left;
                        matmul_bt_acc(
                            &gy[lo * cout..hi * cout],
                            &kd[t * block..(t + 1) * block],
                            &mut gx[src * cin..(src + hi - lo) * cin],
                            hi - lo,
                            cout,
                            cin,
                        );
                    }
                    self.add_grad(x, &gx);
                }
                if let Some(mut gk) = self.grad_buf(k) {
                    let xd = self.value(x).data();
                    for t in 0..taps {
                        let Some((lo, hi)) = tap_range(len, t, pad_left) else {
                            continue;
                        };
                        let src = lo + t - pad_left;
                        matmul_at_acc(
                            &xd[src * cin..(src + hi - lo) * cin],
                            &gy[lo * cout..hi * cout],
                            &mut gk[t * block..(t + 1) * block],
                            hi - lo,
                            cin,
                            cout,
                        );
                    }
                    self.add_grad(k, &gk);
                }
                if let Some(gb) = self.grad_buf(b) {
                    let gb = sum_rows(gy, gb, cout);
                    self.add_grad(b, &gb);
                }
            }
            Op::Prelu { x, a } => {
                let c = self.value(a).numel();
                let xd = self.value(x).data();
                let slopes = self.value(a).data();
                let gx = self.grad_buf(x).map(|mut gx| {
                    for (j, g) in gx.iter_mut().enumerate() {
                        *g = if xd[j] > F::zero() { gy[j] } else { slopes[j % c] * gy[j] };
                    }
                    gx
                });
                let ga = self.grad_buf(a).map(|mut ga| {
                    for (j, &v) in xd.iter().enumerate() {
                        if v <= F::zero() {
                            ga[j % c] = ga[j % c] + gy[j] * v;
                        }
                    }
                    ga
                });
                if let Some(gx) = gx {
                    self.add_grad(x, &gx);
                }
                if let Some(ga) = ga {
                    self.add_grad(a, &ga);
                }
            }
            Op::MaxPool { x, ref argmax } => {
                if let Some(mut gx) = self.grad_buf(x) {
                    let c = argmax.len();
                    for (ch, &row) in argmax.iter().enumerate() {
                        gx[row * c + ch] = gx[row * c + ch] + gy[ch];
                    }
                    self.add_grad(x, &gx);
                }
            }
            Op::Upsample { x, factor } => {
                if let Some(mut gx) = self.grad_buf(x) {
                    let c = self.shape(x)[1];
                    if c > 0 {
                        for (r, row) in gx.chunks_exact_mut(c).enumerate() {
                            for rep in 0..factor {
                                let src = &gy[(r * factor + rep) * c..(r * factor + rep + 1) * c];
                                for (g, &s) in row.iter_mut().zip(src) {
                                    *g = *g + s;
                                }
                            }
                        }
                    }
                    self.add_grad(x, &gx);
                }
            }
            Op::Reshape { x } => self.add_grad(x, gy),
            Op::TakeRows { x } => {
                if let Some(mut gx) = self.grad_buf(x) {
                    gx[..gy.len()].copy_from_slice(gy);
                    self.add_grad(x, &gx);
                }
            }
        }
    }
}

/// Output rows `[lo, hi)` whose tap `t` lands inside the input.
fn tap_range(len: usize, t: usize, pad_left: usize) -> Option<(usize, usize)> {
    let lo = pad_left.saturating_sub(t);
    let hi = (len + pad_left).saturating_sub(t).min(len);
    (lo < hi).then_some((lo, hi))
}

fn sum_rows<F: Scalar>(gy: &[F], mut acc: Vec<F>, width: usize) -> Vec<F> {
    for row in gy.chunks_exact(width) {
        for (a, &g) in acc.iter_mut().zip(row) {
            *a = *a + g;
        }
    }
    acc
}

fn accumulate<F: Scalar>(slot: &mut Option<Vec<F>>, g: &[F]) {
    match slot {
        Some(acc) => {
            for (a, &v) in acc.iter_mut().zip(g) {
                *a = *a + v;
            }
        }
        None => *slot = Some(g.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn dense_hand_example() {
        let w = t(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = t(vec![2], vec![3.0, 4.0]);
        let mut tape = Tape::new();
        let x = tape.input(t(vec![2], vec![1.0, 2.0]), false);
        let (wv, bv) = (tape.param(&w), tape.param(&b));
        let y = tape.dense(x, wv, bv).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 6.0]);
    }

    #[test]
    fn dense_identity() {
        let w = t(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = Tensor::zeros(vec![3]);
        let xs = t(vec![2, 3], vec![1.5, -2.0, 3.0, 0.0, 7.0, -1.0]);
        let mut tape = Tape::new();
        let x = tape.input(xs.clone(), false);
        let (wv, bv) = (tape.param(&w), tape.param(&b));
        let y = tape.dense(x, wv, bv).unwrap();
        assert_eq!(tape.value(y), &xs);
    }

    #[test]
    fn conv_single_channel_hand_example() {
        let k = t(vec![1, 1, 1], vec![2.0]);
        let b = Tensor::zeros(vec![1]);
        let mut tape = Tape::new();
        let x = tape.input(t(vec![3, 1], vec![1.0, 2.0, 3.0]), false);
        let (kv, bv) = (tape.param(&k), tape.param(&b));
        let y = tape.conv1d(x, kv, bv).unwrap();
        assert_eq!(tape.value(y).data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn conv_same_padding_keeps_length() {
        for k in 1..=6 {
            let kern = Tensor::<f64>::filled(vec![k, 1, 1], 1.0);
            let b = Tensor::zeros(vec![1]);
            let mut tape = Tape::new();
            let x = tape.input(t(vec![5, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0]), false);
            let (kv, bv) = (tape.param(&kern), tape.param(&b));
            let y = tape.conv1d(x, kv, bv).unwrap();
            assert_eq!(tape.shape(y), &[5, 1]);
            // Window for output l covers inputs [l - (k-1)/2, l + k/2].
            let want: Vec<f64> = (0..5i64)
                .map(|l| {
                    let lo = l - (k as i64 - 1) / 2;
                    let hi = l + k as i64 / 2;
                    (lo..=hi).filter(|&i| (0..5).contains(&i)).map(|i| (i + 1) as f64).sum()
                })
                .collect();
            assert_eq!(tape.value(y).data(), &want[..], "k = {k}");
        }
    }

    #[test]
    fn conv_k1_equals_dense_rowwise() {
        let xs = t(vec![4, 3], (0..12).map(|v| (v as f64 * 0.37).sin()).collect());
        let w = t(vec![3, 2], vec![0.3, -1.2, 0.7, 0.05, -0.4, 2.0]);
        let b = t(vec![2], vec![0.1, -0.2]);
        let k = w.clone().reshaped(vec![1, 3, 2]).unwrap();
        let mut tape = Tape::new();
        let x = tape.input(xs, false);
        let (wv, bv, kv) = (tape.param(&w), tape.param(&b), tape.param(&k));
        let yd = tape.dense(x, wv, bv).unwrap();
        let yc = tape.conv1d(x, kv, bv).unwrap();
        assert_eq!(tape.value(yd).data(), tape.value(yc).data());
    }

    #[test]
    fn prelu_examples() {
        let a = t(vec![1], vec![0.25]);
        let one = t(vec![1], vec![1.0]);
        let mut tape = Tape::new();
        let x = tape.input(t(vec![3, 1], vec![-2.0, 0.0, 3.0]), false);
        let av = tape.param(&a);
        let y = tape.prelu(x, av).unwrap();
        assert_eq!(tape.value(y).data(), &[-0.5, 0.0, 3.0]);
        let ov = tape.param(&one);
        let y1 = tape.prelu(x, ov).unwrap();
        assert_eq!(tape.value(y1).data(), &[-2.0, 0.0, 3.0]);
    }

    #[test]
    fn max_pool_examples_and_first_argmax() {
        let mut tape = Tape::new();
        let x = tape.input(t(vec![3, 2], vec![3.0, 5.0, -1.0, 5.0, 7.0, 1.0]), true);
        let y = tape.global_max_pool(x).unwrap();
        assert_eq!(tape.value(y).data(), &[7.0, 5.0]);
        tape.backward(&[(y, &[1.0, 1.0])]).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);

        let mut tape = Tape::new();
        let x = tape.input(t(vec![0, 2], vec![]), false);
        assert!(tape.global_max_pool(x).is_err());
    }

    #[test]
    fn upsample_repeats_rows_and_sums_back() {
        let mut tape = Tape::new();
        let x = tape.input(t(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]), true);
        let y = tape.upsample_repeat(x, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0]);
        let same = tape.upsample_repeat(x, 1).unwrap();
        assert_eq!(tape.value(same).data(), tape.value(x).data());
        assert!(tape.upsample_repeat(x, 0).is_err());
        tape.backward(&[(y, &[1.0; 8])]).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0; 4]);
    }

    #[test]
    fn shape_errors() {
        let w = Tensor::<f64>::zeros(vec![3, 2]);
        let b = Tensor::<f64>::zeros(vec![2]);
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(vec![4]), false);
        let (wv, bv) = (tape.param(&w), tape.param(&b));
        assert!(matches!(tape.dense(x, wv, bv), Err(NnError::Shape { .. })));
        assert!(tape.reshape(x, vec![3]).is_err());
        let r = tape.reshape(x, vec![2, 2]).unwrap();
        assert_eq!(tape.shape(r), &[2, 2]);
    }
}
