//! A small reverse-mode autodiff tape over dense `f64` tensors.
//!
//! Every operation appends a node holding its value and the ids of its
//! inputs. [`Tape::backward`] walks the nodes in reverse and accumulates
//! gradients for every node that depends on a leaf created with
//! `requires_grad`.

use rand::Rng;

use crate::error::{Error, Result};

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                expected: format!("{shape:?} ({expected} values)"),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::vector(vec![value])
    }

    /// Entries drawn uniformly from `[-bound, bound)`.
    pub fn uniform(shape: Vec<usize>, bound: f64, rng: &mut impl Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `x[m] · W[m×n] -> [n]`
    VecMat(Var, Var),
    /// `M[l×n] · x[n] -> [l]`
    MatVec(Var, Var),
    /// `A[l×m] · B[m×n] -> [l×n]`
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    /// `M[l×n] + r[n]` broadcast over rows.
    AddRows(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    OneMinus(Var),
    Softmax(Var),
    Concat(Var, Var),
    Stack(Vec<Var>),
    Gather(Var, usize),
    CrossEntropy(Var, usize),
    Mean(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<&'static str>,
}

/// Gradients of one scalar with respect to every node that needed them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads[var.0].as_deref()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Fails if any operation produced a NaN or infinity.
    pub fn check(&self) -> Result<()> {
        match self.fault {
            Some(op) => Err(Error::NonFinite(op.to_string())),
            None => Ok(()),
        }
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, needs_grad: bool) -> Var {
        if self.fault.is_none() && !value.is_finite() {
            self.fault = Some(name);
        }
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push("leaf", value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn vecmat(&mut self, x: Var, w: Var) -> Var {
        let (xv, wv) = (self.value(x), self.value(w));
        let (m, n) = (wv.rows(), wv.cols());
        assert_eq!(xv.len(), m, "vecmat: x has {} entries, W is {m}x{n}", xv.len());
        let mut out = vec![0.0; n];
        for (i, &xi) in xv.data().iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &wij) in out.iter_mut().zip(wv.row(i)) {
                *o += xi * wij;
            }
        }
        let ng = self.needs(x) || self.needs(w);
        self.push("vecmat", Tensor::vector(out), Op::VecMat(x, w), ng)
    }

    pub fn matvec(&mut self, m: Var, x: Var) -> Var {
        let (mv, xv) = (self.value(m), self.value(x));
        assert_eq!(mv.cols(), xv.len(), "matvec: inner dimensions differ");
        let out = (0..mv.rows())
            .map(|i| mv.row(i).iter().zip(xv.data()).map(|(a, b)| a * b).sum())
            .collect();
        let ng = self.needs(m) || self.needs(x);
        self.push("matvec", Tensor::vector(out), Op::MatVec(m, x), ng)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let (l, k, n) = (av.rows(), av.cols(), bv.cols());
        assert_eq!(k, bv.rows(), "matmul: inner dimensions differ");
        let mut out = vec![0.0; l * n];
        for i in 0..l {
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &aip) in av.row(i).iter().enumerate() {
                for (o, &bpj) in orow.iter_mut().zip(bv.row(p)) {
                    *o += aip * bpj;
                }
            }
        }
        let ng = self.needs(a) || self.needs(b);
        let value = Tensor::new(vec![l, n], out).expect("matmul shape");
        self.push("matmul", value, Op::MatMul(a, b), ng)
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "{name}: shapes differ");
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let ng = self.needs(a) || self.needs(b);
        self.push(name, value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn add_rows(&mut self, m: Var, r: Var) -> Var {
        let (mv, rv) = (self.value(m), self.value(r));
        let n = mv.cols();
        assert_eq!(rv.len(), n, "add_rows: row width differs");
        let data = mv
            .data()
            .iter()
            .enumerate()
            .map(|(k, &x)| x + rv.data()[k % n])
            .collect();
        let value = Tensor::new(mv.shape().to_vec(), data).expect("same shape");
        let ng = self.needs(m) || self.needs(r);
        self.push("add_rows", value, Op::AddRows(m, r), ng)
    }

    fn map(&mut self, name: &'static str, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let ng = self.needs(a);
        self.push(name, value, op, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map("sigmoid", a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map("tanh", a, Op::Tanh(a), f64::tanh)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.map("one_minus", a, Op::OneMinus(a), |x| 1.0 - x)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let probs = softmax(self.value(a).data());
        let ng = self.needs(a);
        self.push("softmax", Tensor::vector(probs), Op::Softmax(a), ng)
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        let ng = self.needs(a) || self.needs(b);
        self.push("concat", Tensor::vector(data), Op::Concat(a, b), ng)
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty(), "stack: no rows");
        let n = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            assert_eq!(self.value(r).len(), n, "stack: ragged rows");
            data.extend_from_slice(self.value(r).data());
        }
        let ng = rows.iter().any(|&r| self.needs(r));
        let value = Tensor::new(vec![rows.len(), n], data).expect("stack shape");
        self.push("stack", value, Op::Stack(rows.to_vec()), ng)
    }

    /// Row `index` of a matrix.
    pub fn gather(&mut self, table: Var, index: usize) -> Var {
        let row = self.value(table).row(index).to_vec();
        let ng = self.needs(table);
        self.push("gather", Tensor::vector(row), Op::Gather(table, index), ng)
    }

    /// `-log softmax(logits)[target]` as a scalar.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Var {
        let z = self.value(logits).data();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        let ng = self.needs(logits);
        self.push("cross_entropy", Tensor::scalar(loss), Op::CrossEntropy(logits, target), ng)
    }

    /// Mean of scalar nodes.
    pub fn mean(&mut self, items: &[Var]) -> Var {
        assert!(!items.is_empty(), "mean: no items");
        let total: f64 = items.iter().map(|&v| self.value(v).data()[0]).sum();
        let ng = items.iter().any(|&v| self.needs(v));
        self.push(
            "mean",
            Tensor::scalar(total / items.len() as f64),
            Op::Mean(items.to_vec()),
            ng,
        )
    }

    /// Back-propagates from the scalar `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0; self.value(output).len()]);

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if self.nodes[v.0].needs_grad {
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
                f(slot);
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::VecMat(x, w) => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                acc(*x, &mut |dx| {
                    for (i, d) in dx.iter_mut().enumerate() {
                        *d += wv.row(i).iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                    }
                });
                acc(*w, &mut |dw| {
                    let n = g.len();
                    for (i, &xi) in xv.data().iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        for (d, &gj) in dw[i * n..(i + 1) * n].iter_mut().zip(g) {
                            *d += xi * gj;
                        }
                    }
                });
            }
            Op::MatVec(m, x) => {
                let (mv, xv) = (self.value(*m), self.value(*x));
                let n = xv.len();
                acc(*m, &mut |dm| {
                    for (i, &gi) in g.iter().enumerate() {
                        for (d, &xj) in dm[i * n..(i + 1) * n].iter_mut().zip(xv.data()) {
                            *d += gi * xj;
                        }
                    }
                });
                acc(*x, &mut |dx| {
                    for (i, &gi) in g.iter().enumerate() {
                        for (d, &mij) in dx.iter_mut().zip(mv.row(i)) {
                            *d += gi * mij;
                        }
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (l, k, n) = (av.rows(), av.cols(), bv.cols());
                acc(*a, &mut |da| {
                    for i in 0..l {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            da[i * k + p] += grow.iter().zip(bv.row(p)).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                acc(*b, &mut |db| {
                    for i in 0..l {
                        let grow = &g[i * n..(i + 1) * n];
                        for (p, &aip) in av.row(i).iter().enumerate() {
                            for (d, &gj) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d += aip * gj;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    acc(v, &mut |d| d.iter_mut().zip(g).for_each(|(d, gi)| *d += gi));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |d| {
                    for ((d, gi), bi) in d.iter_mut().zip(g).zip(bv) {
                        *d += gi * bi;
                    }
                });
                acc(*b, &mut |d| {
                    for ((d, gi), ai) in d.iter_mut().zip(g).zip(av) {
                        *d += gi * ai;
                    }
                });
            }
            Op::AddRows(m, r) => {
                let n = self.value(*r).len();
                acc(*m, &mut |d| d.iter_mut().zip(g).for_each(|(d, gi)| *d += gi));
                acc(*r, &mut |d| {
                    for (k, gi) in g.iter().enumerate() {
                        d[k % n] += gi;
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                acc(*a, &mut |d| {
                    for ((d, gi), yi) in d.iter_mut().zip(g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                });
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                acc(*a, &mut |d| {
                    for ((d, gi), yi) in d.iter_mut().zip(g).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                });
            }
            Op::OneMinus(a) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, gi)| *d -= gi));
            }
            Op::Softmax(a) => {
                let y = node.value.data();
                let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                acc(*a, &mut |d| {
                    for ((d, gi), yi) in d.iter_mut().zip(g).zip(y) {
                        *d += yi * (gi - dot);
                    }
                });
            }
            Op::Concat(a, b) => {
                let split = self.value(*a).len();
                acc(*a, &mut |d| d.iter_mut().zip(&g[..split]).for_each(|(d, gi)| *d += gi));
                acc(*b, &mut |d| d.iter_mut().zip(&g[split..]).for_each(|(d, gi)| *d += gi));
            }
            Op::Stack(rows) => {
                let n = node.value.cols();
                for (i, &r) in rows.iter().enumerate() {
                    acc(r, &mut |d| {
                        d.iter_mut()
                            .zip(&g[i * n..(i + 1) * n])
                            .for_each(|(d, gi)| *d += gi)
                    });
                }
            }
            Op::Gather(table, index) => {
                let n = g.len();
                acc(*table, &mut |d| {
                    d[index * n..(index + 1) * n]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(d, gi)| *d += gi)
                });
            }
            Op::CrossEntropy(logits, target) => {
                let probs = softmax(self.value(*logits).data());
                acc(*logits, &mut |d| {
                    for (k, (d, p)) in d.iter_mut().zip(&probs).enumerate() {
                        let onehot = if k == *target { 1.0 } else { 0.0 };
                        *d += g[0] * (p - onehot);
                    }
                });
            }
            Op::Mean(items) => {
                let share = g[0] / items.len() as f64;
                for &v in items {
                    acc(v, &mut |d| d[0] += share);
                }
            }
        }
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{assert_close, numeric_grad};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Every op in one expression: checks each leaf against finite differences.
    #[test]
    fn composite_expression_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Tensor::uniform(vec![3, 4], 1.0, &mut rng);
        let w = Tensor::uniform(vec![4, 5], 1.0, &mut rng);
        let x = Tensor::uniform(vec![3], 1.0, &mut rng);
        let r = Tensor::uniform(vec![5], 1.0, &mut rng);
        let inputs = [m, w, x, r];

        let eval = |vals: &[Tensor], grads: bool| -> (f64, Option<Vec<Vec<f64>>>) {
            let mut t = Tape::new();
            let vars: Vec<Var> = vals.iter().map(|v| t.leaf(v.clone(), true)).collect();
            let (m, w, x, r) = (vars[0], vars[1], vars[2], vars[3]);
            let mw = t.matmul(m, w); // 3x5
            let shifted = t.add_rows(mw, r);
            let act = t.tanh(shifted);
            let xm = t.vecmat(x, m); // 4
            let back = t.matvec(w, r); // 4
            let s = t.sigmoid(xm);
            let prod = t.mul(s, back);
            let om = t.one_minus(prod);
            let sm = t.softmax(om);
            let row0 = t.gather(act, 1);
            let both = t.concat(sm, row0); // 9
            let st = t.stack(&[both, both]);
            let ones = t_ones(&mut t, 2);
            let col = t.vecmat(ones, st);
            let sum = t.add(col, col);
            let ce = t.cross_entropy(sum, 2);
            let ce2 = t.cross_entropy(sum, 7);
            let out = t.mean(&[ce, ce2]);
            let value = t.value(out).data()[0];
            let grads = grads.then(|| {
                let g = t.backward(out);
                vars.iter().map(|&v| g.get(v).unwrap().to_vec()).collect()
            });
            (value, grads)
        };

        let (_, grads) = eval(&inputs, true);
        let grads = grads.unwrap();
        for k in 0..inputs.len() {
            let numeric = numeric_grad(&inputs[k], &|perturbed| {
                let mut vals = inputs.to_vec();
                vals[k] = perturbed.clone();
                eval(&vals, false).0
            });
            assert_close(&grads[k], &numeric);
        }
    }

    fn t_ones(t: &mut Tape, n: usize) -> Var {
        t.constant(Tensor::vector(vec![1.0; n]))
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = t.leaf(Tensor::vector(vec![0.5, -0.5]), true);
        let c = t.mul(a, b);
        let logits = t.add(c, b);
        let loss = t.cross_entropy(logits, 0);
        let g = t.backward(loss);
        assert!(g.get(a).is_none());
        assert!(g.get(b).is_some());
    }

    #[test]
    fn non_finite_values_trip_the_check() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![f64::MAX, 1.0]));
        assert!(t.check().is_ok());
        let _ = t.add(a, a);
        assert!(matches!(t.check(), Err(Error::NonFinite(op)) if op == "add"));
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 999.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| x.is_finite()));
    }
}
