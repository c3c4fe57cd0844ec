//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are appended
//! in evaluation order, so walking the tape backwards from the loss visits
//! every node after all of its consumers.

use super::param::{ParamGrads, ParamId, ParamStore};
use super::tensor::dot;
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Tensor),
    Relu(Var),
    Gelu(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    XLogX(Var),
    SoftmaxRows(Var),
    L2NormRows(Var),
    Sum(Var),
    SumRows(Var),
    MeanCols(Var),
    Transpose(Var),
    Reshape(Var),
    BatchMatMulNT(Var, Var, usize),
    BatchMatMul(Var, Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records operations on tensors for later differentiation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    degenerate_rows: usize,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of all-zero rows seen by `l2_normalize_rows` so far.
    pub fn degenerate_rows(&self) -> usize {
        self.degenerate_rows
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{op:?}")));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn shape2(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        self.push(v, Op::MatMulNT(a, b))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds a `1 × m` row to every row of an `n × m` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (n, m) = self.shape2(x);
        let r = self.value(row);
        if r.len() != m {
            return Err(Error::shape("add_row", format!("{n}x{m} + row of {}", r.len())));
        }
        let mut out = self.value(x).clone();
        for i in 0..n {
            for (o, b) in out.row_mut(i).iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(x, row))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let v = self.value(x).map(|a| a * s);
        self.push(v, Op::Scale(x, s))
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var> {
        if self.value(x).shape() != c.shape() {
            return Err(Error::shape(
                "mul_const",
                format!("{:?} vs {:?}", self.value(x).shape(), c.shape()),
            ));
        }
        let v = self.value(x).zip_map(&c, |a, b| a * b);
        self.push(v, Op::MulConst(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|a| a.max(0.0));
        self.push(v, Op::Relu(x))
    }

    /// tanh approximation of GELU.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let v = self
            .value(x)
            .map(|a| 0.5 * a * (1.0 + (GELU_C * (a + GELU_A * a * a * a)).tanh()));
        self.push(v, Op::Gelu(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(f64::exp);
        self.push(v, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(f64::ln);
        self.push(v, Op::Log(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|a| a * a);
        self.push(v, Op::Square(x))
    }

    /// `x ln x` with `0 ln 0 = 0`.
    pub fn xlogx(&mut self, x: Var) -> Result<Var> {
        if self.value(x).data().iter().any(|&a| a < 0.0) {
            return Err(Error::invalid("xlogx of a negative value"));
        }
        let v = self.value(x).map(xlogx);
        self.push(v, Op::XLogX(x))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let mut out = t.clone();
        for i in 0..t.rows() {
            softmax_in_place(out.row_mut(i));
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    /// Scales each row to unit Euclidean norm. All-zero rows stay zero and
    /// are counted in [`Graph::degenerate_rows`].
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let mut out = t.clone();
        let mut degenerate = 0;
        for i in 0..t.rows() {
            let row = out.row_mut(i);
            let norm = dot(row, row).sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|a| *a /= norm);
            } else {
                degenerate += 1;
            }
        }
        if degenerate > 0 {
            log::warn!("l2-normalize: {degenerate} all-zero row(s) left as zero");
            self.degenerate_rows += degenerate;
        }
        self.push(out, Op::L2NormRows(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// `n × m → n × 1`
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let data = (0..t.rows()).map(|i| t.row(i).iter().sum()).collect();
        let n = t.rows();
        self.push(Tensor::matrix(n, 1, data), Op::SumRows(x))
    }

    /// `n × m → 1 × m`, the mean of each column.
    pub fn mean_cols(&mut self, x: Var) -> Result<Var> {
        let (n, m) = self.shape2(x);
        if n == 0 {
            return Err(Error::shape("mean_cols", "no rows"));
        }
        let t = self.value(x);
        let mut out = vec![0.0; m];
        for i in 0..n {
            for (o, a) in out.iter_mut().zip(t.row(i)) {
                *o += a;
            }
        }
        out.iter_mut().for_each(|o| *o /= n as f64);
        self.push(Tensor::matrix(1, m, out), Op::MeanCols(x))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).transpose();
        self.push(v, Op::Transpose(x))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let v = self.value(x).clone().reshape(&[rows, cols])?;
        self.push(v, Op::Reshape(x))
    }

    /// Per-batch `a_b · v_bᵀ` where `a` stacks `batch` blocks of `p` rows and
    /// `b` stacks `batch` blocks of `m` rows.
    pub fn batch_matmul_nt(&mut self, a: Var, b: Var, batch: usize) -> Result<Var> {
        let (p, m, _) = self.batch_dims("batch_matmul_nt", a, b, batch, true)?;
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Tensor::zeros(&[batch * p, m]);
        for bi in 0..batch {
            for i in 0..p {
                let arow = av.row(bi * p + i);
                let orow = out.row_mut(bi * p + i);
                for (j, o) in orow.iter_mut().enumerate() {
                    *o = dot(arow, bv.row(bi * m + j));
                }
            }
        }
        self.push(out, Op::BatchMatMulNT(a, b, batch))
    }

    /// Per-batch `a_b · v_b` where `a` is `(batch·p) × m` and `v` is
    /// `(batch·m) × r`.
    pub fn batch_matmul(&mut self, a: Var, v: Var, batch: usize) -> Result<Var> {
        let (p, m, r) = self.batch_dims("batch_matmul", a, v, batch, false)?;
        let (av, vv) = (self.value(a), self.value(v));
        let mut out = Tensor::zeros(&[batch * p, r]);
        for bi in 0..batch {
            for i in 0..p {
                let arow = av.row(bi * p + i).to_vec();
                let orow = out.row_mut(bi * p + i);
                for (j, &w) in arow.iter().enumerate() {
                    for (o, x) in orow.iter_mut().zip(vv.row(bi * m + j)) {
                        *o += w * x;
                    }
                }
            }
        }
        self.push(out, Op::BatchMatMul(a, v, batch))
    }

    fn batch_dims(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        batch: usize,
        transposed: bool,
    ) -> Result<(usize, usize, usize)> {
        let (ar, ac) = self.shape2(a);
        let (br, bc) = self.shape2(b);
        if batch == 0 || ar % batch != 0 || br % batch != 0 {
            return Err(Error::shape(op, format!("{ar} and {br} rows in {batch} batches")));
        }
        let p = ar / batch;
        let m = br / batch;
        if transposed {
            if ac != bc {
                return Err(Error::shape(op, format!("widths {ac} vs {bc}")));
            }
            Ok((p, m, ac))
        } else {
            if ac != m {
                return Err(Error::shape(op, format!("{ac} columns vs {m} rows per batch")));
            }
            Ok((p, m, bc))
        }
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_nt(self.value(*b))?;
                    let db = self.value(*a).matmul_tn(&g)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulNT(a, b) => {
                    let da = g.matmul(self.value(*b))?;
                    let db = g.matmul_tn(self.value(*a))?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|x| -x));
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(*b), |x, y| x * y);
                    let db = g.zip_map(self.value(*a), |x, y| x * y);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(x, row) => {
                    let m = g.cols();
                    let mut dr = vec![0.0; m];
                    for i in 0..g.rows() {
                        for (d, v) in dr.iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                    let shape = self.value(*row).shape().to_vec();
                    accumulate(&mut grads, *row, Tensor::new(shape, dr)?);
                    accumulate(&mut grads, *x, g.clone());
                }
                Op::Scale(x, s) => accumulate(&mut grads, *x, g.map(|a| a * s)),
                Op::MulConst(x, c) => accumulate(&mut grads, *x, g.zip_map(c, |a, b| a * b)),
                Op::Relu(x) => {
                    let d = g.zip_map(self.value(*x), |a, xv| if xv > 0.0 { a } else { 0.0 });
                    accumulate(&mut grads, *x, d);
                }
                Op::Gelu(x) => {
                    let d = g.zip_map(self.value(*x), |a, xv| a * gelu_grad(xv));
                    accumulate(&mut grads, *x, d);
                }
                Op::Exp(x) => accumulate(&mut grads, *x, g.zip_map(y, |a, e| a * e)),
                Op::Log(x) => {
                    accumulate(&mut grads, *x, g.zip_map(self.value(*x), |a, xv| a / xv))
                }
                Op::Square(x) => {
                    accumulate(&mut grads, *x, g.zip_map(self.value(*x), |a, xv| 2.0 * a * xv))
                }
                Op::XLogX(x) => {
                    let d = g.zip_map(self.value(*x), |a, xv| {
                        if xv > 0.0 {
                            a * (xv.ln() + 1.0)
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *x, d);
                }
                Op::SoftmaxRows(x) => {
                    let mut d = g.clone();
                    for i in 0..y.rows() {
                        let yr = y.row(i);
                        let s = dot(g.row(i), yr);
                        for (dv, (&gv, &yv)) in d.row_mut(i).iter_mut().zip(g.row(i).iter().zip(yr)) {
                            *dv = yv * (gv - s);
                        }
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::L2NormRows(x) => {
                    let xv = self.value(*x);
                    let mut d = Tensor::zeros(xv.shape());
                    for i in 0..y.rows() {
                        let xr = xv.row(i);
                        let norm = dot(xr, xr).sqrt();
                        if norm == 0.0 {
                            continue;
                        }
                        let yr = y.row(i);
                        let s = dot(g.row(i), yr);
                        for (dv, (&gv, &yv)) in d.row_mut(i).iter_mut().zip(g.row(i).iter().zip(yr)) {
                            *dv = (gv - yv * s) / norm;
                        }
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::Sum(x) => {
                    let gv = g.item();
                    accumulate(&mut grads, *x, Tensor::full(self.value(*x).shape(), gv));
                }
                Op::SumRows(x) => {
                    let xv = self.value(*x);
                    let mut d = Tensor::zeros(xv.shape());
                    for i in 0..xv.rows() {
                        let gi = g.data()[i];
                        d.row_mut(i).iter_mut().for_each(|v| *v = gi);
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::MeanCols(x) => {
                    let xv = self.value(*x);
                    let n = xv.rows() as f64;
                    let mut d = Tensor::zeros(xv.shape());
                    for i in 0..xv.rows() {
                        for (dv, gv) in d.row_mut(i).iter_mut().zip(g.data()) {
                            *dv = gv / n;
                        }
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::Transpose(x) => accumulate(&mut grads, *x, g.transpose()),
                Op::Reshape(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    accumulate(&mut grads, *x, g.clone().reshape(&shape)?);
                }
                Op::BatchMatMulNT(a, b, batch) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let p = av.rows() / batch;
                    let m = bv.rows() / batch;
                    let mut da = Tensor::zeros(av.shape());
                    let mut db = Tensor::zeros(bv.shape());
                    for bi in 0..*batch {
                        for i in 0..p {
                            let r = bi * p + i;
                            for j in 0..m {
                                let c = bi * m + j;
                                let gv = g.get(r, j);
                                for (d, x) in da.row_mut(r).iter_mut().zip(bv.row(c)) {
                                    *d += gv * x;
                                }
                                for (d, x) in db.row_mut(c).iter_mut().zip(av.row(r)) {
                                    *d += gv * x;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::BatchMatMul(a, v, batch) => {
                    let (av, vv) = (self.value(*a), self.value(*v));
                    let p = av.rows() / batch;
                    let m = vv.rows() / batch;
                    let mut da = Tensor::zeros(av.shape());
                    let mut dv = Tensor::zeros(vv.shape());
                    for bi in 0..*batch {
                        for i in 0..p {
                            let r = bi * p + i;
                            let grow = g.row(r);
                            for j in 0..m {
                                let c = bi * m + j;
                                da.set(r, j, dot(grow, vv.row(c)));
                                let w = av.get(r, j);
                                for (d, x) in dv.row_mut(c).iter_mut().zip(grow) {
                                    *d += w * x;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *v, dv);
                }
            }
            grads[idx] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((Var(i), id)),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let th = u.tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for a in row.iter_mut() {
        *a = (*a - max).exp();
        s += *a;
    }
    row.iter_mut().for_each(|a| *a /= s);
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(Var, ParamId)>,
}

impl Gradients {
    /// Gradient with respect to any recorded node; `None` if the loss does
    /// not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Parameter gradients, summed over every use of each parameter.
    pub fn params(&self) -> ParamGrads {
        let mut out = ParamGrads::new();
        for &(v, id) in &self.params {
            if let Some(g) = &self.grads[v.0] {
                out.entry(id)
                    .and_modify(|acc: &mut Tensor| acc.add_assign(g))
                    .or_insert_with(|| g.clone());
            }
        }
        out
    }
}
