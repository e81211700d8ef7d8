//! Reverse-mode automatic differentiation over batched tensors.
//!
//! A [`Tape`] records a DAG of `[rows x cols]` tensors produced by a fixed
//! primitive set (affine ops, softplus/sigmoid, sin/cos, square, log,
//! row-wise norms and dot products). One backward pass yields exact gradients
//! of a scalar node with respect to every parameter leaf. Spatial network
//! gradients are themselves expressed as tape ops, so losses built on them
//! differentiate exactly too.

use ndarray::{concatenate, Array2, Axis};

use super::scalar::Real;
use crate::error::{Error, Result};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op<T> {
    Constant,
    Param,
    MatMul,
    Transpose,
    Add,
    /// `[n,m] + [1,m]` broadcast over rows.
    AddRow,
    Sub,
    Mul,
    /// `[n,m] * [n,1]` broadcast over columns.
    MulCol,
    Neg,
    Scale(T),
    Offset(T),
    /// Softplus with sharpness beta: `ln(1 + exp(beta x)) / beta`.
    Softplus(T),
    Sigmoid,
    Sin,
    Cos,
    Square,
    Log,
    Recip,
    SumAll,
    /// Row-wise dot product of two `[n,m]` tensors -> `[n,1]`.
    DotRows,
    /// Row-wise `sqrt(sum x^2 + eps^2)` -> `[n,1]`.
    NormRows(T),
    ConcatCols,
    SliceCols(usize, usize),
}

struct Node<T: Real> {
    value: Array2<T>,
    op: Op<T>,
    args: [usize; 2],
    needs_grad: bool,
}

/// Gradients of one scalar node with respect to every differentiable leaf.
pub struct Gradients<T: Real> {
    adjoints: Vec<Option<Array2<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Option<&Array2<T>> {
        self.adjoints[v.0].as_ref()
    }
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, args: [usize; 2], needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            args,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn inherits(&self, a: Var) -> bool {
        self.nodes[a.0].needs_grad
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Constant, [0, 0], false)
    }

    /// Differentiable leaf (network parameter).
    pub fn param(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Param, [0, 0], true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        let g = self.inherits(a) || self.inherits(b);
        self.push(v, Op::MatMul, [a.0, b.0], g)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        let g = self.inherits(a);
        self.push(v, Op::Transpose, [a.0, 0], g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let g = self.inherits(a) || self.inherits(b);
        self.push(v, Op::Add, [a.0, b.0], g)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        let g = self.inherits(a) || self.inherits(row);
        self.push(v, Op::AddRow, [a.0, row.0], g)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        let g = self.inherits(a) || self.inherits(b);
        self.push(v, Op::Sub, [a.0, b.0], g)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        let g = self.inherits(a) || self.inherits(b);
        self.push(v, Op::Mul, [a.0, b.0], g)
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let v = self.value(a) * self.value(col);
        let g = self.inherits(a) || self.inherits(col);
        self.push(v, Op::MulCol, [a.0, col.0], g)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| -x);
        let g = self.inherits(a);
        self.push(v, Op::Neg, [a.0, 0], g)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).mapv(|x| x * c);
        let g = self.inherits(a);
        self.push(v, Op::Scale(c), [a.0, 0], g)
    }

    pub fn offset(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).mapv(|x| x + c);
        let g = self.inherits(a);
        self.push(v, Op::Offset(c), [a.0, 0], g)
    }

    pub fn softplus(&mut self, a: Var, beta: T) -> Var {
        let v = self.value(a).mapv(|x| softplus_stable(x, beta));
        let g = self.inherits(a);
        self.push(v, Op::Softplus(beta), [a.0, 0], g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid_stable);
        let g = self.inherits(a);
        self.push(v, Op::Sigmoid, [a.0, 0], g)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.sin());
        let g = self.inherits(a);
        self.push(v, Op::Sin, [a.0, 0], g)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.cos());
        let g = self.inherits(a);
        self.push(v, Op::Cos, [a.0, 0], g)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        let g = self.inherits(a);
        self.push(v, Op::Square, [a.0, 0], g)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.ln());
        let g = self.inherits(a);
        self.push(v, Op::Log, [a.0, 0], g)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| T::one() / x);
        let g = self.inherits(a);
        self.push(v, Op::Recip, [a.0, 0], g)
    }

    /// Sum of all elements, `[1,1]`.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let g = self.inherits(a);
        self.push(Array2::from_elem((1, 1), s), Op::SumAll, [a.0, 0], g)
    }

    pub fn dot_rows(&mut self, a: Var, b: Var) -> Var {
        let prod = self.value(a) * self.value(b);
        let v = prod.sum_axis(Axis(1)).insert_axis(Axis(1));
        let g = self.inherits(a) || self.inherits(b);
        self.push(v, Op::DotRows, [a.0, b.0], g)
    }

    /// Row-wise euclidean norm with an epsilon guard inside the square root.
    pub fn norm_rows(&mut self, a: Var, eps: T) -> Var {
        let sq = self.value(a).mapv(|x| x * x);
        let v = sq
            .sum_axis(Axis(1))
            .insert_axis(Axis(1))
            .mapv(|x| (x + eps * eps).sqrt());
        let g = self.inherits(a);
        self.push(v, Op::NormRows(eps), [a.0, 0], g)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("concat shapes");
        let g = self.inherits(a) || self.inherits(b);
        self.push(v, Op::ConcatCols, [a.0, b.0], g)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self
            .value(a)
            .slice(ndarray::s![.., start..end])
            .to_owned();
        let g = self.inherits(a);
        self.push(v, Op::SliceCols(start, end), [a.0, 0], g)
    }

    /// Apply a unary primitive by name; the error path for graphs assembled
    /// from serialized descriptions.
    pub fn unary_op(&mut self, name: &str, a: Var) -> Result<Var> {
        match name {
            "softplus" => Ok(self.softplus(a, T::one())),
            "sigmoid" => Ok(self.sigmoid(a)),
            "sin" => Ok(self.sin(a)),
            "cos" => Ok(self.cos(a)),
            "square" => Ok(self.square(a)),
            "log" => Ok(self.log(a)),
            "neg" => Ok(self.neg(a)),
            "recip" => Ok(self.recip(a)),
            "sum" => Ok(self.sum(a)),
            "transpose" => Ok(self.transpose(a)),
            other => Err(Error::UnsupportedPrimitive(other.to_string())),
        }
    }

    /// Apply a binary primitive by name.
    pub fn binary_op(&mut self, name: &str, a: Var, b: Var) -> Result<Var> {
        match name {
            "add" => Ok(self.add(a, b)),
            "sub" => Ok(self.sub(a, b)),
            "mul" => Ok(self.mul(a, b)),
            "matmul" => Ok(self.matmul(a, b)),
            "dot" => Ok(self.dot_rows(a, b)),
            other => Err(Error::UnsupportedPrimitive(other.to_string())),
        }
    }

    /// Reverse pass from a `[1,1]` loss node. Returns the adjoint of every
    /// node that required gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).dim() != (1, 1) {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).dim()
            )));
        }
        let mut adj: Vec<Option<Array2<T>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Array2::from_elem((1, 1), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                adj[i] = Some(g);
                continue;
            }
            let [a, b] = node.args;
            match node.op {
                Op::Constant | Op::Param => {}
                Op::MatMul => {
                    if self.nodes[a].needs_grad {
                        let da = g.dot(&self.nodes[b].value.t());
                        accumulate(&mut adj[a], da);
                    }
                    if self.nodes[b].needs_grad {
                        let db = self.nodes[a].value.t().dot(&g);
                        accumulate(&mut adj[b], db);
                    }
                }
                Op::Transpose => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], g.t().to_owned());
                    }
                }
                Op::Add => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], g.clone());
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut adj[b], g.clone());
                    }
                }
                Op::AddRow => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], g.clone());
                    }
                    if self.nodes[b].needs_grad {
                        let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut adj[b], db);
                    }
                }
                Op::Sub => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], g.clone());
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut adj[b], g.mapv(|x| -x));
                    }
                }
                Op::Mul => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], &g * &self.nodes[b].value);
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut adj[b], &g * &self.nodes[a].value);
                    }
                }
                Op::MulCol => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], &g * &self.nodes[b].value);
                    }
                    if self.nodes[b].needs_grad {
                        let db = (&g * &self.nodes[a].value)
                            .sum_axis(Axis(1))
                            .insert_axis(Axis(1));
                        accumulate(&mut adj[b], db);
                    }
                }
                Op::Neg => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], g.mapv(|x| -x));
                    }
                }
                Op::Scale(c) => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], g.mapv(|x| x * c));
                    }
                }
                Op::Offset(_) => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], g.clone());
                    }
                }
                Op::Softplus(beta) => {
                    if self.nodes[a].needs_grad {
                        let da = &g * &self.nodes[a].value.mapv(|x| sigmoid_stable(x * beta));
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::Sigmoid => {
                    if self.nodes[a].needs_grad {
                        let da = &g * &node.value.mapv(|y| y * (T::one() - y));
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::Sin => {
                    if self.nodes[a].needs_grad {
                        let da = &g * &self.nodes[a].value.mapv(|x| x.cos());
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::Cos => {
                    if self.nodes[a].needs_grad {
                        let da = &g * &self.nodes[a].value.mapv(|x| -x.sin());
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::Square => {
                    if self.nodes[a].needs_grad {
                        let two = T::one() + T::one();
                        let da = &g * &self.nodes[a].value.mapv(|x| two * x);
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::Log => {
                    if self.nodes[a].needs_grad {
                        let da = &g / &self.nodes[a].value;
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::Recip => {
                    if self.nodes[a].needs_grad {
                        let da = &g * &node.value.mapv(|y| -y * y);
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::SumAll => {
                    if self.nodes[a].needs_grad {
                        let s = g[(0, 0)];
                        let da = Array2::from_elem(self.nodes[a].value.dim(), s);
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::DotRows => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj[a], &g * &self.nodes[b].value);
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut adj[b], &g * &self.nodes[a].value);
                    }
                }
                Op::NormRows(_) => {
                    if self.nodes[a].needs_grad {
                        let scale = &g / &node.value; // [n,1]
                        let da = &self.nodes[a].value * &scale;
                        accumulate(&mut adj[a], da);
                    }
                }
                Op::ConcatCols => {
                    let na = self.nodes[a].value.ncols();
                    if self.nodes[a].needs_grad {
                        let da = g.slice(ndarray::s![.., ..na]).to_owned();
                        accumulate(&mut adj[a], da);
                    }
                    if self.nodes[b].needs_grad {
                        let db = g.slice(ndarray::s![.., na..]).to_owned();
                        accumulate(&mut adj[b], db);
                    }
                }
                Op::SliceCols(start, end) => {
                    if self.nodes[a].needs_grad {
                        let mut da = Array2::zeros(self.nodes[a].value.dim());
                        da.slice_mut(ndarray::s![.., start..end]).assign(&g);
                        accumulate(&mut adj[a], da);
                    }
                }
            }
            adj[i] = Some(g);
        }
        Ok(Gradients { adjoints: adj })
    }
}

fn accumulate<T: Real>(slot: &mut Option<Array2<T>>, update: Array2<T>) {
    match slot {
        Some(existing) => *existing += &update,
        None => *slot = Some(update),
    }
}

/// `ln(1 + exp(beta x)) / beta` without overflow.
pub fn softplus_stable<T: Real>(x: T, beta: T) -> T {
    let bx = beta * x;
    if bx > T::from_f64(30.0) {
        x
    } else {
        bx.exp().ln_1p() / beta
    }
}

pub fn sigmoid_stable<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
