//! Reverse-mode gradient tape over matrix-valued primitives.
//!
//! A [`Tape`] records every value produced during one forward pass together
//! with the [`Primitive`] that produced it. [`Tape::backward`] then walks the
//! record in reverse and accumulates adjoints. Model code can plug in its own
//! primitives (the mixture estimators and the energy live outside this
//! module), so correctness is confined to per-primitive backward rules that
//! are each checked against finite differences.
//!
//! ```
//! use somdagmm::numeric::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::scalar(3.0));
//! let y = tape.mul(w, w).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(w).data(), &[6.0]);
//! ```

use crate::error::{Error, Result};

use super::linalg::softmax_into;
use super::Matrix;

/// A differentiable operation on matrices.
pub trait Primitive {
    fn name(&self) -> &'static str;

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix>;

    /// Returns the adjoint for every input whose `needs` flag is set.
    fn backward(
        &self,
        inputs: &[&Matrix],
        output: &Matrix,
        grad: &Matrix,
        needs: &[bool],
    ) -> Result<Vec<Option<Matrix>>>;
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

struct Node {
    value: Matrix,
    inputs: Vec<usize>,
    op: Option<Box<dyn Primitive>>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<usize>,
    spent: bool,
}

/// Adjoints produced by one backward pass.
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
    params: Vec<usize>,
}

impl Gradients {
    /// Adjoint of `var`; zeros when the output does not depend on it.
    pub fn wrt(&self, var: Var) -> Matrix {
        match &self.adjoints[var.0] {
            Some(m) => m.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Matrix::zeros(r, c)
            }
        }
    }

    /// Adjoints of the parameter slots, in registration order.
    pub fn params(&self) -> Vec<Matrix> {
        self.params.iter().map(|&i| self.wrt(Var(i))).collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, inputs: Vec<usize>, op: Option<Box<dyn Primitive>>, requires_grad: bool) -> Var {
        self.spent = false;
        self.nodes.push(Node {
            value,
            inputs,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that is not differentiated.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Vec::new(), None, false)
    }

    /// Records a parameter slot; its adjoint is reported by [`Gradients::params`].
    pub fn param(&mut self, value: Matrix) -> Var {
        let v = self.push(value, Vec::new(), None, true);
        self.params.push(v.0);
        v
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    pub fn param_vars(&self) -> Vec<Var> {
        self.params.iter().map(|&i| Var(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies `op` to `inputs` and records the result.
    pub fn apply<P: Primitive + 'static>(&mut self, op: P, inputs: &[Var]) -> Result<Var> {
        let values: Vec<&Matrix> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let out = op.forward(&values)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(
            out,
            inputs.iter().map(|v| v.0).collect(),
            Some(Box::new(op)),
            requires_grad,
        ))
    }

    /// Runs the reverse pass from a `1 × 1` output.
    ///
    /// Fails with a contract error for non-scalar outputs and when called a
    /// second time without recording a new forward pass.
    pub fn backward(&mut self, output: Var) -> Result<Gradients> {
        if self.spent {
            return Err(Error::Contract(
                "backward already ran on this tape; record a new forward pass first".into(),
            ));
        }
        let out_node = &self.nodes[output.0];
        if out_node.value.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "objective must be scalar, got {}x{}",
                out_node.value.rows(),
                out_node.value.cols()
            )));
        }
        if !out_node.value.data()[0].is_finite() {
            return Err(Error::Contract("objective is not finite".into()));
        }

        let mut adjoints: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adjoints[output.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            let Some(op) = &node.op else { continue };
            if !node.requires_grad {
                continue;
            }
            let Some(grad) = adjoints[idx].take() else { continue };
            let inputs: Vec<&Matrix> = node.inputs.iter().map(|&i| &self.nodes[i].value).collect();
            let needs: Vec<bool> = node.inputs.iter().map(|&i| self.nodes[i].requires_grad).collect();
            let input_grads = op.backward(&inputs, &node.value, &grad, &needs)?;
            for ((&input, g), need) in node.inputs.iter().zip(input_grads).zip(&needs) {
                let (Some(g), true) = (g, *need) else { continue };
                match &mut adjoints[input] {
                    Some(acc) => acc.add_assign(&g)?,
                    slot @ None => *slot = Some(g),
                }
            }
            adjoints[idx] = Some(grad);
        }

        self.spent = true;
        Ok(Gradients {
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
            adjoints,
            params: self.params.clone(),
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(MatMul, &[a, b])
    }

    /// `a + bias` with `bias` a `1 × cols` row broadcast over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.apply(AddRow, &[a, bias])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Add, &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Mul, &[a, b])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.apply(Scale(factor), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Tanh, &[a])
    }

    /// Elementwise product with a fixed (non-differentiated) matrix.
    pub fn mul_const(&mut self, a: Var, mask: Matrix) -> Result<Var> {
        self.apply(MulConst(mask), &[a])
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(RowSoftmax, &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(ConcatCols, parts)
    }

    /// Mean of all entries as a `1 × 1` value.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.apply(Mean, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(Sum, &[a])
    }

    /// Per-row squared Euclidean distance, `N × 1`.
    pub fn row_sq_dist(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(RowSqDist, &[a, b])
    }
}

fn expect_inputs(name: &str, inputs: &[&Matrix], n: usize) -> Result<()> {
    if inputs.len() != n {
        return Err(Error::Contract(format!(
            "{name} takes {n} inputs, got {}",
            inputs.len()
        )));
    }
    Ok(())
}

pub struct MatMul;

impl Primitive for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 2)?;
        inputs[0].matmul(inputs[1])
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let ga = if needs[0] {
            Some(grad.matmul_t(inputs[1])?)
        } else {
            None
        };
        let gb = if needs[1] {
            Some(inputs[0].t_matmul(grad)?)
        } else {
            None
        };
        Ok(vec![ga, gb])
    }
}

pub struct AddRow;

impl Primitive for AddRow {
    fn name(&self) -> &'static str {
        "add_row"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 2)?;
        inputs[0].add_row(inputs[1])
    }

    fn backward(&self, _: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        Ok(vec![needs[0].then(|| grad.clone()), needs[1].then(|| grad.col_sums())])
    }
}

pub struct Add;

impl Primitive for Add {
    fn name(&self) -> &'static str {
        "add"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 2)?;
        inputs[0].add(inputs[1])
    }

    fn backward(&self, _: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        Ok(vec![needs[0].then(|| grad.clone()), needs[1].then(|| grad.clone())])
    }
}

pub struct Mul;

impl Primitive for Mul {
    fn name(&self) -> &'static str {
        "mul"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 2)?;
        inputs[0].hadamard(inputs[1])
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let ga = if needs[0] {
            Some(grad.hadamard(inputs[1])?)
        } else {
            None
        };
        let gb = if needs[1] {
            Some(grad.hadamard(inputs[0])?)
        } else {
            None
        };
        Ok(vec![ga, gb])
    }
}

pub struct Scale(pub f64);

impl Primitive for Scale {
    fn name(&self) -> &'static str {
        "scale"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 1)?;
        Ok(inputs[0].scale(self.0))
    }

    fn backward(&self, _: &[&Matrix], _: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        Ok(vec![Some(grad.scale(self.0))])
    }
}

pub struct Tanh;

impl Primitive for Tanh {
    fn name(&self) -> &'static str {
        "tanh"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 1)?;
        Ok(inputs[0].map(f64::tanh))
    }

    fn backward(&self, _: &[&Matrix], output: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        Ok(vec![Some(grad.zip_map(output, |g, y| g * (1.0 - y * y))?)])
    }
}

pub struct MulConst(pub Matrix);

impl Primitive for MulConst {
    fn name(&self) -> &'static str {
        "mul_const"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 1)?;
        inputs[0].hadamard(&self.0)
    }

    fn backward(&self, _: &[&Matrix], _: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        Ok(vec![Some(grad.hadamard(&self.0)?)])
    }
}

pub struct RowSoftmax;

impl Primitive for RowSoftmax {
    fn name(&self) -> &'static str {
        "row_softmax"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 1)?;
        let x = inputs[0];
        if x.cols() == 0 {
            return Err(Error::InvalidArgument("softmax over zero columns".into()));
        }
        if !x.is_finite() {
            return Err(Error::InvalidArgument("softmax input is not finite".into()));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            softmax_into(x.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    fn backward(&self, _: &[&Matrix], output: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let mut g = Matrix::zeros(output.rows(), output.cols());
        for i in 0..output.rows() {
            let y = output.row(i);
            let gy = grad.row(i);
            let inner: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
            for (o, (yj, gj)) in g.row_mut(i).iter_mut().zip(y.iter().zip(gy)) {
                *o = yj * (gj - inner);
            }
        }
        Ok(vec![Some(g)])
    }
}

pub struct ConcatCols;

impl Primitive for ConcatCols {
    fn name(&self) -> &'static str {
        "concat_cols"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        Matrix::hconcat(inputs)
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(inputs.len());
        for (m, &need) in inputs.iter().zip(needs) {
            let cols = m.cols();
            out.push(need.then(|| Matrix::from_fn(m.rows(), cols, |i, j| grad.get(i, offset + j))));
            offset += cols;
        }
        Ok(out)
    }
}

pub struct Mean;

impl Primitive for Mean {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 1)?;
        if inputs[0].is_empty() {
            return Err(Error::InvalidArgument("mean of an empty matrix".into()));
        }
        Ok(Matrix::scalar(inputs[0].sum() / inputs[0].len() as f64))
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let x = inputs[0];
        let g = grad.data()[0] / x.len() as f64;
        Ok(vec![Some(Matrix::filled(x.rows(), x.cols(), g))])
    }
}

pub struct Sum;

impl Primitive for Sum {
    fn name(&self) -> &'static str {
        "sum"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 1)?;
        Ok(Matrix::scalar(inputs[0].sum()))
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, _: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let x = inputs[0];
        Ok(vec![Some(Matrix::filled(x.rows(), x.cols(), grad.data()[0]))])
    }
}

pub struct RowSqDist;

impl Primitive for RowSqDist {
    fn name(&self) -> &'static str {
        "row_sq_dist"
    }

    fn forward(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        expect_inputs(self.name(), inputs, 2)?;
        let diff = inputs[0].sub(inputs[1])?;
        let d: Vec<f64> = diff.iter_rows().map(|r| r.iter().map(|v| v * v).sum()).collect();
        Matrix::new(inputs[0].rows(), 1, d)
    }

    fn backward(&self, inputs: &[&Matrix], _: &Matrix, grad: &Matrix, needs: &[bool]) -> Result<Vec<Option<Matrix>>> {
        let diff = inputs[0].sub(inputs[1])?;
        let ga = Matrix::from_fn(diff.rows(), diff.cols(), |i, j| 2.0 * grad.get(i, 0) * diff.get(i, j));
        let gb = needs[1].then(|| ga.scale(-1.0));
        Ok(vec![needs[0].then_some(ga), gb])
    }
}
