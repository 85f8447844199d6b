use super::conv::{conv2d, conv2d_backward, ConvSpec};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv {
        input: Var,
        weights: Var,
        bias: Var,
        spec: ConvSpec,
    },
    Add(Var, Var),
    Relu(Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
}

/// Records a forward computation so that gradients can be pulled back
/// through it.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients indexed by [`Var`]. Values that no seed depends on have no
/// entry; [`Gradients::get_or_zeros`] treats them as exactly zero.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }

    pub fn get_or_zeros(&self, var: Var, shape: &[usize]) -> Tensor<T> {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape))
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

    fn push(&mut self, value: Tensor<T>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, var: Var) -> Result<&Node<T>> {
        self.nodes
            .get(var.0)
            .ok_or_else(|| Error::State(format!("variable {} is not on this tape", var.0)))
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weights: Var,
        bias: Var,
        spec: &ConvSpec,
        out_shape: (usize, usize),
    ) -> Result<Var> {
        let value = conv2d(
            &self.node(input)?.value,
            &self.node(weights)?.value,
            &self.node(bias)?.value,
            spec,
            out_shape,
        )?;
        Ok(self.push(
            value,
            Op::Conv {
                input,
                weights,
                bias,
                spec: spec.clone(),
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.node(a)?.value.add(&self.node(b)?.value)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.node(a)?.value.relu();
        Ok(self.push(value, Op::Relu(a)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.node(a)?.value.sum());
        Ok(self.push(value, Op::Sum(a)))
    }

    /// Backpropagates from a scalar.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let shape = self.node(loss)?.value.shape();
        if shape != [1] {
            return Err(Error::Shape(format!(
                "backward from non-scalar of shape {shape:?}"
            )));
        }
        self.backward_seeded(vec![(loss, Tensor::scalar(T::one()))])
    }

    /// Backpropagates from several outputs at once, each seeded with the
    /// gradient of some downstream loss with respect to it.
    pub fn backward_seeded(&self, seeds: Vec<(Var, Tensor<T>)>) -> Result<Gradients<T>> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward called before any forward".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (var, seed) in seeds {
            let node = self.node(var)?;
            if node.value.shape() != seed.shape() {
                return Err(Error::Shape(format!(
                    "seed {:?} for value {:?}",
                    seed.shape(),
                    node.value.shape()
                )));
            }
            accumulate(&mut grads, var, seed)?;
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g)?;
                }
                Op::Relu(a) => {
                    let input = &self.nodes[a.0].value;
                    let mut d = g;
                    for (di, &x) in d.data_mut().iter_mut().zip(input.data()) {
                        if x <= T::zero() {
                            *di = T::zero();
                        }
                    }
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Sum(a) => {
                    let shape = self.nodes[a.0].value.shape();
                    accumulate(&mut grads, *a, Tensor::full(shape, g.data()[0]))?;
                }
                Op::Conv {
                    input,
                    weights,
                    bias,
                    spec,
                } => {
                    let cg = conv2d_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[weights.0].value,
                        spec,
                        &g,
                    )?;
                    accumulate(&mut grads, *input, cg.input)?;
                    accumulate(&mut grads, *weights, cg.weights)?;
                    accumulate(&mut grads, *bias, cg.bias)?;
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], var: Var, g: Tensor<T>) -> Result<()> {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
