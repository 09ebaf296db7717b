//! Arrays of quaternions stored as four aligned real component blocks.
//!
//! Two real layouts are used when a quaternion array has to pass through a
//! real-valued operation:
//!
//! * **along an axis**: the chosen axis of extent `N` becomes `4N`, holding
//!   the `r`, `x`, `y` and `z` blocks one after the other. [`qt_to_real`]
//!   uses the last axis; convolutions use the channel axis.
//! * **stacked**: a leading axis of extent 4 selects the component. This is
//!   how quaternion weights are stored as parameters.

use crate::error::{Error, Result};
use crate::quaternion::Quaternion;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct QuaternionTensor {
    shape: Vec<usize>,
    blocks: [Tensor; 4],
}

impl QuaternionTensor {
    /// Bundles four equally shaped component blocks `(r, x, y, z)`.
    pub fn pack(r: Tensor, x: Tensor, y: Tensor, z: Tensor) -> Result<Self> {
        for (name, b) in [("x", &x), ("y", &y), ("z", &z)] {
            if b.shape() != r.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "component {name} has shape {:?}, r has {:?}",
                    b.shape(),
                    r.shape()
                )));
            }
        }
        Ok(QuaternionTensor {
            shape: r.shape().to_vec(),
            blocks: [r, x, y, z],
        })
    }

    pub fn unpack(self) -> [Tensor; 4] {
        self.blocks
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let z = Tensor::zeros(shape);
        QuaternionTensor {
            shape: shape.to_vec(),
            blocks: [z.clone(), z.clone(), z.clone(), z],
        }
    }

    pub fn from_quaternions(shape: &[usize], values: &[Quaternion]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {n} quaternions, got {}",
                values.len()
            )));
        }
        let mut q = QuaternionTensor::zeros(shape);
        for (i, v) in values.iter().enumerate() {
            q.set(i, *v);
        }
        Ok(q)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> Quaternion) -> Self {
        let mut q = QuaternionTensor::zeros(shape);
        for i in 0..q.len() {
            q.set(i, f(i));
        }
        q
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of quaternions.
    pub fn len(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn component(&self, k: usize) -> &Tensor {
        &self.blocks[k]
    }

    pub fn components(&self) -> &[Tensor; 4] {
        &self.blocks
    }

    /// Quaternion at a flat (row-major) index.
    pub fn get(&self, i: usize) -> Quaternion {
        Quaternion::new(
            self.blocks[0].data()[i],
            self.blocks[1].data()[i],
            self.blocks[2].data()[i],
            self.blocks[3].data()[i],
        )
    }

    pub fn set(&mut self, i: usize, q: Quaternion) {
        for (b, v) in self.blocks.iter_mut().zip(q.to_array()) {
            b.data_mut()[i] = v;
        }
    }

    pub fn to_vec(&self) -> Vec<Quaternion> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn to_real(&self) -> Tensor {
        self.to_real_along(self.shape.len().saturating_sub(1))
    }

    pub fn from_real(t: &Tensor) -> Result<Self> {
        QuaternionTensor::from_real_along(t, t.rank().saturating_sub(1))
    }

    /// Real tensor whose `axis` extent is `4N`, component blocks in order
    /// `r | x | y | z`.
    pub fn to_real_along(&self, axis: usize) -> Tensor {
        assert!(axis < self.shape.len().max(1), "axis out of range");
        let shape = if self.shape.is_empty() {
            vec![1]
        } else {
            self.shape.clone()
        };
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.clone();
        out_shape[axis] = 4 * n;
        let mut data = Vec::with_capacity(4 * self.len());
        for o in 0..outer {
            for block in &self.blocks {
                let start = o * n * inner;
                data.extend_from_slice(&block.data()[start..start + n * inner]);
            }
        }
        Tensor::new(out_shape, data).expect("layout preserves element count")
    }

    pub fn from_real_along(t: &Tensor, axis: usize) -> Result<Self> {
        let shape = t.shape();
        if axis >= shape.len() || !shape[axis].is_multiple_of(4) {
            return Err(Error::ShapeMismatch(format!(
                "axis {axis} of shape {shape:?} is not a multiple of 4"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis] / 4;
        let inner: usize = shape[axis + 1..].iter().product();
        let mut q_shape = shape.to_vec();
        q_shape[axis] = n;
        let mut blocks: [Vec<f64>; 4] = Default::default();
        let chunk = n * inner;
        for o in 0..outer {
            for (k, block) in blocks.iter_mut().enumerate() {
                let start = o * 4 * chunk + k * chunk;
                block.extend_from_slice(&t.data()[start..start + chunk]);
            }
        }
        let [r, x, y, z] = blocks;
        QuaternionTensor::pack(
            Tensor::new(q_shape.clone(), r)?,
            Tensor::new(q_shape.clone(), x)?,
            Tensor::new(q_shape.clone(), y)?,
            Tensor::new(q_shape, z)?,
        )
    }

    /// Real tensor of shape `[4, ..shape]`.
    pub fn to_stacked(&self) -> Tensor {
        let mut shape = vec![4];
        shape.extend_from_slice(&self.shape);
        let mut data = Vec::with_capacity(4 * self.len());
        for b in &self.blocks {
            data.extend_from_slice(b.data());
        }
        Tensor::new(shape, data).expect("layout preserves element count")
    }

    pub fn from_stacked(t: &Tensor) -> Result<Self> {
        if t.shape().first() != Some(&4) {
            return Err(Error::ShapeMismatch(format!(
                "stacked quaternion tensor needs a leading axis of 4, got {:?}",
                t.shape()
            )));
        }
        let shape = t.shape()[1..].to_vec();
        let n = t.len() / 4;
        let block = |k: usize| Tensor::new(shape.clone(), t.data()[k * n..(k + 1) * n].to_vec());
        QuaternionTensor::pack(block(0)?, block(1)?, block(2)?, block(3)?)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(Tensor::is_finite)
    }
}

pub fn qt_pack(r: Tensor, x: Tensor, y: Tensor, z: Tensor) -> Result<QuaternionTensor> {
    QuaternionTensor::pack(r, x, y, z)
}

pub fn qt_unpack(q: QuaternionTensor) -> [Tensor; 4] {
    q.unpack()
}

pub fn qt_to_real(q: &QuaternionTensor) -> Tensor {
    q.to_real()
}

pub fn real_to_qt(t: &Tensor) -> Result<QuaternionTensor> {
    QuaternionTensor::from_real(t)
}
