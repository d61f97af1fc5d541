//! Dense tensors, a small reverse-mode tape with the layer set the
//! autoencoder needs, and the Adam optimizer.

mod adam;
mod kernels;
mod tape;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;

use thiserror::Error;

pub use adam::{Adam, AdamState};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

/// Floating-point element type. Training runs in `f32`; gradient checks in `f64`.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + Default + Debug + Send + Sync + Sum + 'static
{
    fn of(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("representable")
    }
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> NnError {
    NnError::Shape {
        op,
        detail: detail.into(),
    }
}
