//! Minimal dense tensor engine with reverse-mode differentiation.
//!
//! Values live on a [`Tape`]; every forward op appends a node and returns a
//! [`Var`] handle. [`Tape::backward`] walks the nodes in reverse and returns
//! [`Gradients`] for every node that was reached from the loss.
//!
//! ```
//! use mgvi_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::scalar(3.0)).unwrap();
//! let y = tape.mul(x, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x).data(), &[6.0]);
//! ```

mod error;
mod gradcheck;
mod tape;
mod tensor;

pub use error::TensorError;
pub use gradcheck::grad_check;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, TensorError>;
