//! Minimal deterministic neural-network kernel: tensors, the layer set the
//! badge VAD architectures need, weighted binary cross-entropy, an
//! adaptive-moment optimizer and a finite-difference gradient checker.
//!
//! Everything runs in 64-bit floats, single-threaded per model, with all
//! randomness drawn from seeded counter-based streams.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use gradcheck::grad_check;
pub use rng::DetRng;
pub use tensor::{Parameter, Tensor};
