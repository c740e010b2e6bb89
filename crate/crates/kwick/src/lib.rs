//! Hori-Wick expansion on the closed-time contour.
//!
//! The crate covers free real fields and channel fields (a field `psi`
//! paired with its tilde-conjugate `tpsi`), bosonic and fermionic. Every
//! symbolic result can be checked against dense Fock-space oracles in
//! [`fock_oracle`].

pub mod causal_transform;
pub mod channel;
pub mod cli;
pub mod error;
pub mod fock_oracle;
pub mod grassmann;
pub mod green_kernels;
pub mod poly;
pub mod verify;
pub mod wick_engine;

pub use channel::{Branch, ChannelSpec, FieldKind, FieldOp, FieldType, Mode, Statistics};
pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

pub(crate) const I: C64 = C64::new(0.0, 1.0);
