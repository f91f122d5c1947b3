//! Private information retrieval over the Gaussian multiple-access channel.
//!
//! A user retrieves one of `M` messages replicated on `N` non-colluding servers
//! whose answers superpose over a real AWGN (optionally block-fading) MAC. The
//! servers answer with signed F_p combinations of the stored messages, encode
//! them with a shared nested lattice code, and the user decodes only the sum of
//! the two answer codewords, which equals `s * W_i`.
//!
//! Modules, bottom-up:
//!
//! * [`ffield`]: prime-field arithmetic, messages and message stores.
//! * [`protocol`]: queries, server answers, server pairing and the exact
//!   privacy audit.
//! * [`lattice`]: Construction-A nested lattice codes with a hypercube shaping
//!   lattice, dithered encoding and the modulo-lattice sum decoder.
//! * [`rates`]: closed-form computation rates, PIR rates, capacities, gaps and
//!   the fading partition optimizer.
//! * [`channel`]: the AWGN / block-fading MAC.
//! * [`experiments`]: end-to-end Monte Carlo retrieval, rate sweeps and
//!   privacy audits.
//! * [`cli`]: argument types and CSV/JSON rendering for the `macpir` binary.

pub mod channel;
pub mod cli;
mod error;
pub mod exec;
pub mod experiments;
pub mod ffield;
pub mod lattice;
pub mod protocol;
pub mod rates;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
