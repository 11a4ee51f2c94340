//! Adaptive predictive arithmetic coding over multiple Markov chains, with
//! information-criterion order selection and MDL histogram partitioning.
//!
//! The crate is organized around five building blocks:
//!
//! - [`markov`]: alphabets, symbol sequences, transition counting,
//!   maximum-likelihood estimation, simulation, and entropy computations.
//! - [`arithcode`]: an exact-rational adaptive arithmetic encoder/decoder,
//!   a non-adaptive ("simple") encoder, and a fast floating-point
//!   code-length accounting path.
//! - [`criteria`]: penalized-likelihood order selection (the RIC criterion,
//!   same form as BIC) and comparison curves across orders.
//! - [`histogram`]: binning, the MDL partition criterion, and optimal
//!   sub-partition selection by dynamic programming with a brute-force
//!   oracle.
//! - [`image`]: PGM grayscale images, gray-level histograms, quantization
//!   onto a selected partition, and PSNR.

pub mod arithcode;
pub mod criteria;
pub mod histogram;
pub mod image;
pub mod markov;

pub use arithcode::{BitCode, CodedMessage, ExactInterval};
pub use markov::{Alphabet, Context, MarkovModel, SymbolSeq, TransitionCounts};
