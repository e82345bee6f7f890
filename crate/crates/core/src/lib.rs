//! Free energy of mixed p-spin spherical spin-glass models.
//!
//! The library evaluates and minimizes the spherical-model Parisi functional
//! and cross-validates it three independent ways:
//!
//! * [`parisi`] — closed-form evaluation of the replica functional for a step
//!   order parameter, with the inner one-dimensional infimum solved exactly;
//! * [`finite_m`] — the finite-dimensional recursive functional whose large-M
//!   limit recovers the Parisi value, evaluated by tensorized Gaussian
//!   quadrature on a radial grid;
//! * [`simulator`] — finite-N Monte Carlo over the Gaussian disorder, with
//!   cavity-field decompositions, overlap-identity diagnostics, and a
//!   desk-scale estimate of the cavity bracket bounding the free energy.
//!
//! Supporting modules: [`mixture`] (the covariance function ξ and its
//! derivatives), [`rsb`] (step order parameters and the L¹ metric on them),
//! [`optimizer`] (Nelder-Mead minimization over order parameters), and
//! [`sphere`] (uniform sphere sampling, coordinate decoupling densities, and
//! shell measures).
//!
//! All randomized routines take explicit seeds and produce bitwise-identical
//! results regardless of thread count. The `parallel` feature (default) runs
//! the batch loops on rayon; disabling it falls back to sequential loops with
//! identical output.

// Validation guards are written `!(x > 0.0)` on purpose: the negation is
// true for NaN as well, so a NaN input is rejected instead of slipping past.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod finite_m;
pub mod mixture;
pub mod optimizer;
pub mod parisi;
pub mod rsb;
pub mod simulator;
pub mod sphere;

pub(crate) mod numeric;
pub(crate) mod opt1d;
pub(crate) mod par;
pub(crate) mod quad;
pub(crate) mod rng;
pub(crate) mod special;

pub use error::{Error, Result};

/// Caps the rayon worker count for all subsequent parallel sections.
///
/// Results do not depend on the thread count; this only bounds resource use.
/// Returns `false` if the pool was already initialized (the cap is then a
/// no-op). Without the `parallel` feature this always returns `true` and does
/// nothing.
pub fn set_thread_cap(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        true
    }
}
