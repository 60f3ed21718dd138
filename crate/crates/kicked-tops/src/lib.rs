//! Simulator and analysis toolkit for the kicked coupled tops: two spins of
//! equal magnitude coupled by an isotropic exchange interaction, one of which
//! is periodically kicked about a space-fixed axis.
//!
//! One driving period is a kick (rotation of the second spin about z by an
//! angle beta) followed by free precession of both spins about their total
//! angular momentum F by an angle proportional to |F|. The total z component
//! F_z is conserved, so the quantum dynamics block-diagonalizes over fixed-F_z
//! subspaces and the classical dynamics restricts to a two-dimensional surface
//! of section in the difference angles (delta_theta, delta_phi). Chaos is
//! controlled by the precession strength alpha: the classical phase space is
//! regular near alpha ~ 1/2, mixed near 3/2, and globally chaotic by 6.
//!
//! Module map:
//! - [`classical`]: the classical map on unit spin vectors, Poincare sections,
//!   Lyapunov exponents, and regular/chaotic grid classification.
//! - [`angular`]: Clebsch-Gordan algebra stable at large spin and the
//!   coupled/uncoupled transform of a fixed-F_z block.
//! - [`floquet`]: the one-period unitary on a block, its eigensystem, the
//!   generalized time-reversal check, and eigenphase spacing diagnostics.
//! - [`states`]: spin coherent states, their projection into the M_F = 0
//!   block, Husimi distributions, and Husimi entropy.
//! - [`entanglement`]: Schmidt coefficients in the fixed block basis, entropy
//!   and linear entropy, dynamical histories, and phase-space maps.
//! - [`ensembles`]: random-state sampling (orthogonal/unitary ensembles),
//!   exact typical-entanglement formulas, and Monte Carlo estimation.
//! - [`filtering`]: separation of Floquet eigenstates into regular and
//!   chaotic classes from (S_Q, <J_z>) features, and the chaotic subspace.
//! - [`io`]: seeded, hash-stamped CSV/JSON/PGM writers and binary caches.
//! - [`cli`]: the batch front end used by the `ktops` binary.
//!
//! The runnable examples under `examples/` exercise each capability end to
//! end at the parameters studied throughout the library's test suite
//! (spin 150, beta = pi/2, M_F = 0).

pub mod angular;
pub mod classical;
pub mod cli;
pub mod ensembles;
pub mod entanglement;
pub mod filtering;
pub mod floquet;
pub mod io;
pub mod states;

mod error;

pub use error::{Error, Result};

/// Complex double precision scalar used for all amplitudes.
pub type C64 = num_complex::Complex64;
