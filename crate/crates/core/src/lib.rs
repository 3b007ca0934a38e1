//! Two-boost chords and confinement certificates for planar magnetic
//! Hamiltonians with decaying potentials.
//!
//! The library solves the fixed-energy boundary value problem of connecting
//! two cotangent fibers of T*R^2 by a Hamiltonian trajectory ("two boosts":
//! one burn at departure, one at arrival), for Hamiltonians of the form
//! `H = |p|^2/2 + p1 q2 - p2 q1 - V(q)` whose potential decays like the
//! rotating-frame gravity of the restricted three-body problem. Alongside the
//! shooting solver it numerically certifies, at sampled points, the
//! machinery that confines such chords to a compact set: decay conditions on
//! the potential, energy thresholds, compactly supported truncations of the
//! Hamiltonian, and the "no return" inequalities satisfied beyond the
//! confinement radius.
//!
//! All numerical kernels are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the type aliases at the crate root fix `f64`, which is
//! what the command-line tool and the certificate defaults use.

// Validation guards are written as `!(x > bound)` on purpose: the negated
// form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod chord;
pub mod cutoff;
pub mod dynamics;
pub mod hamiltonian;
pub mod phase_space;
pub mod potential;
pub mod real;
pub mod report;
mod sampling;

pub use real::Real;
pub use sampling::SampleSpec;

/// `f64` instantiations of the core types.
pub type CartesianState = phase_space::CartesianState<f64>;
pub type PolarState = phase_space::PolarState<f64>;
pub type PotentialModel = potential::PotentialModel<f64>;
pub type Cr3bpParams = potential::Cr3bpParams<f64>;
pub type CutoffConfig = cutoff::CutoffConfig<f64>;
pub type HamiltonianModel = hamiltonian::HamiltonianModel<f64>;
pub type GridSpec = hamiltonian::GridSpec;
pub type CertificateReport = report::CertificateReport<f64>;
pub type ThresholdSet = certificates::ThresholdSet<f64>;
pub type IntegratorConfig = dynamics::IntegratorConfig<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type FiberCircle = chord::FiberCircle<f64>;
pub type SolverConfig = chord::SolverConfig<f64>;
pub type ShootingProblem = chord::ShootingProblem<f64>;
pub type Chord = chord::Chord<f64>;
