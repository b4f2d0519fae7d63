//! Numerical toolkit for non-autonomous attracting basins of sequences of
//! polynomial automorphisms of ℂᵏ.
//!
//! The crate classifies orbits of composed automorphism sequences
//! `F(n) = F_n ∘ ⋯ ∘ F_0`, renders basin slices, evaluates the
//! plurisubharmonic potential ladder attached to shift-like sequences,
//! couples sequences to one-variable Julia dynamics, measures box-counting
//! dimensions and Hausdorff distances of the resulting boundary sets, and
//! certifies perturbation tolerances under which two basins are
//! biholomorphic.

pub mod basin;
pub mod conjugacy;
pub mod dimension;
pub mod grid;
pub mod io;
pub mod julia1d;
pub mod kobayashi;
pub mod maps;
pub mod num;
pub mod potential;
pub mod suite;

pub use basin::{BasinParams, FateGrid, OrbitFate, SliceWindow};
pub use grid::{GridSet, Rect};
pub use maps::{AutoStep, CPoint, CoeffSequence, MapSequence, PolySpec};
pub use num::{ExtComplex, ExtReal, LogMag};
pub use suite::Scenario;
