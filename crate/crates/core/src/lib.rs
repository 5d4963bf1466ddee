//! Executable theory of continuous, symmetric, cancellative, associative
//! n-ary operations on real intervals.
//!
//! Such an operation is always `f(x₁…xₙ) = φ⁻¹(φ(x₁)+…+φ(xₙ))` for a
//! continuous strictly increasing `φ`. This crate goes both ways:
//!
//! * [`generator`] builds `f` from `φ`;
//! * [`extraction`] recovers `φ` from a black-box `f` by comparing powers
//!   `g(cᵖ)` against mixed strings `g(xᵏ c^q)` of the n-ary extension;
//! * [`extension`] evaluates the extension `g` on strings of length
//!   `m ≡ 1 (mod n−1)` and checks its substitution identities;
//! * [`axioms`] falsifies associativity, symmetry and cancellativity by
//!   seeded sampling;
//! * [`reducibility`] derives the underlying binary operation and adjoins a
//!   neutral element;
//! * [`expr`] parses user-defined operations and generators;
//! * [`cli`] wires everything to the `aczel` command line tool.

pub mod axioms;
pub mod cli;
pub mod expr;
pub mod extension;
pub mod extraction;
pub mod generator;
pub mod interpolation;
pub mod interval;
pub mod op;
pub mod reducibility;
pub mod registry;
pub mod report;
pub mod sampling;

pub use axioms::{AxiomKind, AxiomReport, Witness};
pub use extension::ExtendedOp;
pub use extraction::{BranchDirection, ExtractedGenerator, ExtractionConfig, RationalIndex};
pub use generator::{build_aczelian, validate_codomain, CodomainForm, GeneratorSpec};
pub use interval::{ExtendedReal, Interval};
pub use op::{arity_member, ArityClass, NaryOp};
pub use registry::{builtin_lookup, Builtin};
