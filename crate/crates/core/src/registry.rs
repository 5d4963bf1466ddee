//! Built-in operations and generators, addressed by fixed names.

use thiserror::Error;

use crate::generator::GeneratorSpec;
use crate::interval::Interval;
use crate::op::NaryOp;

pub const OP_NAMES: &[&str] = &["sum", "translated_sum", "product", "bounded_product", "alternating"];
pub const GENERATOR_NAMES: &[&str] = &["identity_generator", "log_generator"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("unknown builtin {0:?}")]
    Unknown(String),
    #[error("arity must be at least 2, got {0}")]
    Arity(usize),
    #[error("alternating operation needs an odd arity n >= 3, got {0}")]
    AlternatingArity(usize),
}

#[derive(Debug, Clone)]
pub enum Builtin {
    Op(NaryOp),
    Generator(GeneratorSpec),
}

fn positive_reals() -> Interval {
    Interval::from_bounds(0.0, true, f64::INFINITY, true).expect("valid")
}

fn unit_open() -> Interval {
    Interval::open(0.0, 1.0).expect("valid")
}

fn negative_reals() -> Interval {
    Interval::from_bounds(f64::NEG_INFINITY, true, 0.0, true).expect("valid")
}

/// Looks up a registry entry instantiated at arity `n`.
pub fn builtin_lookup(name: &str, n: usize) -> Result<Builtin, RegistryError> {
    if n < 2 {
        return Err(RegistryError::Arity(n));
    }
    let entry = match name {
        "sum" => Builtin::Op(NaryOp::new(n, Interval::real_line(), "sum", |xs| xs.iter().sum())),
        "translated_sum" => Builtin::Op(NaryOp::new(n, Interval::real_line(), "translated_sum", |xs| {
            xs.iter().sum::<f64>() + 1.0
        })),
        "product" => Builtin::Op(NaryOp::new(n, positive_reals(), "product", |xs| xs.iter().product())),
        "bounded_product" => Builtin::Op(NaryOp::new(n, unit_open(), "bounded_product", |xs| {
            xs.iter().product()
        })),
        "alternating" => {
            if n < 3 || n.is_multiple_of(2) {
                return Err(RegistryError::AlternatingArity(n));
            }
            Builtin::Op(NaryOp::new(n, Interval::real_line(), "alternating", |xs| {
                xs.iter()
                    .enumerate()
                    .fold(0.0, |acc, (i, &x)| if i % 2 == 0 { acc + x } else { acc - x })
            }))
        }
        "identity_generator" => Builtin::Generator(GeneratorSpec::closed_form(
            "identity",
            Interval::real_line(),
            Interval::real_line(),
            true,
            |x| x,
            Some(|y| y),
        )),
        "log_generator" => Builtin::Generator(GeneratorSpec::closed_form(
            "ln",
            positive_reals(),
            Interval::real_line(),
            true,
            f64::ln,
            Some(f64::exp),
        )),
        other => return Err(RegistryError::Unknown(other.to_string())),
    };
    Ok(entry)
}

pub fn lookup_op(name: &str, n: usize) -> Result<NaryOp, RegistryError> {
    match builtin_lookup(name, n)? {
        Builtin::Op(op) => Ok(op),
        Builtin::Generator(_) => Err(RegistryError::Unknown(format!("{name} (a generator, not an operation)"))),
    }
}

pub fn lookup_generator(name: &str, n: usize) -> Result<GeneratorSpec, RegistryError> {
    match builtin_lookup(name, n)? {
        Builtin::Generator(g) => Ok(g),
        Builtin::Op(_) => Err(RegistryError::Unknown(format!("{name} (an operation, not a generator)"))),
    }
}

/// A closed-form generator of the named builtin operation, when it has one.
///
/// `alternating` has none: it is associative but not symmetric, and any
/// generator would make it idempotent everywhere.
pub fn reference_generator(name: &str, n: usize) -> Option<GeneratorSpec> {
    if n < 2 {
        return None;
    }
    match name {
        "sum" => lookup_generator("identity_generator", n).ok(),
        "product" => lookup_generator("log_generator", n).ok(),
        "translated_sum" => {
            let shift = 1.0 / (n as f64 - 1.0);
            Some(GeneratorSpec::closed_form(
                "x+1/(n-1)",
                Interval::real_line(),
                Interval::real_line(),
                true,
                move |x| x + shift,
                Some(move |y| y - shift),
            ))
        }
        "bounded_product" => Some(GeneratorSpec::closed_form(
            "ln",
            unit_open(),
            negative_reals(),
            true,
            f64::ln,
            Some(f64::exp),
        )),
        _ => None,
    }
}
