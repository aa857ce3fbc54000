use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("family truncation is empty")]
    EmptyFamily,

    #[error("step {step_bits}-bit lcm exceeds the configured budget of {budget_bits} bits")]
    StepOverflowBudget { step_bits: u64, budget_bits: u32 },

    #[error("residue table of size {size} exceeds the limit {limit}")]
    TableTooLarge { size: u128, limit: u64 },

    #[error("window holds {found} free positions, need at least {needed}")]
    InsufficientFreePositions { found: usize, needed: usize },

    #[error("family is not primitive: {divisor} divides {multiple}")]
    NotPrimitive { divisor: u64, multiple: u64 },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("block is not in Y: every residue mod {modulus} is hit by the support")]
    NotInY { modulus: u64 },

    #[error("infinite block lacks a Behrend flag: {0}")]
    MissingBehrendFlag(String),

    #[error("F_B contains no infinite arithmetic progression")]
    NoFreeProgression,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("family descriptor: {0}")]
    Descriptor(String),
}

pub type Result<T> = std::result::Result<T, Error>;
