use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("undeclared identifier `{0}`")]
    Undeclared(String),
    #[error("cannot differentiate independent variable `{0}`")]
    DerivativeOfIndependent(String),
    #[error("`{var}` is not an argument of `{func}`")]
    NotAnArgument { func: String, var: String },
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("identically zero denominator")]
    ZeroDenominator,
    #[error("expression is not polynomial in the split variables: {0}")]
    NotPolynomial(String),
    #[error("equation cannot be solved for `{lead}`: {reason}")]
    NotSolvable { lead: String, reason: String },
    #[error("leading derivative `{0}` is solved for more than once")]
    DuplicateLead(String),
    #[error("derivative order {requested} exceeds the bound {bound}")]
    OrderBound { requested: usize, bound: usize },
    #[error("substitution does not terminate (circular solved forms)")]
    Circular,
    #[error("equation is not linear in the unknown components: {0}")]
    Nonlinear(String),
    #[error("determining system is contradictory: {0}")]
    Contradiction(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("invalid ansatz: {0}")]
    Ansatz(String),
    #[error("opaque function `{func}` depends on disallowed variable `{var}`")]
    DisallowedOpaque { func: String, var: String },
    #[error("singularity on the flow trajectory at parameter {at}")]
    Singularity { at: f64 },
    #[error("transformation is not invertible: {0}")]
    NotInvertible(String),
    #[error("not an affine map: {0}")]
    NotAffine(String),
    #[error("invalid problem file, line {line}: {msg}")]
    ProblemFile { line: usize, msg: String },
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
