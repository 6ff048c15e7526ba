//! Exact symbolic kernel: atoms, polynomials over Q, rational expressions,
//! and the expression parser.

pub mod atom;
pub mod expr;
pub mod parse;
pub mod poly;

pub use atom::{bump, multi_index, Atom, FuncKind, Head};
pub use expr::{exp_atom, partial_of_atom, Expr};
pub use parse::{parse_expression, Symbol, SymbolTable};
pub use poly::{q, qfrac, Monomial, Poly, Q};
