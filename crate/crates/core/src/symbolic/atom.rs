//! Interned atoms: the indivisible factors of a monomial.
//!
//! An atom is either a plain variable (`x`, `A1`, `eps`) or an application of a
//! function head, possibly differentiated (`U`, `D[x,x](U)`, `D[U](xi_x)`,
//! `F1(t)''`). Function heads carry their argument list so that derivative
//! multi-indices are stored as per-argument counts and are canonical by
//! construction.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

/// How a function head behaves under differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FuncKind {
    /// A dependent variable in jet space. Its derivatives are independent
    /// coordinates; a formal partial derivative never raises their order.
    Dependent,
    /// An unknown infinitesimal component, a genuine function of its arguments.
    Unknown,
    /// A user-supplied arbitrary function of a single argument.
    Opaque,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom(u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Head(u32);

#[derive(Debug)]
pub(crate) struct HeadData {
    pub name: String,
    pub args: Vec<Atom>,
    pub kind: FuncKind,
}

#[derive(Debug)]
#[allow(dead_code)]
pub(crate) enum AtomData {
    Var(String),
    Func { head: Head, orders: Vec<u16> },
}

#[derive(Debug)]
struct AtomEntry {
    data: AtomData,
    name: Arc<str>,
}

#[derive(Default)]
struct Interner {
    atoms: Vec<Arc<AtomEntry>>,
    vars: HashMap<String, Atom>,
    funcs: HashMap<(Head, Vec<u16>), Atom>,
    heads: Vec<Arc<HeadData>>,
    head_index: HashMap<(String, Vec<Atom>, FuncKind), Head>,
}

static INTERNER: Lazy<RwLock<Interner>> = Lazy::new(|| RwLock::new(Interner::default()));

impl Interner {
    fn push_atom(&mut self, data: AtomData, name: String) -> Atom {
        let id = Atom(self.atoms.len() as u32);
        self.atoms.push(Arc::new(AtomEntry {
            data,
            name: Arc::from(name),
        }));
        id
    }
}

fn render_func(head: &HeadData, orders: &[u16], atoms: &[Arc<AtomEntry>]) -> String {
    let total: u32 = orders.iter().map(|&o| o as u32).sum();
    if total == 0 {
        return match head.kind {
            FuncKind::Opaque => format!("{}({})", head.name, atoms[head.args[0].0 as usize].name),
            _ => head.name.clone(),
        };
    }
    match head.kind {
        FuncKind::Opaque => format!(
            "{}({}){}",
            head.name,
            atoms[head.args[0].0 as usize].name,
            "'".repeat(total as usize)
        ),
        _ => {
            let mut idx = Vec::new();
            for (arg, &o) in head.args.iter().zip(orders) {
                for _ in 0..o {
                    idx.push(atoms[arg.0 as usize].name.to_string());
                }
            }
            format!("D[{}]({})", idx.join(","), head.name)
        }
    }
}

impl Atom {
    /// Interns a plain variable.
    pub fn var(name: &str) -> Atom {
        if let Some(&a) = INTERNER.read().unwrap().vars.get(name) {
            return a;
        }
        let mut w = INTERNER.write().unwrap();
        if let Some(&a) = w.vars.get(name) {
            return a;
        }
        let a = w.push_atom(AtomData::Var(name.to_string()), name.to_string());
        w.vars.insert(name.to_string(), a);
        a
    }

    /// Interns `head` differentiated `orders[k]` times with respect to its
    /// `k`-th argument.
    pub fn func(head: Head, orders: &[u16]) -> Atom {
        let key = (head, orders.to_vec());
        if let Some(&a) = INTERNER.read().unwrap().funcs.get(&key) {
            return a;
        }
        let mut w = INTERNER.write().unwrap();
        if let Some(&a) = w.funcs.get(&key) {
            return a;
        }
        let hd = w.heads[head.0 as usize].clone();
        assert_eq!(hd.args.len(), orders.len(), "order vector length");
        let name = render_func(&hd, orders, &w.atoms);
        let a = w.push_atom(
            AtomData::Func {
                head,
                orders: orders.to_vec(),
            },
            name,
        );
        w.funcs.insert(key, a);
        a
    }

    fn entry(self) -> Arc<AtomEntry> {
        INTERNER.read().unwrap().atoms[self.0 as usize].clone()
    }

    pub fn name(self) -> Arc<str> {
        self.entry().name.clone()
    }

    /// The function head and derivative orders, or `None` for plain variables.
    pub fn as_func(self) -> Option<(Head, Vec<u16>)> {
        match &self.entry().data {
            AtomData::Var(_) => None,
            AtomData::Func { head, orders } => Some((*head, orders.clone())),
        }
    }

    pub fn is_var(self) -> bool {
        matches!(self.entry().data, AtomData::Var(_))
    }

    /// Head of a function atom regardless of order.
    pub fn head(self) -> Option<Head> {
        self.as_func().map(|(h, _)| h)
    }

    /// Total differentiation order (0 for plain variables).
    pub fn order(self) -> u32 {
        self.as_func()
            .map(|(_, o)| o.iter().map(|&k| k as u32).sum())
            .unwrap_or(0)
    }

    pub(crate) fn raw(self) -> u32 {
        self.0
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Head {
    pub fn new(name: &str, args: &[Atom], kind: FuncKind) -> Head {
        let key = (name.to_string(), args.to_vec(), kind);
        if let Some(&h) = INTERNER.read().unwrap().head_index.get(&key) {
            return h;
        }
        let mut w = INTERNER.write().unwrap();
        if let Some(&h) = w.head_index.get(&key) {
            return h;
        }
        let h = Head(w.heads.len() as u32);
        w.heads.push(Arc::new(HeadData {
            name: name.to_string(),
            args: args.to_vec(),
            kind,
        }));
        w.head_index.insert(key, h);
        h
    }

    pub(crate) fn data(self) -> Arc<HeadData> {
        INTERNER.read().unwrap().heads[self.0 as usize].clone()
    }

    pub fn name(self) -> String {
        self.data().name.clone()
    }

    pub fn args(self) -> Vec<Atom> {
        self.data().args.clone()
    }

    pub fn kind(self) -> FuncKind {
        self.data().kind
    }

    /// The undifferentiated value `head(args)`.
    pub fn value(self) -> Atom {
        let n = self.data().args.len();
        Atom::func(self, &vec![0; n])
    }

    /// Derivative atom of this head for the given orders.
    pub fn derivative(self, orders: &[u16]) -> Atom {
        Atom::func(self, orders)
    }

    /// Derivative atom for a multi-index given as a list of arguments.
    /// Returns `None` if some index entry is not an argument of the head.
    pub fn derivative_by(self, index: &[Atom]) -> Option<Atom> {
        let args = self.args();
        let mut orders = vec![0u16; args.len()];
        for v in index {
            let k = args.iter().position(|a| a == v)?;
            orders[k] += 1;
        }
        Some(Atom::func(self, &orders))
    }
}

impl fmt::Debug for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Multi-index of a function atom as a flat list of arguments, in argument order.
pub fn multi_index(atom: Atom) -> Vec<Atom> {
    match atom.as_func() {
        None => Vec::new(),
        Some((head, orders)) => {
            let args = head.args();
            let mut out = Vec::new();
            for (a, &o) in args.iter().zip(&orders) {
                for _ in 0..o {
                    out.push(*a);
                }
            }
            out
        }
    }
}

/// Raises the order of `atom` by one in argument `v`; `None` if `atom` is
/// not a function of `v`.
pub fn bump(atom: Atom, v: Atom) -> Option<Atom> {
    let (head, mut orders) = atom.as_func()?;
    let k = head.args().iter().position(|a| *a == v)?;
    orders[k] += 1;
    Some(Atom::func(head, &orders))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable() {
        let x = Atom::var("x_atomtest");
        assert_eq!(x, Atom::var("x_atomtest"));
        let t = Atom::var("t_atomtest");
        let u = Head::new("U", &[x, t], FuncKind::Dependent);
        let uxt = u.derivative_by(&[t, x]).unwrap();
        assert_eq!(uxt, u.derivative_by(&[x, t]).unwrap());
        assert_eq!(&*uxt.name(), "D[x_atomtest,t_atomtest](U)");
        assert_eq!(uxt.order(), 2);
    }

    #[test]
    fn opaque_rendering() {
        let t = Atom::var("t");
        let f = Head::new("F1", &[t], FuncKind::Opaque);
        assert_eq!(&*f.value().name(), "F1(t)");
        assert_eq!(&*f.derivative(&[2]).name(), "F1(t)''");
    }
}
