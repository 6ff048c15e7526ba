//! Exact sparse linear algebra over Q with integer rows.
//!
//! Rows are scaled to primitive integer vectors and eliminated
//! fraction-free (cross-multiplication followed by content removal), so no
//! rational arithmetic happens inside the elimination loop.

use crate::symbolic::Q;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

pub type Row = BTreeMap<usize, BigInt>;

/// Converts a rational row to a primitive integer row.
pub fn integer_row(entries: impl IntoIterator<Item = (usize, Q)>) -> Row {
    let entries: Vec<(usize, Q)> = entries.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    let mut l = BigInt::one();
    for (_, c) in &entries {
        l = l.lcm(c.denom());
    }
    let mut row = Row::new();
    for (k, c) in entries {
        let v = c.numer() * (&l / c.denom());
        let slot = row.entry(k).or_insert_with(BigInt::zero);
        *slot += v;
    }
    row.retain(|_, v| !v.is_zero());
    primitive(&mut row);
    row
}

fn primitive(row: &mut Row) {
    let mut g = BigInt::zero();
    for v in row.values() {
        g = g.gcd(v);
        if g.is_one() {
            break;
        }
    }
    if g.is_zero() {
        return;
    }
    let neg = row
        .values()
        .next()
        .map(|v| v.is_negative())
        .unwrap_or(false);
    if !g.is_one() || neg {
        let g = if neg { -g } else { g };
        for v in row.values_mut() {
            *v = &*v / &g;
        }
    }
}

/// `a*x - b*y`, where `x` and `y` are rows.
fn combine(a: &BigInt, x: &Row, b: &BigInt, y: &Row) -> Row {
    let mut out = Row::new();
    for (k, v) in x {
        out.insert(*k, a * v);
    }
    for (k, v) in y {
        let slot = out.entry(*k).or_insert_with(BigInt::zero);
        *slot -= b * v;
    }
    out.retain(|_, v| !v.is_zero());
    primitive(&mut out);
    out
}

/// Incremental echelon form: every stored row has zeros in the pivot columns
/// of all rows stored before it.
#[derive(Default, Clone)]
pub struct Echelon {
    rows: Vec<(usize, Row)>,
    pivot_of: BTreeMap<usize, usize>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, mut row: Row) -> Row {
        loop {
            let hit = row.keys().find(|k| self.pivot_of.contains_key(k)).copied();
            let Some(col) = hit else { return row };
            let (pc, prow) = &self.rows[self.pivot_of[&col]];
            debug_assert_eq!(*pc, col);
            let a = &prow[&col];
            let b = row[&col].clone();
            let g = a.gcd(&b);
            row = combine(&(a / &g), &row, &(&b / &g), prow);
        }
    }

    /// Adds a row; returns true if it increased the rank.
    pub fn push(&mut self, row: Row) -> bool {
        let row = self.reduce(row);
        match row.keys().next().copied() {
            None => false,
            Some(col) => {
                self.pivot_of.insert(col, self.rows.len());
                self.rows.push((col, row));
                true
            }
        }
    }

    /// Whether the pivot column `col` is occupied.
    pub fn is_pivot(&self, col: usize) -> bool {
        self.pivot_of.contains_key(&col)
    }

    /// Back-substitution to reduced form. Rows are returned sorted by pivot
    /// column, each as `(pivot, row)` with integer entries.
    pub fn reduced(&self) -> Vec<(usize, Row)> {
        let mut rows = self.rows.clone();
        for k in (0..rows.len()).rev() {
            let (col, prow) = rows[k].clone();
            for j in 0..k {
                if let Some(b) = rows[j].1.get(&col).cloned() {
                    let a = &prow[&col];
                    let g = a.gcd(&b);
                    let r = combine(&(a / &g), &rows[j].1, &(&b / &g), &prow);
                    rows[j].1 = r;
                }
            }
        }
        rows.sort_by_key(|r| r.0);
        rows
    }
}

/// Rational row with leading coefficient 1.
fn rational_row(row: &Row, pivot: usize) -> BTreeMap<usize, Q> {
    let lead = &row[&pivot];
    row.iter()
        .map(|(k, v)| (*k, Q::new(v.clone(), lead.clone())))
        .collect()
}

/// Reduced row echelon form over Q, leading coefficients 1.
pub fn rref(rows: impl IntoIterator<Item = Row>) -> Vec<BTreeMap<usize, Q>> {
    let mut ech = Echelon::new();
    for r in rows {
        ech.push(r);
    }
    ech.reduced()
        .iter()
        .map(|(p, r)| rational_row(r, *p))
        .collect()
}

/// Basis of the null space of the row system in `ncols` unknowns,
/// normalized to reduced row echelon form over the column order.
pub fn null_space(ech: &Echelon, ncols: usize) -> Vec<Vec<Q>> {
    let red = ech.reduced();
    let mut basis = Vec::new();
    for f in 0..ncols {
        if ech.is_pivot(f) {
            continue;
        }
        let mut v = vec![Q::zero(); ncols];
        v[f] = Q::one();
        for (p, row) in &red {
            if let Some(c) = row.get(&f) {
                v[*p] = -Q::new(c.clone(), row[p].clone());
            }
        }
        basis.push(v);
    }
    let rows: Vec<Row> = basis
        .iter()
        .map(|v| integer_row(v.iter().cloned().enumerate()))
        .collect();
    rref(rows)
        .into_iter()
        .map(|r| {
            let mut v = vec![Q::zero(); ncols];
            for (k, c) in r {
                v[k] = c;
            }
            v
        })
        .collect()
}

/// Solves `A λ = b` where each row holds `A`'s entries in columns
/// `0..n` and `b` in column `n`. Returns `None` if inconsistent; free
/// unknowns are set to zero.
pub fn solve(rows: impl IntoIterator<Item = Row>, n: usize) -> Option<Vec<Q>> {
    let mut ech = Echelon::new();
    for r in rows {
        ech.push(r);
    }
    let red = ech.reduced();
    let mut x = vec![Q::zero(); n];
    for (p, row) in &red {
        if *p == n {
            return None;
        }
        if let Some(b) = row.get(&n) {
            x[*p] = Q::new(b.clone(), row[p].clone());
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{q, qfrac};

    fn row(v: &[i64]) -> Row {
        integer_row(v.iter().enumerate().map(|(k, &c)| (k, q(c))))
    }

    #[test]
    fn null_space_of_rank_two() {
        let mut e = Echelon::new();
        e.push(row(&[1, 2, 3, 4]));
        e.push(row(&[2, 4, 7, 9]));
        e.push(row(&[3, 6, 10, 13]));
        assert_eq!(e.rank(), 2);
        let ns = null_space(&e, 4);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let dot: Q = [1, 2, 3, 4].iter().zip(v).map(|(a, b)| q(*a) * b).sum();
            assert!(dot.is_zero());
        }
        assert_eq!(ns[0][0], q(1));
        assert!(ns[1][0].is_zero());
    }

    #[test]
    fn inhomogeneous_solve() {
        // x + y = 3, x - y = 1
        let rows = vec![row(&[1, 1, 3]), row(&[1, -1, 1])];
        assert_eq!(solve(rows, 2), Some(vec![q(2), q(1)]));
        let bad = vec![row(&[1, 1, 3]), row(&[2, 2, 5])];
        assert_eq!(solve(bad, 2), None);
        let frac = vec![row(&[3, 1])];
        assert_eq!(solve(frac, 1), Some(vec![qfrac(1, 3)]));
    }
}
