//! Exact sparse row reduction over the rationals.
//!
//! Columns are plain indices; the pivot of a row is its largest column, so the
//! caller encodes the elimination order in the column numbering. The row set
//! is kept in fully reduced echelon form: no pivot column appears in another row.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::rational::Rational;

/// Sparse vector sorted by index, without zero entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseVec {
    entries: Vec<(usize, Rational)>,
}

impl SparseVec {
    pub fn from_map(map: BTreeMap<usize, Rational>) -> Self {
        SparseVec { entries: map.into_iter().filter(|(_, v)| !v.is_zero()).collect() }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (usize, Rational)>) -> Self {
        let mut map = BTreeMap::new();
        for (i, v) in entries {
            *map.entry(i).or_insert_with(Rational::zero) += v;
        }
        Self::from_map(map)
    }

    pub fn unit(i: usize) -> Self {
        SparseVec { entries: vec![(i, Rational::one())] }
    }

    pub fn entries(&self) -> &[(usize, Rational)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Rational> {
        self.entries.binary_search_by_key(&i, |(j, _)| *j).ok().map(|k| &self.entries[k].1)
    }

    pub fn leading(&self) -> Option<&(usize, Rational)> {
        self.entries.last()
    }

    pub fn scale(&mut self, c: &Rational) {
        for (_, v) in &mut self.entries {
            *v *= c;
        }
    }

    /// `self += c * other`, by merging.
    pub fn axpy(&mut self, c: &Rational, other: &SparseVec) {
        if c.is_zero() || other.is_zero() {
            return;
        }
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i].clone());
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, c * &b[j].1));
                j += 1;
            } else {
                let v = &a[i].1 + c * &b[j].1;
                if !v.is_zero() {
                    out.push((a[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
        self.entries = out;
    }
}

/// Incremental fully reduced row echelon form, optionally tracking each row
/// as a combination of the inserted inputs.
#[derive(Clone, Debug, Default)]
pub struct SparseRref {
    rows: Vec<SparseVec>,
    combos: Vec<SparseVec>,
    pivot_row: HashMap<usize, usize>,
    track: bool,
}

impl SparseRref {
    pub fn new(track: bool) -> Self {
        SparseRref { track, ..Default::default() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    /// Input combination for row `k`; empty unless tracking.
    pub fn combo(&self, k: usize) -> Option<&SparseVec> {
        self.combos.get(k)
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.pivot_row.contains_key(&col)
    }

    /// Reduce `v` against all rows; returns the remainder and the coefficient of each row used.
    pub fn reduce(&self, v: &SparseVec) -> (SparseVec, Vec<(usize, Rational)>) {
        let mut used = Vec::new();
        let mut out = v.clone();
        for (col, coef) in v.entries() {
            if let Some(&r) = self.pivot_row.get(col) {
                used.push((r, coef.clone()));
            }
        }
        for (r, coef) in &used {
            out.axpy(&-coef, &self.rows[*r]);
        }
        (out, used)
    }

    /// Reduce with respect to a subset of rows only.
    pub fn reduce_with(&self, v: &SparseVec, allow: impl Fn(usize) -> bool) -> SparseVec {
        let mut out = v.clone();
        for (col, coef) in v.entries() {
            if let Some(&r) = self.pivot_row.get(col) {
                if allow(r) {
                    out.axpy(&-coef, &self.rows[r]);
                }
            }
        }
        out
    }

    /// Insert input `id`; returns the new row index if it was independent.
    pub fn insert(&mut self, v: &SparseVec, id: usize) -> Option<usize> {
        let (mut row, used) = self.reduce(v);
        if row.is_zero() {
            return None;
        }
        let mut combo = SparseVec::default();
        if self.track {
            combo = SparseVec::unit(id);
            for (r, coef) in &used {
                combo.axpy(&-coef, &self.combos[*r]);
            }
        }
        let (lead, lc) = row.leading().cloned().expect("nonzero row");
        let inv = Rational::one() / lc;
        row.scale(&inv);
        if self.track {
            combo.scale(&inv);
        }
        for k in 0..self.rows.len() {
            if let Some(c) = self.rows[k].get(lead).cloned() {
                self.rows[k].axpy(&-&c, &row);
                if self.track {
                    let src = combo.clone();
                    self.combos[k].axpy(&-c, &src);
                }
            }
        }
        let idx = self.rows.len();
        self.rows.push(row);
        if self.track {
            self.combos.push(combo);
        }
        self.pivot_row.insert(lead, idx);
        Some(idx)
    }

    /// Express `v` as a combination of inputs, if it lies in the span. Requires tracking.
    pub fn express(&self, v: &SparseVec) -> Option<SparseVec> {
        assert!(self.track, "express needs tracked combinations");
        let (rest, used) = self.reduce(v);
        if !rest.is_zero() {
            return None;
        }
        let mut out = SparseVec::default();
        for (r, coef) in used {
            out.axpy(&coef, &self.combos[r]);
        }
        Some(out)
    }
}

/// Dense exact RREF of `rows` (each of length `ncols`). Returns the reduced rows and pivot columns.
pub fn dense_rref(mut rows: Vec<Vec<Rational>>, ncols: usize) -> (Vec<Vec<Rational>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = Rational::one() / rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                let (src, dst) = if i < r {
                    let (lo, hi) = rows.split_at_mut(r);
                    (&hi[0], &mut lo[i])
                } else {
                    let (lo, hi) = rows.split_at_mut(i);
                    (&lo[r], &mut hi[0])
                };
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    if !s.is_zero() {
                        *d -= &f * s;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    (rows, pivots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use proptest::prelude::*;

    fn sv(entries: &[(usize, i64)]) -> SparseVec {
        SparseVec::from_entries(entries.iter().map(|&(i, v)| (i, int(v))))
    }

    #[test]
    fn rank_and_express() {
        let mut e = SparseRref::new(true);
        assert!(e.insert(&sv(&[(0, 1), (2, 1)]), 0).is_some());
        assert!(e.insert(&sv(&[(1, 1), (2, 2)]), 1).is_some());
        assert!(e.insert(&sv(&[(0, 2), (1, 2), (2, 6)]), 2).is_none());
        assert_eq!(e.rank(), 2);
        let target = sv(&[(0, 3), (1, -1), (2, 1)]);
        let combo = e.express(&target).unwrap();
        assert_eq!(combo, sv(&[(0, 3), (1, -1)]));
        assert!(e.express(&sv(&[(0, 1)])).is_none());
    }

    proptest! {
        #[test]
        fn rows_stay_fully_reduced(rows in proptest::collection::vec(proptest::collection::vec((0usize..8, -3i64..4), 1..5), 1..8)) {
            let mut e = SparseRref::new(true);
            let inputs: Vec<SparseVec> = rows.iter().map(|r| SparseVec::from_entries(r.iter().map(|&(i, v)| (i, int(v))))).collect();
            for (k, v) in inputs.iter().enumerate() {
                e.insert(v, k);
            }
            for (k, row) in e.rows().iter().enumerate() {
                let lead = row.leading().unwrap().0;
                for (j, other) in e.rows().iter().enumerate() {
                    if j != k {
                        prop_assert!(other.get(lead).is_none());
                    }
                }
            }
            for v in &inputs {
                let combo = e.express(v).unwrap();
                let mut rebuilt = SparseVec::default();
                for (i, c) in combo.entries() {
                    rebuilt.axpy(c, &inputs[*i]);
                }
                prop_assert_eq!(&rebuilt, v);
            }
        }
    }

    #[test]
    fn dense_rref_pivots() {
        let rows = vec![vec![int(0), int(2), int(4)], vec![int(1), int(1), int(1)], vec![int(1), int(2), int(3)]];
        let (r, p) = dense_rref(rows, 3);
        assert_eq!(p, vec![0, 1]);
        assert_eq!(r[0], vec![int(1), int(0), int(-1)]);
    }
}
