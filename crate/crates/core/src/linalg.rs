//! Exact sparse Gaussian elimination over the rationals.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::value::Rational;

pub type SparseRow = BTreeMap<usize, Rational>;

/// Solves `A x = b` for every right-hand side in `rhs` (each of length n).
///
/// Pivots are picked greedily: the live column with the fewest live
/// nonzeros, then the shortest row in that column. Solutions are checked by
/// substitution into the original system.
pub fn solve(n: usize, rows: &[SparseRow], rhs: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    assert_eq!(rows.len(), n);
    let k = rhs.len();
    let mut a: Vec<SparseRow> = rows.to_vec();
    for r in &mut a {
        r.retain(|_, v| !v.is_zero());
    }
    // b[row][rhs index]
    let mut b: Vec<Vec<Rational>> = (0..n).map(|i| rhs.iter().map(|c| c[i].clone()).collect()).collect();
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, r) in a.iter().enumerate() {
        for &c in r.keys() {
            if c >= n {
                return Err(Error::SingularSystem);
            }
            col_rows[c].insert(i);
        }
    }
    let mut row_live = vec![true; n];
    let mut col_live = vec![true; n];
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, usize)> = None;
        for c in 0..n {
            if !col_live[c] {
                continue;
            }
            let cnt = col_rows[c].len();
            if cnt == 0 {
                return Err(Error::SingularSystem);
            }
            if best.map_or(true, |(_, bc)| cnt < bc) {
                best = Some((c, cnt));
                if cnt == 1 {
                    break;
                }
            }
        }
        let (c, _) = best.ok_or(Error::SingularSystem)?;
        let r = *col_rows[c]
            .iter()
            .min_by_key(|&&r| (a[r].len(), r))
            .expect("column has live rows");
        col_live[c] = false;
        row_live[r] = false;
        for &cc in a[r].keys() {
            col_rows[cc].remove(&r);
        }
        let pivot = a[r][&c].clone();
        let targets: Vec<usize> = col_rows[c].iter().copied().collect();
        let prow: Vec<(usize, Rational)> = a[r].iter().map(|(k, v)| (*k, v.clone())).collect();
        let pb = b[r].clone();
        for t in targets {
            let factor = a[t][&c].clone() / &pivot;
            for (cc, v) in &prow {
                let entry = a[t].entry(*cc).or_insert_with(Rational::zero);
                let was_zero = entry.is_zero();
                *entry -= &factor * v;
                if entry.is_zero() {
                    a[t].remove(cc);
                    if !was_zero {
                        col_rows[*cc].remove(&t);
                    }
                } else if was_zero {
                    col_rows[*cc].insert(t);
                }
            }
            for (j, v) in pb.iter().enumerate() {
                let d = &factor * v;
                b[t][j] -= d;
            }
        }
        order.push((r, c));
    }
    let mut x = vec![vec![Rational::zero(); n]; k];
    for &(r, c) in order.iter().rev() {
        let pivot = &a[r][&c];
        for j in 0..k {
            let mut acc = b[r][j].clone();
            for (cc, v) in &a[r] {
                if *cc != c {
                    acc -= v * &x[j][*cc];
                }
            }
            x[j][c] = acc / pivot;
        }
    }
    // exact residual check against the untouched input
    for (i, row) in rows.iter().enumerate() {
        for j in 0..k {
            let lhs: Rational = row.iter().map(|(c, v)| v * &x[j][*c]).sum();
            if lhs != rhs[j][i] {
                return Err(Error::SingularSystem);
            }
        }
    }
    Ok(x)
}

pub fn identity_row(i: usize) -> SparseRow {
    let mut r = SparseRow::new();
    r.insert(i, Rational::one());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{rat, ratio};

    fn row(entries: &[(usize, i64)]) -> SparseRow {
        entries.iter().map(|&(c, v)| (c, rat(v))).collect()
    }

    #[test]
    fn solves_small_system() {
        // 2x + y = 3, x + 3y = 5 -> x = 4/5, y = 7/5
        let rows = vec![row(&[(0, 2), (1, 1)]), row(&[(0, 1), (1, 3)])];
        let x = solve(2, &rows, &[vec![rat(3), rat(5)]]).unwrap();
        assert_eq!(x[0], vec![ratio(4, 5), ratio(7, 5)]);
    }

    #[test]
    fn detects_singular() {
        let rows = vec![row(&[(0, 1), (1, 1)]), row(&[(0, 2), (1, 2)])];
        assert_eq!(solve(2, &rows, &[vec![rat(1), rat(2)]]), Err(Error::SingularSystem));
    }

    #[test]
    fn multiple_right_hand_sides() {
        let rows = vec![row(&[(0, 1)]), row(&[(0, -1), (1, 2)]), row(&[(1, -1), (2, 4)])];
        let x = solve(3, &rows, &[vec![rat(1), rat(0), rat(0)], vec![rat(0), rat(0), rat(1)]]).unwrap();
        assert_eq!(x[0], vec![rat(1), ratio(1, 2), ratio(1, 8)]);
        assert_eq!(x[1], vec![rat(0), rat(0), ratio(1, 4)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn diagonally_dominant_systems_solve_exactly(
                vals in proptest::collection::vec(-3i64..=3, 16),
                b in proptest::collection::vec(-5i64..=5, 4),
            ) {
                let n = 4;
                let mut rows = Vec::new();
                for i in 0..n {
                    let mut r = SparseRow::new();
                    let mut off = 0;
                    for j in 0..n {
                        if i != j && vals[i * n + j] != 0 {
                            r.insert(j, rat(vals[i * n + j]));
                            off += vals[i * n + j].abs();
                        }
                    }
                    r.insert(i, rat(off + 1));
                    rows.push(r);
                }
                let rhs = vec![b.iter().map(|&v| rat(v)).collect::<Vec<_>>()];
                prop_assert!(solve(n, &rows, &rhs).is_ok());
            }
        }
    }
}
