use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Largest number of variables the oracle accepts.
pub const VARIABLE_CAP: usize = 400;

/// `min c·x` subject to `A x = b`, `x ≥ 0`, in exact arithmetic.
#[derive(Debug, Clone)]
pub struct RationalLp {
    pub objective: Vec<BigRational>,
    pub rows: Vec<Vec<BigRational>>,
    pub rhs: Vec<BigRational>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: BigRational,
    pub x: Vec<BigRational>,
}

impl RationalLp {
    pub fn new(objective: Vec<BigRational>) -> Self {
        RationalLp {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn push_row(&mut self, row: Vec<BigRational>, rhs: BigRational) {
        debug_assert_eq!(row.len(), self.variables());
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    fn check_size(&self) -> Result<()> {
        if self.variables() > VARIABLE_CAP {
            return Err(Error::TooLarge {
                size: self.variables(),
                cap: VARIABLE_CAP,
            });
        }
        Ok(())
    }

    /// Keeps a maximal linearly independent subset of the rows, in order.
    ///
    /// Fails when the system `A x = b` is inconsistent.
    pub fn deduplicated(&self) -> Result<RationalLp> {
        let n = self.variables();
        // reduced copies of the kept rows, each with its pivot column
        let mut basis: Vec<(usize, Vec<BigRational>, BigRational)> = Vec::new();
        let mut kept = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let mut v = row.clone();
            let mut b = self.rhs[r].clone();
            for (pivot, brow, bb) in &basis {
                if v[*pivot].is_zero() {
                    continue;
                }
                let f = v[*pivot].clone();
                for k in 0..n {
                    if !brow[k].is_zero() {
                        v[k] -= &f * &brow[k];
                    }
                }
                b -= &f * bb;
            }
            match v.iter().position(|a| !a.is_zero()) {
                Some(pivot) => {
                    let inv = v[pivot].recip();
                    for a in v.iter_mut() {
                        *a *= &inv;
                    }
                    b *= &inv;
                    basis.push((pivot, v, b));
                    kept.push(r);
                }
                None if !b.is_zero() => {
                    return Err(Error::Solver(format!("constraint row {r} is inconsistent")));
                }
                None => {}
            }
        }
        Ok(RationalLp {
            objective: self.objective.clone(),
            rows: kept.iter().map(|&r| self.rows[r].clone()).collect(),
            rhs: kept.iter().map(|&r| self.rhs[r].clone()).collect(),
        })
    }

    /// Two-phase simplex with Bland's rule on the deduplicated system.
    pub fn solve(&self) -> Result<LpSolution> {
        self.check_size()?;
        let lp = self.deduplicated()?;
        let n = lp.variables();
        let m = lp.rows.len();
        let width = n + m;
        let mut tab = Tableau {
            rows: Vec::with_capacity(m),
            rhs: Vec::with_capacity(m),
            basis: (n..width).collect(),
        };
        for (i, row) in lp.rows.iter().enumerate() {
            let negate = lp.rhs[i].is_negative();
            let mut full: Vec<BigRational> = row
                .iter()
                .map(|a| if negate { -a } else { a.clone() })
                .collect();
            full.extend((0..m).map(|k| {
                if k == i {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            tab.rows.push(full);
            tab.rhs.push(lp.rhs[i].abs());
        }

        let phase_one: Vec<BigRational> = (0..width)
            .map(|j| {
                if j >= n {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        tab.optimize(&phase_one, width);
        if !tab.objective(&phase_one).is_zero() {
            return Err(Error::Solver("linear program is infeasible".into()));
        }
        // rows are independent, so every artificial left in the basis at
        // level zero can be exchanged for a structural column
        for i in 0..m {
            if tab.basis[i] >= n {
                let Some(j) = (0..n).find(|&j| !tab.rows[i][j].is_zero()) else {
                    return Err(Error::Solver(
                        "artificial variable cannot leave the basis".into(),
                    ));
                };
                tab.pivot(i, j);
            }
        }

        let mut cost = lp.objective.clone();
        cost.extend((0..m).map(|_| BigRational::zero()));
        if !tab.optimize(&cost, n) {
            return Err(Error::Solver("linear program is unbounded".into()));
        }
        let mut x = vec![BigRational::zero(); n];
        for (i, &b) in tab.basis.iter().enumerate() {
            x[b] = tab.rhs[i].clone();
        }
        let value = x.iter().zip(&lp.objective).map(|(a, c)| a * c).sum();
        Ok(LpSolution { value, x })
    }
}

struct Tableau {
    rows: Vec<Vec<BigRational>>,
    rhs: Vec<BigRational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn objective(&self, cost: &[BigRational]) -> BigRational {
        self.basis
            .iter()
            .zip(&self.rhs)
            .map(|(&b, v)| &cost[b] * v)
            .sum()
    }

    /// Runs Bland pivots over columns `0..limit`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[BigRational], limit: usize) -> bool {
        loop {
            let entering = (0..limit).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut reduced = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !self.rows[i][j].is_zero() {
                        reduced -= &cost[b] * &self.rows[i][j];
                    }
                }
                reduced.is_negative()
            });
            let Some(j) = entering else {
                return true;
            };
            let mut leave: Option<(usize, BigRational)> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][j].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / &self.rows[i][j];
                let better = match &leave {
                    None => true,
                    Some((k, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((i, _)) = leave else {
                return false;
            };
            self.pivot(i, j);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for a in self.rows[r].iter_mut() {
            *a *= &inv;
        }
        self.rhs[r] *= &inv;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (a, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *a -= &f * p;
                }
            }
            self.rhs[i] -= &f * &pivot_rhs;
        }
        self.basis[r] = c;
    }
}

/// Minimum of the objective over all basic feasible solutions, found by
/// trying every column subset of size `rank(A)`. Only for tiny programs.
pub fn enumerate_basic_solutions(lp: &RationalLp) -> Result<BigRational> {
    const CAP: usize = 20;
    if lp.variables() > CAP {
        return Err(Error::TooLarge {
            size: lp.variables(),
            cap: CAP,
        });
    }
    let lp = lp.deduplicated()?;
    let (n, m) = (lp.variables(), lp.rows.len());
    let mut best: Option<BigRational> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        if let Some(x) = solve_square(&lp, &subset) {
            if x.iter().all(|v| !v.is_negative()) {
                let value: BigRational = subset
                    .iter()
                    .zip(&x)
                    .map(|(&j, v)| &lp.objective[j] * v)
                    .sum();
                if best.as_ref().is_none_or(|b| value < *b) {
                    best = Some(value);
                }
            }
        }
        // next combination in lexicographic order
        let Some(k) = (0..m).rev().find(|&k| subset[k] < n - m + k) else {
            break;
        };
        subset[k] += 1;
        for l in k + 1..m {
            subset[l] = subset[l - 1] + 1;
        }
        if m == 0 {
            break;
        }
    }
    best.ok_or_else(|| Error::Solver("no basic feasible solution".into()))
}

/// Solves `A_B x_B = b` by Gauss-Jordan elimination; `None` if singular.
fn solve_square(lp: &RationalLp, cols: &[usize]) -> Option<Vec<BigRational>> {
    let m = cols.len();
    let mut a: Vec<Vec<BigRational>> = (0..m)
        .map(|i| {
            let mut row: Vec<BigRational> = cols.iter().map(|&j| lp.rows[i][j].clone()).collect();
            row.push(lp.rhs[i].clone());
            row
        })
        .collect();
    for c in 0..m {
        let p = (c..m).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        let inv = a[c][c].recip();
        for v in a[c].iter_mut() {
            *v *= &inv;
        }
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c && !row[c].is_zero() {
                let f = row[c].clone();
                for (v, pv) in row.iter_mut().zip(&pivot) {
                    *v -= &f * pv;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[m].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn small_program() {
        // min -x - y  s.t. x + 2y + s = 4, 3x + y + t = 6
        let mut lp = RationalLp::new(vec![q(-1, 1), q(-1, 1), q(0, 1), q(0, 1)]);
        lp.push_row(vec![q(1, 1), q(2, 1), q(1, 1), q(0, 1)], q(4, 1));
        lp.push_row(vec![q(3, 1), q(1, 1), q(0, 1), q(1, 1)], q(6, 1));
        let sol = lp.solve().unwrap();
        assert_eq!(sol.value, q(-14, 5));
        assert_eq!(sol.x[0], q(8, 5));
        assert_eq!(enumerate_basic_solutions(&lp).unwrap(), q(-14, 5));
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let mut lp = RationalLp::new(vec![q(1, 1), q(2, 1)]);
        lp.push_row(vec![q(1, 1), q(1, 1)], q(1, 1));
        lp.push_row(vec![q(2, 1), q(2, 1)], q(2, 1));
        assert_eq!(lp.deduplicated().unwrap().rows.len(), 1);
        assert_eq!(lp.solve().unwrap().value, q(1, 1));
    }

    #[test]
    fn inconsistent_and_infeasible() {
        let mut lp = RationalLp::new(vec![q(1, 1), q(1, 1)]);
        lp.push_row(vec![q(1, 1), q(1, 1)], q(1, 1));
        lp.push_row(vec![q(1, 1), q(1, 1)], q(2, 1));
        assert!(matches!(lp.solve(), Err(Error::Solver(_))));
        let mut lp = RationalLp::new(vec![q(1, 1)]);
        lp.push_row(vec![q(1, 1)], q(-1, 1));
        assert!(matches!(lp.solve(), Err(Error::Solver(_))));
    }

    #[test]
    fn size_cap() {
        let lp = RationalLp::new(vec![q(0, 1); VARIABLE_CAP + 1]);
        assert!(matches!(lp.solve(), Err(Error::TooLarge { .. })));
    }
}
