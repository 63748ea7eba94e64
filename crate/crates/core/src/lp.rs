//! Exact two-phase simplex for `max c·x` subject to `Ax ≤ b`, `x ≥ 0`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Optimal { values: Vec<Rational>, objective: Rational },
    Infeasible,
    Unbounded,
}

impl Solution {
    pub fn objective(&self) -> Option<&Rational> {
        match self {
            Solution::Optimal { objective, .. } => Some(objective),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(nvars: usize) -> Self {
        LinearProgram { objective: vec![Rational::zero(); nvars], rows: Vec::new() }
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }

    /// Adds `Σ coeffs[k].1 · x_{coeffs[k].0} ≤ rhs`.
    pub fn add_row(&mut self, coeffs: &[(usize, Rational)], rhs: Rational) {
        let mut dense = vec![Rational::zero(); self.nvars()];
        for (j, a) in coeffs {
            dense[*j] += a;
        }
        self.rows.push(Row { coeffs: dense, rhs });
    }

    /// Plain-text listing: `nvars nrows`, the objective, then one
    /// `a_1 ... a_n <= b` line per row.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let join = |v: &[Rational]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "{} {}", self.nvars(), self.rows.len()).unwrap();
        writeln!(out, "{}", join(&self.objective)).unwrap();
        for row in &self.rows {
            writeln!(out, "{} <= {}", join(&row.coeffs), row.rhs).unwrap();
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<LinearProgram> {
        let bad = |s: String| Error::Parse(s);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty LP dump".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [n, m] = dims[..] else { return Err(bad(format!("bad header {header:?}"))) };
        let parse_vec = |line: &str| -> Result<Vec<Rational>> { line.split_whitespace().map(|t| t.parse()).collect() };
        let objective = parse_vec(lines.next().unwrap_or(""))?;
        if objective.len() != n {
            return Err(bad(format!("objective has {} entries, expected {n}", objective.len())));
        }
        let mut rows = Vec::with_capacity(m);
        for k in 0..m {
            let line = lines.next().ok_or_else(|| bad(format!("missing row {k}")))?;
            let (lhs, rhs) = line.split_once("<=").ok_or_else(|| bad(format!("row {k} lacks <=")))?;
            let coeffs = parse_vec(lhs)?;
            if coeffs.len() != n {
                return Err(bad(format!("row {k} has {} coefficients, expected {n}", coeffs.len())));
            }
            rows.push(Row { coeffs, rhs: rhs.trim().parse()? });
        }
        Ok(LinearProgram { objective, rows })
    }

    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        x.len() == self.nvars()
            && x.iter().all(|v| !v.is_negative())
            && self.rows.iter().all(|r| dot(&r.coeffs, x) <= r.rhs)
    }

    pub fn value_at(&self, x: &[Rational]) -> Rational {
        dot(&self.objective, x)
    }
}

fn dot(a: &[Rational], x: &[Rational]) -> Rational {
    a.iter().zip(x).filter(|(c, _)| !c.is_zero()).map(|(c, v)| c * v).sum()
}

struct Tableau {
    t: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Columns that may enter the basis.
    allowed: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn reduced_costs(&self, c: &[Rational]) -> Vec<Rational> {
        let mut d: Vec<Rational> = c.to_vec();
        for (r, row) in self.t.iter().enumerate() {
            let cb = &c[self.basis[r]];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in row.iter().enumerate() {
                if !a.is_zero() {
                    d[j] -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j].clone();
        for a in self.t[r].iter_mut() {
            if !a.is_zero() {
                *a = &*a / &p;
            }
        }
        self.rhs[r] = &self.rhs[r] / &p;
        let prow = self.t[r].clone();
        let prhs = self.rhs[r].clone();
        for k in 0..self.t.len() {
            if k == r || self.t[k][j].is_zero() {
                continue;
            }
            let f = self.t[k][j].clone();
            for (a, b) in self.t[k].iter_mut().zip(&prow) {
                if !b.is_zero() {
                    *a -= &f * b;
                }
            }
            self.rhs[k] -= &f * &prhs;
        }
        self.basis[r] = j;
    }

    /// Bland's rule: smallest improving column, ties in the ratio test go
    /// to the smallest basic column.
    fn run(&mut self, c: &[Rational]) -> Outcome {
        loop {
            let d = self.reduced_costs(c);
            let Some(j) = (0..self.allowed).find(|&j| d[j].is_positive()) else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(Rational, usize, usize)> = None;
            for r in 0..self.t.len() {
                let a = &self.t[r][j];
                if a.is_positive() {
                    let ratio = &self.rhs[r] / a;
                    let better = match &leave {
                        None => true,
                        Some((best, bcol, _)) => ratio < *best || (ratio == *best && self.basis[r] < *bcol),
                    };
                    if better {
                        leave = Some((ratio, self.basis[r], r));
                    }
                }
            }
            let Some((_, _, r)) = leave else { return Outcome::Unbounded };
            self.pivot(r, j);
        }
    }
}

/// Solves the LP exactly. Optimal answers are basic feasible solutions and
/// are certified before being returned.
pub fn solve(lp: &LinearProgram) -> Solution {
    let n = lp.nvars();
    let m = lp.rows.len();
    let negatives: Vec<usize> = (0..m).filter(|&r| lp.rows[r].rhs.is_negative()).collect();
    let ncols = n + m + negatives.len();
    let mut t = vec![vec![Rational::zero(); ncols]; m];
    let mut rhs = vec![Rational::zero(); m];
    let mut basis = vec![0; m];
    for (r, row) in lp.rows.iter().enumerate() {
        assert_eq!(row.coeffs.len(), n, "row {r} has the wrong width");
        let flip = row.rhs.is_negative();
        for j in 0..n {
            t[r][j] = if flip { -&row.coeffs[j] } else { row.coeffs[j].clone() };
        }
        t[r][n + r] = if flip { -Rational::one() } else { Rational::one() };
        rhs[r] = row.rhs.abs();
        basis[r] = n + r;
    }
    for (k, &r) in negatives.iter().enumerate() {
        t[r][n + m + k] = Rational::one();
        basis[r] = n + m + k;
    }
    let mut tab = Tableau { t, rhs, basis, allowed: ncols };

    if !negatives.is_empty() {
        let mut c1 = vec![Rational::zero(); ncols];
        for c in c1.iter_mut().skip(n + m) {
            *c = -Rational::one();
        }
        tab.run(&c1);
        let phase1: Rational = (0..m).filter(|&r| tab.basis[r] >= n + m).map(|r| tab.rhs[r].clone()).sum();
        if phase1.is_positive() {
            return Solution::Infeasible;
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n + m {
                match (0..n + m).find(|&j| !tab.t[r][j].is_zero()) {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.t.remove(r);
                        tab.rhs.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        tab.allowed = n + m;
    }

    let mut c = vec![Rational::zero(); ncols];
    c[..n].clone_from_slice(&lp.objective);
    if let Outcome::Unbounded = tab.run(&c) {
        return Solution::Unbounded;
    }
    let mut values = vec![Rational::zero(); n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            values[b] = tab.rhs[r].clone();
        }
    }
    let objective = lp.value_at(&values);
    assert!(lp.is_feasible_point(&values), "simplex returned an infeasible point");
    let d = tab.reduced_costs(&c);
    assert!(d[..tab.allowed].iter().all(|x| !x.is_positive()), "simplex stopped with an improving column");
    Solution::Optimal { values, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn lp(obj: &[i64], rows: &[(&[i64], i64)]) -> LinearProgram {
        LinearProgram {
            objective: obj.iter().map(|&x| r(x)).collect(),
            rows: rows.iter().map(|(a, b)| Row { coeffs: a.iter().map(|&x| r(x)).collect(), rhs: r(*b) }).collect(),
        }
    }

    #[test]
    fn single_bound() {
        assert_eq!(solve(&lp(&[1], &[(&[1], 1)])), Solution::Optimal { values: vec![r(1)], objective: r(1) });
    }

    #[test]
    fn negative_bound_is_infeasible() {
        assert_eq!(solve(&lp(&[1], &[(&[1], -1)])), Solution::Infeasible);
    }

    #[test]
    fn two_dimensional_vertex() {
        let s = solve(&lp(&[3, 2], &[(&[1, 1], 4), (&[1, 0], 2)]));
        assert_eq!(s, Solution::Optimal { values: vec![r(2), r(2)], objective: r(10) });
    }

    #[test]
    fn unbounded_direction() {
        assert_eq!(solve(&lp(&[1, 1], &[(&[1, -1], 1)])), Solution::Unbounded);
    }

    #[test]
    fn lower_bounds_via_negative_rows() {
        // x ≥ 2 written as -x ≤ -2; minimise x by maximising -x.
        let s = solve(&lp(&[-1], &[(&[-1], -2), (&[1], 5)]));
        assert_eq!(s, Solution::Optimal { values: vec![r(2)], objective: r(-2) });
    }

    #[test]
    fn redundant_equality_rows() {
        // x + y = 2 twice over, as paired inequalities.
        let s = solve(&lp(&[1, 2], &[(&[1, 1], 2), (&[-1, -1], -2), (&[2, 2], 4), (&[-2, -2], -4)]));
        assert_eq!(s, Solution::Optimal { values: vec![r(0), r(2)], objective: r(4) });
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the textbook largest-coefficient rule.
        let q = |a: i64, b: i64| Rational::new(a, b);
        let prog = LinearProgram {
            objective: vec![q(3, 4), q(-150, 1), q(1, 50), q(-6, 1)],
            rows: vec![
                Row { coeffs: vec![q(1, 4), q(-60, 1), q(-1, 25), q(9, 1)], rhs: r(0) },
                Row { coeffs: vec![q(1, 2), q(-90, 1), q(-1, 50), q(3, 1)], rhs: r(0) },
                Row { coeffs: vec![r(0), r(0), r(1), r(0)], rhs: r(1) },
            ],
        };
        let s = solve(&prog);
        assert_eq!(s.objective(), Some(&q(1, 20)));
    }

    #[test]
    fn fractional_optimum_is_exact() {
        let s = solve(&lp(&[1, 1], &[(&[3, 1], 2), (&[1, 3], 2)]));
        assert_eq!(s, Solution::Optimal { values: vec![Rational::new(1, 2), Rational::new(1, 2)], objective: r(1) });
    }

    #[test]
    fn dump_round_trips() {
        let mut p = lp(&[3, 2], &[(&[1, 1], 4), (&[1, 0], -2)]);
        p.rows[0].coeffs[1] = Rational::new(1, 3);
        let text = p.dump();
        assert!(text.starts_with("2 2\n3/1 2/1\n1/1 1/3 <= 4/1\n"));
        assert_eq!(LinearProgram::parse_dump(&text).unwrap(), p);
        assert!(LinearProgram::parse_dump("2 1\n1 1\n1 <= 3\n").is_err());
    }

    #[test]
    fn empty_program() {
        assert_eq!(solve(&LinearProgram::new(0)), Solution::Optimal { values: vec![], objective: r(0) });
        assert_eq!(solve(&lp(&[0, 0], &[])), Solution::Optimal { values: vec![r(0), r(0)], objective: r(0) });
    }
}
