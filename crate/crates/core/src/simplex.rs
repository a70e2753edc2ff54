//! Dense two-phase simplex for small linear programs in standard form.
//!
//! Solves `min c·x` subject to `A x = b`, `x >= 0`. Entering columns follow
//! the most negative reduced cost with lowest-index tie breaking; after a run
//! of degenerate pivots the rule falls back to Bland's first-index choice,
//! which cannot cycle. The ratio test takes the largest pivot among rows
//! within a small tolerance of the minimum ratio, and the tableau is rebuilt
//! from the original data at regular intervals to stop rounding drift.

/// A linear program `min c·x, A x = b, x >= 0` with dense rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    /// Phase one could not drive the constraint residual below tolerance.
    Infeasible {
        residual: f64,
    },
    Unbounded,
}

const PIVOT_TOL: f64 = 1e-9;
const RATIO_SLACK: f64 = 1e-12;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_EVERY: usize = 32;

struct Tableau {
    rows: usize,
    cols: usize,
    /// Original rows `[A | I | b]` with `b >= 0`.
    original: Vec<f64>,
    data: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Rebuilds `B^{-1} [A | I | b]` and the reduced costs from the original rows.
    ///
    /// Returns `false` when the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        let (m, w) = (self.rows, self.width());
        let mut lhs: Vec<Vec<f64>> =
            (0..m).map(|i| self.basis.iter().map(|&bj| self.original[i * w + bj]).collect()).collect();
        let mut rhs: Vec<Vec<f64>> = (0..m).map(|i| self.original[i * w..(i + 1) * w].to_vec()).collect();
        let norm = lhs.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
        for k in 0..m {
            let Some(p) = (k..m).max_by(|&a, &b| lhs[a][k].abs().total_cmp(&lhs[b][k].abs())) else {
                return false;
            };
            if lhs[p][k].abs() <= 1e-13 * norm {
                return false;
            }
            lhs.swap(k, p);
            rhs.swap(k, p);
            let (pl, pr) = (lhs[k].clone(), rhs[k].clone());
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = lhs[i][k] / pl[k];
                if f != 0.0 {
                    for (x, &v) in lhs[i][k..].iter_mut().zip(&pl[k..]) {
                        *x -= f * v;
                    }
                    for (x, &v) in rhs[i].iter_mut().zip(&pr) {
                        *x -= f * v;
                    }
                }
            }
        }
        for (k, row) in rhs.iter_mut().enumerate() {
            let d = lhs[k][k];
            row.iter_mut().for_each(|v| *v /= d);
        }
        for (i, row) in rhs.iter().enumerate() {
            self.data[i * w..(i + 1) * w].copy_from_slice(row);
            self.data[i * w + self.basis[i]] = 1.0;
        }
        for j in 0..w {
            let cj = if j < self.cols { self.cost[j] } else { 0.0 };
            let z: f64 = (0..m).map(|i| self.cost[self.basis[i]] * rhs[i][j]).sum();
            self.data[m * w + j] = cj - z;
        }
        for &bj in &self.basis {
            self.data[m * w + bj] = 0.0;
        }
        true
    }

    /// Runs simplex iterations on the objective row; `allowed` limits entering columns.
    fn optimize(&mut self, allowed: usize, opt_tol: f64) -> bool {
        let obj = self.rows;
        let mut degenerate = 0usize;
        let max_iter = 50 * (self.rows + self.cols) + 1000;
        for iter in 0..max_iter {
            if iter > 0 && iter % REFACTOR_EVERY == 0 {
                self.refactor();
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -opt_tol;
            for j in 0..allowed {
                let rc = self.at(obj, j);
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(c) = enter else { return true };
            let col_max = (0..self.rows).fold(0.0f64, |s, i| s.max(self.at(i, c).abs()));
            let piv_tol = PIVOT_TOL * col_max.max(1.0);
            let mut bound = f64::INFINITY;
            for i in 0..self.rows {
                let aic = self.at(i, c);
                if aic > piv_tol {
                    bound = bound.min((self.rhs(i).max(0.0) + RATIO_SLACK) / aic);
                }
            }
            if bound == f64::INFINITY {
                return false;
            }
            let mut leave: Option<usize> = None;
            for i in 0..self.rows {
                let aic = self.at(i, c);
                if aic > piv_tol && self.rhs(i).max(0.0) / aic <= bound {
                    let better = match leave {
                        None => true,
                        Some(l) if bland => self.basis[i] < self.basis[l],
                        Some(l) => aic > self.at(l, c),
                    };
                    if better {
                        leave = Some(i);
                    }
                }
            }
            let r = leave.expect("a row attains the bound");
            if self.rhs(r).max(0.0) / self.at(r, c) <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
        true
    }
}

/// Solves the program; `feas_tol` bounds the accepted phase-one residual `Σ|A x - b|`.
pub fn solve(lp: &LinearProgram, feas_tol: f64) -> LpOutcome {
    let m = lp.a.len();
    let n = lp.c.len();
    if m == 0 {
        if lp.c.iter().any(|&c| c < 0.0) {
            return LpOutcome::Unbounded;
        }
        return LpOutcome::Optimal { x: vec![0.0; n], objective: 0.0 };
    }
    let cols = n + m;
    let w = cols + 1;
    let mut original = vec![0.0; m * w];
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            original[i * w + j] = sign * lp.a[i][j];
        }
        original[i * w + n + i] = 1.0;
        original[i * w + cols] = sign * lp.b[i];
    }
    let mut data = vec![0.0; (m + 1) * w];
    data[..m * w].copy_from_slice(&original);
    for j in (0..n).chain([cols]) {
        data[m * w + j] = -(0..m).map(|i| original[i * w + j]).sum::<f64>();
    }
    let cost: Vec<f64> = (0..cols).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    let mut t = Tableau { rows: m, cols, original, data, basis: (n..n + m).collect(), cost };

    let scale = 1.0 + lp.b.iter().map(|v| v.abs()).sum::<f64>();
    if !t.optimize(cols, 1e-12 * scale.max(1.0)) {
        return LpOutcome::Unbounded;
    }
    t.refactor();
    let residual: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs(i).abs()).sum();
    if residual > feas_tol {
        return LpOutcome::Infeasible { residual };
    }

    // Drive remaining artificial variables out of the basis where possible.
    for i in 0..m {
        if t.basis[i] >= n {
            let best = (0..n).max_by(|&a, &b| t.at(i, a).abs().total_cmp(&t.at(i, b).abs()));
            if let Some(j) = best.filter(|&j| t.at(i, j).abs() > 1e-9) {
                t.pivot(i, j);
            }
        }
    }

    // Phase two: artificial columns are barred from entering.
    t.cost = (0..cols).map(|j| if j < n { lp.c[j] } else { 0.0 }).collect();
    if !t.refactor() {
        return LpOutcome::Infeasible { residual };
    }
    let cscale = 1.0 + lp.c.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if !t.optimize(n, 1e-11 * cscale) {
        return LpOutcome::Unbounded;
    }
    t.refactor();

    let mut x = vec![0.0; n];
    for i in 0..m {
        let bj = t.basis[i];
        if bj < n {
            x[bj] = t.rhs(i).max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_transport() {
        // 2x2 transport: supplies (1,1), demands (1,1), cost [[0,2],[2,0]] -> 0.
        let lp = LinearProgram {
            a: vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            b: vec![1.0, 1.0, 1.0, 1.0],
            c: vec![0.0, 2.0, 2.0, 0.0],
        };
        match solve(&lp, 1e-12) {
            LpOutcome::Optimal { x, objective } => {
                assert!(objective.abs() < 1e-12);
                assert!((x[0] - 1.0).abs() < 1e-12 && (x[3] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        let lp = LinearProgram { a: vec![vec![1.0, 1.0]], b: vec![-1.0], c: vec![0.0, 0.0] };
        assert!(matches!(solve(&lp, 1e-12), LpOutcome::Infeasible { .. }));
    }

    #[test]
    fn optimum_of_textbook_problem() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let lp = LinearProgram {
            a: vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]],
            b: vec![4.0, 6.0],
            c: vec![-1.0, -1.0, 0.0, 0.0],
        };
        match solve(&lp, 1e-12) {
            LpOutcome::Optimal { objective, .. } => assert!((objective + 2.8).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
