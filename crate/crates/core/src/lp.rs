//! Dense Phase-I simplex for small linear feasibility problems
//! (`x >= 0` plus linear rows). Bland's rule keeps it cycle-free.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FeasibilityProblem {
    pub n_vars: usize,
    pub rows: Vec<LinearRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible { phase_one_objective: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

const PIVOT_TOL: f64 = 1e-12;
/// Accepted primal residual of a returned point.
pub const RESIDUAL_TOL: f64 = 1e-9;

impl FeasibilityProblem {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push(LinearRow { coeffs, sense, rhs });
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match r.sense {
                Sense::Le => lhs - r.rhs,
                Sense::Ge => r.rhs - lhs,
                Sense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn solve(&self) -> Feasibility {
        let m = self.rows.len();
        let n = self.n_vars;
        if m == 0 {
            return Feasibility::Feasible(vec![0.0; n]);
        }
        let n_slack = self.rows.iter().filter(|r| r.sense != Sense::Eq).count();
        // Columns: structural | slack | artificial | rhs.
        let width = n + n_slack + m + 1;
        let rhs_col = width - 1;
        let mut tab = vec![0.0; (m + 1) * width];
        let mut basis = vec![0usize; m];
        let mut slack = n;
        for (i, r) in self.rows.iter().enumerate() {
            let row = &mut tab[i * width..(i + 1) * width];
            row[..n].copy_from_slice(&r.coeffs);
            match r.sense {
                Sense::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                Sense::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                Sense::Eq => {}
            }
            row[rhs_col] = r.rhs;
            if r.rhs < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            row[n + n_slack + i] = 1.0;
            basis[i] = n + n_slack + i;
        }
        // Objective row: minimize the sum of artificials, written in reduced form.
        for j in 0..width {
            if j >= n + n_slack && j < rhs_col {
                continue;
            }
            let s: f64 = (0..m).map(|i| tab[i * width + j]).sum();
            tab[m * width + j] = -s;
        }
        let obj = m * width;
        loop {
            let Some(enter) = (0..rhs_col).find(|&j| tab[obj + j] < -PIVOT_TOL) else {
                break;
            };
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..m {
                let a = tab[i * width + enter];
                if a > PIVOT_TOL {
                    let ratio = tab[i * width + rhs_col] / a;
                    let better = match leave {
                        None => true,
                        Some(l) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[l]),
                    };
                    if better {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(p) = leave else {
                // Unbounded direction cannot occur in Phase I (objective >= 0).
                break;
            };
            pivot(&mut tab, width, m + 1, p, enter);
            basis[p] = enter;
        }
        let phase_one_objective = -tab[obj + rhs_col];
        let mut x = vec![0.0; n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] = tab[i * width + rhs_col].max(0.0);
            }
        }
        if phase_one_objective <= RESIDUAL_TOL && self.max_violation(&x) <= RESIDUAL_TOL {
            Feasibility::Feasible(x)
        } else {
            Feasibility::Infeasible { phase_one_objective }
        }
    }
}

fn pivot(tab: &mut [f64], width: usize, rows: usize, p: usize, q: usize) {
    let piv = tab[p * width + q];
    for j in 0..width {
        tab[p * width + j] /= piv;
    }
    tab[p * width + q] = 1.0;
    let (before, rest) = tab.split_at_mut(p * width);
    let (prow, after) = rest.split_at_mut(width);
    let elim = |row: &mut [f64]| {
        let f = row[q];
        if f != 0.0 {
            for j in 0..width {
                row[j] -= f * prow[j];
            }
            row[q] = 0.0;
        }
    };
    for row in before.chunks_mut(width) {
        elim(row);
    }
    for row in after.chunks_mut(width).take(rows - p - 1) {
        elim(row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_point() {
        let mut p = FeasibilityProblem::new(2);
        p.push(vec![1.0, 1.0], Sense::Eq, 1.0);
        p.push(vec![1.0, 0.0], Sense::Ge, 0.7);
        p.push(vec![0.0, 1.0], Sense::Ge, 0.2);
        let Feasibility::Feasible(x) = p.solve() else { panic!() };
        assert!(p.max_violation(&x) < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = FeasibilityProblem::new(2);
        p.push(vec![1.0, 1.0], Sense::Eq, 1.0);
        p.push(vec![1.0, 0.0], Sense::Ge, 0.7);
        p.push(vec![0.0, 1.0], Sense::Ge, 0.4);
        assert!(!p.solve().is_feasible());
    }

    #[test]
    fn negative_rhs_and_le_rows() {
        let mut p = FeasibilityProblem::new(3);
        p.push(vec![-1.0, -1.0, -1.0], Sense::Le, -2.0);
        p.push(vec![1.0, 0.0, 0.0], Sense::Le, 0.5);
        p.push(vec![0.0, 1.0, 0.0], Sense::Le, 0.5);
        let Feasibility::Feasible(x) = p.solve() else { panic!() };
        assert!(x[2] >= 1.0 - 1e-12);
        p.push(vec![0.0, 0.0, 1.0], Sense::Le, 0.9);
        assert!(!p.solve().is_feasible());
    }
}
