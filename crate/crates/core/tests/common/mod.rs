//! Independent reference solvers shared by the integration tests.

#![allow(dead_code)]

/// Euclidean projection of `v` onto `{y >= 0, sum y = total}` (sort-based).
pub fn project_simplex(v: &mut [f64], total: f64) {
    if v.is_empty() {
        return;
    }
    if total <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        acc += uj;
        let t = (acc - total) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

pub fn log_utility(etas: &[f64], y: &[f64]) -> f64 {
    etas.iter().zip(y).map(|(e, v)| (1.0 + e * v).ln()).sum()
}

pub struct OracleSolution {
    pub utility: f64,
    pub y_ded: Vec<f64>,
    pub y_sh: Vec<f64>,
    /// Dual bound minus utility, an upper bound on suboptimality.
    pub gap: f64,
    pub iterations: usize,
}

struct Problem<'a> {
    etas: &'a [f64],
    slice_of: &'a [usize],
    dedicated: &'a [f64],
    shared: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.etas.len()
    }

    fn totals(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| z[i] + z[n + i]).collect()
    }

    fn value(&self, z: &[f64]) -> f64 {
        log_utility(self.etas, &self.totals(z))
    }

    fn grad(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n();
        let t = self.totals(z);
        let g: Vec<f64> = (0..n).map(|i| self.etas[i] / (1.0 + self.etas[i] * t[i])).collect();
        g.iter().chain(g.iter()).copied().collect()
    }

    fn project(&self, z: &mut [f64]) {
        let n = self.n();
        for (s, &x) in self.dedicated.iter().enumerate() {
            let idx: Vec<usize> = (0..n).filter(|&i| self.slice_of[i] == s).collect();
            let mut v: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
            project_simplex(&mut v, x);
            for (&i, vi) in idx.iter().zip(v) {
                z[i] = vi;
            }
        }
        project_simplex(&mut z[n..], self.shared);
    }

    fn fw_gap(&self, z: &[f64]) -> f64 {
        let n = self.n();
        let g = self.grad(z);
        let mut gap = 0.0;
        for (s, &x) in self.dedicated.iter().enumerate() {
            let members = (0..n).filter(|&i| self.slice_of[i] == s);
            let best = members.clone().map(|i| g[i]).fold(0.0, f64::max);
            gap += x * best - members.map(|i| g[i] * z[i]).sum::<f64>();
        }
        let best = g[n..].iter().copied().fold(0.0, f64::max);
        gap + self.shared * best - (0..n).map(|i| g[n + i] * z[n + i]).sum::<f64>()
    }

    /// Lagrangian dual value with block prices taken as the largest marginal
    /// utility in each block (infinite for an empty budget).
    fn dual_bound(&self, z: &[f64]) -> f64 {
        let n = self.n();
        let g = self.grad(z);
        let price = |x: f64, members: &mut dyn Iterator<Item = usize>| if x > 0.0 { members.map(|i| g[i]).fold(0.0, f64::max) } else { f64::INFINITY };
        let lambda: Vec<f64> = self.dedicated.iter().enumerate().map(|(s, &x)| price(x, &mut (0..n).filter(|&i| self.slice_of[i] == s))).collect();
        let nu = price(self.shared, &mut (0..n));
        let mut d = 0.0;
        for (s, &x) in self.dedicated.iter().enumerate() {
            if x > 0.0 {
                d += lambda[s] * x;
            }
        }
        if self.shared > 0.0 {
            d += nu * self.shared;
        }
        for i in 0..n {
            let c = lambda[self.slice_of[i]].min(nu);
            let eta = self.etas[i];
            // sup over y >= 0 of log(1 + eta y) - c y
            if c < eta {
                d += (eta / c).ln() - 1.0 + c / eta;
            }
        }
        d
    }
}

/// Maximises `sum log(1 + eta_i (y_ded_i + y_sh_i))` over per-slice and shared
/// budget simplices by accelerated projected gradient with backtracking and
/// adaptive restart. Stops once the Frank-Wolfe gap is below `tol`
/// or after `max_iter` steps.
pub fn projected_gradient(etas: &[f64], slice_of: &[usize], dedicated: &[f64], shared: f64, tol: f64, max_iter: usize) -> OracleSolution {
    let p = Problem { etas, slice_of, dedicated, shared };
    let n = p.n();
    // feasible start: even split
    let mut z = vec![0.0; 2 * n];
    for (s, &x) in dedicated.iter().enumerate() {
        let m = slice_of.iter().filter(|&&k| k == s).count();
        for i in (0..n).filter(|&i| slice_of[i] == s) {
            z[i] = x / m as f64;
        }
    }
    for i in 0..n {
        z[n + i] = shared / n as f64;
    }
    let mut prev = z.clone();
    let mut t_mom: f64 = 1.0;
    let mut lip: f64 = 1.0;
    let mut fz = p.value(&z);
    let mut gap = p.fw_gap(&z);
    let mut it = 0;
    while it < max_iter && gap > tol {
        it += 1;
        let t_next = (1.0 + (1.0 + 4.0 * t_mom * t_mom).sqrt()) / 2.0;
        let beta = (t_mom - 1.0) / t_next;
        let mut w: Vec<f64> = z.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
        p.project(&mut w);
        let fw = p.value(&w);
        let g = p.grad(&w);
        lip = (lip / 2.0).max(1e-12);
        let cand = loop {
            let mut c: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + b / lip).collect();
            p.project(&mut c);
            let d: Vec<f64> = c.iter().zip(&w).map(|(a, b)| a - b).collect();
            let lin: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let sq: f64 = d.iter().map(|x| x * x).sum();
            if p.value(&c) >= fw + lin - lip / 2.0 * sq - 1e-15 || lip > 1e12 {
                break c;
            }
            lip *= 2.0;
        };
        let fc = p.value(&cand);
        if fc < fz {
            if beta == 0.0 {
                // a plain step no longer ascends: rounding floor
                break;
            }
            t_mom = 1.0;
            prev = z.clone();
            continue;
        }
        prev = std::mem::replace(&mut z, cand);
        fz = fc;
        t_mom = t_next;
        gap = p.fw_gap(&z);
    }
    // Near the optimum the utility is flat to rounding, so ascent tests stop
    // resolving progress. Finish with fixed local-curvature steps.
    while it < max_iter && gap > tol {
        it += 1;
        let g = p.grad(&z);
        let lip = 2.0 * g.iter().map(|x| x * x).fold(0.0, f64::max);
        let mut c: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a + b / lip).collect();
        p.project(&mut c);
        z = c;
        gap = p.fw_gap(&z);
    }
    fz = p.value(&z);
    let gap = p.dual_bound(&z) - fz;
    OracleSolution { utility: fz, y_ded: z[..n].to_vec(), y_sh: z[n..].to_vec(), gap, iterations: it }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5, 3.0];
        project_simplex(&mut v, 1.0);
        assert_eq!(v, vec![0.0, 0.0, 1.0]);
        let mut v = vec![1.0, 1.0];
        project_simplex(&mut v, 4.0);
        assert_eq!(v, vec![2.0, 2.0]);
    }
}
