//! Exact projection onto `{z : a_iᵀz ≤ b_i}` by the dual active-set method
//! of Goldfarb and Idnani, specialized to the identity Hessian.
//!
//! Starting from the unconstrained minimizer `z = y`, the most violated
//! constraint is added while the multipliers of the active ones stay
//! nonnegative; a constraint whose multiplier would turn negative is dropped
//! first. Each full step strictly increases the dual objective, so no active
//! set repeats and the method ends after finitely many steps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::ProjectionResult;

/// Rows `a_i` are scaled to unit norm.
pub(super) struct Polyhedron {
    normals: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

/// `a_p` counts as dependent on the active normals when its component
/// orthogonal to them has squared norm below this.
const DEPENDENCE_TOL: f64 = 1e-12;

impl Polyhedron {
    pub(super) fn new() -> Self {
        Polyhedron { normals: Vec::new(), offsets: Vec::new() }
    }

    pub(super) fn push(&mut self, normal: &DVector<f64>, offset: f64) {
        let nn = normal.norm();
        self.normals.push(normal / nn);
        self.offsets.push(offset / nn);
    }

    pub(super) fn push_box(&mut self, lo: &DVector<f64>, hi: &DVector<f64>) {
        let n = lo.len();
        for i in 0..n {
            let e = DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
            if lo[i].is_finite() {
                self.push(&-&e, -lo[i]);
            }
            if hi[i].is_finite() {
                self.push(&e, hi[i]);
            }
        }
    }

    fn violation(&self, i: usize, z: &DVector<f64>) -> f64 {
        self.normals[i].dot(z) - self.offsets[i]
    }

    pub(super) fn project(&self, y: &DVector<f64>) -> Result<ProjectionResult> {
        let m = self.normals.len();
        let scale = 1.0 + y.amax() + self.offsets.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let tol = 1e-14 * scale;
        let mut z = y.clone();
        let mut active: Vec<usize> = Vec::new();
        let mut lambda: Vec<f64> = Vec::new();
        let cap = 20 * (m + y.len()) + 50;
        let mut iterations = 0;
        loop {
            let worst = (0..m)
                .filter(|i| !active.contains(i))
                .map(|i| (i, self.violation(i, &z)))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let Some((p, _)) = worst.filter(|&(_, s)| s > tol) else { break };
            let mut lambda_p = 0.0;
            loop {
                iterations += 1;
                if iterations > cap {
                    let residual = (0..m).map(|i| self.violation(i, &z)).fold(0.0, f64::max);
                    return Err(Error::ProjectionNotConverged { sweeps: iterations, residual });
                }
                let a_p = &self.normals[p];
                // r solves (N Nᵀ) r = N a_p; d = −(a_p − Nᵀ r) is a_p's
                // component orthogonal to the active normals, negated.
                let (r, d) = if active.is_empty() {
                    (DVector::zeros(0), -a_p)
                } else {
                    let k = active.len();
                    let nmat = DMatrix::from_fn(k, y.len(), |row, col| self.normals[active[row]][col]);
                    let gram = &nmat * nmat.transpose();
                    let rhs = &nmat * a_p;
                    let r = match gram.clone().cholesky() {
                        Some(ch) => ch.solve(&rhs),
                        None => gram.lu().solve(&rhs).ok_or(Error::EmptyIntersection)?,
                    };
                    let d = -(a_p - nmat.transpose() * &r);
                    (r, d)
                };
                let dn = d.norm_squared();
                let full = if dn > DEPENDENCE_TOL { self.violation(p, &z) / dn } else { f64::INFINITY };
                let mut partial = f64::INFINITY;
                let mut drop = None;
                for (j, (&rj, &lj)) in r.iter().zip(lambda.iter()).enumerate() {
                    if rj > 0.0 && lj / rj < partial {
                        partial = lj / rj;
                        drop = Some(j);
                    }
                }
                if full.is_infinite() && partial.is_infinite() {
                    return Err(Error::EmptyIntersection);
                }
                let t = full.min(partial).max(0.0);
                z += &d * t;
                for (l, rj) in lambda.iter_mut().zip(r.iter()) {
                    *l = (*l - t * rj).max(0.0);
                }
                lambda_p += t;
                if full <= partial {
                    active.push(p);
                    lambda.push(lambda_p);
                    break;
                }
                let j = drop.expect("finite partial step has a blocking index");
                active.remove(j);
                lambda.remove(j);
            }
        }
        let residual = (0..m).map(|i| self.violation(i, &z)).fold(0.0, f64::max).max(0.0);
        Ok(ProjectionResult { point: z, iterations, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn wedge_vertex_from_far_away() {
        let mut p = Polyhedron::new();
        p.push(&dvector![1.0, 0.0], 0.0);
        p.push(&dvector![0.0, 1.0], 0.0);
        let r = p.project(&dvector![3e4, 5e4]).unwrap();
        assert_eq!(r.point, dvector![0.0, 0.0]);
    }

    /// Brute force: the subset whose equality-constrained projection is
    /// feasible with nonnegative multipliers.
    fn enumerate(a: &[DVector<f64>], b: &[f64], y: &DVector<f64>) -> DVector<f64> {
        let m = a.len();
        let mut best: Option<DVector<f64>> = None;
        for mask in 0u32..(1 << m) {
            let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let (z, lam) = if rows.is_empty() {
                (y.clone(), DVector::zeros(0))
            } else {
                let nm = DMatrix::from_fn(rows.len(), y.len(), |r, c| a[rows[r]][c]);
                let rhs = DVector::from_fn(rows.len(), |r, _| a[rows[r]].dot(y) - b[rows[r]]);
                let Some(lam) = (&nm * nm.transpose()).lu().solve(&rhs) else { continue };
                (y - nm.transpose() * &lam, lam)
            };
            let feasible = (0..m).all(|i| a[i].dot(&z) - b[i] <= 1e-9);
            if feasible && lam.iter().all(|&l| l >= -1e-9) {
                if best.as_ref().is_none_or(|w| (&z - y).norm() < (w - y).norm()) {
                    best = Some(z);
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn matches_enumeration_on_random_polyhedra() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.random_range(2..4);
            let m = rng.random_range(1..6);
            let mut p = Polyhedron::new();
            let mut a = Vec::new();
            let mut b = Vec::new();
            for _ in 0..m {
                let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let off = rng.random_range(0.05..1.0);
                p.push(&v, off);
                a.push(v.clone() / v.norm());
                b.push(off / v.norm());
            }
            let scale = if rng.random_bool(0.3) { 1e4 } else { 3.0 };
            let y = DVector::from_fn(n, |_, _| rng.random_range(-scale..scale));
            let got = p.project(&y).unwrap().point;
            let want = enumerate(&a, &b, &y);
            assert!((&got - &want).norm() <= 1e-9 * (1.0 + y.norm()), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn empty_polyhedron_is_reported() {
        let mut p = Polyhedron::new();
        p.push(&dvector![1.0, 0.0], -1.0);
        p.push(&dvector![-1.0, 0.0], -1.0);
        assert!(matches!(p.project(&dvector![0.0, 0.0]), Err(Error::EmptyIntersection)));
    }
}
