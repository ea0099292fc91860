//! Direct and iterative solvers for the SPD systems arising from the
//! implicit diffusion step and the cube-local dual-norm problems.

use crate::error::{Error, Result};
use crate::util::KahanSum;

/// Precomputed Thomas factorization of a tridiagonal system.
///
/// `sub[i]` multiplies `x[i-1]` in row `i` (`sub[0]` unused), `diag[i]`
/// multiplies `x[i]`, `sup[i]` multiplies `x[i+1]` (`sup[n-1]` unused).
#[derive(Clone, Debug)]
pub struct TridiagSolver {
    sub: Vec<f64>,
    cprime: Vec<f64>,
    inv_m: Vec<f64>,
}

impl TridiagSolver {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 1 && sub.len() == n && sup.len() == n);
        let mut cprime = vec![0.0; n];
        let mut inv_m = vec![0.0; n];
        let mut m = diag[0];
        if m == 0.0 {
            return Err(Error::SolveFailed("zero pivot in tridiagonal solve".into()));
        }
        inv_m[0] = 1.0 / m;
        cprime[0] = sup[0] * inv_m[0];
        for i in 1..n {
            m = diag[i] - sub[i] * cprime[i - 1];
            if m == 0.0 {
                return Err(Error::SolveFailed("zero pivot in tridiagonal solve".into()));
            }
            inv_m[i] = 1.0 / m;
            cprime[i] = sup[i] * inv_m[i];
        }
        Ok(TridiagSolver { sub, cprime, inv_m })
    }

    pub fn len(&self) -> usize {
        self.inv_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_m.is_empty()
    }

    /// Solve in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.inv_m.len();
        assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_m[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) * self.inv_m[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.cprime[i] * rhs[i + 1];
        }
    }
}

/// Constant-coefficient tridiagonal system with periodic wrap corners,
/// solved by the Sherman-Morrison correction of a plain Thomas solve.
#[derive(Clone, Debug)]
pub struct CyclicTridiagSolver {
    inner: TridiagSolver,
    z: Vec<f64>,
    v_first: f64,
    v_last: f64,
    denom: f64,
}

impl CyclicTridiagSolver {
    /// Rows are `off * x[i-1] + diag * x[i] + off * x[i+1]` with wrap.
    pub fn new(off: f64, diag: f64, n: usize) -> Result<Self> {
        assert!(n >= 3);
        let gamma = -diag;
        let mut d = vec![diag; n];
        d[0] = diag - gamma;
        d[n - 1] = diag - off * off / gamma;
        let inner = TridiagSolver::new(vec![off; n], d, vec![off; n])?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = off;
        inner.solve(&mut z);
        let v_first = 1.0;
        let v_last = off / gamma;
        let denom = 1.0 + v_first * z[0] + v_last * z[n - 1];
        if denom == 0.0 {
            return Err(Error::SolveFailed("singular cyclic tridiagonal system".into()));
        }
        Ok(CyclicTridiagSolver {
            inner,
            z,
            v_first,
            v_last,
            denom,
        })
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        self.inner.solve(rhs);
        let vy = self.v_first * rhs[0] + self.v_last * rhs[n - 1];
        let factor = vy / self.denom;
        for (x, z) in rhs.iter_mut().zip(&self.z) {
            *x -= factor * z;
        }
    }
}

/// Solve a variable-coefficient tridiagonal system with the two wrap
/// corners `a[0][n-1] = top_right`, `a[n-1][0] = bottom_left` via a rank-one
/// Sherman-Morrison correction.
pub fn solve_cyclic_variable(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    top_right: f64,
    bottom_left: f64,
    rhs: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    assert!(n >= 3);
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= top_right * bottom_left / gamma;
    let solver = TridiagSolver::new(sub.to_vec(), d, sup.to_vec())?;
    let mut z = vec![0.0; n];
    z[0] = gamma;
    z[n - 1] = bottom_left;
    solver.solve(&mut z);
    solver.solve(rhs);
    let v_last = top_right / gamma;
    let denom = 1.0 + z[0] + v_last * z[n - 1];
    if denom == 0.0 {
        return Err(Error::SolveFailed("singular cyclic system".into()));
    }
    let vy = rhs[0] + v_last * rhs[n - 1];
    let factor = vy / denom;
    for (x, zi) in rhs.iter_mut().zip(&z) {
        *x -= factor * zi;
    }
    Ok(())
}

/// Matrix-free conjugate gradients for SPD operators.
///
/// Dot products accumulate sequentially with compensation, so iteration
/// counts and results do not depend on thread scheduling.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = rhs.len();
    assert_eq!(x.len(), n);
    let rhs_norm2 = dot(rhs, rhs);
    if rhs_norm2 == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let tol2 = rel_tol * rel_tol * rhs_norm2;

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rr = dot(&r, &r);
    if rr <= tol2 {
        return Ok(0);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolveFailed(
                "conjugate gradients met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new <= tol2 {
            return Ok(it);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::SolveFailed(format!(
        "conjugate gradients did not reach tolerance {rel_tol} in {max_iter} iterations"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}
