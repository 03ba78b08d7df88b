//! Euclidean projection onto a polyhedron `{v : ⟨n_j, v⟩ ≤ b_j}` by the
//! Goldfarb–Idnani dual active-set method specialised to an identity Hessian.

use super::vector::dot;

pub(crate) struct PolyProjection {
    pub point: Vec<f64>,
    /// Constraints with positive multipliers at the solution.
    pub active: Vec<usize>,
    #[allow(dead_code)]
    pub iterations: usize,
}

pub(crate) enum PolyError {
    Infeasible,
    /// Round-off cycling near the optimum; `point` is the last iterate.
    IterationCap {
        residual: f64,
        point: Vec<f64>,
    },
}

/// The constraints `⟨normals[j], v⟩ ≤ offsets[j]` with their Gram matrix.
pub(crate) struct Polyhedron<'a> {
    normals: Vec<&'a [f64]>,
    offsets: Vec<f64>,
    gram: Vec<f64>,
}

impl<'a> Polyhedron<'a> {
    pub fn new(normals: Vec<&'a [f64]>, offsets: Vec<f64>) -> Self {
        let m = normals.len();
        let mut gram = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..=a {
                let v = dot(normals[a], normals[b]);
                gram[a * m + b] = v;
                gram[b * m + a] = v;
            }
        }
        Polyhedron {
            normals,
            offsets,
            gram,
        }
    }

    fn g(&self, a: usize, b: usize) -> f64 {
        self.gram[a * self.normals.len() + b]
    }
}

/// Solves `min ‖v − q‖²` over the polyhedron.
///
/// Every normal must have unit length. `tol` is the accepted violation.
pub(crate) fn project_polyhedron(
    poly: &Polyhedron,
    q: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<PolyProjection, PolyError> {
    let normals = &poly.normals[..];
    let offsets = &poly.offsets[..];
    let d = q.len();
    let mut x = q.to_vec();
    let mut active: Vec<usize> = Vec::with_capacity(d);
    let mut u: Vec<f64> = Vec::with_capacity(d);
    let mut z = vec![0.0; d];
    let mut factor = ActiveFactor::new(normals.len());
    let mut iterations = 0;
    loop {
        let Some(p) = most_violated(normals, offsets, &x, tol) else {
            return Ok(PolyProjection {
                point: x,
                active,
                iterations,
            });
        };
        // Add constraint p, dropping blocking constraints on the way.
        let mut up = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iters {
                return Err(PolyError::IterationCap {
                    residual: max_residual(normals, offsets, &x),
                    point: x,
                });
            }
            let np = normals[p];
            let rhs: Vec<f64> = active.iter().map(|&a| poly.g(a, p)).collect();
            let r = factor.solve(rhs);
            for k in 0..d {
                let mut s = np[k];
                for (j, &a) in active.iter().enumerate() {
                    s -= r[j] * normals[a][k];
                }
                z[k] = s;
            }
            let zz = dot(&z, &z);
            let slack = dot(np, &x) - offsets[p];
            let mut t2 = f64::INFINITY;
            let mut block = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let t = u[j] / rj;
                    if t < t2 {
                        t2 = t;
                        block = Some(j);
                    }
                }
            }
            let full = zz > 1e-20;
            let t1 = if full {
                slack.max(0.0) / zz
            } else {
                f64::INFINITY
            };
            if !full && block.is_none() {
                return Err(PolyError::Infeasible);
            }
            let t = t1.min(t2);
            if full {
                for k in 0..d {
                    x[k] -= t * z[k];
                }
            }
            for (j, rj) in r.iter().enumerate() {
                u[j] = (u[j] - t * rj).max(0.0);
            }
            up += t;
            if t1 <= t2 {
                factor.push(poly, &active, p);
                active.push(p);
                u.push(up);
                break;
            }
            let j = block.expect("partial step has a blocking constraint");
            active.remove(j);
            u.remove(j);
            factor.rebuild(poly, &active);
        }
    }
}

fn most_violated(normals: &[&[f64]], offsets: &[f64], x: &[f64], tol: f64) -> Option<usize> {
    let mut best = tol;
    let mut arg = None;
    for (j, (n, b)) in normals.iter().zip(offsets).enumerate() {
        let e = dot(n, x) - b;
        if e > best {
            best = e;
            arg = Some(j);
        }
    }
    arg
}

fn max_residual(normals: &[&[f64]], offsets: &[f64], x: &[f64]) -> f64 {
    normals
        .iter()
        .zip(offsets)
        .map(|(n, b)| dot(n, x) - b)
        .fold(0.0, f64::max)
}

/// Splits `c = w + Σ r_j n_j` with `w` orthogonal to every active normal;
/// returns `(w, r)`.
pub(crate) fn split_on_active(
    poly: &Polyhedron,
    active: &[usize],
    c: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let rhs: Vec<f64> = active.iter().map(|&a| dot(poly.normals[a], c)).collect();
    let r = solve_active(poly, active, rhs);
    let mut w = c.to_vec();
    for (j, &a) in active.iter().enumerate() {
        for (wk, nk) in w.iter_mut().zip(poly.normals[a]) {
            *wk -= r[j] * nk;
        }
    }
    (w, r)
}

/// `r = (NᵀN)⁻¹ rhs` for the active normals `N`.
fn solve_active(poly: &Polyhedron, active: &[usize], rhs: Vec<f64>) -> Vec<f64> {
    let mut f = ActiveFactor::new(poly.normals.len());
    f.rebuild(poly, active);
    f.solve(rhs)
}

/// Cholesky factor `L Lᵀ = NᵀN` of the active normals' Gram matrix, grown
/// one row per added constraint.
struct ActiveFactor {
    stride: usize,
    k: usize,
    l: Vec<f64>,
}

impl ActiveFactor {
    fn new(m: usize) -> Self {
        ActiveFactor {
            stride: m,
            k: 0,
            l: vec![0.0; m * m],
        }
    }

    /// Appends the row of constraint `a`; `active` is the set before it.
    fn push(&mut self, poly: &Polyhedron, active: &[usize], a: usize) {
        let (n, k) = (self.stride, self.k);
        let mut diag = poly.g(a, a);
        for j in 0..k {
            let mut s = poly.g(active[j], a);
            for m in 0..j {
                s -= self.l[j * n + m] * self.l[k * n + m];
            }
            let v = s / self.l[j * n + j];
            self.l[k * n + j] = v;
            diag -= v * v;
        }
        // The active normals stay linearly independent, so the Gram matrix
        // is positive definite up to round-off.
        self.l[k * n + k] = diag.max(1e-300).sqrt();
        self.k += 1;
    }

    fn rebuild(&mut self, poly: &Polyhedron, active: &[usize]) {
        self.k = 0;
        for (j, &a) in active.iter().enumerate() {
            self.push(poly, &active[..j], a);
        }
    }

    fn solve(&self, mut rhs: Vec<f64>) -> Vec<f64> {
        let (n, k) = (self.stride, self.k);
        debug_assert_eq!(rhs.len(), k);
        for a in 0..k {
            let mut s = rhs[a];
            for m in 0..a {
                s -= self.l[a * n + m] * rhs[m];
            }
            rhs[a] = s / self.l[a * n + a];
        }
        for a in (0..k).rev() {
            let mut s = rhs[a];
            for m in a + 1..k {
                s -= self.l[m * n + a] * rhs[m];
            }
            rhs[a] = s / self.l[a * n + a];
        }
        rhs
    }
}
