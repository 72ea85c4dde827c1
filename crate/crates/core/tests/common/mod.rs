//! Independent oracles shared by the integration tests. None of these call
//! into the library's solvers; they only use plain dense linear algebra.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the Euclidean ball by rejection from the cube.
pub fn point_in_ball(rng: &mut ChaCha8Rng, center: &DVector<f64>, r: f64) -> DVector<f64> {
    let n = center.len();
    loop {
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if u.norm() <= 1.0 {
            return center + u * r;
        }
    }
}

// ---------------------------------------------------------------------------
// 2-D convex minimization by exact sections.
// ---------------------------------------------------------------------------

/// Feasible interval `{z2 : (z1, z2) ∈ K}` of a closed convex planar set,
/// found by a scan followed by bisection on membership.
pub fn section(member: &dyn Fn(f64, f64) -> bool, z1: f64, lo2: f64, hi2: f64) -> Option<(f64, f64)> {
    const SCAN: usize = 2001;
    let mut inside = None;
    for i in 0..SCAN {
        let z2 = lo2 + (hi2 - lo2) * i as f64 / (SCAN - 1) as f64;
        if member(z1, z2) {
            inside = Some(z2);
            break;
        }
    }
    let z_in = inside?;
    let edge = |mut a: f64, mut b: f64| {
        // a inside, b outside or bound
        if member(z1, b) {
            return b;
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if member(z1, m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    Some((edge(z_in, lo2), edge(z_in, hi2)))
}

/// Minimize a convex `obj` over a closed convex planar set `K` inside the
/// bounding box. `inner(z1, a, b)` returns the minimizing `z2 ∈ [a, b]` of
/// `obj(z1, ·)`. The outer variable is scanned on a grid of `grid` points,
/// then refined by golden-section search and a centered-difference sign
/// bisection.
pub fn convex_min_2d(
    member: &dyn Fn(f64, f64) -> bool,
    obj: &dyn Fn(f64, f64) -> f64,
    inner: &dyn Fn(f64, f64, f64) -> f64,
    bbox: ([f64; 2], [f64; 2]),
    grid: usize,
) -> (f64, f64, f64) {
    let ([lo1, lo2], [hi1, hi2]) = bbox;
    let h = |z1: f64| -> (f64, f64) {
        match section(member, z1, lo2, hi2) {
            Some((a, b)) => {
                let z2 = inner(z1, a, b);
                (obj(z1, z2), z2)
            }
            None => (f64::INFINITY, f64::NAN),
        }
    };
    let step = (hi1 - lo1) / (grid - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..grid {
        let v = h(lo1 + step * i as f64).0;
        if v < best.0 {
            best = (v, i);
        }
    }
    let i = best.1;
    let zi = lo1 + step * i as f64;
    // Clip the bracket to the feasible z1-interval so every probe is finite.
    let edge = |mut inside: f64, mut outside: f64| {
        if h(outside).0.is_finite() {
            return outside;
        }
        for _ in 0..100 {
            let m = 0.5 * (inside + outside);
            if h(m).0.is_finite() {
                inside = m;
            } else {
                outside = m;
            }
        }
        inside
    };
    let (a0, b0) = (edge(zi, (zi - step).max(lo1)), edge(zi, (zi + step).min(hi1)));
    let (mut a, mut b) = (a0, b0);
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - invphi * (b - a), a + invphi * (b - a));
    let (mut fc, mut fd) = (h(c).0, h(d).0);
    for _ in 0..120 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = h(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = h(d).0;
        }
    }
    // Golden section stalls near sqrt(eps); a sign bisection on centered
    // differences localizes smooth minima further.
    let mut z = 0.5 * (a + b);
    let (mut lo, mut hi) = (z - 1e-6, z + 1e-6);
    let eps = 1e-7;
    if h(lo).0.is_finite() && h(hi).0.is_finite() {
        for _ in 0..60 {
            z = 0.5 * (lo + hi);
            let (l, r) = (h(z - eps).0, h(z + eps).0);
            if !(l.is_finite() && r.is_finite()) || l == r {
                break;
            }
            if r > l {
                hi = z;
            } else {
                lo = z;
            }
        }
        z = 0.5 * (lo + hi);
    }
    let candidates = [z, 0.5 * (a + b), zi, a0, b0];
    let mut out = (f64::INFINITY, f64::NAN, f64::NAN);
    for z1 in candidates {
        let (v, z2) = h(z1);
        if v < out.0 {
            out = (v, z1, z2);
        }
    }
    (out.1, out.2, out.0)
}

/// Projection of `y` onto a planar convex set by exact sections.
pub fn project_2d(member: &dyn Fn(f64, f64) -> bool, y: [f64; 2], bbox: ([f64; 2], [f64; 2])) -> [f64; 2] {
    let obj = |a: f64, b: f64| (a - y[0]).powi(2) + (b - y[1]).powi(2);
    let inner = |_z1: f64, a: f64, b: f64| y[1].clamp(a, b);
    let (z1, z2, _) = convex_min_2d(&member, &obj, &inner, bbox, 4001);
    [z1, z2]
}

/// `min gᵀd` over a planar convex set by exact sections.
pub fn linear_min_2d(member: &dyn Fn(f64, f64) -> bool, g: [f64; 2], bbox: ([f64; 2], [f64; 2])) -> f64 {
    let obj = |a: f64, b: f64| g[0] * a + g[1] * b;
    let inner = |_z1: f64, a: f64, b: f64| if g[1] >= 0.0 { a } else { b };
    convex_min_2d(&member, &obj, &inner, bbox, 2001).2
}

// ---------------------------------------------------------------------------
// Dense grid maximization over a planar feasible set.
// ---------------------------------------------------------------------------

/// Boundary pieces of the feasible set, each a parametrized curve on
/// `[0, 1]`.
pub type Curve = Box<dyn Fn(f64) -> [f64; 2]>;

pub fn circle(c: [f64; 2], r: f64) -> Curve {
    Box::new(move |s| {
        let th = 2.0 * std::f64::consts::PI * s;
        [c[0] + r * th.cos(), c[1] + r * th.sin()]
    })
}

pub fn segment(a: [f64; 2], b: [f64; 2]) -> Curve {
    Box::new(move |s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
}

pub fn box_edges(lo: [f64; 2], hi: [f64; 2]) -> Vec<Curve> {
    let c = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    (0..4).map(|i| segment(c[i], c[(i + 1) % 4])).collect()
}

/// Max of `f` over the feasible set, from an interior grid of spacing `h`,
/// dense samples on every boundary curve (with crossings located by
/// bisection so corners are included exactly), and a local refinement
/// around the best sample.
pub fn grid_max_2d(
    member: &dyn Fn(f64, f64) -> bool,
    f: &dyn Fn(f64, f64) -> f64,
    bbox: ([f64; 2], [f64; 2]),
    h: f64,
    boundary: &[Curve],
) -> (f64, [f64; 2]) {
    let ([lo1, lo2], [hi1, hi2]) = bbox;
    let mut best = (f64::NEG_INFINITY, [f64::NAN; 2]);
    let consider = |a: f64, b: f64, best: &mut (f64, [f64; 2])| {
        if member(a, b) {
            let v = f(a, b);
            if v > best.0 {
                *best = (v, [a, b]);
            }
        }
    };
    let n1 = ((hi1 - lo1) / h).ceil() as usize;
    let n2 = ((hi2 - lo2) / h).ceil() as usize;
    for i in 0..=n1 {
        let a = (lo1 + h * i as f64).min(hi1);
        for j in 0..=n2 {
            let b = (lo2 + h * j as f64).min(hi2);
            consider(a, b, &mut best);
        }
    }
    let loosen = |a: f64, b: f64| member(a, b);
    for curve in boundary {
        let samples = 20_000;
        let mut prev: Option<(f64, bool)> = None;
        for k in 0..=samples {
            let s = k as f64 / samples as f64;
            let p = curve(s);
            let inside = loosen(p[0], p[1]);
            if inside {
                consider(p[0], p[1], &mut best);
            }
            if let Some((s0, in0)) = prev {
                if in0 != inside {
                    let (mut a, mut b) = if in0 { (s0, s) } else { (s, s0) };
                    for _ in 0..100 {
                        let m = 0.5 * (a + b);
                        let q = curve(m);
                        if loosen(q[0], q[1]) {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    let q = curve(a);
                    consider(q[0], q[1], &mut best);
                }
            }
            prev = Some((s, inside));
        }
    }
    // Local refinement around the best sample.
    let mut hh = h;
    for _ in 0..4 {
        let c = best.1;
        hh /= 20.0;
        for i in -40..=40 {
            for j in -40..=40 {
                consider(c[0] + hh * i as f64, c[1] + hh * j as f64, &mut best);
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Dense algebra oracles.
// ---------------------------------------------------------------------------

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    match n {
        0 => 1.0,
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        _ => {
            let mut total = 0.0;
            for j in 0..n {
                if a[(0, j)] == 0.0 {
                    continue;
                }
                let minor = a.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * a[(0, j)] * cofactor_det(&minor);
            }
            total
        }
    }
}

/// The bordered matrix `[[Q, M], [Mᵀ, 0]]` built from unscaled
/// displacements `y_t − x`.
pub fn kkt_matrix(x: &DVector<f64>, points: &[DVector<f64>]) -> DMatrix<f64> {
    let p = points.len();
    let n = x.len();
    let d: Vec<DVector<f64>> = points.iter().map(|y| y - x).collect();
    let mut f = DMatrix::zeros(p + n + 1, p + n + 1);
    for i in 0..p {
        for j in 0..p {
            f[(i, j)] = 0.5 * d[i].dot(&d[j]).powi(2);
        }
        f[(i, p)] = 1.0;
        f[(p, i)] = 1.0;
        for k in 0..n {
            f[(i, p + 1 + k)] = d[i][k];
            f[(p + 1 + k, i)] = d[i][k];
        }
    }
    f
}

/// Lagrange polynomials of the MFN system as `(c, g, H)` about `x`, from a
/// dense solve of the unscaled system.
pub fn mfn_lagrange_oracle(x: &DVector<f64>, points: &[DVector<f64>]) -> Vec<(f64, DVector<f64>, DMatrix<f64>)> {
    let p = points.len();
    let n = x.len();
    let f = kkt_matrix(x, points);
    let lu = f.lu();
    (0..p)
        .map(|t| {
            let mut e = DVector::zeros(p + n + 1);
            e[t] = 1.0;
            let sol = lu.solve(&e).expect("oracle system singular");
            let mut h = DMatrix::zeros(n, n);
            for s in 0..p {
                let ds = &points[s] - x;
                h += &ds * ds.transpose() * sol[s];
            }
            (sol[p], sol.rows(p + 1, n).into_owned(), h)
        })
        .collect()
}

pub fn eval_quadratic(c: f64, g: &DVector<f64>, h: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let d = y - x;
    c + g.dot(&d) + 0.5 * d.dot(&(h * &d))
}

/// Full quadratic interpolation in the monomial basis
/// `1, d_i, d_i d_j (i ≤ j)`; returns `(c, g, H)` about `x`.
pub fn full_quadratic_interpolation(
    x: &DVector<f64>,
    points: &[DVector<f64>],
    values: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let q = (n + 1) * (n + 2) / 2;
    assert_eq!(points.len(), q);
    let mut a = DMatrix::zeros(q, q);
    for (row, y) in points.iter().enumerate() {
        let d = y - x;
        a[(row, 0)] = 1.0;
        for i in 0..n {
            a[(row, 1 + i)] = d[i];
        }
        let mut col = n + 1;
        for i in 0..n {
            for j in i..n {
                a[(row, col)] = if i == j { 0.5 * d[i] * d[i] } else { d[i] * d[j] };
                col += 1;
            }
        }
    }
    let sol = a.lu().solve(&DVector::from_column_slice(values)).expect("oracle interpolation singular");
    let g = sol.rows(1, n).into_owned();
    let mut h = DMatrix::zeros(n, n);
    let mut col = n + 1;
    for i in 0..n {
        for j in i..n {
            h[(i, j)] = sol[col];
            h[(j, i)] = sol[col];
            col += 1;
        }
    }
    (sol[0], g, h)
}

/// Minimum-Frobenius-norm quadratic interpolation solved directly as an
/// equality-constrained quadratic program in `(H_ij (i ≤ j), c, g)`.
pub fn mfn_qp_oracle(x: &DVector<f64>, points: &[DVector<f64>], values: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let p = points.len();
    let nh = n * (n + 1) / 2;
    let nv = nh + 1 + n;
    // Objective ‖H‖_F² = Σ H_ii² + 2 Σ_{i<j} H_ij².
    let mut w = DMatrix::zeros(nv, nv);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            w[(k, k)] = if i == j { 2.0 } else { 4.0 };
            k += 1;
        }
    }
    let mut a = DMatrix::zeros(p, nv);
    for (row, y) in points.iter().enumerate() {
        let d = y - x;
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                a[(row, k)] = if i == j { 0.5 * d[i] * d[i] } else { d[i] * d[j] };
                k += 1;
            }
        }
        a[(row, nh)] = 1.0;
        for i in 0..n {
            a[(row, nh + 1 + i)] = d[i];
        }
    }
    let mut kkt = DMatrix::zeros(nv + p, nv + p);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&w);
    kkt.view_mut((0, nv), (nv, p)).copy_from(&a.transpose());
    kkt.view_mut((nv, 0), (p, nv)).copy_from(&a);
    let mut rhs = DVector::zeros(nv + p);
    for t in 0..p {
        rhs[nv + t] = values[t];
    }
    let sol = kkt.lu().solve(&rhs).expect("QP oracle singular");
    let mut h = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            h[(i, j)] = sol[k];
            h[(j, i)] = sol[k];
            k += 1;
        }
    }
    (sol[nh], sol.rows(nh + 1, n).into_owned(), h)
}

/// Minimal-norm solution of `Mᵀα = [1; y − x]` for full-column-rank `M`:
/// with `M = QR`, `α = Q R⁻ᵀ [1; y − x]`.
pub fn regression_lagrange_oracle(x: &DVector<f64>, points: &[DVector<f64>], y: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let p = points.len();
    let m = DMatrix::from_fn(p, n + 1, |i, j| if j == 0 { 1.0 } else { points[i][j - 1] - x[j - 1] });
    let mut rhs = DVector::zeros(n + 1);
    rhs[0] = 1.0;
    for i in 0..n {
        rhs[i + 1] = y[i] - x[i];
    }
    let qr = m.qr();
    let w = qr.r().transpose().solve_lower_triangular(&rhs).expect("full column rank");
    qr.q() * w
}
