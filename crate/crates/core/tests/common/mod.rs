//! Independent numerical oracles for the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;

/// Roots of the monic polynomial `z^n + c[0] z^{n-1} + ... + c[n-1]` by
/// Durand-Kerner iteration.
pub fn durand_kerner(c: &[f64]) -> Vec<Complex64> {
    let n = c.len();
    let eval = |z: Complex64| {
        let mut acc = Complex64::new(1.0, 0.0);
        for &ci in c {
            acc = acc * z + ci;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let bound = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32) * bound).collect();
    for _ in 0..5000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Multiply out `Π (z - r_i)` for real roots, returning monic coefficients
/// after the leading 1.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for r in roots {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs[1..].to_vec()
}

/// Greedy matching distance between two multisets of complex numbers.
pub fn max_match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Smallest singular value of the Rosenbrock matrix at `z`, relative to the
/// largest, computed on the real 2(n+1) x 2(n+1) embedding of the complex matrix.
pub fn rosenbrock_rank_gap(
    a: &nalgebra::DMatrix<f64>,
    b: &nalgebra::DVector<f64>,
    c: &nalgebra::RowDVector<f64>,
    z: Complex64,
) -> f64 {
    let n = a.nrows();
    let size = n + 1;
    let mut re = nalgebra::DMatrix::zeros(size, size);
    let mut im = nalgebra::DMatrix::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            re[(i, j)] = a[(i, j)];
        }
        re[(i, i)] -= z.re;
        im[(i, i)] -= z.im;
        re[(i, n)] = b[i];
        re[(n, i)] = c[i];
    }
    let mut real = nalgebra::DMatrix::zeros(2 * size, 2 * size);
    real.view_mut((0, 0), (size, size)).copy_from(&re);
    real.view_mut((size, size), (size, size)).copy_from(&re);
    real.view_mut((0, size), (size, size)).copy_from(&(-&im));
    real.view_mut((size, 0), (size, size)).copy_from(&im);
    let sv = real.singular_values();
    sv.min() / sv.max()
}
