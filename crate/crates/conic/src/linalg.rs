use nalgebra::{DMatrix, SymmetricEigen};

/// Largest `a` with `x + a dx >= 0`, or infinity.
pub fn max_step_nonneg(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

/// Largest `a` with `L L' + a D` positive semidefinite, given the Cholesky factor `L`.
pub fn max_step_psd(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let k = l.nrows();
    if k == 0 {
        return f64::INFINITY;
    }
    // W = L^{-1} D L^{-T}
    let Some(left) = l.solve_lower_triangular(d) else { return 0.0 };
    let Some(w) = l.solve_lower_triangular(&left.transpose()) else { return 0.0 };
    let w = (&w + w.transpose()) * 0.5;
    let lam = SymmetricEigen::new(w).eigenvalues.min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

/// Solves the quasi-definite system `[[M + rI, B], [B', -rI]] u = b`, where the leading
/// `m` rows hold `M` and the trailing rows hold the free-variable border, with two steps
/// of iterative refinement against the unregularized matrix.
pub fn ldl_solve_quasidefinite(k: &DMatrix<f64>, m: usize, reg: f64, b: &[f64]) -> Vec<f64> {
    let n = k.nrows();
    let mut kr = k.clone();
    for i in 0..n {
        kr[(i, i)] += if i < m { reg } else { -reg };
    }
    let (l, d) = ldl(&kr);
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut u = rhs.to_vec();
        for i in 0..n {
            let mut s = u[i];
            for j in 0..i {
                s -= l[(i, j)] * u[j];
            }
            u[i] = s;
        }
        for i in 0..n {
            u[i] /= d[i];
        }
        for i in (0..n).rev() {
            let mut s = u[i];
            for j in i + 1..n {
                s -= l[(j, i)] * u[j];
            }
            u[i] = s;
        }
        u
    };
    let mut u = solve(b);
    for _ in 0..2 {
        let ku = k * nalgebra::DVector::from_column_slice(&u);
        let res: Vec<f64> = b.iter().zip(ku.iter()).map(|(a, c)| a - c).collect();
        let du = solve(&res);
        u.iter_mut().zip(du).for_each(|(a, c)| *a += c);
    }
    u
}

/// Unpivoted `L D L'` factorization.
fn ldl(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        d[j] = dj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = s / dj;
        }
    }
    (l, d)
}
