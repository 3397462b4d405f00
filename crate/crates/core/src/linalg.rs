//! Small dense symmetric solvers for polynomial projections.
//!
//! Matrices are row-major `m x m` slices.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

/// Cholesky factor `L` (lower, row-major) of a symmetric positive definite
/// matrix, or `None` if a pivot is not positive.
pub fn cholesky(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}

pub fn cholesky_solve(l: &[f64], m: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * m + k] * y[k];
        }
        y[i] = s / l[i * m + i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = y[i];
        for k in i + 1..m {
            s -= l[k * m + i] * x[k];
        }
        x[i] = s / l[i * m + i];
    }
    x
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and the eigenvectors as columns of a row-major matrix.
pub fn symmetric_eigen(a: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..m {
            diag += a[i * m + i] * a[i * m + i];
            for j in 0..m {
                if i != j {
                    off += a[i * m + j] * a[i * m + j];
                }
            }
        }
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..m).map(|i| a[i * m + i]).collect(), v)
}

/// Spectral condition number of a symmetric positive semi-definite matrix.
pub fn condition_number(a: &[f64], m: usize) -> f64 {
    let (ev, _) = symmetric_eigen(a, m);
    let max = ev.iter().fold(0.0f64, |x, v| x.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |x, v| x.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Minimum-norm least-squares solution of `a x = b` for symmetric `a`,
/// discarding eigenvalues below `rel_cut` times the largest.
pub fn pseudo_solve(a: &[f64], m: usize, b: &[f64], rel_cut: f64) -> Vec<f64> {
    let (ev, v) = symmetric_eigen(a, m);
    let max = ev.iter().fold(0.0f64, |x, e| x.max(e.abs()));
    let mut x = vec![0.0; m];
    for k in 0..m {
        if ev[k].abs() <= rel_cut * max || ev[k] == 0.0 {
            continue;
        }
        let proj: f64 = (0..m).map(|i| v[i * m + k] * b[i]).sum::<f64>() / ev[k];
        for i in 0..m {
            x[i] += proj * v[i * m + k];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let b = [1.0, 2.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        let x = cholesky_solve(&l, 3, &b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = [2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let (ev, v) = symmetric_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| v[i * 3 + k] * ev[k] * v[j * 3 + k]).sum();
                assert!((r - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        let cond = condition_number(&a, 3);
        let expect = (2.0 + 2f64.sqrt()) / (2.0 - 2f64.sqrt());
        assert!((cond - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn pseudo_solve_handles_rank_deficiency() {
        let a = [1.0, 1.0, 1.0, 1.0];
        let x = pseudo_solve(&a, 2, &[2.0, 2.0], 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
