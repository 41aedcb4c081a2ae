//! Dense Hermitian kernels for the per-window normal equations.
//!
//! Matrices here are `m x m`, row-major `Vec<C64>`.

use faer::{c64, Mat, Side};

use crate::signal::C64;

use super::MAX_CONDITION;

/// Lower Cholesky factor of a Hermitian positive-definite matrix, or `None`
/// when a pivot is not positive.
pub(crate) fn cholesky(a: &[C64], m: usize) -> Option<Vec<C64>> {
    let mut l = vec![C64::new(0.0, 0.0); m * m];
    for j in 0..m {
        let (row_j, _) = l.split_at(j * m + j);
        let row_j = &row_j[j * m..];
        let mut d = a[j * m + j].re;
        for v in row_j {
            d -= v.norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let pivot = d.sqrt();
        l[j * m + j] = C64::new(pivot, 0.0);
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k].conj();
            }
            l[i * m + j] = s / pivot;
        }
    }
    Some(l)
}

/// Inverse of `L L^H` from its lower factor.
pub(crate) fn cholesky_inverse(l: &[C64], m: usize) -> Vec<C64> {
    // invert L in place of a fresh lower-triangular buffer
    let mut li = vec![C64::new(0.0, 0.0); m * m];
    for j in 0..m {
        li[j * m + j] = C64::new(1.0, 0.0) / l[j * m + j];
        for i in j + 1..m {
            let mut s = C64::new(0.0, 0.0);
            for k in j..i {
                s += l[i * m + k] * li[k * m + j];
            }
            li[i * m + j] = -s / l[i * m + i];
        }
    }
    // P = Li^H Li, P[i][j] = sum_{k >= max(i,j)} conj(Li[k][i]) Li[k][j]
    let mut p = vec![C64::new(0.0, 0.0); m * m];
    for k in 0..m {
        let row = &li[k * m..k * m + k + 1];
        for i in 0..=k {
            let a = row[i].conj();
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let out = &mut p[i * m..i * m + k + 1];
            for (o, b) in out[i..].iter_mut().zip(&row[i..]) {
                *o += a * b;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            p[i * m + j] = p[j * m + i].conj();
        }
    }
    p
}

/// Largest column sum of `|re| + |im|`; within a factor of sqrt(2) of the
/// complex 1-norm.
pub(crate) fn norm1(a: &[C64], m: usize) -> f64 {
    let mut sums = vec![0.0; m];
    for row in a.chunks_exact(m) {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v.re.abs() + v.im.abs();
        }
    }
    sums.into_iter().fold(0.0, f64::max)
}

pub(crate) fn trace(a: &[C64], m: usize) -> f64 {
    (0..m).map(|i| a[i * m + i].re).sum()
}

pub(crate) fn matvec(a: &[C64], x: &[C64], m: usize) -> Vec<C64> {
    a.chunks_exact(m)
        .map(|row| row.iter().zip(x).map(|(p, v)| p * v).sum())
        .collect()
}

/// Minimum-norm solution through the eigendecomposition of the Gram matrix,
/// discarding directions whose eigenvalue is below `lambda_max / MAX_CONDITION`.
pub(crate) fn eigen_pseudo_solve(gram: &[C64], b: &[C64], m: usize) -> Vec<C64> {
    let g = Mat::<c64>::from_fn(m, m, |i, j| {
        let v = gram[i * m + j];
        c64::new(v.re, v.im)
    });
    let mut h = vec![C64::new(0.0, 0.0); m];
    let Ok(eig) = g.self_adjoint_eigen(Side::Lower) else {
        return h;
    };
    let lambda = eig.S().column_vector();
    let u = eig.U();
    let lambda_max = (0..m).map(|i| lambda[i].re).fold(0.0, f64::max);
    let cutoff = lambda_max / MAX_CONDITION;
    for k in 0..m {
        let l = lambda[k].re;
        if !(l > cutoff && l > 0.0) {
            continue;
        }
        let v = u.col(k);
        let coeff: C64 = (0..m).map(|i| C64::new(v[i].re, -v[i].im) * b[i]).sum::<C64>() / l;
        for (i, hi) in h.iter_mut().enumerate() {
            *hi += C64::new(v[i].re, v[i].im) * coeff;
        }
    }
    h
}

/// Outcome of one dense solve.
pub(crate) struct DenseSolution {
    pub h: Vec<C64>,
    /// `G^{-1}` when the system was well conditioned and fully supported.
    pub inverse: Option<Vec<C64>>,
    pub condition: f64,
    pub singular: bool,
}

/// Solves `G h = b` for Hermitian `G`. Columns with an all-zero diagonal
/// carry no information and are pinned to zero; the rest go through
/// Cholesky, or the eigen pseudo-inverse when the condition estimate trips.
pub(crate) fn solve_gram(gram: &[C64], b: &[C64], m: usize) -> DenseSolution {
    let active: Vec<usize> = (0..m).filter(|&i| gram[i * m + i].re > 0.0).collect();
    let full = active.len() == m;
    let a = active.len();
    let mut h = vec![C64::new(0.0, 0.0); m];
    if a == 0 {
        return DenseSolution { h, inverse: None, condition: f64::INFINITY, singular: true };
    }
    let sub: Vec<C64> = if full {
        gram.to_vec()
    } else {
        active.iter().flat_map(|&i| active.iter().map(move |&j| gram[i * m + j])).collect()
    };
    let sub_b: Vec<C64> = active.iter().map(|&i| b[i]).collect();

    let factored = cholesky(&sub, a).map(|l| cholesky_inverse(&l, a));
    let condition = match &factored {
        Some(p) => trace(&sub, a) * norm1(p, a),
        None => f64::INFINITY,
    };
    let well_conditioned = condition.is_finite() && condition <= MAX_CONDITION;
    let solution = match (&factored, well_conditioned) {
        (Some(p), true) => matvec(p, &sub_b, a),
        _ => eigen_pseudo_solve(&sub, &sub_b, a),
    };
    for (&i, v) in active.iter().zip(solution) {
        h[i] = v;
    }
    let singular = !full || !well_conditioned;
    let inverse = if singular { None } else { factored };
    DenseSolution {
        h,
        inverse,
        condition: if full { condition } else { f64::INFINITY },
        singular,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hpd(m: usize, seed: u64) -> Vec<C64> {
        use rand::Rng;
        let mut rng = crate::seed::rng(seed);
        let x: Vec<C64> = (0..2 * m * m)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut g = vec![C64::new(0.0, 0.0); m * m];
        for r in 0..2 * m {
            for i in 0..m {
                for j in 0..m {
                    g[i * m + j] += x[r * m + i].conj() * x[r * m + j];
                }
            }
        }
        g
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = 12;
        let g = random_hpd(m, 3);
        let l = cholesky(&g, m).unwrap();
        let p = cholesky_inverse(&l, m);
        for i in 0..m {
            for j in 0..m {
                let v: C64 = (0..m).map(|k| p[i * m + k] * g[k * m + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - C64::new(expect, 0.0)).norm() < 1e-10, "{i},{j}: {v}");
            }
        }
    }

    #[test]
    fn not_positive_definite_detected() {
        let g = vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0), C64::new(1.0, 0.0)];
        assert!(cholesky(&g, 2).is_none());
    }

    #[test]
    fn rank_deficient_gram_falls_back() {
        // rank one: u u^H with u = [1, 1]
        let g = vec![C64::new(1.0, 0.0); 4];
        let b = vec![C64::new(2.0, 0.0); 2];
        let s = solve_gram(&g, &b, 2);
        assert!(s.singular);
        assert!((s.h[0] - C64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((s.h[1] - C64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_columns_pinned_to_zero() {
        let m = 3;
        let mut g = vec![C64::new(0.0, 0.0); 9];
        g[0] = C64::new(2.0, 0.0);
        g[4] = C64::new(4.0, 0.0);
        let b = vec![C64::new(2.0, 0.0), C64::new(4.0, 4.0), C64::new(0.0, 0.0)];
        let s = solve_gram(&g, &b, m);
        assert!(s.singular);
        assert_eq!(s.h[2], C64::new(0.0, 0.0));
        assert!((s.h[1] - C64::new(1.0, 1.0)).norm() < 1e-12);
    }
}
