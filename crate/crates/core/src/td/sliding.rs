//! Exact sliding-window update of the normal equations.
//!
//! Moving the window from `n - 1` to `n` adds the regressor of sample `n` and
//! drops the one of sample `n - L`, a rank-two change of the Gram matrix
//! `G`. The inverse `P = G^{-1}` and the solution `h = P b` follow through
//! the Woodbury identity in `O(M^2)`:
//!
//! ```text
//! V = [v_add, v_drop],  C = diag(1, -1),  U = P V
//! S = C + V^H U,  Z = U S^{-1}
//! P' = P - Z U^H
//! h' = h + Z[:,0] e_add + Z[:,1] e_drop,   e = y - v^H h
//! ```
//!
//! `P` is kept as split real/imaginary row-major planes so both passes
//! vectorize.

use crate::signal::C64;

use super::MAX_CONDITION;

pub(crate) struct SlidingState {
    m: usize,
    p_re: Vec<f64>,
    p_im: Vec<f64>,
    pub(crate) h: Vec<C64>,
    // scratch
    v: [Vec<C64>; 2],
    u_re: [Vec<f64>; 2],
    u_im: [Vec<f64>; 2],
    z: [Vec<C64>; 2],
    col_sum: Vec<f64>,
}

/// Why a step could not be taken; the caller re-solves the window directly.
#[derive(Debug)]
pub(crate) struct StepRejected;

impl SlidingState {
    pub(crate) fn new(m: usize, inverse: &[C64], h: Vec<C64>) -> Self {
        Self {
            m,
            p_re: inverse.iter().map(|v| v.re).collect(),
            p_im: inverse.iter().map(|v| v.im).collect(),
            h,
            v: [vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); m]],
            u_re: [vec![0.0; m], vec![0.0; m]],
            u_im: [vec![0.0; m], vec![0.0; m]],
            z: [vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); m]],
            col_sum: vec![0.0; m],
        }
    }

    /// Advances the window to end at `n`. `gram_trace` is the trace of the
    /// new Gram matrix (including any ridge), used for the condition check.
    pub(crate) fn step(
        &mut self,
        x: &[C64],
        y: &[C64],
        n: usize,
        window_len: usize,
        gram_trace: f64,
    ) -> Result<(), StepRejected> {
        let m = self.m;
        let regressor = |k: usize, out: &mut Vec<C64>| {
            for (c, o) in out.iter_mut().enumerate() {
                *o = if c <= k { x[k - c].conj() } else { C64::new(0.0, 0.0) };
            }
        };
        let predict = |k: usize, h: &[C64]| -> C64 {
            let span = (k + 1).min(m);
            (0..span).map(|c| x[k - c] * h[c]).sum()
        };

        let drop = n.checked_sub(window_len);
        let ranks = if drop.is_some() { 2 } else { 1 };
        regressor(n, &mut self.v[0]);
        let e_add = y[n] - predict(n, &self.h);
        let e_drop = match drop {
            Some(k) => {
                regressor(k, &mut self.v[1]);
                y[k] - predict(k, &self.h)
            }
            None => C64::new(0.0, 0.0),
        };

        // U = P V, accumulated as U += conj(P[j, :]) v[j] using P = P^H
        for s in 0..ranks {
            self.u_re[s].fill(0.0);
            self.u_im[s].fill(0.0);
        }
        for j in 0..m {
            let row_re = &self.p_re[j * m..(j + 1) * m];
            let row_im = &self.p_im[j * m..(j + 1) * m];
            for s in 0..ranks {
                let vj = self.v[s][j];
                if vj == C64::new(0.0, 0.0) {
                    continue;
                }
                let (ur, ui) = (&mut self.u_re[s], &mut self.u_im[s]);
                for i in 0..m {
                    let (pr, pi) = (row_re[i], -row_im[i]);
                    ur[i] += pr * vj.re - pi * vj.im;
                    ui[i] += pr * vj.im + pi * vj.re;
                }
            }
        }

        // W = V^H U and the small system S = C + W
        let mut w = [[C64::new(0.0, 0.0); 2]; 2];
        for (s, row) in w.iter_mut().enumerate().take(ranks) {
            for (t, cell) in row.iter_mut().enumerate().take(ranks) {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..m {
                    acc += self.v[s][i].conj() * C64::new(self.u_re[t][i], self.u_im[t][i]);
                }
                *cell = acc;
            }
        }
        let k = if ranks == 2 {
            let s00 = C64::new(1.0, 0.0) + w[0][0];
            let s11 = C64::new(-1.0, 0.0) + w[1][1];
            let (s01, s10) = (w[0][1], w[1][0]);
            let det = s00 * s11 - s01 * s10;
            // Positive definiteness of the new Gram matrix needs det(S) < 0.
            if !(det.re < -1e-12 * s00.norm()) {
                return Err(StepRejected);
            }
            [[s11 / det, -s01 / det], [-s10 / det, s00 / det]]
        } else {
            let s00 = C64::new(1.0, 0.0) + w[0][0];
            [[C64::new(1.0, 0.0) / s00, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0); 2]]
        };

        // Z = U K, h update, then P -= Z U^H with column sums of the result
        let z = &mut self.z;
        for i in 0..m {
            let u0 = C64::new(self.u_re[0][i], self.u_im[0][i]);
            let u1 = C64::new(self.u_re[1][i], self.u_im[1][i]);
            z[0][i] = u0 * k[0][0] + u1 * k[1][0];
            z[1][i] = u0 * k[0][1] + u1 * k[1][1];
            self.h[i] += z[0][i] * e_add + z[1][i] * e_drop;
        }
        self.col_sum.fill(0.0);
        for i in 0..m {
            let row_re = &mut self.p_re[i * m..(i + 1) * m];
            let row_im = &mut self.p_im[i * m..(i + 1) * m];
            let (z0, z1) = (z[0][i], z[1][i]);
            let (u0r, u0i) = (&self.u_re[0], &self.u_im[0]);
            if ranks == 2 {
                let (u1r, u1i) = (&self.u_re[1], &self.u_im[1]);
                for j in 0..m {
                    // z0 conj(u0[j]) + z1 conj(u1[j])
                    let re = z0.re * u0r[j] + z0.im * u0i[j] + z1.re * u1r[j] + z1.im * u1i[j];
                    let im = z0.im * u0r[j] - z0.re * u0i[j] + z1.im * u1r[j] - z1.re * u1i[j];
                    row_re[j] -= re;
                    row_im[j] -= im;
                    self.col_sum[j] += row_re[j].abs() + row_im[j].abs();
                }
            } else {
                for j in 0..m {
                    let re = z0.re * u0r[j] + z0.im * u0i[j];
                    let im = z0.im * u0r[j] - z0.re * u0i[j];
                    row_re[j] -= re;
                    row_im[j] -= im;
                    self.col_sum[j] += row_re[j].abs() + row_im[j].abs();
                }
            }
        }
        let condition = gram_trace * self.col_sum.iter().cloned().fold(0.0, f64::max);
        if !(condition.is_finite() && condition <= MAX_CONDITION) {
            return Err(StepRejected);
        }
        Ok(())
    }
}
