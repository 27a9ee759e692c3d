//! Action of the matrix exponential by restarted Krylov projection.
//!
//! The step-size controller follows the classic Arnoldi scheme with the
//! two-term local error estimate of Sidje's Expokit. The small projected
//! exponential uses Padé(13) with scaling and squaring.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, C64, ZERO};

const KRYLOV_DIM: usize = 30;
const MAX_REJECT: usize = 60;
const SAFETY: f64 = 0.9;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn round2(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return x;
    }
    let p = 10f64.powf(x.log10().floor() - 1.0);
    (x / p).ceil() * p
}

/// `e^{tA} v` with local error per step bounded by
/// `rtol·max(‖w‖, floor)`, where `floor = 1e-12·‖v‖`.
pub(crate) fn expv(a: &CsrMatrix, v: &[C64], t: f64, rtol: f64) -> Result<Vec<C64>> {
    let n = v.len();
    let mut w = v.to_vec();
    if t == 0.0 || n == 0 {
        return Ok(w);
    }
    let anorm = a.inf_norm();
    let beta0 = norm(v);
    if anorm == 0.0 || beta0 == 0.0 {
        return Ok(w);
    }
    let floor = 1e-12 * beta0;
    let m = KRYLOV_DIM.min(n);
    let btol = 1e-14 * anorm;

    let mut t_now = 0.0;
    let mut beta = beta0;
    let mut t_new = {
        let mp1 = (m + 1) as f64;
        let fact = (mp1 / std::f64::consts::E).powf(mp1) * (2.0 * std::f64::consts::PI * mp1).sqrt();
        round2((1.0 / anorm) * ((fact * rtol) / (4.0 * anorm)).powf(1.0 / m as f64))
    };
    let mut basis: Vec<Vec<C64>> = vec![vec![ZERO; n]; m + 1];
    let mut p = vec![ZERO; n];

    while t_now < t {
        let tol = rtol * beta.max(floor);
        let mut t_step = (t - t_now).min(t_new);
        for (bi, wi) in basis[0].iter_mut().zip(&w) {
            *bi = wi / beta;
        }
        let mut h = vec![vec![ZERO; m + 2]; m + 2];
        let mut mb = m;
        let mut k1 = 2;
        for j in 0..m {
            a.matvec(&basis[j], &mut p);
            for i in 0..=j {
                let hij = dot(&basis[i], &p);
                h[i][j] = hij;
                for (pk, bk) in p.iter_mut().zip(&basis[i]) {
                    *pk -= hij * bk;
                }
            }
            let s = norm(&p);
            if s < btol {
                k1 = 0;
                mb = j + 1;
                t_step = t - t_now;
                break;
            }
            h[j + 1][j] = C64::new(s, 0.0);
            let inv = 1.0 / s;
            for (bk, pk) in basis[j + 1].iter_mut().zip(&p) {
                *bk = pk * inv;
            }
        }
        let mut avnorm = 0.0;
        if k1 != 0 {
            h[m + 1][m] = C64::new(1.0, 0.0);
            a.matvec(&basis[m], &mut p);
            avnorm = norm(&p);
        }

        let mut rejects = 0;
        let (f, err_loc, xm) = loop {
            let mx = mb + k1;
            let hs = Mat::from_fn(mx, mx, |i, j| h[i][j] * t_step);
            let f = expm(&hs);
            if k1 == 0 {
                break (f, 0.0, 1.0 / m as f64);
            }
            let phi1 = (beta * f[(m, 0)]).norm();
            let phi2 = (beta * f[(m + 1, 0)] * avnorm).norm();
            let (err, xm) = if phi1 > 10.0 * phi2 {
                (phi2, 1.0 / m as f64)
            } else if phi1 > phi2 {
                (phi1 * phi2 / (phi1 - phi2), 1.0 / m as f64)
            } else {
                (phi1, 1.0 / (m as f64 - 1.0).max(1.0))
            };
            if err <= tol {
                break (f, err, xm);
            }
            rejects += 1;
            if rejects > MAX_REJECT {
                return Err(Error::PropagationFailed { t: t_now });
            }
            t_step = round2(SAFETY * t_step * (tol / err).powf(xm));
            if !(t_step > 1e-14 * t.max(1.0 / anorm)) {
                return Err(Error::PropagationFailed { t: t_now });
            }
        };

        let mx = mb + if k1 == 0 { 0 } else { k1 - 1 };
        let mut next = vec![ZERO; n];
        for (k, bk) in basis.iter().enumerate().take(mx) {
            let coef = beta * f[(k, 0)];
            for (x, b) in next.iter_mut().zip(bk) {
                *x += coef * b;
            }
        }
        if next.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::PropagationDiverged);
        }
        w = next;
        beta = norm(&w);
        t_now += t_step;
        if beta == 0.0 {
            break;
        }
        t_new = if err_loc > 0.0 {
            round2(SAFETY * t_step * (tol / err_loc).powf(xm))
        } else {
            t_step * 2.0
        };
        if !(t_new.is_finite() && t_new > 0.0) {
            t_new = t_step;
        }
    }
    Ok(w)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &Mat<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix exponential by Padé(13) scaling and squaring.
pub(crate) fn expm(a: &Mat<C64>) -> Mat<C64> {
    let n = a.nrows();
    let nrm = one_norm(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let id = Mat::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let lin = |c: [usize; 3]| Mat::from_fn(n, n, |i, j| b(c[0]) * a6[(i, j)] + b(c[1]) * a4[(i, j)] + b(c[2]) * a2[(i, j)]);
    let u_inner = &a6 * &lin([13, 11, 9]);
    let u_inner = Mat::from_fn(n, n, |i, j| u_inner[(i, j)] + lin([7, 5, 3])[(i, j)] + b(1) * id[(i, j)]);
    let u = &a * &u_inner;
    let v_hi = &a6 * &lin([12, 10, 8]);
    let v_lo = lin([6, 4, 2]);
    let v = Mat::from_fn(n, n, |i, j| v_hi[(i, j)] + v_lo[(i, j)] + b(0) * id[(i, j)]);
    let p = Mat::from_fn(n, n, |i, j| v[(i, j)] + u[(i, j)]);
    let q = Mat::from_fn(n, n, |i, j| v[(i, j)] - u[(i, j)]);
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_diagonal_and_nilpotent() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { C64::new(-(i as f64) * 30.0, 1.0) } else { ZERO });
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(0.0, 1.0).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::new(-30.0, 1.0).exp()).norm() < 1e-25);
        let nil = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { C64::new(5.0, 0.0) } else { ZERO });
        let e = expm(&nil);
        assert!((e[(0, 1)] - C64::new(5.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn expv_matches_scalar_decay() {
        let n = 50;
        let trip = (0..n).map(|i| (i, i, C64::new(-(i as f64) * 0.1, i as f64 * 0.3))).collect();
        let a = CsrMatrix::from_triplets(n, n, trip);
        let v: Vec<C64> = (0..n).map(|i| C64::new(1.0 / (1.0 + i as f64), 0.0)).collect();
        let t = 7.5;
        let w = expv(&a, &v, t, 1e-10).unwrap();
        for i in 0..n {
            let exact = v[i] * (a.get(i, i) * t).exp();
            assert!((w[i] - exact).norm() < 1e-9, "i={i}");
        }
    }
}
