//! Integral-method oracle for filtered one- and two-photon spectra.
//!
//! Everything is written in Liouville space: the regression matrix is the
//! Liouvillian, the lowering "T₋" step is left multiplication by `a`, the
//! raising "T₊" step is right multiplication by `a†`, the steady-state
//! vector is `ρ_ss` and the first-component projection is the trace. This
//! is exact because `⟨X O Y⟩ = Tr[O·(YρX)]`.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::liouville::{DensityMatrix, Liouvillian};
use crate::regression::LiouvilleVector;
use crate::sparse::{C64, ZERO};

/// Liouville dimension above which the dense oracle refuses to run.
pub const ORACLE_MAX_DIM: usize = 4096;

/// Number of independent resolvent chains in the two-photon oracle.
pub const N2_CHAINS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub omega: f64,
    pub gamma: f64,
}

impl FilterSpec {
    pub fn new(omega: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite() && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("filter needs finite omega and gamma > 0, got ({omega}, {gamma})")));
        }
        Ok(Self { omega, gamma })
    }
}

fn i(x: f64) -> C64 {
    C64::new(0.0, x)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `−(L + shift)⁻¹ σ`.
pub fn resolvent_apply(l: &Liouvillian, shift: C64, sigma: &LiouvilleVector) -> Result<LiouvilleVector> {
    if !(shift.re < 0.0) {
        return Err(Error::InvalidParameter(format!("resolvent shift must have negative real part, got {shift}")));
    }
    resolvent_unchecked(l, shift, sigma)
}

pub(crate) fn resolvent_unchecked(l: &Liouvillian, shift: C64, sigma: &LiouvilleVector) -> Result<LiouvilleVector> {
    let rhs: Vec<C64> = l.to_graded(sigma.data()).into_iter().map(|x| -x).collect();
    let x = l.solve_shifted_graded(shift, &rhs)?;
    Ok(LiouvilleVector::from_data(sigma.space().clone(), l.from_graded(&x)))
}

/// The physical spectrum `S_Γ(ω)`, clamped at zero.
pub fn filtered_spectrum(l: &Liouvillian, rho: &DensityMatrix, a: &Operator, f: FilterSpec) -> Result<f64> {
    Ok(filtered_spectrum_flagged(l, rho, a, f)?.0)
}

/// As [`filtered_spectrum`], also reporting whether a negative value was
/// clamped to zero.
pub fn filtered_spectrum_flagged(l: &Liouvillian, rho: &DensityMatrix, a: &Operator, f: FilterSpec) -> Result<(f64, bool)> {
    let shift = C64::new(-f.gamma / 2.0, -f.omega);
    let s = spectrum_at_shift(l, rho, a, shift)?;
    Ok(if s < 0.0 { (0.0, true) } else { (s, false) })
}

/// `(1/π) Re Tr[R(shift)(aρ)·a†]` without validating the shift.
pub(crate) fn spectrum_at_shift(l: &Liouvillian, rho: &DensityMatrix, a: &Operator, shift: C64) -> Result<f64> {
    let seed = rho.as_vector().left_mul(a)?;
    let r = resolvent_unchecked(l, shift, &seed)?;
    Ok(r.right_mul(&a.adjoint())?.trace().re / PI)
}

#[derive(Clone, Copy)]
enum Step {
    Lower,
    Raise,
    Resolve(C64),
}

/// The six resolvent chains for detection order (1, 2), written in the
/// order they act on `ρ_ss`. Each is closed by a final raise and trace.
fn chains(f1: FilterSpec, f2: FilterSpec) -> [[Step; 6]; N2_CHAINS] {
    use Step::*;
    let (w1, g1, w2, g2) = (f1.omega, f1.gamma, f2.omega, f2.gamma);
    let g12 = g1 + g2;
    let s3 = C64::new(-g1 - g2 / 2.0, -w2);
    let cross_minus = i(w1 - w2) - re(g12 / 2.0);
    let cross_plus = i(-w1 - w2) - re(g12 / 2.0);
    let two_minus = C64::new(-g2 / 2.0, -w2);
    let one_plus = C64::new(-g1 / 2.0, w1);
    let one_minus = C64::new(-g1 / 2.0, -w1);
    [
        [Lower, Resolve(two_minus), Raise, Resolve(cross_minus), Lower, Resolve(s3)],
        [Lower, Resolve(two_minus), Lower, Resolve(cross_plus), Raise, Resolve(s3)],
        [Raise, Resolve(one_plus), Lower, Resolve(cross_minus), Lower, Resolve(s3)],
        [Lower, Resolve(one_minus), Lower, Resolve(cross_plus), Raise, Resolve(s3)],
        [Raise, Resolve(one_plus), Lower, Resolve(re(-g1)), Lower, Resolve(s3)],
        [Lower, Resolve(one_minus), Raise, Resolve(re(-g1)), Lower, Resolve(s3)],
    ]
}

struct Chain<'a> {
    l: &'a Liouvillian,
    a: &'a Operator,
    ad: Operator,
}

impl<'a> Chain<'a> {
    fn new(l: &'a Liouvillian, a: &'a Operator) -> Self {
        Self { l, a, ad: a.adjoint() }
    }

    fn run(&self, start: &LiouvilleVector, steps: &[Step]) -> Result<LiouvilleVector> {
        let mut v = start.clone();
        for step in steps {
            v = match *step {
                Step::Lower => v.left_mul(self.a)?,
                Step::Raise => v.right_mul(&self.ad)?,
                Step::Resolve(s) => resolvent_unchecked(self.l, s, &v)?,
            };
        }
        Ok(v)
    }

    fn close(&self, v: &LiouvilleVector) -> Result<C64> {
        Ok(v.right_mul(&self.ad)?.trace())
    }
}

/// Unsymmetrized chain values for detection order (1, 2), each including
/// the `Γ₁Γ₂/((Γ₁+Γ₂)(2π)²)` prefactor.
pub fn s2_chain_values(l: &Liouvillian, rho: &DensityMatrix, a: &Operator, f1: FilterSpec, f2: FilterSpec) -> Result<[C64; N2_CHAINS]> {
    let chain = Chain::new(l, a);
    let pref = f1.gamma * f2.gamma / ((f1.gamma + f2.gamma) * (2.0 * PI).powi(2));
    let mut out = [ZERO; N2_CHAINS];
    for (k, steps) in chains(f1, f2).iter().enumerate() {
        let v = chain.run(rho.as_vector(), steps)?;
        out[k] = chain.close(&v)? * pref;
    }
    Ok(out)
}

/// Two-photon physical spectrum at zero delay.
pub fn s2_zero_delay(l: &Liouvillian, rho: &DensityMatrix, a: &Operator, f1: FilterSpec, f2: FilterSpec) -> Result<f64> {
    let forward: C64 = s2_chain_values(l, rho, a, f1, f2)?.iter().sum();
    let backward: C64 = s2_chain_values(l, rho, a, f2, f1)?.iter().sum();
    Ok(2.0 * (forward + backward).re)
}

fn normalize(s2: f64, s1a: f64, s1b: f64) -> Result<f64> {
    if !(s1a > 0.0 && s1b > 0.0) {
        return Err(Error::NormalizationUndefined);
    }
    Ok(s2 / (s1a * s1b))
}

/// `g⁽²⁾_{Γ₁Γ₂}(ω₁; ω₂)` from the oracle.
pub fn g2_zero_delay(l: &Liouvillian, rho: &DensityMatrix, a: &Operator, f1: FilterSpec, f2: FilterSpec) -> Result<f64> {
    normalize(
        s2_zero_delay(l, rho, a, f1, f2)?,
        filtered_spectrum(l, rho, a, f1)?,
        filtered_spectrum(l, rho, a, f2)?,
    )
}

/// Dense eigendecomposition `L = E diag(m) E⁻¹`.
#[derive(Debug, Clone)]
pub struct EigenLiouvillian {
    e: Mat<C64>,
    e_inv: Mat<C64>,
    m: Vec<C64>,
    residual: f64,
    norm: f64,
}

pub fn eigendecompose(l: &Liouvillian) -> Result<EigenLiouvillian> {
    let n = l.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge { dim: n });
    }
    let mut dense = Mat::<C64>::zeros(n, n);
    for (r, c, v) in l.superop().iter() {
        dense[(r, c)] = v;
    }
    let eig = dense.eigen().map_err(|_| Error::EigenFailed)?;
    let e = eig.U().to_owned();
    let s = eig.S().column_vector().to_owned();
    let m: Vec<C64> = (0..n).map(|k| s[k]).collect();
    let e_inv = e.partial_piv_lu().inverse();
    let norm = l.norm().max(f64::MIN_POSITIVE);

    let le = &dense * &e;
    let residual = (0..n)
        .flat_map(|j| (0..n).map(move |r| (r, j)))
        .map(|(r, j)| (le[(r, j)] - e[(r, j)] * m[j]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let recon = &e * &e_inv;
    let recon_err = (0..n)
        .flat_map(|j| (0..n).map(move |r| (r, j)))
        .map(|(r, j)| {
            let target = if r == j { C64::new(1.0, 0.0) } else { ZERO };
            (recon[(r, j)] - target).norm()
        })
        .fold(0.0, f64::max);
    if !(recon_err < 1e-6) || !(residual < 1e-8 * norm) {
        return Err(Error::DefectiveLiouvillian {
            error: recon_err.max(residual / norm),
        });
    }
    Ok(EigenLiouvillian {
        e,
        e_inv,
        m,
        residual,
        norm,
    })
}

impl EigenLiouvillian {
    pub fn eigenvalues(&self) -> &[C64] {
        &self.m
    }

    /// `‖LE − E diag(m)‖_F`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Number of eigenvalues with `|Re m| < tol`.
    pub fn near_zero_count(&self, tol: f64) -> usize {
        self.m.iter().filter(|m| m.re.abs() < tol).count()
    }

    /// `‖E diag(m) E⁻¹ − L‖_F / ‖L‖_F`.
    pub fn reconstruction_error(&self, l: &Liouvillian) -> f64 {
        let n = self.m.len();
        let ed = Mat::from_fn(n, n, |r, c| self.e[(r, c)] * self.m[c]);
        let mut rec = &ed * &self.e_inv;
        for (r, c, v) in l.superop().iter() {
            rec[(r, c)] -= v;
        }
        let err: f64 = (0..n)
            .flat_map(|c| (0..n).map(move |r| (r, c)))
            .map(|(r, c)| rec[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        err / self.norm
    }

    fn to_eigen(&self, v: &[C64]) -> Vec<C64> {
        let n = v.len();
        (0..n).map(|p| (0..n).map(|q| self.e_inv[(p, q)] * v[q]).sum()).collect()
    }

    fn from_eigen(&self, c: &[C64]) -> Vec<C64> {
        let n = c.len();
        (0..n).map(|p| (0..n).map(|q| self.e[(p, q)] * c[q]).sum()).collect()
    }
}

fn expm1(z: C64) -> C64 {
    // e^{x+iy} − 1 = (e^x − 1)cos y + (cos y − 1) + i e^x sin y
    let (s, c) = z.im.sin_cos();
    let half = (z.im / 2.0).sin();
    C64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// `e^{−Γτ}∫₀^τ e^{xu} du`.
fn kernel(x: C64, gamma: f64, tau: f64) -> C64 {
    let z = x * tau;
    let damp = (-gamma * tau).exp();
    if z.norm() < 1e-3 {
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..12 {
            term *= z / k as f64;
            sum += term;
        }
        damp * tau * sum
    } else if z.re < 0.0 {
        ((x - gamma) * tau).exp() / x - damp / x
    } else {
        damp * expm1(z) / x
    }
}

/// Derivative of [`kernel`] with respect to `x`.
fn kernel_derivative(x: C64, gamma: f64, tau: f64) -> C64 {
    let z = x * tau;
    let damp = (-gamma * tau).exp();
    if z.norm() < 0.1 {
        // Σ z^k / (k!(k+2))
        let mut fact = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.5, 0.0);
        for k in 1..25 {
            fact *= z / k as f64;
            sum += fact / (k + 2) as f64;
        }
        damp * tau * tau * sum
    } else {
        (((x - gamma) * tau).exp() * (z - 1.0) + damp) / (x * x)
    }
}

/// Two-photon physical spectrum at delay `τ > 0` between the detection at
/// filter 1 and the later detection at filter 2.
pub fn s2_tau(
    l: &Liouvillian,
    rho: &DensityMatrix,
    a: &Operator,
    f1: FilterSpec,
    f2: FilterSpec,
    tau: f64,
    eig: &EigenLiouvillian,
) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidDelays(format!("oracle delay must be positive, got {tau}")));
    }
    if l.dim() > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge { dim: l.dim() });
    }
    let zero = s2_zero_delay(l, rho, a, f1, f2)?;
    let (w1, g1, w2, g2) = (f1.omega, f1.gamma, f2.omega, f2.gamma);
    let chain = Chain::new(l, a);
    let pref = g1 * g2 / (2.0 * PI).powi(2);
    let shift2 = C64::new(g2 / 2.0, -w2);
    let tol = 1e-8 * eig.norm;
    let m = &eig.m;

    // F(τ) acts diagonally in the eigenbasis.
    let f_diag: Vec<C64> = m.iter().map(|&mp| kernel(mp + shift2, g2, tau)).collect();
    let apply_f = |v: &LiouvilleVector| -> LiouvilleVector {
        let mut c = eig.to_eigen(v.data());
        for (ck, fk) in c.iter_mut().zip(&f_diag) {
            *ck *= fk;
        }
        LiouvilleVector::from_data(v.space().clone(), eig.from_eigen(&c))
    };

    let mut delta = ZERO;
    for steps in chains(f1, f2).iter() {
        let v = chain.run(rho.as_vector(), steps)?;
        delta += chain.close(&apply_f(&v))?;
    }

    // Z(τ) = E[(E⁻¹ T₋ E) ∘ K] E⁻¹ with the double-pole kernel K.
    let n = m.len();
    let lower_e = {
        let space = rho.space().clone();
        let mut cols = Mat::<C64>::zeros(n, n);
        for q in 0..n {
            let col: Vec<C64> = (0..n).map(|r| eig.e[(r, q)]).collect();
            let lowered = LiouvilleVector::from_data(space.clone(), col).left_mul(a)?;
            for (r, x) in lowered.data().iter().enumerate() {
                cols[(r, q)] = *x;
            }
        }
        &eig.e_inv * &cols
    };
    let z_kernel = |p: usize, q: usize| -> C64 {
        let alpha = m[p] + shift2;
        let beta = m[q] + g2;
        if (alpha - beta).norm() < tol {
            kernel_derivative((alpha + beta) / 2.0, g2, tau)
        } else {
            (kernel(alpha, g2, tau) - kernel(beta, g2, tau)) / (alpha - beta)
        }
    };
    let z_mat = Mat::from_fn(n, n, |p, q| lower_e[(p, q)] * z_kernel(p, q));
    let apply_z = |v: &LiouvilleVector| -> LiouvilleVector {
        let c = eig.to_eigen(v.data());
        let zc: Vec<C64> = (0..n).map(|p| (0..n).map(|q| z_mat[(p, q)] * c[q]).sum()).collect();
        LiouvilleVector::from_data(v.space().clone(), eig.from_eigen(&zc))
    };
    use Step::*;
    let alpha_steps = [Raise, Resolve(C64::new(-g1 / 2.0, w1)), Lower, Resolve(re(-g1))];
    let beta_steps = [Lower, Resolve(C64::new(-g1 / 2.0, -w1)), Raise, Resolve(re(-g1))];
    for steps in [alpha_steps, beta_steps] {
        let v = chain.run(rho.as_vector(), &steps)?;
        delta += chain.close(&apply_z(&v))?;
    }
    Ok((-g2 * tau).exp() * zero + 2.0 * (pref * delta).re)
}

/// `g⁽²⁾_{Γ₁Γ₂}(ω₁; ω₂, τ)` from the oracle.
pub fn g2_tau(
    l: &Liouvillian,
    rho: &DensityMatrix,
    a: &Operator,
    f1: FilterSpec,
    f2: FilterSpec,
    tau: f64,
    eig: &EigenLiouvillian,
) -> Result<f64> {
    normalize(
        s2_tau(l, rho, a, f1, f2, tau, eig)?,
        filtered_spectrum(l, rho, a, f1)?,
        filtered_spectrum(l, rho, a, f2)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilator, make_space, FactorSpec};
    use crate::liouville::{build_liouvillian, Dissipator, MasterEquation};

    fn decaying_qubit(gamma: f64) -> Liouvillian {
        let s = make_space(vec![FactorSpec::qubit("q")]).unwrap();
        let sm = annihilator(&s, "q").unwrap();
        let me = MasterEquation::new(Operator::zero(&s), vec![Dissipator { rate: gamma, collapse: sm }]).unwrap();
        build_liouvillian(&me).unwrap()
    }

    #[test]
    fn qubit_decay_spectrum() {
        let gamma = 0.4;
        let eig = eigendecompose(&decaying_qubit(gamma)).unwrap();
        let mut m: Vec<f64> = eig.eigenvalues().iter().map(|z| z.re).collect();
        m.sort_by(f64::total_cmp);
        let expect = [-gamma, -gamma / 2.0, -gamma / 2.0, 0.0];
        for (a, b) in m.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(eig.eigenvalues().iter().all(|z| z.im.abs() < 1e-12));
        assert_eq!(eig.near_zero_count(1e-9), 1);
    }

    #[test]
    fn zero_generator_resolvent() {
        let s = make_space(vec![FactorSpec::boson("a", 2)]).unwrap();
        let me = MasterEquation::new(Operator::zero(&s), vec![]).unwrap();
        let l = build_liouvillian(&me).unwrap();
        let m: Vec<C64> = (0..9).map(|k| C64::new(k as f64, -1.0)).collect();
        let v = LiouvilleVector::from_row_major(&s, &m).unwrap();
        let shift = C64::new(-0.5, 2.0);
        let r = resolvent_apply(&l, shift, &v).unwrap();
        for (x, y) in r.data().iter().zip(v.data()) {
            assert!((x - y * (-1.0 / shift)).norm() < 1e-14);
        }
    }

    #[test]
    fn kernel_branches_agree() {
        let (g, tau) = (0.3, 2.0);
        for x in [C64::new(-4.0e-4, 1e-4), C64::new(-0.3, 0.7), C64::new(0.2, -1.0)] {
            let h = 1e-6;
            let numeric = (kernel(x + h, g, tau) - kernel(x - h, g, tau)) / (2.0 * h);
            assert!((numeric - kernel_derivative(x, g, tau)).norm() < 1e-7, "x = {x}");
            let quad: C64 = (0..20000)
                .map(|k| {
                    let u = (k as f64 + 0.5) * tau / 20000.0;
                    (x * u).exp() * (tau / 20000.0)
                })
                .sum::<C64>()
                * (-g * tau).exp();
            assert!((quad - kernel(x, g, tau)).norm() < 1e-7);
        }
    }
}
