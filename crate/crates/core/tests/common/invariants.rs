//! Invariant measurements shared by the property tests and the acceptance
//! run. Each returns the measured defect; callers hold the tolerance.

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nphoton::hilbert::CompositeSpace;
use nphoton::liouville::{build_liouvillian, Liouvillian};
use nphoton::models::{jaynes_cummings, ladder_frequency, ladder_linewidth, rabi, JCParams, System};
use nphoton::oracle::{eigendecompose, g2_tau, FilterSpec};
use nphoton::regression::{propagate, LiouvilleVector, DEFAULT_RTOL};
use nphoton::sensors::{attach_sensors, attach_sensors_with, gn_zero_delay, SensorOptions, SensorSpec};

pub fn jc_generator() -> &'static Liouvillian {
    static L: OnceLock<Liouvillian> = OnceLock::new();
    L.get_or_init(|| build_liouvillian(&jaynes_cummings(&JCParams::new(0.1, 0.01, 0.01, 3)).unwrap().me).unwrap())
}

pub fn random_matrix(space: &Arc<CompositeSpace>, seed: u64, hermitian: bool) -> LiouvilleVector {
    let d = space.dim();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut m: Vec<C64> = (0..d * d).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    if hermitian {
        for i in 0..d {
            for j in 0..d {
                let h = (m[i * d + j] + m[j * d + i].conj()) / 2.0;
                m[i * d + j] = h;
                m[j * d + i] = h.conj();
            }
        }
    }
    LiouvilleVector::from_row_major(space, &m).unwrap()
}

fn rel_frob(a: &LiouvilleVector, b: &LiouvilleVector) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

/// `|Tr L(ρ)| / ‖L(ρ)‖` for a random Hermitian `ρ`.
pub fn trace_defect(seed: u64) -> f64 {
    let l = jc_generator();
    let out = l.apply(&random_matrix(l.space(), seed, true));
    out.trace().norm() / out.frobenius_norm()
}

/// `‖L(x†) − L(x)†‖ / ‖L(x)‖` for a random `x`.
pub fn hermiticity_defect(seed: u64) -> f64 {
    let l = jc_generator();
    let x = random_matrix(l.space(), seed, false);
    rel_frob(&l.apply(&x.adjoint()), &l.apply(&x).adjoint())
}

/// `‖e^{Lτ}ρ_ss − ρ_ss‖` at `τ = 10/γ_min`.
pub fn fixed_point_defect(sys: &System) -> f64 {
    let l = build_liouvillian(&sys.me).unwrap();
    let rho = l.steady_state().unwrap();
    let tau = 10.0 / sys.me.smallest_rate().unwrap();
    propagate(&l, rho.as_vector(), tau, DEFAULT_RTOL).unwrap().sub(rho.as_vector()).frobenius_norm()
}

/// Relative gap between one propagation by `t1 + t2` and two in sequence.
pub fn semigroup_defect(seed: u64, t1: f64, t2: f64) -> f64 {
    let l = jc_generator();
    let sigma = random_matrix(l.space(), seed, false);
    let once = propagate(l, &sigma, t1 + t2, DEFAULT_RTOL).unwrap();
    let twice = propagate(l, &propagate(l, &sigma, t1, DEFAULT_RTOL).unwrap(), t2, DEFAULT_RTOL).unwrap();
    rel_frob(&twice, &once)
}

/// Zero-delay three-sensor value and its relative change under `perm`.
pub fn permutation_defect(w: [f64; 3], perm: [usize; 3]) -> (f64, f64) {
    let p = JCParams::new(0.1, 0.01, 0.01, 3);
    let sys = jaynes_cummings(&p).unwrap();
    let gamma = ladder_linewidth(&p, 2);
    let specs: Vec<SensorSpec> = w.iter().map(|x| SensorSpec::new(*x, gamma)).collect();
    let shuffled: Vec<SensorSpec> = perm.iter().map(|&k| specs[k]).collect();
    let a = gn_zero_delay(&attach_sensors(&sys.me, &sys.probe, &specs).unwrap()).unwrap().value;
    let b = gn_zero_delay(&attach_sensors(&sys.me, &sys.probe, &shuffled).unwrap()).unwrap().value;
    (a, (a - b).abs() / a.abs())
}

/// Raw two-sensor moment and normalized value with couplings scaled by
/// `scale` relative to the automatic rule, at the pair `(R, R₂⁻)`.
pub fn coupling_moments(scale: f64, first_only: bool) -> (f64, f64) {
    let p = JCParams::new(0.1, 0.01, 0.01, 3);
    let sys = jaynes_cummings(&p).unwrap();
    let gamma = ladder_linewidth(&p, 2);
    let (r, r2) = (rabi(&p).unwrap(), ladder_frequency(&p, 2, false).unwrap());
    let base = attach_sensors(&sys.me, &sys.probe, &[SensorSpec::new(r, gamma), SensorSpec::new(r2, gamma)]).unwrap();
    let eps = base.epsilons();
    let specs = [
        SensorSpec::new(r, gamma).with_epsilon(eps[0] * scale),
        SensorSpec::new(r2, gamma).with_epsilon(if first_only { eps[1] } else { eps[1] * scale }),
    ];
    let ss = attach_sensors_with(&sys.me, &sys.probe, &specs, &SensorOptions::default()).unwrap();
    let g = gn_zero_delay(&ss).unwrap();
    (g.value * g.populations.iter().product::<f64>(), g.value)
}

/// Ratio of the raw moment after doubling one coupling; 4 at leading order.
pub fn doubling_ratio() -> f64 {
    coupling_moments(2.0, true).0 / coupling_moments(1.0, true).0
}

/// Ratios of successive changes of the normalized value under coupling
/// halving; 4 at leading order.
pub fn halving_ratios() -> Vec<f64> {
    let g: Vec<f64> = [4.0, 2.0, 1.0, 0.5].iter().map(|s| coupling_moments(*s, false).1).collect();
    g.windows(3).map(|w| (w[0] - w[1]).abs() / (w[1] - w[2]).abs()).collect()
}

pub struct PoleContinuity {
    pub poles: usize,
    /// Worst `|g(ω*) − mean(g(ω*±δ))| / g(ω*)`.
    pub curvature: f64,
    /// Worst `|g(ω*+δ) − g(ω*−δ)| / g(ω*)`.
    pub jump: f64,
}

/// Oracle `g⁽²⁾(τ)` evaluated with filter 2 tuned onto each double pole of
/// the Z kernel and perturbed by ±10⁻⁶ in frequency.
pub fn pole_continuity() -> PoleContinuity {
    let p = JCParams::new(0.1, 0.01, 0.01, 2);
    let sys = jaynes_cummings(&p).unwrap();
    let l = build_liouvillian(&sys.me).unwrap();
    let rho = l.steady_state().unwrap();
    let eig = eigendecompose(&l).unwrap();
    let m = eig.eigenvalues();
    let stationary = m.iter().copied().min_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let f1 = FilterSpec::new(rabi(&p).unwrap(), 0.05).unwrap();
    let tau = 7.0;
    let mut out = PoleContinuity {
        poles: 0,
        curvature: 0.0,
        jump: 0.0,
    };
    for mq in m.iter().filter(|z| z.re < -1e-6) {
        let gamma2 = 2.0 * (stationary.re - mq.re);
        let w2 = stationary.im - mq.im;
        let at = |w: f64| g2_tau(&l, &rho, &sys.probe, f1, FilterSpec::new(w, gamma2).unwrap(), tau, &eig).unwrap();
        let (lo, mid, hi) = (at(w2 - 1e-6), at(w2), at(w2 + 1e-6));
        out.curvature = out.curvature.max((mid - (lo + hi) / 2.0).abs() / mid.abs());
        out.jump = out.jump.max((hi - lo).abs() / mid.abs());
        out.poles += 1;
    }
    out
}
