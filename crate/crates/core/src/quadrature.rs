//! Line-shape integrals and widths.
//!
//! Spectra are integrated over the real line through `ω = ω₀ + c·tan θ`,
//! which turns a Lorentzian of half width `c` into a constant and leaves a
//! smooth, bounded integrand for double-exponential quadrature.

use std::cell::RefCell;

use crate::error::{Error, Result};

/// Integration range cut at `|ω − ω₀| ≤ cutoff·c`. For a Lorentzian the
/// neglected tails weigh `2/(π·cutoff)`.
pub const DEFAULT_CUTOFF: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u32,
}

/// `∫ f(ω) dω` over `ω₀ ± cutoff·c` with absolute target `abs_tol`.
/// The first error returned by `f` aborts the integral.
pub fn integrate_line(
    f: impl Fn(f64) -> Result<f64>,
    center: f64,
    half_width: f64,
    cutoff: f64,
    abs_tol: f64,
) -> Result<LineIntegral> {
    if !(half_width > 0.0 && half_width.is_finite() && center.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "line integral needs a finite center and positive half width, got {center}, {half_width}"
        )));
    }
    if !(cutoff > 0.0 && abs_tol > 0.0) {
        return Err(Error::InvalidParameter("cutoff and tolerance must be positive".into()));
    }
    let first_err: RefCell<Option<Error>> = RefCell::new(None);
    let theta_max = cutoff.atan();
    let out = quadrature::integrate(
        |theta: f64| {
            if first_err.borrow().is_some() {
                return 0.0;
            }
            let t = theta.tan();
            match f(center + half_width * t) {
                Ok(v) => v * half_width * (1.0 + t * t),
                Err(e) => {
                    *first_err.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        -theta_max,
        theta_max,
        abs_tol,
    );
    if let Some(e) = first_err.into_inner() {
        return Err(e);
    }
    Ok(LineIntegral {
        value: out.integral,
        error_estimate: out.error_estimate,
        evaluations: out.num_function_evaluations,
    })
}

/// Full width at half maximum of a single peak located at `peak`.
///
/// Walks outward from the peak in steps starting at `scale`, doubling
/// until the value drops below half, then bisects each edge to `tol`
/// absolute.
pub fn fwhm(f: impl Fn(f64) -> Result<f64>, peak: f64, scale: f64, tol: f64) -> Result<f64> {
    if !(scale > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter("fwhm scale and tolerance must be positive".into()));
    }
    let top = f(peak)?;
    if !(top > 0.0) {
        return Err(Error::InvalidParameter(format!("no peak at {peak}: value {top}")));
    }
    let half = 0.5 * top;
    let mut edges = [0.0; 2];
    for (edge, dir) in edges.iter_mut().zip([-1.0, 1.0]) {
        let mut inner = 0.0;
        let mut outer = scale;
        let mut steps = 0;
        while f(peak + dir * outer)? >= half {
            inner = outer;
            outer *= 2.0;
            steps += 1;
            if steps > 60 {
                return Err(Error::InvalidParameter("peak does not fall to half maximum".into()));
            }
        }
        while outer - inner > tol {
            let mid = 0.5 * (inner + outer);
            if f(peak + dir * mid)? >= half {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        *edge = 0.5 * (inner + outer);
    }
    Ok(edges[0] + edges[1])
}
