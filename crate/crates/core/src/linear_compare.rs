//! Linear state feedback on the scaled cart: the published gain vector and
//! single-input pole placement (Ackermann) on the upright linearization.

use nalgebra::{Complex, Matrix4, Vector4};
use serde::Serialize;

use crate::cartpole::CartState;
use crate::error::{Error, Result};

/// `u = k_theta θ + k_x x + k_thetadot θ̇ + k_xdot ẋ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearGains {
    pub k_theta: f64,
    pub k_x: f64,
    pub k_thetadot: f64,
    pub k_xdot: f64,
}

impl LinearGains {
    pub fn from_array(k: [f64; 4]) -> Self {
        Self { k_theta: k[0], k_x: k[1], k_thetadot: k[2], k_xdot: k[3] }
    }

    /// Ordered like the state, `[θ, x, θ̇, ẋ]`.
    pub fn to_array(self) -> [f64; 4] {
        [self.k_theta, self.k_x, self.k_thetadot, self.k_xdot]
    }

    pub fn u(&self, s: &CartState) -> f64 {
        self.k_theta * s.theta + self.k_x * s.x + self.k_thetadot * s.theta_dot + self.k_xdot * s.x_dot
    }

    /// `A + B kᵀ` for the linearization at coupling `b`.
    pub fn closed_loop_matrix(&self, b: f64) -> Matrix4<f64> {
        let (a, bv) = linearization(b);
        a + bv * Vector4::from(self.to_array()).transpose()
    }

    /// Coefficients `[c0, c1, c2, c3]` of the monic characteristic polynomial
    /// of `A + B kᵀ`, from `det(sI - A) (1 - kᵀ (sI - A)⁻¹ B)`.
    pub fn closed_loop_char_poly(&self, b: f64) -> [f64; 4] {
        let d = 1.0 - b * b;
        [
            self.k_x / d,
            self.k_xdot / d,
            (b * self.k_theta - self.k_x - 1.0) / d,
            (b * self.k_thetadot - self.k_xdot) / d,
        ]
    }

    /// Closed-loop eigenvalues, sorted. QR estimates of `A + B kᵀ` are
    /// refined by Newton steps on [`closed_loop_char_poly`](Self::closed_loop_char_poly),
    /// since large gains make the matrix far from normal.
    pub fn closed_loop_eigenvalues(&self, b: f64) -> Vec<Complex<f64>> {
        let c = self.closed_loop_char_poly(b);
        let mut e: Vec<Complex<f64>> =
            self.closed_loop_matrix(b).complex_eigenvalues().iter().map(|z| newton_polish(&c, *z)).collect();
        sort_complex(&mut e);
        e
    }
}

/// The published gains, obtained by placing poles at -5, -6 and a double pole at -2.
pub fn reference_gains() -> LinearGains {
    LinearGains { k_theta: 1021.0, k_x: 115.8, k_thetadot: 918.5, k_xdot: 158.2 }
}

/// Upright linearization `ṡ = A s + B u` with `s = [θ, x, θ̇, ẋ]`:
/// `θ̈ = (θ - b u)/(1 - b²)`, `ẍ = (u - b θ)/(1 - b²)`.
pub fn linearization(b: f64) -> (Matrix4<f64>, Vector4<f64>) {
    let d = 1.0 - b * b;
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        1.0 / d, 0.0, 0.0, 0.0,
        -b / d, 0.0, 0.0, 0.0,
    );
    (a, Vector4::new(0.0, 0.0, -b / d, 1.0 / d))
}

/// Real coefficients `[c0, c1, c2, c3]` of the monic quartic with the given roots,
/// `s⁴ + c3 s³ + c2 s² + c1 s + c0`.
fn monic_coefficients(poles: &[Complex<f64>; 4]) -> Result<[f64; 4]> {
    check_conjugate_pairs(poles)?;
    let mut c = vec![Complex::new(1.0, 0.0)];
    for p in poles {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * p;
        }
        c = next;
    }
    Ok([c[0].re, c[1].re, c[2].re, c[3].re])
}

fn check_conjugate_pairs(poles: &[Complex<f64>]) -> Result<()> {
    let tol = |z: &Complex<f64>| 1e-12 * z.norm().max(1.0);
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] || poles[i].im.abs() <= tol(&poles[i]) {
            continue;
        }
        let partner = (0..poles.len()).find(|&j| j != i && !used[j] && (poles[j] - poles[i].conj()).norm() <= tol(&poles[i]));
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return Err(Error::ComplexPolesNotConjugate),
        }
    }
    Ok(())
}

fn newton_polish(c: &[f64; 4], mut z: Complex<f64>) -> Complex<f64> {
    for _ in 0..50 {
        let (mut p, mut dp) = (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
        for &ci in c.iter().rev() {
            dp = dp * z + p;
            p = p * z + ci;
        }
        if dp.norm() == 0.0 || !p.is_finite() {
            break;
        }
        let step = p / dp;
        if !step.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Gains placing the closed-loop eigenvalues of `A + B kᵀ` at `poles`.
pub fn pole_place(b: f64, poles: &[Complex<f64>; 4]) -> Result<LinearGains> {
    let coeffs = monic_coefficients(poles)?;
    let (a, bv) = linearization(b);
    let ab = a * bv;
    let a2b = a * ab;
    let a3b = a * a2b;
    let ctrb = Matrix4::from_columns(&[bv, ab, a2b, a3b]);
    let det = ctrb.determinant();
    let scale = ctrb.amax().powi(4).max(f64::MIN_POSITIVE);
    if !det.is_finite() || det.abs() < 1e-12 * scale {
        return Err(Error::NotControllable { det });
    }
    let inv = ctrb.try_inverse().ok_or(Error::NotControllable { det })?;
    let a2 = a * a;
    let a3 = a2 * a;
    let phi = a3 * a + a3 * coeffs[3] + a2 * coeffs[2] + a * coeffs[1] + Matrix4::identity() * coeffs[0];
    // Ackermann gives u = -k s; our convention is u = +k s.
    let k = inv.row(3) * phi;
    Ok(LinearGains::from_array([-k[0], -k[1], -k[2], -k[3]]))
}

/// Real-pole convenience wrapper.
pub fn pole_place_real(b: f64, poles: [f64; 4]) -> Result<LinearGains> {
    pole_place(b, &poles.map(|p| Complex::new(p, 0.0)))
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn sorted_eigenvalues(m: &Matrix4<f64>) -> Vec<Complex<f64>> {
    let mut e: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    sort_complex(&mut e);
    e
}

pub fn sort_complex(v: &mut [Complex<f64>]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Controllability matrix rank of `(A, B)` at coupling `b` (via SVD).
pub fn controllability_rank(b: f64) -> usize {
    let (a, bv) = linearization(b);
    let ctrb = Matrix4::from_columns(&[bv, a * bv, a * a * bv, a * a * a * bv]);
    ctrb.rank(1e-10 * ctrb.amax().max(1.0))
}
