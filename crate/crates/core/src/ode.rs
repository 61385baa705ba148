/// One classical fourth-order Runge-Kutta step for an autonomous system.
pub fn rk4_step<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], y: &[f64; N], h: f64) -> [f64; N] {
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * h, &k1));
    let k3 = f(&axpy(y, 0.5 * h, &k2));
    let k4 = f(&axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// Integrates over total time `t` in `n` equal steps.
pub fn rk4_span<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], y0: [f64; N], t: f64, n: usize) -> [f64; N] {
    let h = t / n as f64;
    (0..n).fold(y0, |y, _| rk4_step(f, &y, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        let f = |y: &[f64; 1]| [-y[0]];
        let err = |n| (rk4_span(&f, [1.0], 1.0, n)[0] - (-1.0f64).exp()).abs();
        let ratio = err(10) / err(20);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }
}
