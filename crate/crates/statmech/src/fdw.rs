//! Domain-wall basis matrix elements of the θ-rotation ZZ channel.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `β = |1 − p + p e^{2iθ}|` and the phase `α = (1 − p + p e^{2iθ})/β`.
pub fn tension_and_phase(p: f64, theta: f64) -> Result<(f64, Complex64)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadProbability(p));
    }
    let z = Complex64::new(1.0 - p, 0.0) + Complex64::from_polar(p, 2.0 * theta);
    let beta = z.norm();
    // β vanishes only at p = 1/2, θ = π/2, where the phase is immaterial.
    let alpha = if beta > 0.0 { z / beta } else { Complex64::new(1.0, 0.0) };
    Ok((beta, alpha))
}

/// `f(D, D′) = ∏_e α^{(s_e − s′_e)/2} β^{|s_e − s′_e|/2}` for edge signs `s_e = ±1`
/// (`−1` marks a domain wall).
pub fn fdw_weight(p: f64, theta: f64, d: &[i8], d_prime: &[i8]) -> Result<Complex64> {
    if d.len() != d_prime.len() {
        return Err(Error::InvalidArgument(format!("{} vs {} edges", d.len(), d_prime.len())));
    }
    if d.iter().chain(d_prime).any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument("edge signs must be +1 or -1".into()));
    }
    let (beta, alpha) = tension_and_phase(p, theta)?;
    let mut w = Complex64::new(1.0, 0.0);
    for (&s, &sp) in d.iter().zip(d_prime) {
        match s - sp {
            2 => w *= alpha * beta,
            -2 => w *= alpha.inv() * beta,
            _ => {}
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(r: &mut ChaCha8Rng, n: usize) -> Vec<i8> {
        (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect()
    }

    #[test]
    fn diagonal_is_one() {
        let d = [1, -1, -1, 1];
        assert_eq!(fdw_weight(0.3, 0.7, &d, &d).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn half_pi_is_pauli_tension() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for p in [0.05, 0.2, 0.4] {
            let (d, dp) = (random_config(&mut r, 6), random_config(&mut r, 6));
            let w = fdw_weight(p, std::f64::consts::FRAC_PI_2, &d, &dp).unwrap();
            let diff = d.iter().zip(&dp).filter(|(a, b)| a != b).count() as i32;
            assert!(w.im.abs() < 1e-15);
            assert!((w.re - (1.0 - 2.0 * p).powi(diff)).abs() < 1e-14);
        }
    }

    #[test]
    fn cyclic_products_lose_their_phase() {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = r.random_range(0.0..=1.0);
            let theta = r.random_range(0.0..std::f64::consts::PI);
            let (beta, _) = tension_and_phase(p, theta).unwrap();
            for t in 2..=4 {
                let ds: Vec<Vec<i8>> = (0..t).map(|_| random_config(&mut r, 4)).collect();
                let mut w = Complex64::new(1.0, 0.0);
                let mut walls = 0;
                for k in 0..t {
                    let (a, b) = (&ds[k], &ds[(k + 1) % t]);
                    w *= fdw_weight(p, theta, a, b).unwrap();
                    walls += a.iter().zip(b).filter(|(x, y)| x != y).count();
                }
                let expect = beta.powi(walls as i32);
                assert!(w.im.abs() < 1e-12 && (w.re - expect).abs() < 1e-12, "t={t} {w} vs {expect}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fdw_weight(1.5, 0.0, &[1], &[1]), Err(Error::BadProbability(_))));
        assert!(fdw_weight(0.1, 0.0, &[1, 0], &[1, 1]).is_err());
        assert!(fdw_weight(0.1, 0.0, &[1], &[1, 1]).is_err());
    }
}
