//! Two-mode squeezed vacuum displacement sensing with quadrature readout.
//!
//! Per mode the accessible operators are `(x, p)` with `[x, p] = i`; the
//! vacuum variance is `1/2` and the shot-noise Fisher matrix is `2·I`.
//! Additive detection noise of variance `σ²` enters as `Γ → Γ + σ²I`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::optimizer::{gain_db, optimize_phi, EstimationTarget, SqueezingOutcome};
use crate::scalar::Scalar;
use crate::spin_moments::{assemble_full, BlockSet, MomentData, Strategy};

/// Shot-noise Fisher entry per mode for quadrature displacements.
pub const CV_SHOT_NOISE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianScenario<T> {
    /// Preparation squeezing `r ≥ 0`.
    pub r: T,
    pub strategy: Strategy,
    /// MAI squeezing `r_α ≥ 0` (ignored for `Linear`).
    pub r_mai: T,
    /// Detection-noise standard deviation `σ ≥ 0`.
    pub sigma: T,
}

impl<T: Scalar> GaussianScenario<T> {
    pub fn new(r: T, strategy: Strategy, r_mai: T, sigma: T) -> Result<Self> {
        let s = Self { r, strategy, r_mai, sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("r_mai", self.r_mai), ("sigma", self.sigma)] {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidScenario(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    fn effective_mai(&self) -> T {
        if self.strategy.is_mai() {
            self.r_mai
        } else {
            T::zero()
        }
    }
}

/// Noise-free covariance and commutator blocks, columns ordered `(x_A, p_A, x_B, p_B)`.
pub fn cv_blocks<T: Scalar>(s: &GaussianScenario<T>) -> Result<BlockSet<T>> {
    s.validate()?;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let a = s.effective_mai();
    let b = match s.strategy {
        Strategy::Linear | Strategy::NonlocalMai => {
            let d = s.r - a;
            let (ch, sh) = (a.cosh(), a.sinh());
            BlockSet {
                gamma_mm: Mat2::symmetric((two * d).cosh() * half, T::zero(), (two * d).cosh() * half),
                gamma_mn: Mat2::symmetric(-(two * d).sinh() * half, T::zero(), (two * d).sinh() * half),
                c_mm: Mat2::new(T::zero(), ch, -ch, T::zero()),
                c_mn: Mat2::new(T::zero(), -sh, -sh, T::zero()),
            }
        }
        Strategy::LocalMai => {
            let (up, down) = ((two * a).exp(), (-two * a).exp());
            let (c2, s2) = ((two * s.r).cosh() * half, (two * s.r).sinh() * half);
            BlockSet {
                gamma_mm: Mat2::symmetric(up * c2, T::zero(), down * c2),
                gamma_mn: Mat2::symmetric(-up * s2, T::zero(), down * s2),
                c_mm: Mat2::new(T::zero(), (-a).exp(), -a.exp(), T::zero()),
                c_mn: Mat2::zero(),
            }
        }
    };
    Ok(b)
}

/// Two-mode moment data with detection noise and `F_SN = 2·I`.
pub fn cv_matrices<T: Scalar>(s: &GaussianScenario<T>) -> Result<MomentData<T>> {
    let b = cv_blocks(s)?.with_detection_noise(s.sigma * s.sigma);
    Ok(assemble_full(&b, 2, T::lit(CV_SHOT_NOISE)))
}

/// `ξ⁻²(n)` from the matrix pipeline, optimized over the generator angle.
pub fn cv_xi2_matrix<T: Scalar>(s: &GaussianScenario<T>, t: &EstimationTarget<T>) -> Result<SqueezingOutcome<T>> {
    let md = cv_matrices(s)?;
    optimize_phi(&md, t, s.effective_mai())
}

/// Closed-form `ξ⁻²`: `1/(e^{-2r} + 2σ² e^{-2r_α})`, with `r_α = 0` for linear readout.
pub fn cv_xi2_closed<T: Scalar>(s: &GaussianScenario<T>) -> Result<T> {
    s.validate()?;
    let two = T::lit(2.0);
    let sig2 = s.sigma * s.sigma;
    Ok(T::one() / ((-two * s.r).exp() + two * sig2 * (-two * s.effective_mai()).exp()))
}

/// Noise ratio `ξ⁻²_L / ξ⁻²_MAI = (e^{-2r} + 2σ² e^{-2r_α})/(e^{-2r} + 2σ²)`.
pub fn noise_ratio<T: Scalar>(r: T, r_mai: T, sigma: T) -> T {
    let two = T::lit(2.0);
    let base = (-two * r).exp();
    let sig2 = two * sigma * sigma;
    (base + sig2 * (-two * r_mai).exp()) / (base + sig2)
}

/// Closed-form gain in dB.
pub fn cv_gain_db_closed<T: Scalar>(s: &GaussianScenario<T>) -> Result<T> {
    cv_xi2_closed(s).map(gain_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn sc(r: f64, st: Strategy, ra: f64, sig: f64) -> GaussianScenario<f64> {
        GaussianScenario::new(r, st, ra, sig).unwrap()
    }

    /// Symplectic form for `(x_A, p_A, x_B, p_B)`.
    fn omega() -> Matrix<f64> {
        Matrix::from_fn(4, 4, |i, j| match (i % 2, j % 2) {
            (0, 1) if i / 2 == j / 2 => 1.0,
            (1, 0) if i / 2 == j / 2 => -1.0,
            _ => 0.0,
        })
    }

    /// Heisenberg-picture map `X = B L` for each readout.
    fn readout_map(st: Strategy, a: f64) -> Matrix<f64> {
        let (ch, sh) = (a.cosh(), a.sinh());
        match st {
            Strategy::Linear => Matrix::identity(4),
            Strategy::NonlocalMai => Matrix::from_rows(&[
                vec![ch, 0.0, sh, 0.0],
                vec![0.0, ch, 0.0, -sh],
                vec![sh, 0.0, ch, 0.0],
                vec![0.0, -sh, 0.0, ch],
            ]),
            Strategy::LocalMai => Matrix::from_diag(&[a.exp(), (-a).exp(), a.exp(), (-a).exp()]),
        }
    }

    #[test]
    fn blocks_follow_from_symplectic_readout() {
        for st in Strategy::ALL {
            for &(r, a) in &[(0.3, 0.2), (0.7, 1.1), (0.0, 0.5)] {
                let s = sc(r, st, a, 0.0);
                let md = cv_matrices(&s).unwrap();
                let lin = cv_matrices(&sc(r, Strategy::Linear, 0.0, 0.0)).unwrap();
                let b = readout_map(st, a);
                let gamma = b.matmul(&lin.gamma).matmul(&b.transpose());
                assert!(gamma.max_abs_diff(&md.gamma) < 1e-12, "{st:?} gamma");
                // -i<[L_i, X_j]> = (Ω Bᵀ)_ij
                let c = omega().matmul(&b.transpose());
                assert!(c.max_abs_diff(&md.commutator) < 1e-12, "{st:?} commutator");
            }
        }
    }

    #[test]
    fn noiseless_gain_is_independent_of_readout_squeezing() {
        for st in Strategy::ALL {
            for ra in [0.0, 0.4, 1.3] {
                let out = cv_xi2_matrix(&sc(0.5, st, ra, 0.0), &EstimationTarget::uniform(2)).unwrap();
                assert!((out.xi2_inv - 1.0_f64.exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_pipeline_matches_closed_form_with_noise() {
        for st in Strategy::ALL {
            for &(r, ra, sig) in &[(0.2, 0.4, 0.3), (1.0, 2.0, 1.0), (0.6, 0.0, 0.5)] {
                let s = sc(r, st, ra, sig);
                let closed = cv_xi2_closed(&s).unwrap();
                for t in EstimationTarget::all_sign_patterns(2) {
                    let m = cv_xi2_matrix(&s, &t).unwrap().xi2_inv;
                    assert!((m - closed).abs() < 1e-12 * closed, "{st:?} {m} {closed}");
                }
            }
        }
    }

    #[test]
    fn ratio_is_quotient_of_closed_forms() {
        let (r, ra, sig) = (0.5, 0.8, 0.6);
        let lin = cv_xi2_closed(&sc(r, Strategy::Linear, 0.0, sig)).unwrap();
        let mai = cv_xi2_closed(&sc(r, Strategy::NonlocalMai, ra, sig)).unwrap();
        assert!((noise_ratio(r, ra, sig) - lin / mai).abs() < 1e-15);
        assert!(noise_ratio(r, ra, sig) < 1.0);
        assert_eq!(noise_ratio(r, ra, 0.0), 1.0);
    }

    #[test]
    fn vacuum_is_shot_noise_limited() {
        for st in Strategy::ALL {
            let out = cv_xi2_matrix(&sc(0.0, st, 0.7, 0.0), &EstimationTarget::uniform(2)).unwrap();
            assert!((out.xi2_inv - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_parameters() {
        assert!(GaussianScenario::new(-0.1, Strategy::Linear, 0.0, 0.0).is_err());
        assert!(GaussianScenario::new(0.1, Strategy::Linear, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn single_precision_closed_form() {
        let s = GaussianScenario::<f32>::new(0.5, Strategy::LocalMai, 0.5, 0.0).unwrap();
        assert!((cv_xi2_closed(&s).unwrap() - 1.0_f32.exp()).abs() < 1e-5);
    }
}
