//! Measurement-optimized moment matrix, squeezing matrix and `ξ⁻²(n)`.
//!
//! For a generator matrix `R` (one unit vector `g_m` per mode) the best
//! moment matrix over all measurements in the span of the family is
//! `R (C Γ⁻¹ Cᵀ) Rᵀ`, reached by `S ∝ R C Γ⁻¹` (matrix Cauchy-Schwarz).
//!
//! Two evaluation paths are kept side by side:
//! * dense: `2M x 2M` pseudo-inverse of Γ, valid for any data;
//! * structured: for exchange-symmetric data Γ splits into the uniform mode
//!   `Γ_mm + (M-1)Γ_mn` and the `M-1` fold orthogonal mode `Γ_mm - Γ_mn`,
//!   so all work happens on 2x2 blocks regardless of `M`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, orthonormalize_rows, spd_inverse, sym_pseudo_inverse, Mat2, Matrix};
use crate::scalar::Scalar;
use crate::spin_moments::{spin_moment_data, BlockSet, MomentData, SpinScenario, Strategy};

/// Relative overlap above which a discarded covariance direction is
/// considered to carry signal.
const NULL_OVERLAP_TOL: f64 = 1e-8;

/// Common generator angle: mode `m` is driven by `cos φ L_0^(m) + sin φ L_1^(m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorSpec<T> {
    pub phi: T,
}

impl<T: Scalar> GeneratorSpec<T> {
    pub fn new(phi: T) -> Self {
        Self { phi }
    }

    pub fn direction(&self) -> (T, T) {
        (self.phi.cos(), self.phi.sin())
    }

    /// `M x 2M` block-diagonal `R` with one `g` per mode.
    pub fn r_matrix(&self, modes: usize) -> Matrix<T> {
        self.r_matrix_signed(&vec![T::one(); modes])
    }

    /// `R` with mode `m` driven by `signs[m] · g`.
    pub fn r_matrix_signed(&self, signs: &[T]) -> Matrix<T> {
        let (c, s) = self.direction();
        let modes = signs.len();
        let mut r = Matrix::zeros(modes, 2 * modes);
        for (m, sg) in signs.iter().enumerate() {
            r[(m, 2 * m)] = *sg * c;
            r[(m, 2 * m + 1)] = *sg * s;
        }
        r
    }
}

/// Equal-weight combination `n` with `n_m = ±1/√M`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationTarget<T> {
    n: Vec<T>,
}

impl<T: Scalar> EstimationTarget<T> {
    /// `n_+ = (1, ..., 1)/√M`.
    pub fn uniform(modes: usize) -> Self {
        Self::from_signs(&vec![true; modes]).expect("non-empty")
    }

    /// `true` for `+1/√M`, `false` for `-1/√M`.
    pub fn from_signs(positive: &[bool]) -> Result<Self> {
        if positive.is_empty() {
            return Err(Error::InvalidTarget("at least one mode".into()));
        }
        let w = T::one() / T::from_count(positive.len()).sqrt();
        Ok(Self { n: positive.iter().map(|&p| if p { w } else { -w }).collect() })
    }

    /// Validates an explicit vector: unit norm, equal magnitudes.
    pub fn from_vec(n: Vec<T>) -> Result<Self> {
        if n.is_empty() {
            return Err(Error::InvalidTarget("at least one mode".into()));
        }
        let w = T::one() / T::from_count(n.len()).sqrt();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        if n.iter().any(|x| (x.abs() - w).abs() > tol) {
            return Err(Error::InvalidTarget("entries must all be ±1/√M".into()));
        }
        Ok(Self { n })
    }

    /// All `2^M` sign patterns.
    pub fn all_sign_patterns(modes: usize) -> Vec<Self> {
        (0..1usize << modes)
            .map(|bits| {
                let signs: Vec<bool> = (0..modes).map(|m| bits & (1 << m) == 0).collect();
                Self::from_signs(&signs).expect("non-empty")
            })
            .collect()
    }

    pub fn modes(&self) -> usize {
        self.n.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.n
    }

    /// `±1` per mode.
    pub fn signs(&self) -> Vec<T> {
        self.n.iter().map(|x| x.signum()).collect()
    }
}

/// Optimized sensitivity for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqueezingOutcome<T> {
    pub xi2_inv: T,
    pub gain_db: T,
    pub phi_opt: T,
    pub mu_mai_opt: T,
    /// `M x 2M` optimal measurement coefficients, orthonormal rows.
    #[serde(skip)]
    pub s_matrix: Matrix<T>,
    /// Estimator covariance `Σ` at one repetition.
    #[serde(skip)]
    pub sigma: Matrix<T>,
}

pub fn gain_db<T: Scalar>(xi2_inv: T) -> T {
    T::lit(10.0) * xi2_inv.log10()
}

// ---------------------------------------------------------------------------
// covariance inversion

fn singular_check<T: Scalar>(commutator: &Matrix<T>, null_space: &[Vec<T>]) -> Result<()> {
    let scale = commutator.max_abs();
    if scale == T::zero() {
        return Ok(());
    }
    for v in null_space {
        let cv = commutator.matvec(v);
        let overlap = cv.iter().fold(T::zero(), |acc, x| acc.max(x.abs())) / scale;
        if overlap > T::lit(NULL_OVERLAP_TOL) {
            return Err(Error::SingularCovariance(overlap.to_f64_lossy()));
        }
    }
    Ok(())
}

/// `C Γ⁺ Cᵀ` on the dense `2M x 2M` matrices.
pub fn full_moment_matrix_dense<T: Scalar>(md: &MomentData<T>) -> Result<Matrix<T>> {
    let p = sym_pseudo_inverse(&md.gamma, T::rel_cutoff());
    singular_check(&md.commutator, &p.null_space)?;
    Ok(md.commutator.matmul(&p.inverse).matmul(&md.commutator.transpose()).symmetrize())
}

/// Pseudo-inverse of a symmetric 2x2 block with the null-direction check.
fn pinv2<T: Scalar>(g: &Mat2<T>, c: &Mat2<T>) -> Result<Mat2<T>> {
    let (vals, vecs) = g.sym_eigen();
    let lmax = vals[0].abs().max(vals[1].abs());
    let cut = lmax * T::rel_cutoff();
    let scale = c.max_abs();
    let mut inv = Mat2::zero();
    for k in 0..2 {
        let [x, y] = vecs[k];
        if vals[k].abs() <= cut {
            if scale > T::zero() {
                let cv0 = c.m[0][0] * x + c.m[0][1] * y;
                let cv1 = c.m[1][0] * x + c.m[1][1] * y;
                let overlap = cv0.abs().max(cv1.abs()) / scale;
                if overlap > T::lit(NULL_OVERLAP_TOL) {
                    return Err(Error::SingularCovariance(overlap.to_f64_lossy()));
                }
            }
            continue;
        }
        let w = T::one() / vals[k];
        inv = inv + Mat2::new(x * x, x * y, y * x, y * y).scale(w);
    }
    Ok(inv)
}

/// Uniform and orthogonal mode reductions of exchange-symmetric data.
#[derive(Clone, Copy, Debug)]
pub struct Reduced<T> {
    pub modes: usize,
    pub gamma_u: Mat2<T>,
    pub gamma_perp: Mat2<T>,
    pub c_u: Mat2<T>,
    pub c_perp: Mat2<T>,
    pub gamma_u_inv: Mat2<T>,
    pub gamma_perp_inv: Mat2<T>,
    /// `C_u Γ_u⁺ C_uᵀ`
    pub k_u: Mat2<T>,
    /// `C_⊥ Γ_⊥⁺ C_⊥ᵀ` (zero when `M = 1`)
    pub k_perp: Mat2<T>,
}

pub fn reduce<T: Scalar>(b: &BlockSet<T>, modes: usize) -> Result<Reduced<T>> {
    let rest = T::from_count(modes - 1);
    let gamma_u = b.gamma_mm + b.gamma_mn.scale(rest);
    let c_u = b.c_mm + b.c_mn.scale(rest);
    let gamma_perp = b.gamma_mm - b.gamma_mn;
    let c_perp = b.c_mm - b.c_mn;
    let gamma_u_inv = pinv2(&gamma_u, &c_u)?;
    let k_u = c_u * gamma_u_inv * c_u.transpose();
    let (gamma_perp_inv, k_perp) = if modes > 1 {
        let inv = pinv2(&gamma_perp, &c_perp)?;
        (inv, c_perp * inv * c_perp.transpose())
    } else {
        (Mat2::zero(), Mat2::zero())
    };
    Ok(Reduced { modes, gamma_u, gamma_perp, c_u, c_perp, gamma_u_inv, gamma_perp_inv, k_u, k_perp })
}

/// Full pseudo-inverse of Γ rebuilt from the two reduced blocks.
pub fn structured_gamma_inverse<T: Scalar>(b: &BlockSet<T>, modes: usize) -> Result<Matrix<T>> {
    let red = reduce(b, modes)?;
    Ok(kron_sym(modes, &red.gamma_u_inv, &red.gamma_perp_inv))
}

/// `P_u ⊗ U + P_⊥ ⊗ V` with `P_u = J/M`.
fn kron_sym<T: Scalar>(modes: usize, u: &Mat2<T>, v: &Mat2<T>) -> Matrix<T> {
    let inv_m = T::one() / T::from_count(modes);
    let diag = u.scale(inv_m) + v.scale(T::one() - inv_m);
    let off = (*u - *v).scale(inv_m);
    let mut out = Matrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        for j in 0..modes {
            out.set_block(2 * i, 2 * j, if i == j { &diag } else { &off });
        }
    }
    out
}

/// `C Γ⁻¹ Cᵀ` over the whole family; structured when blocks are available.
pub fn full_moment_matrix<T: Scalar>(md: &MomentData<T>) -> Result<Matrix<T>> {
    match &md.blocks {
        Some(b) => {
            let red = reduce(b, md.modes)?;
            Ok(kron_sym(md.modes, &red.k_u, &red.k_perp))
        }
        None => full_moment_matrix_dense(md),
    }
}

// ---------------------------------------------------------------------------
// moment matrix, optimal measurement, squeezing

/// `R (C Γ⁻¹ Cᵀ) Rᵀ` for an arbitrary row-orthonormal `R`.
pub fn moment_matrix_with<T: Scalar>(md: &MomentData<T>, r: &Matrix<T>) -> Result<Matrix<T>> {
    let full = full_moment_matrix_dense(md)?;
    Ok(r.matmul(&full).matmul(&r.transpose()).symmetrize())
}

/// Optimal `M x M` moment matrix for the common-angle generator `g`.
pub fn moment_matrix<T: Scalar>(md: &MomentData<T>, g: &GeneratorSpec<T>) -> Result<Matrix<T>> {
    match &md.blocks {
        Some(b) => {
            let red = reduce(b, md.modes)?;
            let (c, s) = g.direction();
            Ok(uniform_split(md.modes, red.k_u.quad(c, s), red.k_perp.quad(c, s)))
        }
        None => moment_matrix_with(md, &g.r_matrix(md.modes)),
    }
}

/// `a P_u + b P_⊥` as an `M x M` matrix.
fn uniform_split<T: Scalar>(modes: usize, a: T, b: T) -> Matrix<T> {
    let inv_m = T::one() / T::from_count(modes);
    Matrix::from_fn(modes, modes, |i, j| {
        let p_u = inv_m;
        let p_perp = if i == j { T::one() - inv_m } else { -inv_m };
        a * p_u + b * p_perp
    })
}

/// Orthonormal-row `S` spanning the rows of `R C Γ⁺`.
pub fn optimal_measurement_with<T: Scalar>(md: &MomentData<T>, r: &Matrix<T>) -> Result<Matrix<T>> {
    let p = sym_pseudo_inverse(&md.gamma, T::rel_cutoff());
    singular_check(&md.commutator, &p.null_space)?;
    let b = r.matmul(&md.commutator).matmul(&p.inverse);
    orthonormalize_rows(&b).ok_or(Error::DegenerateMoment)
}

pub fn optimal_measurement<T: Scalar>(md: &MomentData<T>, g: &GeneratorSpec<T>) -> Result<Matrix<T>> {
    match &md.blocks {
        Some(b) => {
            let red = reduce(b, md.modes)?;
            structured_measurement(&red, g)
        }
        None => optimal_measurement_with(md, &g.r_matrix(md.modes)),
    }
}

/// `S = P_u ⊗ â_uᵀ + P_⊥ ⊗ â_⊥ᵀ` with `a = gᵀ C Γ⁺` per reduced mode.
fn structured_measurement<T: Scalar>(red: &Reduced<T>, g: &GeneratorSpec<T>) -> Result<Matrix<T>> {
    let (c, s) = g.direction();
    let row = |cm: &Mat2<T>, gi: &Mat2<T>| -> [T; 2] {
        let a = *cm * *gi;
        [c * a.m[0][0] + s * a.m[1][0], c * a.m[0][1] + s * a.m[1][1]]
    };
    let unit = |v: [T; 2]| -> Result<[T; 2]> {
        let n = v[0].hypot(v[1]);
        if n > T::zero() {
            Ok([v[0] / n, v[1] / n])
        } else {
            Err(Error::DegenerateMoment)
        }
    };
    let m = red.modes;
    let a_u = unit(row(&red.c_u, &red.gamma_u_inv))?;
    let a_p = if m > 1 { unit(row(&red.c_perp, &red.gamma_perp_inv))? } else { [T::zero(); 2] };
    let inv_m = T::one() / T::from_count(m);
    Ok(Matrix::from_fn(m, 2 * m, |i, col| {
        let j = col / 2;
        let k = col % 2;
        let p_perp = if i == j { T::one() - inv_m } else { -inv_m };
        inv_m * a_u[k] + p_perp * a_p[k]
    }))
}

/// Moment matrix reached by a specific measurement `S` (no optimization):
/// `R C Sᵀ (S Γ Sᵀ)⁻¹ S Cᵀ Rᵀ`.
pub fn measurement_moment_matrix<T: Scalar>(md: &MomentData<T>, r: &Matrix<T>, s: &Matrix<T>) -> Result<Matrix<T>> {
    let cross = r.matmul(&md.commutator).matmul(&s.transpose());
    let gs = s.matmul(&md.gamma).matmul(&s.transpose());
    let inv = spd_inverse(&gs).ok_or(Error::SingularCovariance(0.0))?;
    Ok(cross.matmul(&inv).matmul(&cross.transpose()).symmetrize())
}

/// Squeezing matrix and sensitivity for a fixed generator angle.
#[derive(Clone, Debug)]
pub struct Squeezing<T> {
    /// `Ξ²_opt = F_SN^{1/2} (R M Rᵀ)⁻¹ F_SN^{1/2}`
    pub xi_matrix: Matrix<T>,
    /// `Σ = Σ_SN^{1/2} Ξ² Σ_SN^{1/2}`
    pub sigma: Matrix<T>,
    pub xi2_inv: T,
}

/// `Ξ²`, `Σ` and `ξ⁻²(n)`. Mode `m`'s generator is oriented along
/// `sign(n_m) g`, which is the optimum over per-mode signs and makes the
/// result independent of the sign pattern of `n`.
pub fn squeezing_and_xi2<T: Scalar>(
    md: &MomentData<T>,
    g: &GeneratorSpec<T>,
    t: &EstimationTarget<T>,
) -> Result<Squeezing<T>> {
    check_target(md, t)?;
    let signs = t.signs();
    // with F_SN = f·I: Ξ² = f·(RMRᵀ)⁻¹ and Σ = (RMRᵀ)⁻¹
    let mom_inv = match &md.blocks {
        Some(b) => {
            let red = reduce(b, md.modes)?;
            let (c, s) = g.direction();
            let (ku, kp) = (red.k_u.quad(c, s), red.k_perp.quad(c, s));
            if !(ku > T::zero()) || (md.modes > 1 && !(kp > T::zero())) {
                return Err(Error::DegenerateMoment);
            }
            let kp_inv = if md.modes > 1 { T::one() / kp } else { T::zero() };
            let base = uniform_split(md.modes, T::one() / ku, kp_inv);
            Matrix::from_fn(md.modes, md.modes, |i, j| signs[i] * signs[j] * base[(i, j)])
        }
        None => {
            let mom = moment_matrix_with(md, &g.r_matrix_signed(&signs))?;
            spd_inverse(&mom).ok_or(Error::DegenerateMoment)?
        }
    };
    let xi_matrix = mom_inv.scale(md.shot_noise);
    let sigma = mom_inv.symmetrize();
    let n = t.as_slice();
    let xi2_inv = dot(n, n) / (md.shot_noise * sigma.quad_form(n));
    Ok(Squeezing { xi_matrix, sigma, xi2_inv })
}

fn check_target<T: Scalar>(md: &MomentData<T>, t: &EstimationTarget<T>) -> Result<()> {
    if t.modes() != md.modes {
        return Err(Error::InvalidTarget(format!("target has {} modes, data has {}", t.modes(), md.modes)));
    }
    Ok(())
}

/// Best common angle in `[0, π)` and the resulting `ξ⁻²(n_+)`.
///
/// Structured data: `ξ⁻² = gᵀ K_u g / F_SN`, maximized exactly by the top
/// eigenvector of `K_u`. Dense data: 64-point grid and golden-section.
pub fn best_phi<T: Scalar>(md: &MomentData<T>) -> Result<(T, T)> {
    match &md.blocks {
        Some(b) => {
            let red = reduce(b, md.modes)?;
            let (vals, vecs) = red.k_u.sym_eigen();
            let [c, s] = vecs[1];
            Ok((wrap_half_turn(s.atan2(c)), vals[1] / md.shot_noise))
        }
        None => best_phi_search(md),
    }
}

fn wrap_half_turn<T: Scalar>(phi: T) -> T {
    let pi = T::PI();
    let mut p = phi % pi;
    if p < T::zero() {
        p = p + pi;
    }
    if p >= pi {
        p = p - pi;
    }
    p
}

/// Grid-and-golden search over the common angle; works on any data.
pub fn best_phi_search<T: Scalar>(md: &MomentData<T>) -> Result<(T, T)> {
    let t = EstimationTarget::uniform(md.modes);
    let full = full_moment_matrix(md)?;
    let eval = |phi: T| -> T {
        let r = GeneratorSpec::new(phi).r_matrix(md.modes);
        let mom = r.matmul(&full).matmul(&r.transpose()).symmetrize();
        match spd_inverse(&mom) {
            Some(inv) => T::one() / (md.shot_noise * inv.quad_form(t.as_slice())),
            None => T::zero(),
        }
    };
    let steps = 64;
    let pi = T::PI();
    let h = pi / T::from_count(steps);
    let (best_i, _) = (0..steps)
        .map(|i| (i, eval(h * T::from_count(i))))
        .fold((0, T::neg_infinity()), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let centre = h * T::from_count(best_i);
    let (phi, val) = golden_max(&eval, centre - h, centre + h, T::lit(1e-10));
    Ok((wrap_half_turn(phi), val))
}

/// Golden-section maximization on `[lo, hi]` down to `tol` in the argument.
pub fn golden_max<T: Scalar>(f: &impl Fn(T) -> T, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - (b - a) * inv_phi;
    let mut x2 = a + (b - a) * inv_phi;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - (b - a) * inv_phi;
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + (b - a) * inv_phi;
            f2 = f(x2);
        }
        iters += 1;
    }
    // keep whichever of the probes and the bracket ends is best
    let candidates = [(x1, f1), (x2, f2), (lo, f(lo)), (hi, f(hi))];
    candidates
        .into_iter()
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .fold((x1, f1), |acc, c| if c.1 > acc.1 { c } else { acc })
}

/// `ξ⁻²` maximized over the common angle for fixed data, as a full outcome.
pub fn optimize_phi<T: Scalar>(md: &MomentData<T>, t: &EstimationTarget<T>, mu_mai: T) -> Result<SqueezingOutcome<T>> {
    check_target(md, t)?;
    let (phi, _) = best_phi(md)?;
    let g = GeneratorSpec::new(phi);
    let sq = squeezing_and_xi2(md, &g, t)?;
    let signs = t.signs();
    let s_plus = optimal_measurement(md, &g)?;
    let s_matrix = Matrix::from_fn(s_plus.rows(), s_plus.cols(), |i, j| signs[i] * s_plus[(i, j)]);
    Ok(SqueezingOutcome {
        xi2_inv: sq.xi2_inv,
        gain_db: gain_db(sq.xi2_inv),
        phi_opt: phi,
        mu_mai_opt: mu_mai,
        s_matrix,
        sigma: sq.sigma,
    })
}

/// Default accessible MAI window `[0, max(4μ, 16π/𝒩)]` clamped to `[0, π]`.
pub fn default_mai_range<T: Scalar>(s: &SpinScenario<T>) -> (T, T) {
    let pi = T::PI();
    let local = T::from_count(s.local_atoms());
    let hi = (T::lit(4.0) * s.mu).max(T::lit(16.0) * pi / local).min(pi);
    (T::zero(), hi)
}

/// Number of coarse grid points on each searched axis.
pub const GRID_POINTS: usize = 64;
/// Golden-section tolerance on searched parameters.
pub const REFINE_TOL: f64 = 1e-6;

/// Whether a failure at one grid point just rules that point out.
fn skippable(e: &Error) -> bool {
    matches!(e, Error::SingularCovariance(_) | Error::DegenerateMoment)
}

/// `max_φ ξ⁻²(n_+)` for a spin scenario; skippable numerical failures map to 0.
pub fn spin_objective<T: Scalar>(s: &SpinScenario<T>) -> Result<T> {
    let md = spin_moment_data(s)?;
    match best_phi(&md) {
        Ok((_, v)) if v.is_finite() => Ok(v),
        Ok(_) => Ok(T::zero()),
        Err(e) if skippable(&e) => Ok(T::zero()),
        Err(e) => Err(e),
    }
}

/// Maximizes a one-dimensional objective on `[lo, hi]`: uniform grid of
/// `GRID_POINTS` then golden-section around the best grid point.
pub fn grid_then_golden<T: Scalar>(f: impl Fn(T) -> Result<T>, lo: T, hi: T) -> Result<(T, T)> {
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::EmptyRange(lo.to_f64_lossy(), hi.to_f64_lossy()));
    }
    if hi == lo {
        return Ok((lo, f(lo)?));
    }
    let n = GRID_POINTS;
    let h = (hi - lo) / T::from_count(n - 1);
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        vals.push(f(lo + h * T::from_count(i))?);
    }
    let best = argmax(&vals);
    let a = lo + h * T::from_count(best.saturating_sub(1));
    let b = (lo + h * T::from_count((best + 1).min(n - 1))).min(hi);
    let g = |x: T| f(x).unwrap_or_else(|_| T::neg_infinity());
    let (x, v) = golden_max(&g, a, b, T::lit(REFINE_TOL));
    if v >= vals[best] {
        Ok((x, v))
    } else {
        Ok((lo + h * T::from_count(best), vals[best]))
    }
}

fn argmax<T: Scalar>(vals: &[T]) -> usize {
    // first index wins on ties so the search is deterministic
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] || vals[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Optimizes `ξ⁻²(n)` over the generator angle and, for MAI strategies, the
/// MAI time within `mai_range` (scenario's own `mu_mai` is ignored).
pub fn optimize_scenario<T: Scalar>(
    s: &SpinScenario<T>,
    t: &EstimationTarget<T>,
    mai_range: (T, T),
) -> Result<SqueezingOutcome<T>> {
    s.validate()?;
    if t.modes() != s.modes {
        return Err(Error::InvalidTarget(format!("target has {} modes, scenario has {}", t.modes(), s.modes)));
    }
    let mu_mai = if s.strategy.is_mai() {
        let (lo, hi) = mai_range;
        if lo < T::zero() {
            return Err(Error::EmptyRange(lo.to_f64_lossy(), hi.to_f64_lossy()));
        }
        grid_then_golden(|x| spin_objective(&s.with_mu_mai(x)), lo, hi)?.0
    } else {
        T::zero()
    };
    let best = s.with_mu_mai(mu_mai);
    optimize_phi(&spin_moment_data(&best)?, t, mu_mai)
}

/// Best `ξ⁻²` over the MAI time only (angle optimized exactly), cheap enough
/// for nested sweeps.
pub fn best_over_mai<T: Scalar>(s: &SpinScenario<T>) -> Result<(T, T)> {
    if s.strategy == Strategy::Linear {
        return Ok((T::zero(), spin_objective(&s.with_mu_mai(T::zero()))?));
    }
    let (lo, hi) = default_mai_range(s);
    grid_then_golden(|x| spin_objective(&s.with_mu_mai(x)), lo, hi)
}

/// Log-spaced preparation-time window `[0.1 N^{-2/3}, 10 N^{-1/2}]`.
pub fn preparation_window<T: Scalar>(atoms: usize) -> (T, T) {
    let n = T::from_count(atoms);
    let lo = T::lit(0.1) * n.powf(T::lit(-2.0 / 3.0));
    let hi = (T::lit(10.0) * n.powf(T::lit(-0.5))).min(T::PI());
    (lo, hi)
}

/// Jointly optimized point of a scaling sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint<T> {
    pub atoms: usize,
    pub xi2_inv: T,
    pub mu_opt: T,
    pub mu_mai_opt: T,
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Root-mean-square residual in `ln y`.
    pub rms_residual: T,
}

pub fn loglog_fit<T: Scalar>(points: &[(T, T)]) -> Result<LogLogFit<T>> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let xs: Vec<T> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<T> = points.iter().map(|p| p.1.ln()).collect();
    let n = T::from_count(points.len());
    let mx = xs.iter().fold(T::zero(), |a, b| a + *b) / n;
    let my = ys.iter().fold(T::zero(), |a, b| a + *b) / n;
    let dx: Vec<T> = xs.iter().map(|x| *x - mx).collect();
    let dy: Vec<T> = ys.iter().map(|y| *y - my).collect();
    let sxx = dot(&dx, &dx);
    if sxx == T::zero() {
        return Err(Error::InvalidScenario("log-log fit needs distinct abscissae".into()));
    }
    let slope = dot(&dx, &dy) / sxx;
    let intercept = my - slope * mx;
    let ss = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = *y - (intercept + slope * *x);
            r * r
        })
        .fold(T::zero(), |a, b| a + b);
    Ok(LogLogFit { slope, intercept, rms_residual: (ss / n).sqrt() })
}

/// Joint optimum over preparation and MAI times for one atom number.
pub fn optimize_joint<T: Scalar>(s: &SpinScenario<T>) -> Result<ScalingPoint<T>> {
    s.validate()?;
    let (lo, hi) = preparation_window::<T>(s.atoms);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let f = |log_mu: T| best_over_mai(&s.with_mu(log_mu.exp())).map(|(_, v)| v);
    let (log_mu, _) = grid_then_golden(f, llo, lhi)?;
    let mu = log_mu.exp();
    let (mu_mai, xi) = best_over_mai(&s.with_mu(mu))?;
    Ok(ScalingPoint { atoms: s.atoms, xi2_inv: xi, mu_opt: mu, mu_mai_opt: mu_mai })
}

/// Scaling sweep over atom numbers and its log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingSweep<T> {
    pub strategy: Strategy,
    pub points: Vec<ScalingPoint<T>>,
    pub fit: LogLogFit<T>,
}

/// For every `N`, jointly optimizes `μ` and `μ_mai`, then fits `ln ξ⁻²` vs `ln N`.
///
/// `template` supplies modes, preparation and strategy; its times and atom
/// count are overwritten. Points are evaluated in parallel and returned in
/// input order.
pub fn scaling_sweep<T: Scalar>(atoms: &[usize], template: &SpinScenario<T>) -> Result<ScalingSweep<T>> {
    use rayon::prelude::*;
    for &n in atoms {
        if n % template.modes != 0 {
            return Err(Error::InvalidScenario(format!("{n} atoms not divisible by {} modes", template.modes)));
        }
    }
    if atoms.len() < 3 {
        return Err(Error::TooFewPoints(atoms.len()));
    }
    let points = atoms
        .par_iter()
        .map(|&n| {
            let s = SpinScenario { atoms: n, ..*template };
            optimize_joint(&s)
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(T, T)> = points.iter().map(|p| (T::from_count(p.atoms), p.xi2_inv)).collect();
    let fit = loglog_fit(&pairs)?;
    Ok(ScalingSweep { strategy: template.strategy, points, fit })
}
