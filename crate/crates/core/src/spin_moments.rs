//! Closed-form covariance and commutator blocks for one-axis-twisted spin
//! states split over `M` modes of `N/M` atoms each.
//!
//! Measurement basis per mode is `(X_y, X_z)`, the (possibly MAI-evolved)
//! `S_y` and `S_z`. Generator basis per mode is `(S_y, S_z)`.
//!
//! Block conventions:
//! * `gamma_*[i][j]` is the symmetrized covariance `<{X_i, X_j}>/2 - <X_i><X_j>`.
//! * `c_*[i][j]` is `i<[L_i, X_j]>`: rows index the generator basis, columns
//!   the measurement basis. The optimal moment matrix is then `C Γ⁻¹ Cᵀ`.
//!
//! Every formula here is checked entry-by-entry against the exact
//! state-vector simulator in [`crate::oracle`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Matrix};
use crate::scalar::{cos_pow, weighted_cos_pow, Scalar};

/// How the probe state was prepared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Preparation {
    /// Local twisting `Σ_m (S_z^(m))²`: particle entanglement within each mode only.
    ModeSeparable,
    /// Global twisting `(Σ_m S_z^(m))²`: mode and particle entanglement.
    ModeEntangled,
}

/// Readout strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Strategy {
    /// Collective spin components measured directly.
    Linear,
    /// Each mode twisted by its own `(S_z^(m))²` before readout.
    LocalMai,
    /// All modes twisted together by `(Σ_m S_z^(m))²` before readout.
    NonlocalMai,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Linear, Strategy::NonlocalMai, Strategy::LocalMai];

    pub fn is_mai(self) -> bool {
        !matches!(self, Strategy::Linear)
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Linear => "linear",
            Strategy::LocalMai => "local_mai",
            Strategy::NonlocalMai => "nonlocal_mai",
        }
    }
}

/// A split spin-squeezed sensing configuration.
///
/// `mu = 2χt` is the preparation twisting angle and `mu_mai = 2χτ` the MAI
/// twisting angle (ignored by [`Strategy::Linear`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinScenario<T> {
    pub atoms: usize,
    pub modes: usize,
    pub prep: Preparation,
    pub mu: T,
    pub strategy: Strategy,
    pub mu_mai: T,
}

impl<T: Scalar> SpinScenario<T> {
    pub fn new(
        atoms: usize,
        modes: usize,
        prep: Preparation,
        mu: T,
        strategy: Strategy,
        mu_mai: T,
    ) -> Result<Self> {
        let s = Self { atoms, modes, prep, mu, strategy, mu_mai };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms < 2 {
            return Err(Error::InvalidScenario(format!("need at least 2 atoms, got {}", self.atoms)));
        }
        if self.modes == 0 {
            return Err(Error::InvalidScenario("need at least one mode".into()));
        }
        if !self.atoms.is_multiple_of(self.modes) {
            return Err(Error::InvalidScenario(format!(
                "{} atoms cannot be split evenly over {} modes",
                self.atoms, self.modes
            )));
        }
        let ok = |x: T| x.is_finite() && x >= T::zero();
        if !ok(self.mu) || !ok(self.mu_mai) {
            return Err(Error::InvalidScenario("twisting times must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Atoms per mode.
    pub fn local_atoms(&self) -> usize {
        self.atoms / self.modes
    }

    pub fn with_mu(mut self, mu: T) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_mu_mai(mut self, mu_mai: T) -> Self {
        self.mu_mai = mu_mai;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_modes(mut self, modes: usize) -> Self {
        self.modes = modes;
        self
    }

    pub fn with_prep(mut self, prep: Preparation) -> Self {
        self.prep = prep;
        self
    }

    /// Whether [`closed_form_blocks`] can evaluate this scenario.
    pub fn has_closed_form(&self) -> bool {
        !(self.prep == Preparation::ModeSeparable && self.strategy == Strategy::NonlocalMai)
    }

    fn expect(&self, prep: Preparation, strategy: Strategy) -> Result<()> {
        self.validate()?;
        if self.prep != prep || self.strategy != strategy {
            return Err(Error::InvalidScenario(format!(
                "expected {prep:?}/{strategy:?}, got {:?}/{:?}",
                self.prep, self.strategy
            )));
        }
        Ok(())
    }
}

/// The four 2x2 blocks generating the exchange-symmetric `2M x 2M` matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlockSet<T> {
    pub gamma_mm: Mat2<T>,
    pub gamma_mn: Mat2<T>,
    pub c_mm: Mat2<T>,
    pub c_mn: Mat2<T>,
}

impl<T: Scalar> BlockSet<T> {
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.gamma_mm
            .max_abs_diff(&other.gamma_mm)
            .max(self.gamma_mn.max_abs_diff(&other.gamma_mn))
            .max(self.c_mm.max_abs_diff(&other.c_mm))
            .max(self.c_mn.max_abs_diff(&other.c_mn))
    }

    /// Same blocks with both commutator blocks negated.
    pub fn negate_commutator(&self) -> Self {
        Self { c_mm: self.c_mm.scale(-T::one()), c_mn: self.c_mn.scale(-T::one()), ..*self }
    }

    /// Adds `var` to every measured variance (independent detection noise).
    pub fn with_detection_noise(&self, var: T) -> Self {
        Self { gamma_mm: self.gamma_mm + Mat2::identity().scale(var), ..*self }
    }
}

/// Assembled covariance, commutator and shot-noise data for one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentData<T> {
    /// `2M x 2M` symmetrized covariance of the measurement family.
    pub gamma: Matrix<T>,
    /// `2M x 2M` commutator matrix, rows = generator basis, cols = measurements.
    pub commutator: Matrix<T>,
    /// Diagonal entry of the shot-noise Fisher matrix `F_SN = shot_noise · I`.
    pub shot_noise: T,
    pub modes: usize,
    /// Generating blocks, present when the data is exchange symmetric.
    pub blocks: Option<BlockSet<T>>,
}

impl<T: Scalar> MomentData<T> {
    pub fn f_sn(&self) -> Matrix<T> {
        Matrix::identity(self.modes).scale(self.shot_noise)
    }

    /// Drops the generating blocks so consumers take the dense path.
    pub fn dense_only(mut self) -> Self {
        self.blocks = None;
        self
    }

    /// Arbitrary (not necessarily exchange symmetric) data.
    pub fn from_dense(gamma: Matrix<T>, commutator: Matrix<T>, shot_noise: T) -> Result<Self> {
        let n = gamma.rows();
        if !gamma.is_square() || !n.is_multiple_of(2) || commutator.rows() != n || commutator.cols() != n {
            return Err(Error::InvalidScenario("covariance and commutator must both be 2M x 2M".into()));
        }
        Ok(Self { gamma, commutator, shot_noise, modes: n / 2, blocks: None })
    }
}

/// Builds the full matrices: `*_mm` on the diagonal blocks, `*_mn` on every
/// off-diagonal block.
pub fn assemble_full<T: Scalar>(b: &BlockSet<T>, modes: usize, shot_noise: T) -> MomentData<T> {
    assert!(modes >= 1, "at least one mode");
    let n = 2 * modes;
    let mut gamma = Matrix::zeros(n, n);
    let mut commutator = Matrix::zeros(n, n);
    for m in 0..modes {
        for k in 0..modes {
            let (g, c) = if m == k { (&b.gamma_mm, &b.c_mm) } else { (&b.gamma_mn, &b.c_mn) };
            gamma.set_block(2 * m, 2 * k, g);
            commutator.set_block(2 * m, 2 * k, c);
        }
    }
    MomentData { gamma, commutator, shot_noise, modes, blocks: Some(*b) }
}

/// Closed-form blocks and assembled matrices for a spin scenario, with
/// `F_SN = diag(N/M)`.
pub fn spin_moment_data<T: Scalar>(s: &SpinScenario<T>) -> Result<MomentData<T>> {
    let b = closed_form_blocks(s)?;
    Ok(assemble_full(&b, s.modes, T::from_count(s.local_atoms())))
}

/// Dispatches to the closed form matching the scenario's preparation and strategy.
pub fn closed_form_blocks<T: Scalar>(s: &SpinScenario<T>) -> Result<BlockSet<T>> {
    use Preparation::*;
    use Strategy::*;
    match (s.prep, s.strategy) {
        (ModeSeparable, Linear) => blocks_ms_linear(s),
        (ModeSeparable, LocalMai) => blocks_ms_local_mai(s),
        (ModeSeparable, NonlocalMai) => Err(Error::NoClosedForm { prep: s.prep, strategy: s.strategy }),
        (ModeEntangled, Linear) => blocks_me_linear(s),
        (ModeEntangled, LocalMai) => blocks_me_local_mai(s),
        (ModeEntangled, NonlocalMai) => blocks_me_nonlocal_mai(s),
    }
}

struct Sizes<T> {
    /// atoms per mode
    n: T,
    /// `n (n - 1)`
    nn1: T,
    /// `n²`
    n2: T,
    local: i64,
    total: i64,
    modes: i64,
}

fn sizes<T: Scalar>(s: &SpinScenario<T>) -> Sizes<T> {
    let local = s.local_atoms();
    let n = T::from_count(local);
    Sizes {
        n,
        nn1: n * (n - T::one()),
        n2: n * n,
        local: local as i64,
        total: s.atoms as i64,
        modes: s.modes as i64,
    }
}

fn eighth<T: Scalar>() -> T {
    T::lit(0.125)
}

fn quarter<T: Scalar>() -> T {
    T::lit(0.25)
}

fn half<T: Scalar>() -> T {
    T::lit(0.5)
}

/// Single-mode covariance of a twisted coherent state of `n` atoms whose
/// effective twist is `angle` and whose variance exponent is `k`
/// (`k = n - 2` for an isolated mode, `N - 2` for the global twist).
fn twisted_gamma_mm<T: Scalar>(z: &Sizes<T>, angle: T, k: i64) -> Mat2<T> {
    let h = angle * half();
    let n_minus = z.n - T::one();
    let yy = eighth::<T>() * z.n * (z.n + T::one() - weighted_cos_pow(n_minus, angle, k));
    let yz = quarter::<T>() * weighted_cos_pow(z.nn1, h, k) * h.sin();
    Mat2::symmetric(yy, yz, quarter::<T>() * z.n)
}

/// Linear readout commutator: only `i<[S_y, S_z]> = -<S_x>` survives.
fn linear_c_mm<T: Scalar>(z: &Sizes<T>, mu: T, k: i64) -> Mat2<T> {
    let sx = half::<T>() * z.n * cos_pow(mu * half(), k);
    Mat2::new(T::zero(), -sx, sx, T::zero())
}

/// Mode-separable state, linear readout.
pub fn blocks_ms_linear<T: Scalar>(s: &SpinScenario<T>) -> Result<BlockSet<T>> {
    s.expect(Preparation::ModeSeparable, Strategy::Linear)?;
    let z = sizes(s);
    Ok(BlockSet {
        gamma_mm: twisted_gamma_mm(&z, s.mu, z.local - 2),
        gamma_mn: Mat2::zero(),
        c_mm: linear_c_mm(&z, s.mu, z.local - 1),
        c_mn: Mat2::zero(),
    })
}

/// Mode-separable state, each mode un-twisted locally before readout.
pub fn blocks_ms_local_mai<T: Scalar>(s: &SpinScenario<T>) -> Result<BlockSet<T>> {
    s.expect(Preparation::ModeSeparable, Strategy::LocalMai)?;
    let z = sizes(s);
    let (mu, ml) = (s.mu, s.mu_mai);
    let delta = mu - ml;
    let hl = ml * half();
    let k2 = z.local - 2;
    let k1 = z.local - 1;
    let yy = quarter::<T>()
        * (weighted_cos_pow(z.nn1, mu - hl, k2) + weighted_cos_pow(z.nn1, hl, k2))
        * hl.sin();
    let yz = -half::<T>() * z.n * cos_pow(mu * half(), k1);
    let zy = half::<T>() * z.n * cos_pow(delta * half(), k1);
    Ok(BlockSet {
        gamma_mm: twisted_gamma_mm(&z, delta, k2),
        gamma_mn: Mat2::zero(),
        c_mm: Mat2::new(yy, yz, zy, T::zero()),
        c_mn: Mat2::zero(),
    })
}

/// Mode-entangled state, linear readout.
pub fn blocks_me_linear<T: Scalar>(s: &SpinScenario<T>) -> Result<BlockSet<T>> {
    s.expect(Preparation::ModeEntangled, Strategy::Linear)?;
    let z = sizes(s);
    Ok(BlockSet {
        gamma_mm: twisted_gamma_mm(&z, s.mu, z.total - 2),
        gamma_mn: me_gamma_mn(&z, s.mu, s.modes),
        c_mm: linear_c_mm(&z, s.mu, z.total - 1),
        c_mn: Mat2::zero(),
    })
}

/// Cross-mode covariance of the globally twisted state with effective twist `angle`.
fn me_gamma_mn<T: Scalar>(z: &Sizes<T>, angle: T, modes: usize) -> Mat2<T> {
    if modes < 2 {
        return Mat2::zero();
    }
    let k = z.total - 2;
    let h = angle * half();
    let yy = eighth::<T>() * z.n2 * (T::one() - cos_pow(angle, k));
    let yz = quarter::<T>() * z.n2 * cos_pow(h, k) * h.sin();
    Mat2::symmetric(yy, yz, T::zero())
}

/// Mode-entangled state, global un-twist before readout.
pub fn blocks_me_nonlocal_mai<T: Scalar>(s: &SpinScenario<T>) -> Result<BlockSet<T>> {
    s.expect(Preparation::ModeEntangled, Strategy::NonlocalMai)?;
    let z = sizes(s);
    let (mu, ml) = (s.mu, s.mu_mai);
    let delta = mu - ml;
    let hl = ml * half();
    let k2 = z.total - 2;
    let k1 = z.total - 1;
    let echo = (cos_pow(mu - hl, k2) + cos_pow(hl, k2)) * hl.sin();
    let c_mm = Mat2::new(
        quarter::<T>() * z.nn1 * echo,
        -half::<T>() * z.n * cos_pow(mu * half(), k1),
        half::<T>() * z.n * cos_pow(delta * half(), k1),
        T::zero(),
    );
    let c_mn = if s.modes < 2 {
        Mat2::zero()
    } else {
        Mat2::new(quarter::<T>() * z.n2 * echo, T::zero(), T::zero(), T::zero())
    };
    Ok(BlockSet {
        gamma_mm: twisted_gamma_mm(&z, delta, k2),
        gamma_mn: me_gamma_mn(&z, delta, s.modes),
        c_mm,
        c_mn,
    })
}

/// Mode-entangled state, each mode un-twisted locally before readout.
pub fn blocks_me_local_mai<T: Scalar>(s: &SpinScenario<T>) -> Result<BlockSet<T>> {
    s.expect(Preparation::ModeEntangled, Strategy::LocalMai)?;
    let z = sizes(s);
    let (mu, ml) = (s.mu, s.mu_mai);
    let delta = mu - ml;
    let h = mu * half();
    let hd = delta * half();
    let hl = ml * half();
    let rest = (z.modes - 1) * z.local;
    let k2 = z.local - 2;
    let k1 = z.local - 1;
    let n_minus = z.n - T::one();

    // other modes' atoms only dephase: each contributes a cos(μ) (or cos(μ/2)) factor
    let spectators = cos_pow(mu, rest);
    let spectators_half = cos_pow(h, rest);

    let gyy = eighth::<T>() * z.n * (z.n + T::one() - spectators * weighted_cos_pow(n_minus, delta, k2));
    let gyz = quarter::<T>() * spectators_half * weighted_cos_pow(z.nn1, hd, k2) * hd.sin();
    let gamma_mm = Mat2::symmetric(gyy, gyz, quarter::<T>() * z.n);

    let gamma_mn = if s.modes < 2 {
        Mat2::zero()
    } else {
        let pair = 2 * z.local - 2;
        let yy = eighth::<T>()
            * z.n2
            * (cos_pow(hl, pair) - cos_pow(mu, (z.modes - 2) * z.local) * cos_pow(mu - hl, pair));
        let yz = quarter::<T>() * z.n2 * cos_pow(h, rest - 1) * cos_pow(hd, k1) * h.sin();
        Mat2::symmetric(yy, yz, T::zero())
    };

    let cyy = quarter::<T>()
        * (spectators * weighted_cos_pow(z.nn1, mu - hl, k2) + weighted_cos_pow(z.nn1, hl, k2))
        * hl.sin();
    let cyz = -half::<T>() * z.n * cos_pow(h, z.total - 1);
    let czy = half::<T>() * z.n * spectators_half * cos_pow(hd, k1);
    Ok(BlockSet {
        gamma_mm,
        gamma_mn,
        c_mm: Mat2::new(cyy, cyz, czy, T::zero()),
        c_mn: Mat2::zero(),
    })
}
