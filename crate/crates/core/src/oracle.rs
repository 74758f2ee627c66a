//! Exact collective-spin simulator used to check the closed forms.
//!
//! Each mode of `n` atoms lives in its maximal-spin sector `J = n/2`, so the
//! state space is `(n + 1)^M`. Basis index digit `k_m` (mode 0 most
//! significant) encodes `m_z = n/2 - k_m`. Twisting unitaries are diagonal in
//! this basis, so evolution and MAI conjugation reduce to phase products.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Matrix};
use crate::optimizer::{optimize_phi, EstimationTarget};
use crate::scalar::Scalar;
use crate::spin_moments::{BlockSet, MomentData, Preparation, SpinScenario, Strategy};

/// Largest state dimension the simulator will build.
pub const DIMENSION_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Which spins a twisting unitary `exp(-i μ/2 (Σ S_z)²)` acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    AllModes,
    SingleMode(usize),
}

fn dimension(modes: usize, local: usize) -> Result<usize> {
    let base = local + 1;
    let mut dim: usize = 1;
    for _ in 0..modes {
        dim = dim
            .checked_mul(base)
            .filter(|d| *d <= DIMENSION_CAP)
            .ok_or(Error::DimensionCap { dim: usize::MAX, cap: DIMENSION_CAP })?;
    }
    Ok(dim)
}

/// Product-basis layout shared by states and operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub modes: usize,
    pub local: usize,
    pub dim: usize,
}

impl Layout {
    pub fn new(modes: usize, local: usize) -> Result<Self> {
        if modes == 0 || local == 0 {
            return Err(Error::InvalidScenario("oracle needs at least one mode and one atom per mode".into()));
        }
        let dim = dimension(modes, local).map_err(|_| Error::DimensionCap {
            dim: (local + 1).saturating_pow(modes as u32),
            cap: DIMENSION_CAP,
        })?;
        Ok(Self { modes, local, dim })
    }

    fn stride(&self, mode: usize) -> usize {
        (self.local + 1).pow((self.modes - 1 - mode) as u32)
    }

    fn digit(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % (self.local + 1)
    }

    /// Twice the `S_z` eigenvalue of `mode` at basis `index` (kept integral).
    fn twice_mz(&self, index: usize, mode: usize) -> i64 {
        self.local as i64 - 2 * self.digit(index, mode) as i64
    }

    fn twice_mz_scope(&self, index: usize, scope: Scope) -> i64 {
        match scope {
            Scope::AllModes => (0..self.modes).map(|m| self.twice_mz(index, m)).sum(),
            Scope::SingleMode(m) => self.twice_mz(index, m),
        }
    }

    /// Diagonal of `exp(-i μ/2 (Σ_scope S_z)²)`.
    fn oat_phases<T: Scalar>(&self, mu: T, scope: Scope) -> Vec<Complex<T>> {
        let quarter = T::lit(0.25);
        (0..self.dim)
            .map(|i| {
                let two_m = T::from_i64(self.twice_mz_scope(i, scope)).unwrap();
                // m² = (2m)² / 4
                let angle = -(mu * T::lit(0.5)) * two_m * two_m * quarter;
                Complex::from_polar(T::one(), angle)
            })
            .collect()
    }
}

/// Pure state over the per-mode symmetric sectors.
#[derive(Clone, Debug)]
pub struct CollectiveState<T> {
    pub layout: Layout,
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> CollectiveState<T> {
    pub fn norm(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt()
    }

    /// `<self|op|self>`.
    pub fn expect(&self, op: &SparseOp<T>) -> Complex<T> {
        inner(&self.amplitudes, &op.apply(&self.amplitudes))
    }
}

/// Every atom polarized along +x: a product of binomial amplitudes per mode.
pub fn coherent_x_state<T: Scalar>(modes: usize, local: usize) -> Result<CollectiveState<T>> {
    let layout = Layout::new(modes, local)?;
    let norm = T::lit(2.0).powi(local as i32).sqrt();
    let per_mode: Vec<T> = (0..=local).map(|k| binomial::<T>(local, k).sqrt() / norm).collect();
    let amplitudes = (0..layout.dim)
        .map(|i| {
            let amp = (0..modes).fold(T::one(), |acc, m| acc * per_mode[layout.digit(i, m)]);
            Complex::new(amp, T::zero())
        })
        .collect();
    Ok(CollectiveState { layout, amplitudes })
}

fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    let k = k.min(n - k);
    (0..k).fold(T::one(), |acc, i| acc * T::from_count(n - i) / T::from_count(i + 1))
}

/// Applies `exp(-i μ/2 (Σ_scope S_z)²)`.
pub fn evolve_oat<T: Scalar>(st: &CollectiveState<T>, mu: T, scope: Scope) -> CollectiveState<T> {
    let phases = st.layout.oat_phases(mu, scope);
    CollectiveState {
        layout: st.layout,
        amplitudes: st.amplitudes.iter().zip(&phases).map(|(a, p)| *a * *p).collect(),
    }
}

/// Sparse operator as `(row, col, value)` triplets sorted by row.
#[derive(Clone, Debug)]
pub struct SparseOp<T> {
    pub dim: usize,
    pub entries: Vec<(usize, usize, Complex<T>)>,
}

impl<T: Scalar> SparseOp<T> {
    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.dim];
        for &(r, c, x) in &self.entries {
            out[r] = out[r] + x * v[c];
        }
        out
    }

    /// Dense copy, row-major. Only for small dimensions.
    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        let mut out = vec![vec![Complex::new(T::zero(), T::zero()); self.dim]; self.dim];
        for &(r, c, x) in &self.entries {
            out[r][c] = out[r][c] + x;
        }
        out
    }

    pub fn hermiticity_residual(&self) -> T {
        let d = self.to_dense();
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((d[i][j] - d[j][i].conj()).norm());
            }
        }
        worst
    }
}

/// `S_axis` acting on `mode`, identity elsewhere.
pub fn observable_matrix<T: Scalar>(modes: usize, local: usize, mode: usize, axis: Axis) -> Result<SparseOp<T>> {
    let layout = Layout::new(modes, local)?;
    if mode >= modes {
        return Err(Error::InvalidScenario(format!("mode {mode} out of range for {modes} modes")));
    }
    Ok(spin_op(&layout, mode, axis))
}

fn spin_op<T: Scalar>(layout: &Layout, mode: usize, axis: Axis) -> SparseOp<T> {
    let j = T::from_count(layout.local) * T::lit(0.5);
    let stride = layout.stride(mode);
    let zero = T::zero();
    let half = T::lit(0.5);
    let mut entries = Vec::new();
    for i in 0..layout.dim {
        let k = layout.digit(i, mode);
        let m = j - T::from_count(k);
        match axis {
            Axis::Z => {
                if m != zero {
                    entries.push((i, i, Complex::new(m, zero)));
                }
            }
            Axis::X | Axis::Y => {
                // <m+1|S+|m> couples digit k to k-1, <m-1|S-|m> to k+1
                if k > 0 {
                    let amp = (j * (j + T::one()) - m * (m + T::one())).sqrt() * half;
                    let v = match axis {
                        Axis::X => Complex::new(amp, zero),
                        _ => Complex::new(zero, -amp),
                    };
                    entries.push((i - stride, i, v));
                }
                if k < layout.local {
                    let amp = (j * (j + T::one()) - m * (m - T::one())).sqrt() * half;
                    let v = match axis {
                        Axis::X => Complex::new(amp, zero),
                        _ => Complex::new(zero, amp),
                    };
                    entries.push((i + stride, i, v));
                }
            }
        }
    }
    entries.sort_by_key(|e| (e.0, e.1));
    SparseOp { dim: layout.dim, entries }
}

/// `U† X U` with the reversed twist `U = exp(+i μ_mai/2 (Σ_scope S_z)²)`.
///
/// MAI un-twists the probe, so `μ_mai = μ` on a globally twisted state is a
/// perfect echo.
pub fn mai_observable<T: Scalar>(ob: &SparseOp<T>, layout: &Layout, mu_mai: T, scope: Scope) -> SparseOp<T> {
    let u = layout.oat_phases(-mu_mai, scope);
    SparseOp {
        dim: ob.dim,
        entries: ob.entries.iter().map(|&(r, c, x)| (r, c, u[r].conj() * x * u[c])).collect(),
    }
}

fn inner<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// Exact blocks plus the worst imaginary residue seen in the covariances.
#[derive(Clone, Debug)]
pub struct OracleBlocks<T> {
    pub blocks: BlockSet<T>,
    pub imag_residue: T,
}

/// Builds the prepared state, the measurement family and evaluates all four
/// blocks from modes 0 and 1.
pub fn oracle_blocks<T: Scalar>(s: &SpinScenario<T>) -> Result<BlockSet<T>> {
    oracle_blocks_detailed(s).map(|o| o.blocks)
}

pub fn oracle_blocks_detailed<T: Scalar>(s: &SpinScenario<T>) -> Result<OracleBlocks<T>> {
    s.validate()?;
    let layout = Layout::new(s.modes, s.local_atoms())?;
    let mut psi = coherent_x_state::<T>(s.modes, s.local_atoms())?;
    match s.prep {
        Preparation::ModeEntangled => psi = evolve_oat(&psi, s.mu, Scope::AllModes),
        Preparation::ModeSeparable => {
            for m in 0..s.modes {
                psi = evolve_oat(&psi, s.mu, Scope::SingleMode(m));
            }
        }
    }
    let amps = &psi.amplitudes;

    let probed: Vec<usize> = if s.modes > 1 { vec![0, 1] } else { vec![0] };
    let gens: Vec<[Vec<Complex<T>>; 2]> = probed
        .iter()
        .map(|&m| [spin_op(&layout, m, Axis::Y).apply(amps), spin_op(&layout, m, Axis::Z).apply(amps)])
        .collect();

    // measurement vectors X|ψ> with X = U† A U
    let meas: Vec<[Vec<Complex<T>>; 2]> = probed
        .iter()
        .map(|&m| {
            let scope = match s.strategy {
                Strategy::Linear => None,
                Strategy::NonlocalMai => Some(Scope::AllModes),
                Strategy::LocalMai => Some(Scope::SingleMode(m)),
            };
            [Axis::Y, Axis::Z].map(|axis| {
                let op = spin_op::<T>(&layout, m, axis);
                match scope {
                    None => op.apply(amps),
                    Some(sc) => mai_observable(&op, &layout, s.mu_mai, sc).apply(amps),
                }
            })
        })
        .collect();

    let means: Vec<[Complex<T>; 2]> = meas.iter().map(|pair| [0, 1].map(|k| inner(amps, &pair[k]))).collect();
    let mut imag_residue = means.iter().flatten().fold(T::zero(), |acc, z| acc.max(z.im.abs()));

    let mut cov = |a: usize, b: usize| -> Mat2<T> {
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                // <{A,B}>/2 = Re <Aψ|Bψ> for Hermitian A, B
                let ab = inner(&meas[a][i], &meas[b][j]);
                let cross = means[a][i] * means[b][j];
                imag_residue = imag_residue.max(cross.im.abs());
                out.m[i][j] = ab.re - cross.re;
            }
        }
        out
    };
    let gamma_mm = cov(0, 0);
    let gamma_mn = if s.modes > 1 { cov(0, 1) } else { Mat2::zero() };

    // i<[L, X]> = i(<Lψ|Xψ> - <Xψ|Lψ>) = -2 Im <Lψ|Xψ>
    let comm = |a: usize, b: usize| -> Mat2<T> {
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = -T::lit(2.0) * inner(&gens[a][i], &meas[b][j]).im;
            }
        }
        out
    };
    let c_mm = comm(0, 0);
    let c_mn = if s.modes > 1 { comm(0, 1) } else { Mat2::zero() };

    Ok(OracleBlocks { blocks: BlockSet { gamma_mm, gamma_mn, c_mm, c_mn }, imag_residue })
}

/// Full `2M x 2M` matrices built entry-by-entry from the simulator, without
/// assuming exchange symmetry.
pub fn oracle_moment_data<T: Scalar>(s: &SpinScenario<T>) -> Result<MomentData<T>> {
    s.validate()?;
    let layout = Layout::new(s.modes, s.local_atoms())?;
    let mut psi = coherent_x_state::<T>(s.modes, s.local_atoms())?;
    match s.prep {
        Preparation::ModeEntangled => psi = evolve_oat(&psi, s.mu, Scope::AllModes),
        Preparation::ModeSeparable => {
            for m in 0..s.modes {
                psi = evolve_oat(&psi, s.mu, Scope::SingleMode(m));
            }
        }
    }
    let amps = &psi.amplitudes;
    let n = 2 * s.modes;
    let axes = [Axis::Y, Axis::Z];
    let gens: Vec<Vec<Complex<T>>> =
        (0..n).map(|k| spin_op::<T>(&layout, k / 2, axes[k % 2]).apply(amps)).collect();
    let meas: Vec<Vec<Complex<T>>> = (0..n)
        .map(|k| {
            let op = spin_op::<T>(&layout, k / 2, axes[k % 2]);
            match s.strategy {
                Strategy::Linear => op.apply(amps),
                Strategy::NonlocalMai => mai_observable(&op, &layout, s.mu_mai, Scope::AllModes).apply(amps),
                Strategy::LocalMai => mai_observable(&op, &layout, s.mu_mai, Scope::SingleMode(k / 2)).apply(amps),
            }
        })
        .collect();
    let means: Vec<T> = meas.iter().map(|v| inner(amps, v).re).collect();
    let gamma = Matrix::from_fn(n, n, |i, j| inner(&meas[i], &meas[j]).re - means[i] * means[j]).symmetrize();
    let commutator = Matrix::from_fn(n, n, |i, j| -T::lit(2.0) * inner(&gens[i], &meas[j]).im);
    Ok(MomentData { gamma, commutator, shot_noise: T::from_count(s.local_atoms()), modes: s.modes, blocks: None })
}

/// Oracle blocks wrapped as exchange-symmetric moment data.
pub fn oracle_block_data<T: Scalar>(s: &SpinScenario<T>) -> Result<MomentData<T>> {
    let b = oracle_blocks(s)?;
    Ok(crate::spin_moments::assemble_full(&b, s.modes, T::from_count(s.local_atoms())))
}

/// `ξ⁻²(n)` at the scenario's own MAI time, from the full simulator matrices,
/// optimized over the common generator angle.
pub fn oracle_xi2<T: Scalar>(s: &SpinScenario<T>, t: &EstimationTarget<T>) -> Result<T> {
    let md = oracle_moment_data(s)?;
    optimize_phi(&md, t, s.mu_mai).map(|o| o.xi2_inv)
}
