//! Vectorized Lindblad generator over the state space
//! `{source, network nodes 1..=N, drain}`.
//!
//! Density matrices are column-stacked: entry `(r, c)` lives at index
//! `c·d + r` with `d = N + 2`. Under that convention `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eigenvalues, hermiticity_defect, ket_bra, kron};
use crate::network::{
    hamiltonian, incoherent_rates, source_state, DrainConfig, MixingParams, NetworkSpec,
    SourceConfig, SourceMode,
};
use crate::{CMatrix, CVector, C64};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = -1e-9;

/// A Lindblad jump operator with its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub matrix: CMatrix,
    pub rate: f64,
}

impl JumpOperator {
    pub fn new(matrix: CMatrix, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::param("rate", format!("jump rate {rate} must be finite and >= 0")));
        }
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(Self { matrix, rate })
    }
}

/// Parameters a generator was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMeta {
    pub n_nodes: usize,
    pub mixing: MixingParams,
    pub source_rate: f64,
    pub drain_rate: f64,
    pub phase: f64,
    pub mode: SourceMode,
}

/// Matrix of the master-equation generator acting on vectorized density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub matrix: CMatrix,
    pub meta: GeneratorMeta,
}

impl Generator {
    /// Side length `N + 2` of the density matrices this generator acts on.
    pub fn dim(&self) -> usize {
        self.meta.n_nodes + 2
    }

    pub fn drain_index(&self) -> usize {
        self.meta.n_nodes + 1
    }

    /// Vector index of the drain population `ρ_{N+1,N+1}`.
    pub fn drain_coordinate(&self) -> usize {
        let d = self.dim();
        self.drain_index() * d + self.drain_index()
    }

    /// `dρ/dt` for the given (not necessarily physical) matrix.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let v = vectorize_matrix(rho, self.dim())?;
        devectorize(&(&self.matrix * v), self.dim())
    }

    /// Short hex digest of the matrix entries, used to tag trajectories.
    pub fn fingerprint(&self) -> String {
        // FNV-1a over the raw bit patterns.
        let mut h: u64 = 0xcbf29ce484222325;
        for z in self.matrix.iter() {
            for word in [z.re.to_bits(), z.im.to_bits()] {
                for b in word.to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        format!("{h:016x}")
    }
}

/// A validated density matrix over `{0..=N+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Accepts a matrix that is Hermitian, unit trace and positive semidefinite
    /// within the crate tolerances.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = matrix.trace();
        if (tr - C64::from(1.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(matrix))
    }

    /// Wraps a propagated state without re-validating it.
    pub(crate) fn from_propagated(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    /// `|k⟩⟨k|` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: k });
        }
        Ok(Self(ket_bra(dim, k, k)))
    }

    /// Excitation in the source node, the initial condition for survival times.
    pub fn source_initial(n_nodes: usize) -> Self {
        Self(ket_bra(n_nodes + 2, 0, 0))
    }

    /// `|ψ⟩⟨ψ|` for a normalized state over the full space.
    pub fn pure(psi: &CVector) -> Result<Self> {
        Self::new(psi * psi.adjoint())
    }

    /// `|ψ⟩⟨ψ|` for a state given over network nodes only, embedded at `1..=N`.
    pub fn pure_network(psi: &CVector) -> Result<Self> {
        let n = psi.len();
        let mut full = CVector::zeros(n + 2);
        full.rows_mut(1, n).copy_from(psi);
        Self::pure(&full)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// Column-stacks a density matrix.
pub fn vectorize(rho: &DensityMatrix) -> CVector {
    CVector::from_column_slice(rho.0.as_slice())
}

/// Column-stacks any square matrix of side `dim`.
pub fn vectorize_matrix(m: &CMatrix, dim: usize) -> Result<CVector> {
    if m.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m.nrows(),
        });
    }
    // nalgebra storage is column-major, so the raw slice is the stacking.
    Ok(CVector::from_column_slice(m.as_slice()))
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &CVector, dim: usize) -> Result<CMatrix> {
    if v.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: v.len(),
        });
    }
    Ok(CMatrix::from_column_slice(dim, dim, v.as_slice()))
}

/// Superoperator of `rate·(LρL† − ½{L†L, ρ})`:
/// `rate·(L̄ ⊗ L − ½ I ⊗ L†L − ½ (L†L)ᵀ ⊗ I)`.
pub fn dissipator(jump: &JumpOperator) -> CMatrix {
    let l = &jump.matrix;
    let d = l.nrows();
    let eye = CMatrix::identity(d, d);
    let ldl = l.adjoint() * l;
    let half = C64::from(0.5);
    (kron(&l.conjugate(), l) - kron(&eye, &ldl) * half - kron(&ldl.transpose(), &eye) * half)
        * C64::from(jump.rate)
}

/// Superoperator of `−i[H, ρ]`.
pub fn commutator(h: &CMatrix) -> CMatrix {
    let d = h.nrows();
    let eye = CMatrix::identity(d, d);
    (kron(&eye, h) - kron(&h.transpose(), &eye)) * C64::new(0.0, -1.0)
}

/// Full generator
/// `(1−α)·L_coh + α·(L_hop + L_deph) + L_source + L_drain`.
///
/// Source and drain act at full strength for every `α`; only the network's
/// own coherent and environmental parts are interpolated. Dephasing acts on
/// network nodes only.
pub fn assemble_generator(
    spec: &NetworkSpec,
    src: &SourceConfig,
    drain: &DrainConfig,
    mix: &MixingParams,
) -> Result<Generator> {
    src.validate(spec)?;
    drain.validate(spec)?;
    let n = spec.n_nodes();
    let d = n + 2;
    let alpha = mix.alpha();

    let mut h_full = CMatrix::zeros(d, d);
    h_full.view_mut((1, 1), (n, n)).copy_from(&hamiltonian(spec));

    let mut env = CMatrix::zeros(d * d, d * d);
    let rates = incoherent_rates(spec);
    for k in 0..n {
        for l in 0..n {
            let rate = if k == l { mix.dephasing() } else { rates[(k, l)] };
            if rate > 0.0 {
                env += dissipator(&JumpOperator::new(ket_bra(d, k + 1, l + 1), rate)?);
            }
        }
    }

    let mut matrix = commutator(&h_full) * C64::from(1.0 - alpha) + env * C64::from(alpha);
    matrix += source_part(spec, src)?;
    matrix += dissipator(&JumpOperator::new(ket_bra(d, n + 1, drain.target), drain.rate)?);

    Ok(Generator {
        matrix,
        meta: GeneratorMeta {
            n_nodes: n,
            mixing: *mix,
            source_rate: src.rate,
            drain_rate: drain.rate,
            phase: src.phase,
            mode: src.mode,
        },
    })
}

fn source_part(spec: &NetworkSpec, src: &SourceConfig) -> Result<CMatrix> {
    let n = spec.n_nodes();
    let d = n + 2;
    match src.mode {
        SourceMode::Independent => {
            let share = src.rate / src.targets.len() as f64;
            let mut out = CMatrix::zeros(d * d, d * d);
            for &t in &src.targets {
                out += dissipator(&JumpOperator::new(ket_bra(d, t, 0), share)?);
            }
            Ok(out)
        }
        SourceMode::Correlated => {
            let psi = source_state(src, n)?;
            let mut l = CMatrix::zeros(d, d);
            for k in 0..n {
                l[(k + 1, 0)] = psi[k];
            }
            Ok(dissipator(&JumpOperator::new(l, src.rate)?))
        }
    }
}

/// Largest real part of the generator spectrum.
pub fn spectral_abscissa(g: &Generator) -> Result<f64> {
    linalg::spectral_abscissa(&g.matrix)
}
