//! Closed network description, source/drain attachments and dark-state
//! analysis of the network Hamiltonian.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::{CMatrix, CVector, C64};

/// Eigenvectors whose amplitude on the drained site is below this value are dark.
pub const DARK_THRESHOLD: f64 = 1e-10;

/// Site energies, symmetric couplings and the environment constant `Λ` that
/// converts couplings into incoherent hopping rates `Λ |V_kl|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    site_energies: Vec<f64>,
    couplings: DMatrix<f64>,
    env_constant: f64,
}

impl NetworkSpec {
    pub fn new(site_energies: Vec<f64>, couplings: DMatrix<f64>, env_constant: f64) -> Result<Self> {
        let n = site_energies.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        if couplings.shape() != (n, n) {
            return Err(Error::InvalidNetwork(format!(
                "coupling matrix is {}x{}, expected {n}x{n}",
                couplings.nrows(),
                couplings.ncols()
            )));
        }
        if site_energies.iter().chain(couplings.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite energy or coupling".into()));
        }
        for k in 0..n {
            if couplings[(k, k)] != 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "coupling diagonal must be zero (node {})",
                    k + 1
                )));
            }
            for l in 0..k {
                if couplings[(k, l)] != couplings[(l, k)] {
                    return Err(Error::InvalidNetwork(format!(
                        "couplings not symmetric between nodes {} and {}",
                        l + 1,
                        k + 1
                    )));
                }
            }
        }
        if !(env_constant >= 0.0 && env_constant.is_finite()) {
            return Err(Error::param("lambda_env", "must be finite and >= 0"));
        }
        Ok(Self {
            site_energies,
            couplings,
            env_constant,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.site_energies.len()
    }

    pub fn site_energies(&self) -> &[f64] {
        &self.site_energies
    }

    /// Couplings indexed from 0 (entry `(k-1, l-1)` is `V_kl`).
    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    pub fn env_constant(&self) -> f64 {
        self.env_constant
    }

    /// Checks that a 1-based network label exists.
    pub fn check_node(&self, node: usize, what: &str) -> Result<()> {
        if node == 0 || node > self.n_nodes() {
            return Err(Error::InvalidNetwork(format!(
                "{what} node {node} outside 1..={}",
                self.n_nodes()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceMode {
    /// One dissipator per target, each at `Γ / k`; no coherence is injected.
    Independent,
    /// A single dissipator at `Γ` feeding a phased superposition of the targets.
    Correlated,
}

impl SourceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceMode::Independent => "independent",
            SourceMode::Correlated => "correlated",
        }
    }
}

impl std::str::FromStr for SourceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(SourceMode::Independent),
            "correlated" => Ok(SourceMode::Correlated),
            other => Err(Error::param(
                "mode",
                format!("`{other}` is not one of independent|correlated"),
            )),
        }
    }
}

/// Incoherent injection from the source node into the network.
///
/// Targets are 1-based network labels. With two targets a correlated source
/// feeds `(|t₁⟩ + e^{iφ}|t₂⟩)/√2`. More than two targets are accepted as an
/// extension: the first target carries amplitude 1 and every other target
/// carries `e^{iφ}`, all with equal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub mode: SourceMode,
    pub targets: Vec<usize>,
    pub rate: f64,
    pub phase: f64,
}

impl SourceConfig {
    pub fn independent(targets: Vec<usize>, rate: f64) -> Self {
        Self {
            mode: SourceMode::Independent,
            targets,
            rate,
            phase: 0.0,
        }
    }

    pub fn correlated(targets: Vec<usize>, rate: f64, phase: f64) -> Self {
        Self {
            mode: SourceMode::Correlated,
            targets,
            rate,
            phase,
        }
    }

    /// Same targets and rate, switched to a correlated source with `phase`.
    pub fn with_correlation(mut self, phase: f64) -> Self {
        self.mode = SourceMode::Correlated;
        self.phase = phase;
        self
    }

    pub fn with_mode(mut self, mode: SourceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidNetwork("source has no targets".into()));
        }
        for (i, &t) in self.targets.iter().enumerate() {
            spec.check_node(t, "source target")?;
            if self.targets[..i].contains(&t) {
                return Err(Error::InvalidNetwork(format!("duplicate source target {t}")));
            }
        }
        if self.mode == SourceMode::Correlated && self.targets.len() < 2 {
            return Err(Error::InvalidNetwork(
                "correlated source needs at least two targets".into(),
            ));
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::param("Gamma", "must be finite and >= 0"));
        }
        if !self.phase.is_finite() {
            return Err(Error::param("phi", "must be finite"));
        }
        Ok(())
    }
}

/// Absorption from one network node into the drain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrainConfig {
    /// 1-based network label.
    pub target: usize,
    pub rate: f64,
}

impl DrainConfig {
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        spec.check_node(self.target, "drain")?;
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::param("gamma", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Interpolation weight `α` between coherent (`0`) and incoherent (`1`)
/// dynamics, and the global dephasing rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingParams {
    alpha: f64,
    dephasing: f64,
}

impl MixingParams {
    pub fn new(alpha: f64, dephasing: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("{alpha} not in [0, 1]")));
        }
        if !(dephasing >= 0.0 && dephasing.is_finite()) {
            return Err(Error::param("lambda", format!("{dephasing} must be finite and >= 0")));
        }
        Ok(Self { alpha, dephasing })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dephasing(&self) -> f64 {
        self.dephasing
    }
}

/// The symmetric V-shaped trimer: equal site energies 1, end nodes 1 and 2
/// both coupled to node 3 with strength 1, no direct 1–2 bond, `Λ = 1`.
/// The source feeds nodes 1 and 2 independently (switch with
/// [`SourceConfig::with_correlation`]) and node 3 is drained.
pub fn symmetric_trimer(source_rate: f64, drain_rate: f64) -> (NetworkSpec, SourceConfig, DrainConfig) {
    let couplings = DMatrix::from_row_slice(3, 3, &[0., 0., 1., 0., 0., 1., 1., 1., 0.]);
    let spec = NetworkSpec::new(vec![1.0; 3], couplings, 1.0).expect("static trimer is valid");
    (
        spec,
        SourceConfig::independent(vec![1, 2], source_rate),
        DrainConfig {
            target: 3,
            rate: drain_rate,
        },
    )
}

/// Network Hamiltonian over nodes `1..=N` (row/column `k-1` is node `k`).
pub fn hamiltonian(spec: &NetworkSpec) -> CMatrix {
    let n = spec.n_nodes();
    CMatrix::from_fn(n, n, |k, l| {
        if k == l {
            C64::from(spec.site_energies[k])
        } else {
            C64::from(spec.couplings[(k, l)])
        }
    })
}

/// Incoherent hopping rates `Λ |V_kl|²`, zero on the diagonal.
pub fn incoherent_rates(spec: &NetworkSpec) -> DMatrix<f64> {
    spec.couplings.map(|v| spec.env_constant * v * v)
}

/// The state injected by a correlated source, as amplitudes over network nodes.
pub fn source_state(src: &SourceConfig, n_nodes: usize) -> Result<CVector> {
    if src.mode != SourceMode::Correlated {
        return Err(Error::RequiresCorrelatedSource);
    }
    if src.targets.len() < 2 {
        return Err(Error::InvalidNetwork(
            "correlated source needs at least two targets".into(),
        ));
    }
    let weight = 1.0 / (src.targets.len() as f64).sqrt();
    let phase = C64::from_polar(weight, src.phase);
    let mut psi = CVector::zeros(n_nodes);
    for (i, &t) in src.targets.iter().enumerate() {
        if t == 0 || t > n_nodes {
            return Err(Error::InvalidNetwork(format!("source target {t} outside 1..={n_nodes}")));
        }
        psi[t - 1] = if i == 0 { C64::from(weight) } else { phase };
    }
    Ok(psi)
}

/// A Hamiltonian eigenvector with no weight on the drained node.
#[derive(Debug, Clone, PartialEq)]
pub struct DarkState {
    /// Amplitudes over network nodes (index `k-1` is node `k`).
    pub amplitudes: CVector,
    pub eigenvalue: f64,
    pub drain_overlap: f64,
}

impl DarkState {
    /// Renders the state as an unnormalized ket, scaled so that the first
    /// nonzero amplitude is 1, e.g. `|1>-|2>`.
    pub fn ket_label(&self) -> String {
        let lead = self
            .amplitudes
            .iter()
            .find(|a| a.norm() > 1e-12)
            .copied()
            .unwrap_or(C64::from(1.0));
        let mut out = String::new();
        for (k, a) in self.amplitudes.iter().enumerate() {
            let z = a / lead;
            if z.norm() < 1e-9 {
                continue;
            }
            let term = format_coefficient(z);
            if out.is_empty() {
                out.push_str(term.strip_prefix('+').unwrap_or(&term));
            } else {
                out.push_str(&term);
            }
            out.push_str(&format!("|{}>", k + 1));
        }
        out
    }
}

fn format_coefficient(z: C64) -> String {
    let round = |x: f64| (x * 1e6).round() / 1e6;
    if z.im.abs() < 1e-9 {
        let re = round(z.re);
        match re {
            x if x == 1.0 => "+".into(),
            x if x == -1.0 => "-".into(),
            x if x < 0.0 => format!("{x}"),
            x => format!("+{x}"),
        }
    } else {
        format!("+({}{:+}i)", round(z.re), round(z.im))
    }
}

/// All Hamiltonian eigenvectors with `|⟨drain|v⟩| < DARK_THRESHOLD`.
///
/// Inside a degenerate eigenspace the drain projector is diagonalized so that
/// dark combinations are found regardless of the basis the eigensolver
/// returned; the dark subspace is then given a canonical basis by
/// orthogonalizing projected unit vectors in node order. Results are ordered
/// by eigenvalue, and each vector's first nonzero amplitude is real positive.
pub fn dark_states(spec: &NetworkSpec, drain: &DrainConfig) -> Result<Vec<DarkState>> {
    drain.validate(spec)?;
    let h = hamiltonian(spec);
    let n = spec.n_nodes();
    let d = drain.target - 1;
    let (values, vectors) = hermitian_eigen(&h);
    let h_norm = h.norm().max(1.0);
    let group_tol = 1e-9 * h_norm;

    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= group_tol {
            end += 1;
        }
        let q = vectors.columns(start, end - start).into_owned();
        let eigenvalue = values[start..end].iter().sum::<f64>() / (end - start) as f64;

        // Drain projector restricted to the eigenspace: rᴴ r with r = row d of Q.
        let row = q.row(d).into_owned();
        let m = row.adjoint() * &row;
        let (mu, c) = hermitian_eigen(&m);
        let dark_cols: Vec<usize> = (0..mu.len())
            .filter(|&i| mu[i].max(0.0).sqrt() < DARK_THRESHOLD)
            .collect();
        if !dark_cols.is_empty() {
            let basis = CMatrix::from_fn(end - start, dark_cols.len(), |r, k| c[(r, dark_cols[k])]);
            let subspace = &q * basis;
            for v in canonical_basis(&subspace) {
                out.push(DarkState {
                    drain_overlap: v[d].norm(),
                    amplitudes: v,
                    eigenvalue,
                });
            }
        }
        start = end;
    }
    Ok(out)
}

/// Orthonormal basis of the column span of `b` (orthonormal columns) obtained
/// by projecting unit vectors `e₁, e₂, …` and Gram–Schmidt in that order.
fn canonical_basis(b: &CMatrix) -> Vec<CVector> {
    let (n, k) = b.shape();
    let projector = b * b.adjoint();
    let mut chosen: Vec<CVector> = Vec::with_capacity(k);
    for j in 0..n {
        if chosen.len() == k {
            break;
        }
        let mut w: CVector = projector.column(j).into_owned();
        for _ in 0..2 {
            for u in &chosen {
                let overlap = u.dotc(&w);
                w -= u * overlap;
            }
        }
        let norm = w.norm();
        if norm > 1e-2 {
            w /= C64::from(norm);
            chosen.push(fix_phase(w));
        }
    }
    chosen
}

fn fix_phase(mut v: CVector) -> CVector {
    if let Some(lead) = v.iter().find(|a| a.norm() > 1e-12).copied() {
        let rot = lead.conj() / lead.norm();
        v *= rot;
        for a in v.iter_mut() {
            if a.im.abs() < 1e-15 {
                a.im = 0.0;
            }
        }
    }
    v
}

/// `|⟨D|ψ⟩|` for the correlated source state `ψ`.
pub fn dark_overlap(src: &SourceConfig, dark: &DarkState) -> Result<f64> {
    let psi = source_state(src, dark.amplitudes.len())?;
    Ok(dark.amplitudes.dotc(&psi).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn trimer() -> (NetworkSpec, SourceConfig, DrainConfig) {
        symmetric_trimer(0.5, 1.0)
    }

    #[test]
    fn trimer_parameters() {
        let (spec, src, drain) = trimer();
        assert_eq!(spec.site_energies(), &[1.0, 1.0, 1.0]);
        assert_eq!(spec.couplings()[(0, 2)], 1.0);
        assert_eq!(spec.couplings()[(1, 2)], 1.0);
        assert_eq!(spec.couplings()[(0, 1)], 0.0);
        assert_eq!(spec.env_constant(), 1.0);
        assert_eq!(src.targets, vec![1, 2]);
        assert_eq!(src.rate, 0.5);
        assert_eq!(drain.target, 3);
        assert_eq!(drain.rate, 1.0);

        let (_, src0, _) = symmetric_trimer(0.0, 1.0);
        assert_eq!(src0.rate, 0.0);
        src0.validate(&spec).unwrap();
    }

    #[test]
    fn trimer_hamiltonian_and_dark_eigenvalue() {
        let (spec, _, _) = trimer();
        let h = hamiltonian(&spec);
        let expected = [[1., 0., 1.], [0., 1., 1.], [1., 1., 1.]];
        for k in 0..3 {
            for l in 0..3 {
                assert_eq!(h[(k, l)], C64::from(expected[k][l]));
            }
        }
        let d = CVector::from_vec(vec![
            C64::from(FRAC_1_SQRT_2),
            C64::from(-FRAC_1_SQRT_2),
            C64::from(0.0),
        ]);
        let hd = &h * &d;
        assert_eq!(hd, d);
    }

    #[test]
    fn zero_spec_hamiltonian() {
        let spec = NetworkSpec::new(vec![0.0; 4], DMatrix::zeros(4, 4), 1.0).unwrap();
        assert_eq!(hamiltonian(&spec), CMatrix::zeros(4, 4));
    }

    #[test]
    fn spec_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[0., 1., 2., 0.]);
        assert!(NetworkSpec::new(vec![0.0; 2], asym, 1.0).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[1., 0., 0., 0.]);
        assert!(NetworkSpec::new(vec![0.0; 2], diag, 1.0).is_err());
        assert!(NetworkSpec::new(vec![0.0; 3], DMatrix::zeros(2, 2), 1.0).is_err());
        assert!(NetworkSpec::new(vec![0.0; 2], DMatrix::zeros(2, 2), -1.0).is_err());
        assert!(NetworkSpec::new(vec![], DMatrix::zeros(0, 0), 1.0).is_err());
    }

    #[test]
    fn source_and_drain_validation() {
        let (spec, src, drain) = trimer();
        src.validate(&spec).unwrap();
        drain.validate(&spec).unwrap();
        assert!(SourceConfig::independent(vec![1, 1], 1.0).validate(&spec).is_err());
        assert!(SourceConfig::independent(vec![4], 1.0).validate(&spec).is_err());
        assert!(SourceConfig::independent(vec![0], 1.0).validate(&spec).is_err());
        assert!(SourceConfig::correlated(vec![1], 1.0, 0.0).validate(&spec).is_err());
        assert!(SourceConfig::independent(vec![1], -1.0).validate(&spec).is_err());
        assert!(DrainConfig { target: 4, rate: 1.0 }.validate(&spec).is_err());
        assert!(DrainConfig { target: 3, rate: -0.1 }.validate(&spec).is_err());
        assert!(MixingParams::new(1.5, 0.0).is_err());
        assert!(MixingParams::new(0.5, -1.0).is_err());
    }

    #[test]
    fn rates_follow_golden_rule() {
        let (spec, _, _) = trimer();
        let r = incoherent_rates(&spec);
        assert_eq!(r[(0, 2)], 1.0);
        assert_eq!(r[(2, 0)], 1.0);
        assert_eq!(r[(1, 2)], 1.0);
        assert_eq!(r[(2, 1)], 1.0);
        assert_eq!(r[(0, 1)], 0.0);

        let zero = NetworkSpec::new(vec![1.0; 3], spec.couplings().clone(), 0.0).unwrap();
        assert_eq!(incoherent_rates(&zero), DMatrix::zeros(3, 3));

        let v = DMatrix::from_row_slice(2, 2, &[0., 2., 2., 0.]);
        let s = NetworkSpec::new(vec![0.0; 2], v, 0.5).unwrap();
        assert_eq!(incoherent_rates(&s)[(0, 1)], 2.0);
    }

    #[test]
    fn source_states() {
        let (_, src, _) = trimer();
        assert!(matches!(source_state(&src, 3), Err(Error::RequiresCorrelatedSource)));

        let psi0 = source_state(&src.clone().with_correlation(0.0), 3).unwrap();
        assert_relative_eq!(psi0[0].re, FRAC_1_SQRT_2);
        assert_relative_eq!(psi0[1].re, FRAC_1_SQRT_2);
        assert_eq!(psi0[2], C64::from(0.0));

        let psi_pi = source_state(&src.clone().with_correlation(PI), 3).unwrap();
        assert!((psi_pi[1] - C64::from(-FRAC_1_SQRT_2)).norm() < 1e-15);

        let psi_half = source_state(&src.with_correlation(PI / 2.0), 3).unwrap();
        assert!((psi_half[1] - C64::new(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((psi_half.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trimer_dark_state() {
        let (spec, _, drain) = trimer();
        let dark = dark_states(&spec, &drain).unwrap();
        assert_eq!(dark.len(), 1);
        let d = &dark[0];
        assert_relative_eq!(d.eigenvalue, 1.0, epsilon = 1e-12);
        assert!((d.amplitudes[0] - C64::from(FRAC_1_SQRT_2)).norm() < 1e-12);
        assert!((d.amplitudes[1] - C64::from(-FRAC_1_SQRT_2)).norm() < 1e-12);
        assert!(d.drain_overlap < DARK_THRESHOLD);
        assert_eq!(d.ket_label(), "|1>-|2>");
    }

    #[test]
    fn detuned_trimer_has_no_dark_state() {
        let (spec, _, drain) = trimer();
        let detuned = NetworkSpec::new(vec![1.0, 2.0, 1.0], spec.couplings().clone(), 1.0).unwrap();
        // Independent check: a dark eigenvector needs H v = ε v with v₃ = 0,
        // i.e. the stacked matrix [H − ε; e₃ᵀ] must be rank deficient for
        // some eigenvalue ε. Its smallest singular value stays far from zero.
        let h = hamiltonian(&detuned);
        for ev in crate::linalg::hermitian_eigenvalues(&h) {
            let stacked = CMatrix::from_fn(4, 3, |r, c| {
                if r < 3 {
                    h[(r, c)] - if r == c { C64::from(ev) } else { C64::from(0.0) }
                } else if c == 2 {
                    C64::from(1.0)
                } else {
                    C64::from(0.0)
                }
            });
            let smin = stacked.singular_values().min();
            assert!(smin > 1e-3, "eigenvalue {ev}: smin {smin}");
        }
        assert!(dark_states(&detuned, &drain).unwrap().is_empty());
    }

    #[test]
    fn decoupled_nodes_give_unit_dark_states() {
        let spec = NetworkSpec::new(vec![0.0; 3], DMatrix::zeros(3, 3), 1.0).unwrap();
        let dark = dark_states(&spec, &DrainConfig { target: 3, rate: 1.0 }).unwrap();
        assert_eq!(dark.len(), 2);
        assert!((dark[0].amplitudes[0] - C64::from(1.0)).norm() < 1e-12);
        assert!((dark[1].amplitudes[1] - C64::from(1.0)).norm() < 1e-12);
        assert_eq!(dark[0].ket_label(), "|1>");
        assert_eq!(dark[1].ket_label(), "|2>");
    }

    #[test]
    fn overlaps_with_trimer_dark_state() {
        let (spec, src, drain) = trimer();
        let d = &dark_states(&spec, &drain).unwrap()[0];
        assert!(dark_overlap(&src, d).is_err());
        let at = |phi: f64| dark_overlap(&src.clone().with_correlation(phi), d).unwrap();
        assert!(at(0.0) < 1e-15);
        assert_relative_eq!(at(PI), 1.0, epsilon = 1e-15);
        assert_relative_eq!(at(PI / 2.0), FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("correlated".parse::<SourceMode>().unwrap(), SourceMode::Correlated);
        assert!("both".parse::<SourceMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_spec() -> impl Strategy<Value = NetworkSpec> {
            (1usize..=6).prop_flat_map(|n| {
                (
                    proptest::collection::vec(-3.0..3.0f64, n),
                    proptest::collection::vec(-2.0..2.0f64, n * n),
                    0.0..2.0f64,
                )
                    .prop_map(move |(e, raw, lam)| {
                        let v = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                            std::cmp::Ordering::Less => raw[i * n + j],
                            std::cmp::Ordering::Greater => raw[j * n + i],
                            std::cmp::Ordering::Equal => 0.0,
                        });
                        NetworkSpec::new(e, v, lam).unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn hamiltonian_exactly_hermitian(spec in arb_spec()) {
                let h = hamiltonian(&spec);
                prop_assert_eq!(h.adjoint(), h);
            }

            #[test]
            fn dark_states_are_dark_eigenvectors(spec in arb_spec(), pick in 0usize..6) {
                let target = pick % spec.n_nodes() + 1;
                let drain = DrainConfig { target, rate: 1.0 };
                let h = hamiltonian(&spec);
                for d in dark_states(&spec, &drain).unwrap() {
                    let resid = (&h * &d.amplitudes - &d.amplitudes * C64::from(d.eigenvalue)).norm();
                    prop_assert!(resid <= 1e-10 * h.norm().max(1.0));
                    prop_assert!(d.drain_overlap < DARK_THRESHOLD);
                    prop_assert!((d.amplitudes.norm() - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn overlap_closed_form(phi in 0.0..(2.0 * PI)) {
                let (spec, src, drain) = symmetric_trimer(0.5, 1.0);
                let d = &dark_states(&spec, &drain).unwrap()[0];
                let src = src.with_correlation(phi);
                let got = dark_overlap(&src, d).unwrap();
                let expected = (C64::from(1.0) - C64::from_polar(1.0, phi)).norm() / 2.0;
                prop_assert!((got - expected).abs() < 1e-14);
                prop_assert!((source_state(&src, 3).unwrap().norm() - 1.0).abs() < 1e-14);
            }
        }
    }
}
