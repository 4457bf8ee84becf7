//! Time propagation of the master equation by repeated application of the
//! exact short-time propagator `exp(G·Δt)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format;
use crate::linalg::{expm, hermitian_eigenvalues};
use crate::liouvillian::{devectorize, vectorize, DensityMatrix, Generator};
use crate::{CMatrix, CVector, C64};

/// Initial sub-step length.
pub const DEFAULT_DT: f64 = 0.01;
/// Refinement stops once halving `Δt` changes the final state by less than this.
pub const REFINE_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 6;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// [`Generator::fingerprint`] of the generator that produced the states.
    pub generator: String,
    /// Sub-step length actually used.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub populations: Vec<f64>,
    /// `ρ₁₂`, zero when the network has a single node.
    pub coherence_12: C64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

pub fn observables(rho: &DensityMatrix) -> Observables {
    let m = rho.matrix();
    let d = m.nrows();
    Observables {
        populations: (0..d).map(|k| m[(k, k)].re).collect(),
        coherence_12: if d > 3 { m[(1, 2)] } else { C64::default() },
        trace: m.trace().re,
        min_eigenvalue: hermitian_eigenvalues(m)[0],
    }
}

/// Caches `exp(G·h)` for the sub-step lengths a time grid needs.
struct Stepper<'g> {
    generator: &'g CMatrix,
    cache: Vec<(u64, CMatrix)>,
}

impl<'g> Stepper<'g> {
    fn new(generator: &'g CMatrix) -> Self {
        Self {
            generator,
            cache: Vec::new(),
        }
    }

    fn propagator(&mut self, h: f64) -> Result<&CMatrix> {
        let key = h.to_bits();
        let pos = match self.cache.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                let p = expm(&(self.generator * C64::from(h)))?;
                self.cache.push((key, p));
                self.cache.len() - 1
            }
        };
        Ok(&self.cache[pos].1)
    }

    /// Advances `v` by `length` using equal sub-steps no longer than `dt`.
    fn advance(&mut self, v: &CVector, length: f64, dt: f64) -> Result<CVector> {
        if length == 0.0 {
            return Ok(v.clone());
        }
        let steps = (length / dt).ceil().max(1.0) as usize;
        let h = length / steps as f64;
        let p = self.propagator(h)?.clone();
        let mut out = v.clone();
        for _ in 0..steps {
            out = &p * out;
        }
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state after step h = {h:e}")));
        }
        Ok(out)
    }
}

fn propagate(g: &Generator, rho0: &DensityMatrix, times: &[f64], dt: f64) -> Result<Vec<CVector>> {
    let mut stepper = Stepper::new(&g.matrix);
    let mut v = vectorize(rho0);
    let mut out = Vec::with_capacity(times.len());
    out.push(v.clone());
    for w in times.windows(2) {
        v = stepper.advance(&v, w[1] - w[0], dt)?;
        out.push(v.clone());
    }
    Ok(out)
}

/// States `exp(tᵢ·G) ρ₀` at the requested times (which must start at 0 and
/// increase strictly). The sub-step is halved from [`DEFAULT_DT`] until the
/// final state is stable to [`REFINE_TOL`]. No trace renormalization or
/// eigenvalue clipping is applied.
pub fn evolve(g: &Generator, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    if rho0.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: rho0.dim(),
        });
    }
    match times.first() {
        Some(&t0) if t0 == 0.0 => {}
        _ => return Err(Error::param("times", "must start at 0")),
    }
    if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::param("times", "must be finite and strictly increasing"));
    }

    let mut dt = DEFAULT_DT;
    let mut states = propagate(g, rho0, times, dt)?;
    for _ in 0..MAX_HALVINGS {
        let finer = propagate(g, rho0, times, dt / 2.0)?;
        let last = states.len() - 1;
        let change = (&finer[last] - &states[last]).camax();
        states = finer;
        dt /= 2.0;
        if change < REFINE_TOL {
            break;
        }
    }

    let d = g.dim();
    let states = states
        .iter()
        .map(|v| devectorize(v, d).map(DensityMatrix::from_propagated))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        generator: g.fingerprint(),
        dt,
    })
}

/// Streams `1 − ρ_{N+1,N+1}(k·dt)` on a fixed grid without storing states.
pub(crate) struct SurvivalSampler {
    propagator: CMatrix,
    state: CVector,
    drain: usize,
}

impl SurvivalSampler {
    pub(crate) fn new(g: &Generator, rho0: &DensityMatrix, dt: f64) -> Result<Self> {
        Ok(Self {
            propagator: expm(&(&g.matrix * C64::from(dt)))?,
            state: vectorize(rho0),
            drain: g.drain_coordinate(),
        })
    }

    pub(crate) fn current(&self) -> f64 {
        1.0 - self.state[self.drain].re
    }

    /// Appends the next `steps` samples to `out`.
    pub(crate) fn extend(&mut self, out: &mut Vec<f64>, steps: usize) -> Result<()> {
        out.reserve(steps);
        for _ in 0..steps {
            self.state = &self.propagator * &self.state;
            let s = self.current();
            if !s.is_finite() {
                return Err(Error::Numerical("non-finite drain population".into()));
            }
            out.push(s);
        }
        Ok(())
    }
}

/// Values of `1 − ρ_{N+1,N+1}(k·dt)` for `k = 0..=steps`.
#[cfg(test)]
pub(crate) fn survival_samples(
    g: &Generator,
    rho0: &DensityMatrix,
    dt: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut sampler = SurvivalSampler::new(g, rho0, dt)?;
    let mut out = vec![sampler.current()];
    sampler.extend(&mut out, steps)?;
    Ok(out)
}

impl Trajectory {
    /// Writes `t, rho_00, …, rho_dd, re_rho_12, im_rho_12, trace, min_eig`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.states.first().map_or(0, |s| s.dim());
        let label = |k: usize| {
            if d > 10 {
                format!("rho_{k}_{k}")
            } else {
                format!("rho_{k}{k}")
            }
        };
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(label));
        header.extend(["re_rho_12", "im_rho_12", "trace", "min_eig"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let o = observables(s);
            let mut row = vec![format::float(*t)];
            row.extend(o.populations.iter().map(|&p| format::float(p)));
            row.push(format::float(o.coherence_12.re));
            row.push(format::float(o.coherence_12.im));
            row.push(format::float(o.trace));
            row.push(format::float(o.min_eigenvalue));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
