//! Parameter sweeps, figure datasets and text reports behind the `qsw` CLI.
//!
//! Grid points are evaluated in parallel but always emitted in grid order, so
//! output is byte-identical for any thread count.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::closed_form::{self, AlphaCVariant};
use crate::error::{Error, Result};
use crate::est::{Est, EstMethod};
use crate::format;
use crate::liouvillian::{assemble_generator, DensityMatrix};
use crate::network::{
    dark_overlap, dark_states, hamiltonian, symmetric_trimer, DrainConfig, MixingParams, NetworkSpec,
    SourceConfig, SourceMode,
};
use crate::linalg::hermitian_eigenvalues;

pub const CSV_HEADER: &str = "alpha,phi,lambda,Gamma,gamma,mode,method,est,converged,residual";

/// A network with its source and drain; sweeps override the source mode and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: NetworkSpec,
    pub source: SourceConfig,
    pub drain: DrainConfig,
}

impl Model {
    pub fn trimer(source_rate: f64, drain_rate: f64) -> Self {
        let (spec, source, drain) = symmetric_trimer(source_rate, drain_rate);
        Self {
            spec,
            source,
            drain,
        }
    }

    /// True when the closed-form survival times apply to this model.
    pub fn is_symmetric_trimer(&self) -> bool {
        let (spec, src, drain) = symmetric_trimer(self.source.rate, 1.0);
        self.spec == spec && self.source.targets == src.targets && self.drain == drain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub alpha_values: Vec<f64>,
    /// Used for correlated rows only; independent rows are emitted once with `phi = 0`.
    pub phi_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub modes: Vec<SourceMode>,
    pub methods: Vec<EstMethod>,
}

impl SweepGrid {
    /// α: 100 points on `[0.01, 1]`; φ: 64 points on `[0, 2π]`; λ ∈ {0, 1, 5}.
    pub fn default_grid() -> Self {
        Self {
            alpha_values: linspace(0.01, 1.0, 100),
            phi_values: linspace(0.0, 2.0 * PI, 64),
            lambda_values: vec![0.0, 1.0, 5.0],
            modes: vec![SourceMode::Independent, SourceMode::Correlated],
            methods: vec![EstMethod::LinearSolve],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |v: usize, name: &'static str| {
            if v == 0 {
                Err(Error::param(name, "grid is empty"))
            } else {
                Ok(())
            }
        };
        nonempty(self.alpha_values.len(), "alpha")?;
        nonempty(self.lambda_values.len(), "lambda")?;
        nonempty(self.modes.len(), "mode")?;
        nonempty(self.methods.len(), "method")?;
        if self.modes.contains(&SourceMode::Correlated) {
            nonempty(self.phi_values.len(), "phi")?;
        }
        for &a in &self.alpha_values {
            MixingParams::new(a, 0.0)?;
        }
        for &l in &self.lambda_values {
            MixingParams::new(0.0, l)?;
        }
        if self.phi_values.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("phi", "must be finite"));
        }
        Ok(())
    }

    fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            let phis: &[f64] = match mode {
                SourceMode::Independent => &[0.0],
                SourceMode::Correlated => &self.phi_values,
            };
            for &lambda in &self.lambda_values {
                for &phi in phis {
                    for &alpha in &self.alpha_values {
                        out.push(GridPoint {
                            alpha,
                            phi,
                            lambda,
                            mode,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    alpha: f64,
    phi: f64,
    lambda: f64,
    mode: SourceMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub alpha: f64,
    pub phi: f64,
    pub lambda: f64,
    pub source_rate: f64,
    pub drain_rate: f64,
    pub mode: SourceMode,
    pub method: EstMethod,
    pub est: Est,
    pub converged: bool,
    pub residual: f64,
}

impl SweepRecord {
    pub fn csv_row(&self) -> String {
        [
            format::float(self.alpha),
            format::float(self.phi),
            format::float(self.lambda),
            format::float(self.source_rate),
            format::float(self.drain_rate),
            self.mode.as_str().to_string(),
            self.method.as_str().to_string(),
            format::float(self.est.as_f64()),
            self.converged.to_string(),
            format::float(self.residual),
        ]
        .join(",")
    }
}

/// Inclusive evenly spaced grid; a single point yields `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Parses `lo:hi:n`.
pub fn parse_grid(text: &str, name: &'static str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::param(name, format!("`{text}` is not lo:hi:n")));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::param(name, format!("`{s}` is not a number")))
    };
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::param(name, format!("`{}` is not a point count", parts[2])))?;
    if n == 0 {
        return Err(Error::param(name, "point count must be positive"));
    }
    Ok(linspace(num(parts[0])?, num(parts[1])?, n))
}

/// Parses `a,b,c`.
pub fn parse_list(text: &str, name: &'static str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::param(name, format!("`{s}` is not a number")))
        })
        .collect()
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))
}

fn evaluate(model: &Model, p: &GridPoint, methods: &[EstMethod]) -> Result<Vec<SweepRecord>> {
    let src = match p.mode {
        SourceMode::Independent => model.source.clone().with_mode(SourceMode::Independent),
        SourceMode::Correlated => model.source.clone().with_correlation(p.phi),
    };
    let mix = MixingParams::new(p.alpha, p.lambda)?;
    let g = assemble_generator(&model.spec, &src, &model.drain, &mix)?;
    let rho0 = DensityMatrix::source_initial(model.spec.n_nodes());
    methods
        .iter()
        .map(|&m| {
            let est = m.run(&g, &rho0)?;
            Ok(SweepRecord {
                alpha: p.alpha,
                phi: p.phi,
                lambda: p.lambda,
                source_rate: model.source.rate,
                drain_rate: model.drain.rate,
                mode: p.mode,
                method: m,
                est: est.value,
                converged: est.converged,
                residual: est.diagnostics.residual,
            })
        })
        .collect()
}

/// Evaluates every grid point with every method. `threads = 0` uses the
/// rayon default.
pub fn run_sweep(model: &Model, grid: &SweepGrid, threads: usize) -> Result<Vec<SweepRecord>> {
    grid.validate()?;
    let points = grid.points();
    let nested: Vec<Result<Vec<SweepRecord>>> = pool(threads)?.install(|| {
        points
            .par_iter()
            .map(|p| evaluate(model, p, &grid.methods))
            .collect()
    });
    let mut out = Vec::with_capacity(points.len() * grid.methods.len());
    for r in nested {
        out.extend(r?);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[SweepRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

/// Closed-form value for a record of the symmetric trimer (`γ = 1`).
pub fn closed_form_for(r: &SweepRecord) -> Result<closed_form::ClosedFormValue> {
    match r.mode {
        SourceMode::Independent => closed_form::eta_i(r.alpha, r.lambda, r.source_rate),
        SourceMode::Correlated => closed_form::eta_ii(r.alpha, r.lambda, r.source_rate, r.phi),
    }
}

/// Largest relative deviation of finite records from the closed form, and
/// the number of records whose finiteness disagrees with it.
pub fn closed_form_mismatch(records: &[SweepRecord]) -> Result<(f64, usize)> {
    let mut worst = 0.0f64;
    let mut disagreements = 0;
    for r in records {
        let reference = closed_form_for(r)?;
        match (r.est, reference.value()) {
            (Est::Finite(x), Some(y)) => worst = worst.max(((x - y) / y).abs()),
            (Est::Divergent, None) => {}
            _ => disagreements += 1,
        }
    }
    Ok((worst, disagreements))
}

/// Named output files of a `reproduce` run.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub files: Vec<(String, String)>,
    /// Worst relative deviation from the closed form over all finite rows.
    pub max_rel_error: f64,
    pub disagreements: usize,
}

fn figure_model() -> Model {
    Model::trimer(0.5, 1.0)
}

/// `η_II(α, φ)` surface at `λ = 1`, `Γ = 0.5`, plus the `η_I` and
/// `φ ∈ {0, π/2, π}` cross-sections.
pub fn reproduce_fig2(threads: usize) -> Result<Dataset> {
    let model = figure_model();
    let alphas = SweepGrid::default_grid().alpha_values;
    let surface = run_sweep(
        &model,
        &SweepGrid {
            alpha_values: alphas.clone(),
            phi_values: linspace(0.0, 2.0 * PI, 64),
            lambda_values: vec![1.0],
            modes: vec![SourceMode::Correlated],
            methods: vec![EstMethod::LinearSolve],
        },
        threads,
    )?;
    let cross = run_sweep(
        &model,
        &SweepGrid {
            alpha_values: alphas,
            phi_values: vec![0.0, PI / 2.0, PI],
            lambda_values: vec![1.0],
            modes: vec![SourceMode::Independent, SourceMode::Correlated],
            methods: vec![EstMethod::LinearSolve],
        },
        threads,
    )?;
    let (e1, d1) = closed_form_mismatch(&surface)?;
    let (e2, d2) = closed_form_mismatch(&cross)?;
    Ok(Dataset {
        files: vec![
            ("fig2_surface.csv".into(), to_csv(&surface)),
            ("fig2_cross.csv".into(), to_csv(&cross)),
            ("fig2_plot.py".into(), FIG2_SCRIPT.into()),
        ],
        max_rel_error: e1.max(e2),
        disagreements: d1 + d2,
    })
}

/// `η_I(α)` and `η_II(α; φ = 0)` for each dephasing rate, with the numeric
/// crossover `α_c` and both closed-form readings of it.
pub fn reproduce_fig3(lambdas: &[f64], threads: usize) -> Result<Dataset> {
    let model = figure_model();
    let curves = run_sweep(
        &model,
        &SweepGrid {
            alpha_values: SweepGrid::default_grid().alpha_values,
            phi_values: vec![0.0],
            lambda_values: lambdas.to_vec(),
            modes: vec![SourceMode::Independent, SourceMode::Correlated],
            methods: vec![EstMethod::LinearSolve],
        },
        threads,
    )?;
    let mut alpha_c = String::from("lambda,alpha_c_numeric,alpha_c_as_printed,alpha_c_cubed_sum\n");
    for &l in lambdas {
        let numeric = closed_form::alpha_c_numeric(l, model.source.rate)?;
        let _ = writeln!(
            alpha_c,
            "{},{},{},{}",
            format::float(l),
            format::float(numeric),
            format::float(closed_form::alpha_c_formula(l, AlphaCVariant::AsPrinted)),
            format::float(closed_form::alpha_c_formula(l, AlphaCVariant::CubedSum)),
        );
    }
    let (err, dis) = closed_form_mismatch(&curves)?;
    Ok(Dataset {
        files: vec![
            ("fig3.csv".into(), to_csv(&curves)),
            ("fig3_alpha_c.csv".into(), alpha_c),
            ("fig3_plot.py".into(), FIG3_SCRIPT.into()),
        ],
        max_rel_error: err,
        disagreements: dis,
    })
}

const ROUND_OFF: f64 = 1e-12;

fn clean(x: f64) -> f64 {
    if x.abs() < ROUND_OFF {
        0.0
    } else {
        x
    }
}

/// Dark states of the network and their overlap with the correlated source
/// state for a few phases.
pub fn analyze_report(model: &Model) -> Result<String> {
    let mut out = String::new();
    let spec = &model.spec;
    let eig = hermitian_eigenvalues(&hamiltonian(spec));
    let _ = writeln!(
        out,
        "network: {} nodes, source targets {:?}, drain at node {}",
        spec.n_nodes(),
        model.source.targets,
        model.drain.target
    );
    let _ = writeln!(
        out,
        "hamiltonian eigenvalues: {}",
        eig.iter().map(|&e| format::short(e)).collect::<Vec<_>>().join(", ")
    );
    let dark = dark_states(spec, &model.drain)?;
    let _ = writeln!(out, "dark states: {}", dark.len());
    for (i, d) in dark.iter().enumerate() {
        let amps: Vec<String> = d
            .amplitudes
            .iter()
            .map(|a| {
                if a.im.abs() < ROUND_OFF {
                    format::short(clean(a.re))
                } else {
                    format!("{}{:+}i", format::short(clean(a.re)), format::short(a.im))
                }
            })
            .collect();
        let _ = writeln!(
            out,
            "  D{}: eigenvalue {}, state {} (amplitudes {}), drain overlap {}",
            i + 1,
            format::short(d.eigenvalue),
            d.ket_label(),
            amps.join(", "),
            format::short(clean(d.drain_overlap))
        );
    }
    if model.source.targets.len() >= 2 && !dark.is_empty() {
        let _ = writeln!(out, "source overlap |<D|psi(phi)>|, psi = (|t1> + e^(i phi)|t2>)/sqrt2:");
        let _ = writeln!(out, "  {:<6} {:<4} {:<16} {:<16}", "phi", "D", "numeric", "|1-e^(i phi)|/2");
        for (label, phi) in [("0", 0.0), ("pi/2", PI / 2.0), ("pi", PI)] {
            let src = model.source.clone().with_correlation(phi);
            for (i, d) in dark.iter().enumerate() {
                let numeric = dark_overlap(&src, d)?;
                let formula = (num_complex::Complex64::from(1.0)
                    - num_complex::Complex64::from_polar(1.0, phi))
                .norm()
                    / 2.0;
                let _ = writeln!(
                    out,
                    "  {:<6} {:<4} {:<16} {:<16}",
                    label,
                    format!("D{}", i + 1),
                    format::short(clean(numeric)),
                    format::short(formula)
                );
            }
        }
    }
    Ok(out)
}

const FIG2_SCRIPT: &str = r#"# Expected survival time versus source phase (lambda = 1, Gamma = 0.5).
# Usage: python fig2_plot.py  (reads fig2_surface.csv and fig2_cross.csv)
import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

surf = pd.read_csv("fig2_surface.csv")
cross = pd.read_csv("fig2_cross.csv")
surf["est"] = surf["est"].replace(np.inf, np.nan)

fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4))
piv = surf.pivot(index="phi", columns="alpha", values="est")
mesh = ax0.pcolormesh(piv.columns, piv.index, piv.values, shading="auto")
fig.colorbar(mesh, ax=ax0, label="EST")
ax0.set_xlabel("alpha")
ax0.set_ylabel("phi")

ind = cross[cross["mode"] == "independent"]
ax1.plot(ind["alpha"], ind["est"], "r-", label="independent")
for phi, style in zip(sorted(cross[cross["mode"] == "correlated"]["phi"].unique()), ["k-", "k--", "k:"]):
    c = cross[(cross["mode"] == "correlated") & (cross["phi"] == phi)]
    ax1.plot(c["alpha"], c["est"], style, label=f"correlated phi={phi:.3f}")
ax1.set_xlabel("alpha")
ax1.set_ylabel("EST")
ax1.set_ylim(4, 12)
ax1.legend()
fig.tight_layout()
fig.savefig("fig2.png", dpi=150)
"#;

const FIG3_SCRIPT: &str = r#"# Expected survival time versus alpha for several dephasing rates (Gamma = 0.5, gamma = 1).
# Usage: python fig3_plot.py  (reads fig3.csv and fig3_alpha_c.csv)
import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("fig3.csv")
ac = pd.read_csv("fig3_alpha_c.csv")
df["est"] = df["est"].replace(np.inf, np.nan)

fig, ax = plt.subplots(figsize=(6, 4))
for lam in sorted(df["lambda"].unique()):
    ind = df[(df["mode"] == "independent") & (df["lambda"] == lam)]
    cor = df[(df["mode"] == "correlated") & (df["lambda"] == lam)]
    ax.plot(ind["alpha"], ind["est"], "r-")
    ax.plot(cor["alpha"], cor["est"], "k-")
    a_c = ac[ac["lambda"] == lam]["alpha_c_numeric"].iloc[0]
    ax.axvline(a_c, color="gray", ls=":", lw=0.8)
    ax.annotate(f"lambda={lam:g}, alpha_c={a_c:.3f}", (a_c, 4.2), rotation=90, fontsize=7)
ax.set_xlabel("alpha")
ax.set_ylabel("EST")
ax.set_ylim(4, 12)
fig.tight_layout()
fig.savefig("fig3.png", dpi=150)
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:3", "alpha").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.2:0.2:1", "alpha").unwrap(), vec![0.2]);
        assert!(parse_grid("0:1", "alpha").is_err());
        assert!(parse_grid("0:x:3", "alpha").is_err());
        assert!(parse_grid("0:1:0", "alpha").is_err());
        assert_eq!(parse_list("0, 1,5", "lambda").unwrap(), vec![0.0, 1.0, 5.0]);
        assert!(parse_list("0,,1", "lambda").is_err());
    }

    #[test]
    fn linspace_endpoints_exact() {
        let v = linspace(0.01, 1.0, 100);
        assert_eq!(v.len(), 100);
        assert_eq!(v[0], 0.01);
        assert_eq!(v[99], 1.0);
    }

    #[test]
    fn sweep_rows_in_grid_order() {
        let grid = SweepGrid {
            alpha_values: vec![0.5, 1.0],
            phi_values: vec![0.0, PI],
            lambda_values: vec![1.0],
            modes: vec![SourceMode::Independent, SourceMode::Correlated],
            methods: vec![EstMethod::LinearSolve, EstMethod::ResolventLimit],
        };
        let rows = run_sweep(&Model::trimer(0.5, 1.0), &grid, 2).unwrap();
        assert_eq!(rows.len(), (2 + 2 * 2) * 2);
        assert_eq!(rows[0].mode, SourceMode::Independent);
        assert_eq!(rows[0].method, EstMethod::LinearSolve);
        assert_eq!(rows[1].method, EstMethod::ResolventLimit);
        assert_eq!(rows[2].alpha, 1.0);
        assert_eq!(rows[4].mode, SourceMode::Correlated);
        let (err, dis) = closed_form_mismatch(&rows).unwrap();
        assert_eq!(dis, 0);
        assert!(err < 1e-6);
    }

    #[test]
    fn csv_format() {
        let rows = run_sweep(
            &Model::trimer(0.5, 1.0),
            &SweepGrid {
                alpha_values: vec![0.0, 1.0],
                phi_values: vec![],
                lambda_values: vec![1.0],
                modes: vec![SourceMode::Independent],
                methods: vec![EstMethod::LinearSolve],
            },
            1,
        )
        .unwrap();
        let csv = to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[5], "independent");
        assert_eq!(first[6], "solve");
        assert_eq!(first[7], "inf");
        assert_eq!(first[8], "true");
        assert!(lines[2].contains(",6.00000000000000"));
    }

    #[test]
    fn invalid_grids() {
        let mut grid = SweepGrid::default_grid();
        grid.alpha_values = vec![1.5];
        assert!(run_sweep(&Model::trimer(0.5, 1.0), &grid, 1).is_err());
        let mut grid = SweepGrid::default_grid();
        grid.lambda_values.clear();
        assert!(grid.validate().is_err());
    }

    #[test]
    fn analyze_trimer() {
        let report = analyze_report(&Model::trimer(0.5, 1.0)).unwrap();
        assert!(report.contains("dark states: 1"), "{report}");
        assert!(report.contains("eigenvalue 1.0"), "{report}");
        assert!(report.contains("|1>-|2>"), "{report}");
        assert!(report.contains("pi/2"), "{report}");
        assert!(report.contains("0.707106781187"), "{report}");
    }

    #[test]
    fn trimer_detection() {
        assert!(Model::trimer(0.5, 1.0).is_symmetric_trimer());
        assert!(Model::trimer(2.0, 1.0).is_symmetric_trimer());
        assert!(!Model::trimer(0.5, 2.0).is_symmetric_trimer());
    }
}
