//! Catalog of canonical problems: sources `f`, linearizations `f′`, and the
//! block structure of Hodge–Laplace / vorticity-velocity-pressure systems.
//!
//! A problem supplies `f(x, z)` and the directional derivative
//! `f′(x, z)[w]` acting on graded values. Hamiltonian problems have
//! symmetric `f′`; that symmetry is what multisymplecticity rests on, so a
//! numeric spot check is provided alongside the flag.

use crate::error::{Error, Result};
use crate::exterior::{inner, GradedAltValue};
use crate::polyforms::{self, PolyDiffForm, ScalarBasis};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Graded polynomial form on all of `R^n` (frame centered at the origin).
pub type GradedPolyForm = BTreeMap<usize, PolyDiffForm>;

/// Evaluates a graded polynomial form at a point.
pub fn eval_graded_form(n: usize, form: &GradedPolyForm, x: &DVector<f64>) -> GradedAltValue {
    let mut g = GradedAltValue::zero(n);
    for (&k, f) in form {
        let v = f.eval(x);
        g.degree_slice_mut(k).copy_from_slice(v.as_slice());
    }
    g
}

/// Applies the Hodge–Dirac operator `D = d + δ` to a graded polynomial
/// form, degree by degree.
pub fn dirac_of(n: usize, form: &GradedPolyForm) -> GradedPolyForm {
    let mut out: GradedPolyForm = BTreeMap::new();
    let mut push = |k: usize, f: PolyDiffForm| {
        let entry = out.entry(k);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(f);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let padded = o.get().pad_to_order(f.order().max(o.get().order()));
                let sum = padded.add(&f.pad_to_order(padded.order())).expect("frames match");
                o.insert(sum);
            }
        }
    };
    for (&k, f) in form {
        if k < n {
            push(k + 1, polyforms::ext_d(f));
        }
        if k > 0 {
            push(k - 1, polyforms::codiff(f));
        }
    }
    out
}

pub type SourceFn = Arc<dyn Fn(&DVector<f64>, &GradedAltValue) -> GradedAltValue + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    HodgeDiracSource,
    HodgeLaplaceSemilinear,
    VvpStokes,
    HamiltonianOde1d,
    MaxwellType,
    Linearized,
}

/// A canonical problem `D z = f(x, z)`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub n: usize,
    pub kind: ProblemKind,
    /// Degrees of the graded unknown that actually appear.
    pub active_degrees: Vec<usize>,
    /// For Hodge–Laplace structured problems, the middle degree `k`.
    pub structure_degree: Option<usize>,
    pub f: SourceFn,
    /// `(x, z, w) ↦ f′(x, z)[w]`.
    pub f_prime: SourceFn2,
    pub symmetric_f_prime: bool,
    /// `f′` does not depend on the state (linear problems).
    pub state_independent_f_prime: bool,
    /// Quadrature margin added to `2r` for source-term integrals.
    pub quad_margin: usize,
}

pub type SourceFn2 =
    Arc<dyn Fn(&DVector<f64>, &GradedAltValue, &GradedAltValue) -> GradedAltValue + Send + Sync>;

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .field("active_degrees", &self.active_degrees)
            .finish()
    }
}

/// Potential term `F(x, u)` of a semilinear Hodge–Laplace problem.
#[derive(Clone)]
pub enum PotentialSpec {
    /// `F = 0`.
    Zero,
    /// `F(x, u) = (f^k(x), u)`, the linear problem.
    Linear(GradedPolyForm),
    /// `F(u) = ½ c |u|²`.
    QuadraticMass(f64),
    /// `F(u) = ¼ s |u|⁴`.
    Quartic(f64),
}

impl PotentialSpec {
    /// `∂F/∂u` as a coefficient vector over the degree-`k` basis.
    pub fn grad(&self, n: usize, k: usize, x: &DVector<f64>, u: &[f64]) -> Vec<f64> {
        match self {
            PotentialSpec::Zero => vec![0.0; u.len()],
            PotentialSpec::Linear(src) => {
                let g = eval_graded_form(n, src, x);
                g.degree_slice(k).to_vec()
            }
            PotentialSpec::QuadraticMass(c) => u.iter().map(|&v| c * v).collect(),
            PotentialSpec::Quartic(s) => {
                let norm2: f64 = u.iter().map(|v| v * v).sum();
                u.iter().map(|&v| s * norm2 * v).collect()
            }
        }
    }

    /// `∂²F/∂u² [v]`, symmetric by construction.
    pub fn hess_apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            PotentialSpec::Zero | PotentialSpec::Linear(_) => vec![0.0; u.len()],
            PotentialSpec::QuadraticMass(c) => v.iter().map(|&w| c * w).collect(),
            PotentialSpec::Quartic(s) => {
                let norm2: f64 = u.iter().map(|w| w * w).sum();
                let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                u.iter()
                    .zip(v)
                    .map(|(&ui, &vi)| s * (norm2 * vi + 2.0 * uv * ui))
                    .collect()
            }
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        matches!(self, PotentialSpec::Quartic(_))
    }
}

/// Linear Hodge–Dirac problem `D z = fdata(x)`; Hamiltonian with
/// `H(x, z) = (fdata(x), z)`.
pub fn make_hodge_dirac(n: usize, fdata: GradedPolyForm) -> ProblemSpec {
    let data = Arc::new(fdata);
    let data2 = data.clone();
    ProblemSpec {
        n,
        kind: ProblemKind::HodgeDiracSource,
        active_degrees: (0..=n).collect(),
        structure_degree: None,
        f: Arc::new(move |x, _z| eval_graded_form(n, &data, x)),
        f_prime: Arc::new(move |_x, _z, _w| {
            let _ = &data2;
            GradedAltValue::zero(n)
        }),
        symmetric_f_prime: true,
        state_independent_f_prime: true,
        quad_margin: 2,
    }
}

/// Degrees `{k−1, k, k+1} ∩ [0, n]`.
fn laplace_degrees(n: usize, k: usize) -> Vec<usize> {
    let mut v = Vec::new();
    if k >= 1 {
        v.push(k - 1);
    }
    v.push(k);
    if k + 1 <= n {
        v.push(k + 1);
    }
    v
}

fn laplace_like(
    n: usize,
    k: usize,
    potential: PotentialSpec,
    rho_identity: bool,
    kind: ProblemKind,
) -> Result<ProblemSpec> {
    if k > n {
        return Err(Error::Usage(format!("form degree {k} exceeds dimension {n}")));
    }
    let pot = Arc::new(potential);
    let pot2 = pot.clone();
    let state_dep = pot.is_state_dependent();
    let f = Arc::new(move |x: &DVector<f64>, z: &GradedAltValue| {
        let mut out = GradedAltValue::zero(n);
        if k >= 1 {
            out.degree_slice_mut(k - 1).copy_from_slice(z.degree_slice(k - 1));
        }
        let fu = pot.grad(n, k, x, z.degree_slice(k));
        out.degree_slice_mut(k).copy_from_slice(&fu);
        if k + 1 <= n && rho_identity {
            out.degree_slice_mut(k + 1).copy_from_slice(z.degree_slice(k + 1));
        }
        out
    });
    let f_prime = Arc::new(
        move |_x: &DVector<f64>, z: &GradedAltValue, w: &GradedAltValue| {
            let mut out = GradedAltValue::zero(n);
            if k >= 1 {
                out.degree_slice_mut(k - 1).copy_from_slice(w.degree_slice(k - 1));
            }
            let fu = pot2.hess_apply(z.degree_slice(k), w.degree_slice(k));
            out.degree_slice_mut(k).copy_from_slice(&fu);
            if k + 1 <= n && rho_identity {
                out.degree_slice_mut(k + 1).copy_from_slice(w.degree_slice(k + 1));
            }
            out
        },
    );
    Ok(ProblemSpec {
        n,
        kind,
        active_degrees: laplace_degrees(n, k),
        structure_degree: Some(k),
        f,
        f_prime,
        symmetric_f_prime: true,
        state_independent_f_prime: !state_dep,
        quad_margin: if state_dep { 4 } else { 2 },
    })
}

/// Semilinear k-form Hodge–Laplace problem in first-order form
/// (`σ = δu`, `ρ = du`, `dσ + δρ = ∂F/∂u`), as a canonical system with
/// `H = ½|σ|² + F(x,u) + ½|ρ|²`.
pub fn make_hodge_laplace(n: usize, k: usize, potential: PotentialSpec) -> Result<ProblemSpec> {
    laplace_like(n, k, potential, true, ProblemKind::HodgeLaplaceSemilinear)
}

/// Vorticity-velocity-pressure variant: identical except the third
/// equation has zero right-hand side (`H = ½|σ|² + F(x,u)`).
pub fn make_vvp(n: usize, k: usize, potential: PotentialSpec) -> Result<ProblemSpec> {
    laplace_like(n, k, potential, false, ProblemKind::VvpStokes)
}

/// Maxwell-type problem (`curl curl u = f`, `div u = 0` via pseudo-pressure)
/// as the linear VVP problem.
pub fn make_maxwell_type(n: usize, k: usize, source: GradedPolyForm) -> Result<ProblemSpec> {
    let mut p = laplace_like(n, k, PotentialSpec::Linear(source), false, ProblemKind::MaxwellType)?;
    p.kind = ProblemKind::MaxwellType;
    Ok(p)
}

/// 1D canonical Hamiltonian oscillator `H = ½(q² + p²)`: `f(z) = z`.
pub fn make_oscillator() -> ProblemSpec {
    ProblemSpec {
        n: 1,
        kind: ProblemKind::HamiltonianOde1d,
        active_degrees: vec![0, 1],
        structure_degree: None,
        f: Arc::new(|_x, z| z.clone()),
        f_prime: Arc::new(|_x, _z, w| w.clone()),
        symmetric_f_prime: true,
        state_independent_f_prime: true,
        quad_margin: 2,
    }
}

/// Test fixture with deliberately non-symmetric `f′` (not Hamiltonian):
/// `f(q ⊕ p dt) = p ⊕ 0`.
pub fn make_asymmetric_fixture() -> ProblemSpec {
    let f: SourceFn = Arc::new(|_x, z: &GradedAltValue| {
        let mut out = GradedAltValue::zero(1);
        out.degree_slice_mut(0)[0] = z.degree_slice(1)[0];
        out
    });
    ProblemSpec {
        n: 1,
        kind: ProblemKind::HamiltonianOde1d,
        active_degrees: vec![0, 1],
        structure_degree: None,
        f: f.clone(),
        f_prime: Arc::new(move |_x, _z, w| {
            let mut out = GradedAltValue::zero(1);
            out.degree_slice_mut(0)[0] = w.degree_slice(1)[0];
            out
        }),
        symmetric_f_prime: false,
        state_independent_f_prime: true,
        quad_margin: 2,
    }
}

/// Incremental source `g(x, w)` for linearized problems.
pub type IncrementalSource = SourceFn;

/// Constant-in-`w` incremental source from a graded polynomial form.
pub fn constant_source(n: usize, form: GradedPolyForm) -> IncrementalSource {
    Arc::new(move |x, _w| eval_graded_form(n, &form, x))
}

/// Two linearized problems around a base problem with incremental sources
/// `g₁`, `g₂`: `D w = f′ w + gᵢ(x, w)`. Valid as standalone problems when
/// the base linearization is state independent.
pub fn make_reciprocity_pair(
    base: &ProblemSpec,
    g1: IncrementalSource,
    g2: IncrementalSource,
) -> (ProblemSpec, ProblemSpec) {
    let mk = |g: IncrementalSource| {
        let fp = base.f_prime.clone();
        let fp2 = base.f_prime.clone();
        let n = base.n;
        ProblemSpec {
            n,
            kind: ProblemKind::Linearized,
            active_degrees: base.active_degrees.clone(),
            structure_degree: base.structure_degree,
            f: Arc::new(move |x, w| {
                let zero = GradedAltValue::zero(n);
                let lin = fp(x, &zero, w);
                lin.add(&g(x, w)).expect("same dimension")
            }),
            f_prime: Arc::new(move |x, _z, w| {
                let zero = GradedAltValue::zero(n);
                fp2(x, &zero, w)
            }),
            symmetric_f_prime: base.symmetric_f_prime,
            state_independent_f_prime: true,
            quad_margin: base.quad_margin,
        }
    };
    (mk(g1), mk(g2))
}

/// Largest relative asymmetry `|(f′w₁,w₂) − (w₁,f′w₂)|` of the
/// linearization over random samples.
pub fn check_f_prime_symmetry(problem: &ProblemSpec, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = problem.n;
    let mut random_graded = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut g = GradedAltValue::zero(n);
        for k in 0..=n {
            for v in g.degree_slice_mut(k) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        g
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..1.0)));
        let z = random_graded(&mut rng);
        let w1 = random_graded(&mut rng);
        let w2 = random_graded(&mut rng);
        let a = inner(&(problem.f_prime)(&x, &z, &w1), &w2).expect("same n");
        let b = inner(&w1, &(problem.f_prime)(&x, &z, &w2)).expect("same n");
        let scale = a.abs().max(b.abs()).max(1.0);
        worst = worst.max((a - b).abs() / scale);
    }
    worst
}

/// Builds a global polynomial graded form from per-degree coefficient
/// tables (monomials at the stated order, origin frame).
pub fn graded_form_from_coeffs(
    n: usize,
    parts: &BTreeMap<usize, (usize, Vec<Vec<f64>>)>,
) -> Result<GradedPolyForm> {
    let mut out = GradedPolyForm::new();
    for (&degree, (order, cols)) in parts {
        let basis = ScalarBasis::new(n, *order, DVector::zeros(n), 1.0);
        let mut f = PolyDiffForm::zero(n, degree, basis);
        if cols.len() != f.coeffs.ncols() {
            return Err(Error::Config(format!(
                "degree {degree} source has {} columns, expected {}",
                cols.len(),
                f.coeffs.ncols()
            )));
        }
        for (c, col) in cols.iter().enumerate() {
            if col.len() != f.coeffs.nrows() {
                return Err(Error::Config(format!(
                    "degree {degree} source column {c} has {} rows, expected {}",
                    col.len(),
                    f.coeffs.nrows()
                )));
            }
            for (r, &v) in col.iter().enumerate() {
                f.coeffs[(r, c)] = v;
            }
        }
        out.insert(degree, f);
    }
    Ok(out)
}

/// JSON-facing problem configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub k: usize,
    /// Potential: "zero" | "linear" | {"quadratic_mass": c} | {"quartic": s}
    #[serde(default)]
    pub potential: Option<serde_json::Value>,
    /// Per-degree source coefficients: degree → [order, columns]
    #[serde(default)]
    pub source: Option<BTreeMap<String, (usize, Vec<Vec<f64>>)>>,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        let source_form = || -> Result<GradedPolyForm> {
            match &self.source {
                None => Ok(GradedPolyForm::new()),
                Some(src) => {
                    let mut parts = BTreeMap::new();
                    for (ks, v) in src {
                        let k: usize = ks
                            .parse()
                            .map_err(|_| Error::Config(format!("bad source degree key {ks}")))?;
                        parts.insert(k, v.clone());
                    }
                    graded_form_from_coeffs(self.n, &parts)
                }
            }
        };
        let potential = || -> Result<PotentialSpec> {
            match &self.potential {
                None => Ok(PotentialSpec::Zero),
                Some(serde_json::Value::String(s)) if s == "zero" => Ok(PotentialSpec::Zero),
                Some(serde_json::Value::String(s)) if s == "linear" => {
                    Ok(PotentialSpec::Linear(source_form()?))
                }
                Some(serde_json::Value::Object(m)) => {
                    if let Some(c) = m.get("quadratic_mass").and_then(|v| v.as_f64()) {
                        Ok(PotentialSpec::QuadraticMass(c))
                    } else if let Some(s) = m.get("quartic").and_then(|v| v.as_f64()) {
                        Ok(PotentialSpec::Quartic(s))
                    } else {
                        Err(Error::Config(format!("unrecognized potential {m:?}")))
                    }
                }
                Some(v) => Err(Error::Config(format!("unrecognized potential {v}"))),
            }
        };
        match self.kind.as_str() {
            "hodge_dirac_source" => Ok(make_hodge_dirac(self.n, source_form()?)),
            "hodge_laplace_semilinear" | "hodge_laplace" => {
                make_hodge_laplace(self.n, self.k, potential()?)
            }
            "vvp_stokes" => make_vvp(self.n, self.k, potential()?),
            "maxwell_type" => make_maxwell_type(self.n, self.k, source_form()?),
            "hamiltonian_ode_1d" => Ok(make_oscillator()),
            other => Err(Error::Config(format!("unknown problem kind {other}"))),
        }
    }
}
