//! Broken global spaces, facet trace spaces, and the jump/average/bracket
//! calculus on the mesh skeleton.
//!
//! Facet data is graded by *facet* degree: slot `j` of a tangential-type
//! field holds the tangential trace of the degree-`j` volume component,
//! while slot `j` of a normal-type field holds the normal trace of the
//! degree-`j+1` component. Pairings combine equal facet degrees, which is
//! exactly how the boundary bracket couples the two trace types.

use crate::error::{Error, Result};
use crate::exterior::binomial;
use crate::mesh::SimplicialMesh;
use crate::polyforms::{
    self, l2_facet, FacetPolyForm, FormSpaceSpec, PolyDiffForm, ScalarBasis,
};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Role of a facet trace field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceRole {
    Tangential,
    Normal,
}

/// Product of per-cell polynomial form spaces with a global interior
/// degree-of-freedom layout.
#[derive(Debug, Clone)]
pub struct BrokenSpace {
    specs: Vec<BTreeMap<usize, FormSpaceSpec>>,
    bases: Vec<BTreeMap<usize, Vec<PolyDiffForm>>>,
    offsets: BTreeMap<(usize, usize), usize>,
    total: usize,
}

impl BrokenSpace {
    /// Same space specification on every cell.
    pub fn uniform(
        mesh: &SimplicialMesh,
        per_degree: &BTreeMap<usize, FormSpaceSpec>,
    ) -> Result<Self> {
        let specs = vec![per_degree.clone(); mesh.num_cells()];
        Self::new(mesh, specs)
    }

    pub fn new(
        mesh: &SimplicialMesh,
        specs: Vec<BTreeMap<usize, FormSpaceSpec>>,
    ) -> Result<Self> {
        if specs.len() != mesh.num_cells() {
            return Err(Error::Usage("one spec map per cell required".into()));
        }
        let mut bases = Vec::with_capacity(specs.len());
        let mut offsets = BTreeMap::new();
        let mut total = 0usize;
        for (cell, map) in specs.iter().enumerate() {
            let mut cell_bases = BTreeMap::new();
            for (&degree, spec) in map {
                if spec.degree != degree {
                    return Err(Error::Usage(format!(
                        "spec degree {} filed under degree {degree}",
                        spec.degree
                    )));
                }
                let b = polyforms::basis(mesh, cell, spec)?;
                offsets.insert((cell, degree), total);
                total += b.len();
                cell_bases.insert(degree, b);
            }
            bases.push(cell_bases);
        }
        Ok(Self {
            specs,
            bases,
            offsets,
            total,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    /// Degrees present on a cell (uniform constructions share one set).
    pub fn degrees(&self, cell: usize) -> Vec<usize> {
        self.specs[cell].keys().copied().collect()
    }

    pub fn spec(&self, cell: usize, degree: usize) -> Option<&FormSpaceSpec> {
        self.specs[cell].get(&degree)
    }

    pub fn basis(&self, cell: usize, degree: usize) -> &[PolyDiffForm] {
        self.bases[cell]
            .get(&degree)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn offset(&self, cell: usize, degree: usize) -> Option<usize> {
        self.offsets.get(&(cell, degree)).copied()
    }

    pub fn block_dim(&self, cell: usize, degree: usize) -> usize {
        self.basis(cell, degree).len()
    }

    /// Reconstructs the per-degree forms of one cell from a global
    /// interior coefficient vector.
    pub fn cell_forms(
        &self,
        cell: usize,
        coeffs: &DVector<f64>,
    ) -> BTreeMap<usize, PolyDiffForm> {
        let mut out = BTreeMap::new();
        for (&degree, basis) in &self.bases[cell] {
            if basis.is_empty() {
                continue;
            }
            let off = self.offsets[&(cell, degree)];
            let mut acc = basis[0].scaled(coeffs[off]);
            for (i, f) in basis.iter().enumerate().skip(1) {
                acc = acc.add(&f.scaled(coeffs[off + i])).expect("same frame");
            }
            out.insert(degree, acc);
        }
        out
    }
}

/// A facet trace space: per-facet, per-slot polynomial orders with a
/// single-valued DOF layout. Tangential single-valued blocks expand to
/// equal side values; normal single-valued blocks expand with opposite
/// signs (`e⁺` convention on `sides[0]`).
#[derive(Debug, Clone)]
pub struct TraceSpace {
    pub role: TraceRole,
    pub single_valued: bool,
    /// When false, boundary facets carry no DOFs (the `V̊` spaces).
    pub include_boundary: bool,
    /// Facet degree `j` → polynomial order.
    pub slots: BTreeMap<usize, usize>,
    offsets: BTreeMap<(usize, usize), usize>,
    total: usize,
    fdim: usize,
}

impl TraceSpace {
    pub fn new(
        mesh: &SimplicialMesh,
        role: TraceRole,
        single_valued: bool,
        include_boundary: bool,
        slots: BTreeMap<usize, usize>,
    ) -> Self {
        let fdim = mesh.dim() - 1;
        let mut offsets = BTreeMap::new();
        let mut total = 0usize;
        for (fi, f) in mesh.facets().iter().enumerate() {
            if f.boundary && !include_boundary {
                continue;
            }
            for (&j, &order) in &slots {
                let dim = slot_dim(fdim, j, order);
                if dim == 0 {
                    continue;
                }
                offsets.insert((fi, j), total);
                total += dim;
            }
        }
        Self {
            role,
            single_valued,
            include_boundary,
            slots,
            offsets,
            total,
            fdim,
        }
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn offset(&self, facet: usize, slot: usize) -> Option<usize> {
        self.offsets.get(&(facet, slot)).copied()
    }

    pub fn slot_dim(&self, slot: usize) -> usize {
        self.slots
            .get(&slot)
            .map(|&order| slot_dim(self.fdim, slot, order))
            .unwrap_or(0)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.offsets.iter().map(|(&(f, j), &o)| (f, j, o))
    }

    /// Expands a global coefficient vector into a per-side facet field.
    /// Missing (boundary-excluded) blocks expand to zero.
    pub fn expand(&self, mesh: &SimplicialMesh, coeffs: &DVector<f64>) -> FacetField {
        let mut field = FacetField::new(mesh);
        for (fi, f) in mesh.facets().iter().enumerate() {
            for (&j, &order) in &self.slots {
                let dim = slot_dim(self.fdim, j, order);
                if dim == 0 {
                    continue;
                }
                let Some(off) = self.offset(fi, j) else {
                    continue;
                };
                for (si, _) in f.sides.iter().enumerate() {
                    let sign = match (self.role, self.single_valued, si) {
                        (TraceRole::Normal, true, 1) => -1.0,
                        _ => 1.0,
                    };
                    let mut form = FacetPolyForm::zero(mesh, fi, j, order);
                    for i in 0..dim {
                        form.coeffs.as_mut_slice()[i] = sign * coeffs[off + i];
                    }
                    field.set(fi, si, j, form);
                }
            }
        }
        field
    }
}

pub fn slot_dim(fdim: usize, slot: usize, order: usize) -> usize {
    let alt = binomial(fdim, slot);
    if alt == 0 {
        return 0;
    }
    binomial(order + fdim, fdim) * alt
}

/// A graded facet field on the mesh skeleton: per facet-side, per facet
/// degree, one polynomial facet form in the canonical frame.
#[derive(Debug, Clone)]
pub struct FacetField {
    data: Vec<Vec<BTreeMap<usize, FacetPolyForm>>>,
}

impl FacetField {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        let data = mesh
            .facets()
            .iter()
            .map(|f| vec![BTreeMap::new(); f.sides.len()])
            .collect();
        Self { data }
    }

    pub fn get(&self, facet: usize, side: usize, slot: usize) -> Option<&FacetPolyForm> {
        self.data[facet][side].get(&slot)
    }

    pub fn set(&mut self, facet: usize, side: usize, slot: usize, form: FacetPolyForm) {
        self.data[facet][side].insert(slot, form);
    }

    pub fn slots_on(&self, facet: usize, side: usize) -> Vec<usize> {
        self.data[facet][side].keys().copied().collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let data = self
            .data
            .iter()
            .map(|sides| {
                sides
                    .iter()
                    .map(|m| m.iter().map(|(&j, f)| (j, f.scaled(c))).collect())
                    .collect()
            })
            .collect();
        Self { data }
    }

    /// Slot-wise difference; missing entries are treated as zero.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for (fi, sides) in other.data.iter().enumerate() {
            for (si, slots) in sides.iter().enumerate() {
                for (&j, g) in slots {
                    match out.data[fi][si].get(&j) {
                        Some(f) => {
                            let d = f.sub(g)?;
                            out.data[fi][si].insert(j, d);
                        }
                        None => {
                            out.data[fi][si].insert(j, g.scaled(-1.0));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// L² norm over the whole skeleton (all facet-sides, all slots).
    pub fn norm(&self, mesh: &SimplicialMesh) -> f64 {
        let mut acc = 0.0;
        for sides in &self.data {
            for slots in sides {
                for f in slots.values() {
                    acc += l2_facet(mesh, f, f, None).unwrap_or(0.0);
                }
            }
        }
        acc.sqrt()
    }

    /// Restriction of the field norm to one facet-side list.
    pub fn norm_on(&self, mesh: &SimplicialMesh, sides: &[(usize, usize)]) -> f64 {
        let mut acc = 0.0;
        for &(fi, si) in sides {
            for f in self.data[fi][si].values() {
                acc += l2_facet(mesh, f, f, None).unwrap_or(0.0);
            }
        }
        acc.sqrt()
    }
}

fn combine(
    mesh: &SimplicialMesh,
    field: &FacetField,
    own_weight: f64,
    other_weight: f64,
    boundary_weight: f64,
) -> FacetField {
    let mut out = FacetField::new(mesh);
    for (fi, f) in mesh.facets().iter().enumerate() {
        if f.boundary {
            for (&j, form) in &field.data[fi][0] {
                out.set(fi, 0, j, form.scaled(boundary_weight));
            }
            continue;
        }
        for si in 0..2 {
            let other = 1 - si;
            let slots: std::collections::BTreeSet<usize> = field.data[fi][si]
                .keys()
                .chain(field.data[fi][other].keys())
                .copied()
                .collect();
            for j in slots {
                let zero = |order: usize| FacetPolyForm::zero(mesh, fi, j, order);
                let own = field.data[fi][si].get(&j);
                let oth = field.data[fi][other].get(&j);
                let order = own
                    .map(|f| f.order())
                    .into_iter()
                    .chain(oth.map(|f| f.order()))
                    .max()
                    .unwrap_or(0);
                let a = own.cloned().unwrap_or_else(|| zero(order));
                let b = oth.cloned().unwrap_or_else(|| zero(order));
                let combined = a
                    .scaled(own_weight)
                    .add(&b.scaled(other_weight))
                    .expect("same facet/degree");
                out.set(fi, si, j, combined);
            }
        }
    }
    out
}

/// Jump operator. Normal jump is `½(own + other)` on interior facets and 0
/// on the boundary; tangential jump is `½(own − other)` on interior facets
/// and the identity on the boundary.
pub fn jump(mesh: &SimplicialMesh, field: &FacetField, role: TraceRole) -> FacetField {
    match role {
        TraceRole::Normal => combine(mesh, field, 0.5, 0.5, 0.0),
        TraceRole::Tangential => combine(mesh, field, 0.5, -0.5, 1.0),
    }
}

/// Average operator. Normal average is `½(own − other)` on interior facets
/// and the identity on the boundary; tangential average is `½(own + other)`
/// on interior facets and 0 on the boundary.
pub fn average(mesh: &SimplicialMesh, field: &FacetField, role: TraceRole) -> FacetField {
    match role {
        TraceRole::Normal => combine(mesh, field, 0.5, -0.5, 1.0),
        TraceRole::Tangential => combine(mesh, field, 0.5, 0.5, 0.0),
    }
}

/// Skeleton pairing `Σ_K ⟨·,·⟩_∂K`: sums slot-matched facet L² products
/// over every facet-side.
pub fn pair(mesh: &SimplicialMesh, a: &FacetField, b: &FacetField) -> Result<f64> {
    let mut acc = 0.0;
    for (fi, f) in mesh.facets().iter().enumerate() {
        for si in 0..f.sides.len() {
            for (&j, fa) in &a.data[fi][si] {
                if let Some(fb) = b.data[fi][si].get(&j) {
                    acc += l2_facet(mesh, fa, fb, None)?;
                }
            }
        }
    }
    Ok(acc)
}

/// The antisymmetric boundary bracket
/// `[w₁,w₂] = ⟨w₁^tan, w₂^nor⟩ − ⟨w₂^tan, w₁^nor⟩` restricted to the given
/// facet-sides.
pub fn bracket(
    mesh: &SimplicialMesh,
    w1: &TraceFields,
    w2: &TraceFields,
    sides: &[(usize, usize)],
) -> Result<f64> {
    let mut acc = 0.0;
    for &(fi, si) in sides {
        let slots: std::collections::BTreeSet<usize> = w1.tangential.data[fi][si]
            .keys()
            .chain(w2.tangential.data[fi][si].keys())
            .copied()
            .collect();
        // per-slot differencing so the diagonal vanishes identically
        for j in slots {
            let mut term = 0.0;
            if let (Some(t1), Some(n2)) =
                (w1.tangential.data[fi][si].get(&j), w2.normal.data[fi][si].get(&j))
            {
                term += l2_facet(mesh, t1, n2, None)?;
            }
            if let (Some(t2), Some(n1)) =
                (w2.tangential.data[fi][si].get(&j), w1.normal.data[fi][si].get(&j))
            {
                term -= l2_facet(mesh, t2, n1, None)?;
            }
            acc += term;
        }
    }
    Ok(acc)
}

/// A tangential/normal pair of facet fields describing one trace object.
#[derive(Debug, Clone)]
pub struct TraceFields {
    pub tangential: FacetField,
    pub normal: FacetField,
}

impl TraceFields {
    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            tangential: self.tangential.sub(&other.tangential)?,
            normal: self.normal.sub(&other.normal)?,
        })
    }

    /// Combined L² norm over the skeleton.
    pub fn norm(&self, mesh: &SimplicialMesh) -> f64 {
        (self.tangential.norm(mesh).powi(2) + self.normal.norm(mesh).powi(2)).sqrt()
    }
}

/// Tangential and normal trace fields of a broken (per-cell, per-degree)
/// collection of polynomial forms: slot `j` takes the tangential trace of
/// the degree-`j` component and the normal trace of the degree-`j+1` one.
pub fn cell_trace_fields(
    mesh: &SimplicialMesh,
    forms: &[BTreeMap<usize, PolyDiffForm>],
) -> Result<TraceFields> {
    let n = mesh.dim();
    let mut tangential = FacetField::new(mesh);
    let mut normal = FacetField::new(mesh);
    for (fi, f) in mesh.facets().iter().enumerate() {
        for (si, side) in f.sides.iter().enumerate() {
            let cell = side.cell;
            for (&k, form) in &forms[cell] {
                if k + 1 <= n {
                    // tangential trace of the degree-k component at slot k
                    if k <= n - 1 {
                        let t = polyforms::trace_tan(mesh, form, fi, si)?;
                        tangential.set(fi, si, k, t);
                    }
                }
                if k >= 1 {
                    let t = polyforms::trace_nor(mesh, form, fi, si)?;
                    normal.set(fi, si, k - 1, t);
                }
            }
        }
    }
    Ok(TraceFields {
        tangential,
        normal,
    })
}

/// Surface integral `∫_∂K tr ω(w₁, w₂)` of the canonical multisymplectic
/// 2-form of two graded polynomial forms, evaluated by facet quadrature
/// with the cell's induced orientation. An evaluation path independent of
/// the trace machinery.
pub fn ms_surface_integral(
    mesh: &SimplicialMesh,
    cell: usize,
    w1: &BTreeMap<usize, PolyDiffForm>,
    w2: &BTreeMap<usize, PolyDiffForm>,
) -> Result<f64> {
    let n = mesh.dim();
    let max_order = w1
        .values()
        .chain(w2.values())
        .map(|f| f.order())
        .max()
        .unwrap_or(0);
    let eval_graded = |forms: &BTreeMap<usize, PolyDiffForm>, x: &DVector<f64>| {
        let mut g = crate::exterior::GradedAltValue::zero(n);
        for (&k, f) in forms {
            let v = f.eval(x);
            g.degree_slice_mut(k).copy_from_slice(v.as_slice());
        }
        g
    };
    let mut acc = 0.0;
    for (fi, si) in mesh.cell_facets(cell) {
        let f = mesh.facet(fi);
        let sigma = f.sides[si].orientation_sign;
        let rule = polyforms::quadrature::simplex_rule(n - 1, 2 * max_order + 2)?;
        let (pts, ws) = polyforms::quadrature::map_to_simplex(&rule, &f.frame.ref_vertices);
        let tangent_vecs: Vec<Vec<f64>> = f
            .frame
            .tangents
            .iter()
            .map(|t| t.as_slice().to_vec())
            .collect();
        for (y, w) in pts.iter().zip(&ws) {
            let mut x = f.frame.origin.clone();
            for (j, t) in f.frame.tangents.iter().enumerate() {
                x += t * y[j];
            }
            let omega = crate::exterior::ms_form(&eval_graded(w1, &x), &eval_graded(w2, &x))?;
            acc += w * sigma * omega.apply(n - 1, &tangent_vecs)?;
        }
    }
    Ok(acc)
}

/// Interpolates a trace-space coefficient vector from prescribed facet
/// data (used for essential boundary data): fits each block by facet L²
/// projection of the given forms.
pub fn fit_slot_coeffs(
    mesh: &SimplicialMesh,
    facet: usize,
    slot: usize,
    order: usize,
    data: &FacetPolyForm,
) -> Result<DVector<f64>> {
    // both live in nested monomial bases: pad or L²-project down
    if data.order() <= order {
        let padded = data.pad_to_order(order);
        return Ok(DVector::from_column_slice(padded.coeffs.as_slice()));
    }
    let mass_low = polyforms::facet_scalar_mass(mesh, facet, order, order)?;
    let mass_rect = polyforms::facet_scalar_mass(mesh, facet, order, data.order())?;
    let chol = mass_low
        .cholesky()
        .ok_or_else(|| Error::Numeric("facet mass not SPD".into()))?;
    let fdim = mesh.dim() - 1;
    let alt = binomial(fdim, slot);
    let sdim = slot_dim(fdim, slot, order) / alt.max(1);
    let mut out = DVector::zeros(sdim * alt);
    for c in 0..alt {
        let rhs = &mass_rect * data.coeffs.column(c);
        let sol = chol.solve(&rhs);
        out.rows_mut(c * sdim, sdim).copy_from(&sol);
    }
    Ok(out)
}

/// Builds the zero facet form with a given frame order (helper for slots
/// that must exist structurally).
pub fn zero_slot_form(mesh: &SimplicialMesh, facet: usize, slot: usize, order: usize) -> FacetPolyForm {
    FacetPolyForm::zero(mesh, facet, slot, order)
}

/// Scalar basis of a facet at a given order (canonical frame coordinates).
pub fn facet_scalar_basis(mesh: &SimplicialMesh, facet: usize, order: usize) -> ScalarBasis {
    let fdim = mesh.dim() - 1;
    ScalarBasis::new(
        fdim,
        order,
        DVector::zeros(fdim),
        mesh.facet(facet).frame.diameter,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh;
    use crate::polyforms::basis_with_frame;
    use rand::{Rng, SeedableRng};

    fn random_global_forms(
        n: usize,
        order: usize,
        rng: &mut impl Rng,
    ) -> BTreeMap<usize, PolyDiffForm> {
        let mut out = BTreeMap::new();
        for k in 0..=n {
            let gens = basis_with_frame(
                n,
                &FormSpaceSpec::full(order, k),
                DVector::zeros(n),
                1.0,
                None,
            );
            let mut acc = gens[0].scaled(rng.gen_range(-1.0..1.0));
            for g in &gens[1..] {
                acc = acc.add(&g.scaled(rng.gen_range(-1.0..1.0))).unwrap();
            }
            out.insert(k, acc);
        }
        out
    }

    fn random_field(mesh: &SimplicialMesh, rng: &mut impl Rng) -> FacetField {
        let mut f = FacetField::new(mesh);
        for (fi, fac) in mesh.facets().iter().enumerate() {
            for si in 0..fac.sides.len() {
                for j in 0..mesh.dim() {
                    let mut form = FacetPolyForm::zero(mesh, fi, j, 1);
                    for v in form.coeffs.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                    f.set(fi, si, j, form);
                }
            }
        }
        f
    }

    #[test]
    fn smooth_fields_have_zero_jumps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 3] {
            let mesh = match n {
                1 => mesh::interval_mesh(0.0, 1.0, 3).unwrap(),
                2 => mesh::square_mesh(1).unwrap(),
                _ => mesh::equilateral_pair(3).unwrap(),
            };
            let w = random_global_forms(n, 2, &mut rng);
            let per_cell = vec![w; mesh.num_cells()];
            let traces = cell_trace_fields(&mesh, &per_cell).unwrap();
            let jt = jump(&mesh, &traces.tangential, TraceRole::Tangential);
            let jn = jump(&mesh, &traces.normal, TraceRole::Normal);
            for (fi, f) in mesh.facets().iter().enumerate() {
                if f.boundary {
                    continue;
                }
                for si in 0..2 {
                    for j in jt.slots_on(fi, si) {
                        let v = l2_facet(&mesh, jt.get(fi, si, j).unwrap(), jt.get(fi, si, j).unwrap(), None).unwrap();
                        assert!(v.sqrt() < 1e-10, "tangential jump n={n} facet={fi}");
                    }
                    for j in jn.slots_on(fi, si) {
                        let v = l2_facet(&mesh, jn.get(fi, si, j).unwrap(), jn.get(fi, si, j).unwrap(), None).unwrap();
                        assert!(v.sqrt() < 1e-10, "normal jump n={n} facet={fi}");
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_conventions_and_identity() {
        let mesh = mesh::square_mesh(1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = random_field(&mesh, &mut rng);
        for role in [TraceRole::Tangential, TraceRole::Normal] {
            let a = average(&mesh, &g, role);
            let j = jump(&mesh, &g, role);
            // identity: field = average + jump, exactly
            for (fi, f) in mesh.facets().iter().enumerate() {
                for si in 0..f.sides.len() {
                    for slot in g.slots_on(fi, si) {
                        let sum = a
                            .get(fi, si, slot)
                            .unwrap()
                            .add(j.get(fi, si, slot).unwrap())
                            .unwrap();
                        let diff = sum.sub(g.get(fi, si, slot).unwrap()).unwrap();
                        assert!(diff.coeffs.iter().all(|&c| c.abs() < 1e-14));
                    }
                }
            }
            // boundary rows: tangential jump = value / average = 0;
            // normal jump = 0 / average = value
            for (fi, f) in mesh.facets().iter().enumerate() {
                if !f.boundary {
                    continue;
                }
                for slot in g.slots_on(fi, 0) {
                    let (zero_side, val_side) = match role {
                        TraceRole::Tangential => (&a, &j),
                        TraceRole::Normal => (&j, &a),
                    };
                    assert!(zero_side
                        .get(fi, 0, slot)
                        .map(|f| f.coeffs.iter().all(|&c| c == 0.0))
                        .unwrap_or(true));
                    let v = val_side.get(fi, 0, slot).unwrap();
                    let d = v.sub(g.get(fi, 0, slot).unwrap()).unwrap();
                    assert!(d.coeffs.iter().all(|&c| c.abs() < 1e-14));
                }
            }
        }
    }

    #[test]
    fn average_jump_product_formulas() {
        let mesh = mesh::square_mesh(1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let wn = random_field(&mesh, &mut rng);
        let wt = random_field(&mesh, &mut rng);
        let lhs = pair(&mesh, &wn, &wt).unwrap();
        let rhs = pair(&mesh, &average(&mesh, &wn, TraceRole::Normal), &jump(&mesh, &wt, TraceRole::Tangential)).unwrap()
            + pair(&mesh, &jump(&mesh, &wn, TraceRole::Normal), &average(&mesh, &wt, TraceRole::Tangential)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));

        let wn2 = random_field(&mesh, &mut rng);
        let lhs = pair(&mesh, &wn, &wn2).unwrap();
        let rhs = pair(&mesh, &average(&mesh, &wn, TraceRole::Normal), &average(&mesh, &wn2, TraceRole::Normal)).unwrap()
            + pair(&mesh, &jump(&mesh, &wn, TraceRole::Normal), &jump(&mesh, &wn2, TraceRole::Normal)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));

        let wt2 = random_field(&mesh, &mut rng);
        let lhs = pair(&mesh, &wt, &wt2).unwrap();
        let rhs = pair(&mesh, &average(&mesh, &wt, TraceRole::Tangential), &average(&mesh, &wt2, TraceRole::Tangential)).unwrap()
            + pair(&mesh, &jump(&mesh, &wt, TraceRole::Tangential), &jump(&mesh, &wt2, TraceRole::Tangential)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn pair_examples() {
        let mesh = mesh::interval_mesh(0.0, 1.0, 2).unwrap();
        // a = normal trace of dt, b = tangential trace of 1: the skeleton sum
        // telescopes to zero (interior sides cancel, boundary signs cancel)
        let one = {
            let mut f = PolyDiffForm::zero(1, 0, ScalarBasis::new(1, 0, DVector::zeros(1), 1.0));
            f.coeffs[(0, 0)] = 1.0;
            f
        };
        let dt = {
            let mut f = PolyDiffForm::zero(1, 1, ScalarBasis::new(1, 0, DVector::zeros(1), 1.0));
            f.coeffs[(0, 0)] = 1.0;
            f
        };
        let per_cell: Vec<BTreeMap<usize, PolyDiffForm>> = (0..mesh.num_cells())
            .map(|_| {
                let mut m = BTreeMap::new();
                m.insert(0, one.clone());
                m.insert(1, dt.clone());
                m
            })
            .collect();
        let traces = cell_trace_fields(&mesh, &per_cell).unwrap();
        let v = pair(&mesh, &traces.tangential, &traces.normal).unwrap();
        assert!(v.abs() < 1e-13);

        // endpoint-sign oracle: per cell the sum is ±1 at the two endpoints
        for c in 0..mesh.num_cells() {
            let mut acc = 0.0;
            for (fi, si) in mesh.cell_facets(c) {
                let t = traces.tangential.get(fi, si, 0).unwrap();
                let n = traces.normal.get(fi, si, 0).unwrap();
                acc += l2_facet(&mesh, t, n, None).unwrap();
            }
            assert!(acc.abs() < 1e-13);
        }

        // pair with an empty field is zero
        let empty = FacetField::new(&mesh);
        assert_eq!(pair(&mesh, &empty, &traces.normal).unwrap(), 0.0);
    }

    #[test]
    fn bracket_matches_volume_and_surface_forms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for n in [1usize, 2, 3] {
            let mesh = match n {
                1 => mesh::interval_mesh(0.2, 1.1, 1).unwrap(),
                2 => mesh::equilateral_pair(2).unwrap(),
                _ => mesh::equilateral_pair(3).unwrap(),
            };
            for _ in 0..4 {
                let w1 = random_global_forms(n, 2, &mut rng);
                let w2 = random_global_forms(n, 2, &mut rng);
                let per1 = vec![w1.clone(); mesh.num_cells()];
                let per2 = vec![w2.clone(); mesh.num_cells()];
                let t1 = cell_trace_fields(&mesh, &per1).unwrap();
                let t2 = cell_trace_fields(&mesh, &per2).unwrap();
                let cell = 0usize;
                let sides = mesh.cell_facets(cell);
                let b = bracket(&mesh, &t1, &t2, &sides).unwrap();

                // volume expression (D w1, w2) − (w1, D w2)
                let mut vol = 0.0;
                for k in 0..=n {
                    let dw1 = w1.get(&k).map(polyforms::ext_d);
                    let cw1 = w1.get(&k).map(polyforms::codiff);
                    let dw2 = w2.get(&k).map(polyforms::ext_d);
                    let cw2 = w2.get(&k).map(polyforms::codiff);
                    if k + 1 <= n {
                        if let (Some(d1), Some(f2)) = (&dw1, w2.get(&(k + 1))) {
                            vol += polyforms::l2_cell(&mesh, cell, d1, f2, None).unwrap();
                        }
                        if let (Some(d2), Some(f1)) = (&dw2, w1.get(&(k + 1))) {
                            vol -= polyforms::l2_cell(&mesh, cell, d2, f1, None).unwrap();
                        }
                    }
                    if k >= 1 {
                        if let (Some(c1), Some(f2)) = (&cw1, w2.get(&(k - 1))) {
                            vol += polyforms::l2_cell(&mesh, cell, c1, f2, None).unwrap();
                        }
                        if let (Some(c2), Some(f1)) = (&cw2, w1.get(&(k - 1))) {
                            vol -= polyforms::l2_cell(&mesh, cell, c2, f1, None).unwrap();
                        }
                    }
                }

                let surf = ms_surface_integral(&mesh, cell, &w1, &w2).unwrap();
                let scale = t1.norm(&mesh) * t2.norm(&mesh);
                assert!(
                    (b - vol).abs() <= 1e-10 * scale.max(1.0),
                    "n={n}: bracket {b} vs volume {vol}"
                );
                assert!(
                    (b - surf).abs() <= 1e-10 * scale.max(1.0),
                    "n={n}: bracket {b} vs surface {surf}"
                );
                // antisymmetry
                let bb = bracket(&mesh, &t1, &t1, &sides).unwrap();
                assert_eq!(bb, 0.0);
            }
        }
    }

    #[test]
    fn integration_by_parts_pins_signs() {
        // ⟨w1^tan, w2^nor⟩_∂K = (d w1, w2)_K − (w1, δ w2)_K on random simplices
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for n in [1usize, 2, 3] {
            for _ in 0..8 {
                let mesh = random_simplex_mesh(n, &mut rng);
                for k in 1..=n {
                    let w1 = random_pure(n, k - 1, 3, &mut rng);
                    let w2 = random_pure(n, k, 3, &mut rng);
                    let mut lhs = 0.0;
                    for (fi, si) in mesh.cell_facets(0) {
                        let t = polyforms::trace_tan(&mesh, &w1, fi, si).unwrap();
                        let nr = polyforms::trace_nor(&mesh, &w2, fi, si).unwrap();
                        lhs += l2_facet(&mesh, &t, &nr, None).unwrap();
                    }
                    let rhs = polyforms::l2_cell(&mesh, 0, &polyforms::ext_d(&w1), &w2, None).unwrap()
                        - polyforms::l2_cell(&mesh, 0, &w1, &polyforms::codiff(&w2), None).unwrap();
                    let scale = lhs.abs().max(rhs.abs()).max(1e-3);
                    assert!(
                        (lhs - rhs).abs() <= 1e-10 * scale,
                        "n={n} k={k}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    pub(crate) fn random_simplex_mesh(n: usize, rng: &mut impl Rng) -> SimplicialMesh {
        loop {
            let vs: Vec<DVector<f64>> = (0..=n)
                .map(|_| DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..1.0))))
                .collect();
            if let Ok(m) = mesh::build_mesh(n, vs, vec![(0..=n).collect()]) {
                if m.cell_volume(0) > 0.05 / (1..=n).map(|i| i as f64).product::<f64>() {
                    return m;
                }
            }
        }
    }

    pub(crate) fn random_pure(
        n: usize,
        degree: usize,
        order: usize,
        rng: &mut impl Rng,
    ) -> PolyDiffForm {
        let mut f = PolyDiffForm::zero(
            n,
            degree,
            ScalarBasis::new(n, order, DVector::zeros(n), 1.0),
        );
        for v in f.coeffs.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        f
    }
}
