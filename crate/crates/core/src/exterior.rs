//! Exact exterior-algebra kernel on `Alt R^n` for `n ∈ {1,2,3}`.
//!
//! Coefficients are stored over the lexicographically ordered basis of
//! strictly increasing multi-indices, which is orthonormal for the inner
//! product induced by the Euclidean metric. All sign bookkeeping (wedge
//! permutation signs, Hodge complement signs) is done by counting
//! inversions, so the algebraic identities hold to floating-point
//! exactness: only sign flips and permutations are involved.

use crate::error::{Error, Result};

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// A strictly increasing tuple of indices in `{1..n}`; the basis label of
/// `dx^{i_1} ∧ … ∧ dx^{i_k}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    indices: Vec<u8>,
}

impl MultiIndex {
    /// Builds a multi-index, validating strict monotonicity and range.
    pub fn new(indices: Vec<u8>, n: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Usage(format!(
                    "multi-index {indices:?} is not strictly increasing"
                )));
            }
        }
        if indices.iter().any(|&i| i == 0 || i as usize > n) {
            return Err(Error::Usage(format!(
                "multi-index {indices:?} out of range 1..={n}"
            )));
        }
        Ok(Self { indices })
    }

    pub fn degree(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    /// Position of this multi-index in the lexicographic enumeration of
    /// degree-`k` multi-indices over `{1..n}`.
    pub fn position(&self, n: usize) -> usize {
        multi_indices(n, self.degree())
            .iter()
            .position(|m| m == self)
            .expect("multi-index in range")
    }
}

/// All degree-`k` multi-indices over `{1..n}` in lexicographic order.
pub fn multi_indices(n: usize, k: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut cur: Vec<u8> = (1..=k as u8).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(MultiIndex {
            indices: cur.clone(),
        });
        // advance to the next increasing tuple
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < (n - (k - 1 - i)) as u8 {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Sign and target of `dx_I ∧ dx_J`; `None` when the indices overlap.
pub fn wedge_basis(i: &MultiIndex, j: &MultiIndex) -> Option<(f64, MultiIndex)> {
    let mut merged = Vec::with_capacity(i.indices.len() + j.indices.len());
    // count inversions while merging I followed by J
    let mut inversions = 0usize;
    for &b in &j.indices {
        if i.indices.contains(&b) {
            return None;
        }
        inversions += i.indices.iter().filter(|&&a| a > b).count();
    }
    merged.extend_from_slice(&i.indices);
    merged.extend_from_slice(&j.indices);
    merged.sort_unstable();
    let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, MultiIndex { indices: merged }))
}

/// Sign and complement of the Hodge dual: `⋆ dx_I = sign · dx_{I^c}`,
/// pinned by `dx_I ∧ ⋆ dx_I = vol`.
pub fn hodge_basis(i: &MultiIndex, n: usize) -> (f64, MultiIndex) {
    let comp: Vec<u8> = (1..=n as u8).filter(|b| !i.indices.contains(b)).collect();
    let mut inversions = 0usize;
    for &b in &comp {
        inversions += i.indices.iter().filter(|&&a| a > b).count();
    }
    let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
    (sign, MultiIndex { indices: comp })
}

/// An element of `Alt R^n = ⊕_k Alt^k R^n`: one coefficient array per
/// degree, ordered lexicographically over increasing multi-indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedAltValue {
    n: usize,
    coeffs: Vec<Vec<f64>>,
}

impl GradedAltValue {
    pub fn zero(n: usize) -> Self {
        let coeffs = (0..=n).map(|k| vec![0.0; binomial(n, k)]).collect();
        Self { n, coeffs }
    }

    /// Builds from per-degree coefficient arrays; lengths must match the
    /// binomial dimensions.
    pub fn new(n: usize, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.len() != n + 1 {
            return Err(Error::Usage(format!(
                "expected {} degree slices, got {}",
                n + 1,
                coeffs.len()
            )));
        }
        for (k, c) in coeffs.iter().enumerate() {
            if c.len() != binomial(n, k) {
                return Err(Error::Usage(format!(
                    "degree {k} slice has length {}, expected {}",
                    c.len(),
                    binomial(n, k)
                )));
            }
        }
        Ok(Self { n, coeffs })
    }

    /// A pure degree-`k` value with the given coefficients.
    pub fn pure(n: usize, k: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut v = Self::zero(n);
        if coeffs.len() != binomial(n, k) {
            return Err(Error::Usage(format!(
                "degree {k} slice has length {}, expected {}",
                coeffs.len(),
                binomial(n, k)
            )));
        }
        v.coeffs[k] = coeffs;
        Ok(v)
    }

    /// The basis element `dx_I`.
    pub fn basis(n: usize, idx: &MultiIndex) -> Self {
        let mut v = Self::zero(n);
        v.coeffs[idx.degree()][idx.position(n)] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Pure-degree slice accessor.
    pub fn degree_slice(&self, k: usize) -> &[f64] {
        &self.coeffs[k]
    }

    pub fn degree_slice_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.coeffs[k]
    }

    pub fn scaled(&self, c: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|s| s.iter().map(|x| c * x).collect())
            .collect();
        Self { n: self.n, coeffs }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_n(self, other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(Self { n: self.n, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// Evaluates the pure degree-`k` part on `k` vectors (each of length
    /// `n`): the alternating sum of minors `Σ_I c_I det(V[I, :])`.
    pub fn apply(&self, k: usize, vectors: &[Vec<f64>]) -> Result<f64> {
        if vectors.len() != k {
            return Err(Error::Usage(format!(
                "degree-{k} value applied to {} vectors",
                vectors.len()
            )));
        }
        let mut acc = 0.0;
        for (pos, idx) in multi_indices(self.n, k).iter().enumerate() {
            let c = self.coeffs[k][pos];
            if c == 0.0 {
                continue;
            }
            acc += c * minor_det(idx.indices(), vectors);
        }
        Ok(acc)
    }
}

fn minor_det(rows: &[u8], cols: &[Vec<f64>]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => cols[0][rows[0] as usize - 1],
        2 => {
            let (r0, r1) = (rows[0] as usize - 1, rows[1] as usize - 1);
            cols[0][r0] * cols[1][r1] - cols[0][r1] * cols[1][r0]
        }
        3 => {
            let r: Vec<usize> = rows.iter().map(|&x| x as usize - 1).collect();
            let m = |i: usize, j: usize| cols[j][r[i]];
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        }
        _ => unreachable!("n <= 3"),
    }
}

fn check_same_n(a: &GradedAltValue, b: &GradedAltValue) -> Result<()> {
    if a.n != b.n {
        return Err(Error::Usage(format!(
            "ambient dimension mismatch: {} vs {}",
            a.n, b.n
        )));
    }
    Ok(())
}

/// Wedge product, graded bilinear; degrees exceeding `n` truncate to zero.
pub fn wedge(a: &GradedAltValue, b: &GradedAltValue) -> Result<GradedAltValue> {
    check_same_n(a, b)?;
    let n = a.n;
    let mut out = GradedAltValue::zero(n);
    for ka in 0..=n {
        let ia = multi_indices(n, ka);
        for kb in 0..=n - ka {
            let ib = multi_indices(n, kb);
            for (pa, ma) in ia.iter().enumerate() {
                let ca = a.coeffs[ka][pa];
                if ca == 0.0 {
                    continue;
                }
                for (pb, mb) in ib.iter().enumerate() {
                    let cb = b.coeffs[kb][pb];
                    if cb == 0.0 {
                        continue;
                    }
                    if let Some((sign, merged)) = wedge_basis(ma, mb) {
                        out.coeffs[ka + kb][merged.position(n)] += sign * ca * cb;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Hodge star for the Euclidean metric and standard orientation; maps
/// degree `k` to degree `n−k` with `⋆⋆ = (−1)^{k(n−k)}`.
pub fn hodge(a: &GradedAltValue) -> GradedAltValue {
    let n = a.n;
    let mut out = GradedAltValue::zero(n);
    for k in 0..=n {
        for (pos, idx) in multi_indices(n, k).iter().enumerate() {
            let c = a.coeffs[k][pos];
            if c == 0.0 {
                continue;
            }
            let (sign, comp) = hodge_basis(idx, n);
            out.coeffs[n - k][comp.position(n)] += sign * c;
        }
    }
    out
}

/// Inverse Hodge star: `⋆^{-1} = (−1)^{k(n−k)} ⋆` on degree `k`.
pub fn hodge_inv(a: &GradedAltValue) -> GradedAltValue {
    let n = a.n;
    let mut out = GradedAltValue::zero(n);
    for k in 0..=n {
        let sign = if (k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
        for (pos, idx) in multi_indices(n, k).iter().enumerate() {
            let c = a.coeffs[k][pos];
            if c == 0.0 {
                continue;
            }
            let (hsign, comp) = hodge_basis(idx, n);
            out.coeffs[n - k][comp.position(n)] += sign * hsign * c;
        }
    }
    out
}

/// Inner product induced by the Euclidean metric: the increasing
/// multi-index basis is orthonormal, so this is a per-degree dot product.
pub fn inner(a: &GradedAltValue, b: &GradedAltValue) -> Result<f64> {
    check_same_n(a, b)?;
    let mut acc = 0.0;
    for k in 0..=a.n {
        for (x, y) in a.coeffs[k].iter().zip(&b.coeffs[k]) {
            acc += x * y;
        }
    }
    Ok(acc)
}

/// Canonical multisymplectic 2-form, a degree-`(n−1)` value:
/// `ω(w₁,w₂) = Σ_{k=1}^n (w₁^{k−1} ∧ ⋆w₂^k − w₂^{k−1} ∧ ⋆w₁^k)`.
pub fn ms_form(w1: &GradedAltValue, w2: &GradedAltValue) -> Result<GradedAltValue> {
    check_same_n(w1, w2)?;
    let n = w1.n;
    let mut out = GradedAltValue::zero(n);
    for k in 1..=n {
        let a = pure_slice(w1, k - 1);
        let b = hodge(&pure_slice(w2, k));
        let t1 = wedge(&a, &b)?;
        let c = pure_slice(w2, k - 1);
        let d = hodge(&pure_slice(w1, k));
        let t2 = wedge(&c, &d)?;
        out = out.add(&t1)?.sub(&t2)?;
    }
    // only the degree n−1 part is nonzero by construction
    Ok(out)
}

fn pure_slice(a: &GradedAltValue, k: usize) -> GradedAltValue {
    GradedAltValue::pure(a.n, k, a.coeffs[k].clone()).expect("matching length")
}
