//! Symmetric simplex quadrature with selectable polynomial exactness
//! (Grundmann–Möller family), for dimensions 0..=3.
//!
//! Rules are constructed on the unit simplex and mapped affinely to
//! physical simplices; weights on the unit simplex sum to its volume
//! `1/m!`. Degree-`2s+1` rules contain negative weights for `s ≥ 1`,
//! which is harmless for the polynomial integrands used here.

use crate::error::{Error, Result};
use nalgebra::DVector;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    /// Guaranteed polynomial exactness degree.
    pub exactness: usize,
    /// Points in the unit simplex `{x_i >= 0, Σ x_i <= 1}`.
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product::<f64>().max(1.0)
}

/// All nonnegative integer tuples of the given length summing to `total`.
fn compositions(total: usize, len: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, len - 1) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

fn grundmann_moller(dim: usize, s: usize) -> QuadratureRule {
    let d = 2 * s + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + dim - 2 * i) as f64;
        let w = (if i % 2 == 0 { 1.0 } else { -1.0 })
            * 2f64.powi(-2 * (s as i32))
            * denom.powi(d as i32)
            / (factorial(i) * factorial(d + dim - i));
        for beta in compositions(s - i, dim + 1) {
            let p = DVector::from_iterator(
                dim,
                (0..dim).map(|j| (2.0 * beta[j] as f64 + 1.0) / denom),
            );
            points.push(p);
            weights.push(w);
        }
    }
    QuadratureRule {
        dim,
        exactness: d,
        points,
        weights,
    }
}

/// A rule on the unit `dim`-simplex exact for polynomials of the given
/// total degree. Rules are cached; `dim = 0` is the counting measure.
pub fn simplex_rule(dim: usize, exactness: usize) -> Result<Arc<QuadratureRule>> {
    if dim > 3 {
        return Err(Error::Usage(format!("quadrature dimension {dim} > 3")));
    }
    if dim == 0 {
        return Ok(Arc::new(QuadratureRule {
            dim: 0,
            exactness: usize::MAX,
            points: vec![DVector::zeros(0)],
            weights: vec![1.0],
        }));
    }
    if exactness > 31 {
        return Err(Error::Config(format!(
            "requested quadrature exactness {exactness} is out of range"
        )));
    }
    static CACHE: OnceLock<Mutex<BTreeMap<(usize, usize), Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let s = exactness.saturating_sub(1).div_ceil(2);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    let rule = guard
        .entry((dim, s))
        .or_insert_with(|| Arc::new(grundmann_moller(dim, s)));
    Ok(rule.clone())
}

/// Maps a unit-simplex rule onto the physical simplex with the given
/// vertices (embedded in any ambient dimension equal to `dim`), returning
/// physical points and weights that sum to the simplex volume.
pub fn map_to_simplex(
    rule: &QuadratureRule,
    vertices: &[DVector<f64>],
) -> (Vec<DVector<f64>>, Vec<f64>) {
    let m = rule.dim;
    if m == 0 {
        return (vec![vertices[0].clone()], vec![1.0]);
    }
    let vol = {
        let mut mat = nalgebra::DMatrix::zeros(m, m);
        for j in 0..m {
            mat.set_column(j, &(&vertices[j + 1] - &vertices[0]));
        }
        mat.determinant().abs() / factorial(m)
    };
    let scale = vol * factorial(m); // ratio to unit-simplex volume
    let points = rule
        .points
        .iter()
        .map(|p| {
            let mut x = vertices[0].clone();
            for j in 0..m {
                x += (&vertices[j + 1] - &vertices[0]) * p[j];
            }
            x
        })
        .collect();
    let weights = rule.weights.iter().map(|w| w * scale).collect();
    (points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact value of `∫_{T_n} x^α dx` over the unit simplex.
    fn monomial_integral(alpha: &[usize]) -> f64 {
        let n = alpha.len();
        let num: f64 = alpha.iter().map(|&a| factorial(a)).product();
        num / factorial(n + alpha.iter().sum::<usize>())
    }

    #[test]
    fn gm_rules_are_exact_for_monomials() {
        for dim in 1..=3usize {
            for exactness in [1usize, 3, 5, 7, 9, 11] {
                let rule = simplex_rule(dim, exactness).unwrap();
                for alpha in super::compositions(exactness, dim)
                    .into_iter()
                    .chain(super::compositions(exactness.saturating_sub(1), dim))
                {
                    let mut acc = 0.0;
                    for (p, w) in rule.points.iter().zip(&rule.weights) {
                        let mut v = 1.0;
                        for j in 0..dim {
                            v *= p[j].powi(alpha[j] as i32);
                        }
                        acc += w * v;
                    }
                    let exact = monomial_integral(&alpha);
                    assert!(
                        (acc - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                        "dim {dim} deg {exactness} alpha {alpha:?}: {acc} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn weights_sum_to_reference_volume() {
        for dim in 1..=3usize {
            let rule = simplex_rule(dim, 7).unwrap();
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 1.0 / factorial(dim)).abs() < 1e-13);
        }
    }

    #[test]
    fn mapped_rule_integrates_on_physical_simplex() {
        // triangle (0,0),(2,0),(0,1): ∫ x dx = ∫0..2 ∫0..(1−x/2) x dy dx = 4/3...
        // direct: ∫ x over T = area * centroid_x = 1 * (2/3) = 2/3 * ... compute:
        // vertices (0,0),(2,0),(0,1): area = 1, centroid x = (0+2+0)/3 = 2/3,
        // ∫ x = area * centroid_x = 2/3.
        let verts = vec![
            DVector::from_column_slice(&[0.0, 0.0]),
            DVector::from_column_slice(&[2.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0]),
        ];
        let rule = simplex_rule(2, 3).unwrap();
        let (pts, ws) = map_to_simplex(&rule, &verts);
        let acc: f64 = pts.iter().zip(&ws).map(|(p, w)| w * p[0]).sum();
        assert!((acc - 2.0 / 3.0).abs() < 1e-13);
    }
}
