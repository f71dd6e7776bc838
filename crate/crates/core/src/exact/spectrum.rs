use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector, Schur};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::ExactError;

use super::RateMatrix;

/// Largest dimension handled by dense linear algebra.
pub const DENSE_LIMIT: usize = 4096;

/// Eigenvalues sorted by descending real part.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub values: Vec<Complex<f64>>,
}

impl Spectrum {
    pub fn zero_modes(&self, tol: f64) -> usize {
        self.values.iter().filter(|z| z.norm() < tol).count()
    }

    /// Slowest nonzero mode, the first eigenvalue with `|lambda| >= tol`.
    pub fn first_nonzero(&self, tol: f64) -> Option<Complex<f64>> {
        self.values.iter().copied().find(|z| z.norm() >= tol)
    }

    /// `-Re` of [`Spectrum::first_nonzero`].
    pub fn gap(&self, tol: f64) -> Option<f64> {
        self.first_nonzero(tol).map(|z| -z.re)
    }

    pub fn max_real(&self) -> f64 {
        self.values.first().map_or(f64::NAN, |z| z.re)
    }
}

/// The `k` eigenvalues with largest real part (all if `k == 0`).
///
/// Ordering the configurations by strongly connected components makes the
/// generator block triangular, so its spectrum is the union of the spectra
/// of the irreducible diagonal blocks. Each block goes through a real Schur
/// decomposition; a stalled QR iteration is retried with a shifted matrix.
pub fn spectrum(m: &RateMatrix, k: usize) -> Result<Spectrum, ExactError> {
    if m.dim() > DENSE_LIMIT {
        return Err(ExactError::TooLargeForDense { dim: m.dim(), limit: DENSE_LIMIT });
    }
    let (components, _) = components(m);
    let scale = m.max_exit_rate().max(1.0);
    let mut values = Vec::with_capacity(m.dim());
    for c in &components {
        if c.len() == 1 {
            values.push(Complex::new(m.diagonal()[c[0]], 0.0));
        } else {
            values.extend(block_eigenvalues(&sub_block(m, c), scale)?);
        }
    }
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    if let Some(top) = values.first() {
        if top.re > 1e-8 * scale {
            return Err(ExactError::NoConvergence(top.re));
        }
    }
    if k > 0 {
        values.truncate(k);
    }
    Ok(Spectrum { values })
}

fn block_eigenvalues(a: &DMatrix<f64>, scale: f64) -> Result<Vec<Complex<f64>>, ExactError> {
    let n = a.nrows();
    for eps in [1e-12, 1e-11, 1e-10] {
        for shift in [0.0, 0.37, -0.71, 1.9] {
            let mut b = a.clone();
            for i in 0..n {
                b[(i, i)] += shift * scale;
            }
            if let Some(s) = Schur::try_new(b, eps, 200 * n.max(10)) {
                return Ok(s.complex_eigenvalues().iter().map(|z| z - shift * scale).collect());
            }
        }
    }
    Err(ExactError::NoConvergence(f64::NAN))
}

/// Generator restricted to `members` (rows and columns in that order).
fn sub_block(m: &RateMatrix, members: &[usize]) -> DMatrix<f64> {
    let pos: HashMap<usize, usize> = members.iter().enumerate().map(|(a, &b)| (b, a)).collect();
    let k = members.len();
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (c, &j) in members.iter().enumerate() {
        a[(c, c)] = m.diagonal()[j];
        for &(i, r) in m.column(j) {
            if let Some(&row) = pos.get(&(i as usize)) {
                a[(row, c)] += r;
            }
        }
    }
    a
}

/// Strongly connected components (each sorted) and the component of every
/// configuration.
fn components(m: &RateMatrix) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = m.dim();
    let mut g = DiGraph::<(), ()>::with_capacity(n, m.nnz());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for j in 0..n {
        for &(i, _) in m.column(j) {
            g.add_edge(nodes[j], nodes[i as usize], ());
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            class_of[v] = c;
        }
    }
    (comps, class_of)
}

/// Right (or left) eigenvector of a real eigenvalue by shifted inverse
/// iteration. Right vectors are scaled to unit 1-norm, left vectors to unit
/// max-norm.
pub fn eigenvector(m: &RateMatrix, lambda: f64, left: bool) -> Result<Vec<f64>, ExactError> {
    let mut a = m.to_dense()?;
    if left {
        a.transpose_mut();
    }
    let n = a.nrows();
    let shift = lambda + 1e-9 * (1.0 + lambda.abs());
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    for _ in 0..30 {
        x = lu
            .solve(&x)
            .ok_or_else(|| ExactError::StepFailure("singular shifted matrix".into()))?;
        let norm = x.amax();
        if norm == 0.0 || !norm.is_finite() {
            return Err(ExactError::NoConvergence(f64::NAN));
        }
        x /= norm;
    }
    let residual = (&a * &x - &x * lambda).amax();
    if residual > 1e-6 * (1.0 + m.max_exit_rate()) {
        return Err(ExactError::NoConvergence(residual));
    }
    if !left {
        let s: f64 = x.iter().sum();
        let norm1: f64 = x.iter().map(|v| v.abs()).sum();
        x /= if s.abs() > 1e-12 * norm1 { s } else { norm1 };
    }
    Ok(x.iter().copied().collect())
}

/// Stationary distributions, one per closed communicating class. When the
/// generator is small enough for a dense spectrum, the number of
/// eigenvalues with `|lambda| < tol` is compared against the number of
/// classes; an excess means `tol` is too loose.
pub fn steady_states(m: &RateMatrix, tol: f64) -> Result<Vec<Vec<f64>>, ExactError> {
    let n = m.dim();
    let (comps, class_of) = components(m);
    let mut classes: Vec<Vec<usize>> = comps
        .into_iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&v| m.column(v).iter().all(|&(i, _)| class_of[i as usize] == *c))
        })
        .map(|(_, members)| members)
        .collect();
    classes.sort();

    let mut out = Vec::with_capacity(classes.len());
    for class in &classes {
        out.push(class_stationary(m, class)?);
    }

    if n <= 1024 {
        let found = spectrum(m, 0)?.zero_modes(tol);
        if found > classes.len() {
            return Err(ExactError::TolTooLoose { found, expected: classes.len() });
        }
    }
    Ok(out)
}

fn class_stationary(m: &RateMatrix, class: &[usize]) -> Result<Vec<f64>, ExactError> {
    let mut p = vec![0.0; m.dim()];
    if class.len() == 1 {
        p[class[0]] = 1.0;
        return Ok(p);
    }
    let k = class.len();
    if k > DENSE_LIMIT {
        return Err(ExactError::TooLargeForDense { dim: k, limit: DENSE_LIMIT });
    }
    let mut a = sub_block(m, class);
    // Replace the last balance equation by normalization.
    for c in 0..k {
        a[(k - 1, c)] = 1.0;
    }
    let mut rhs = DVector::zeros(k);
    rhs[k - 1] = 1.0;
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ExactError::StepFailure("singular balance equations".into()))?;
    for (c, &j) in class.iter().enumerate() {
        p[j] = if x[c].abs() < 1e-14 { 0.0 } else { x[c] };
    }
    Ok(p)
}
