//! Principal component analysis of flattened images.
//!
//! When there are fewer samples than pixels the eigenproblem is solved on the
//! `m x m` Gram matrix of the centered data and mapped back to pixel space;
//! otherwise on the `d x d` covariance matrix directly.
//!
//! `RWPC` file layout (little-endian):
//!
//! ```text
//! "RWPC" | version u16 | dim u32 | k u16 | mean f64[dim] | components f64[k*dim] | explained_variance f64[k]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::binio::*;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"RWPC";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    mean: Vec<f64>,
    /// `k` unit vectors of length `dim`, by descending eigenvalue.
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
}

impl PcaBasis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `components^T (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect())
    }

    /// `mean + sum_j coeffs[j] * component_j`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.k() {
            return Err(Error::Dimension { expected: self.k(), got: coeffs.len() });
        }
        let mut out = self.mean.clone();
        for (c, comp) in coeffs.iter().zip(&self.components) {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Keeps only the leading `k` components.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(Error::Config(format!("cannot truncate {} components to {k}", self.k())));
        }
        Ok(Self {
            mean: self.mean.clone(),
            components: self.components[..k].to_vec(),
            explained_variance: self.explained_variance[..k].to_vec(),
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u16::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(checked_u32(self.dim(), "pca dim")?)?;
        w.write_u16::<LittleEndian>(checked_u16(self.k(), "pca k")?)?;
        write_f64s(w, &self.mean)?;
        for c in &self.components {
            write_f64s(w, c)?;
        }
        write_f64s(w, &self.explained_variance)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        expect_version(r, VERSION)?;
        let dim = read_u32(r, "pca dim")? as usize;
        let k = read_u16(r, "pca k")? as usize;
        if dim == 0 || k == 0 || k > dim {
            return Err(Error::Inconsistent(format!("pca basis with dim {dim} and k {k}")));
        }
        let mean = read_f64s(r, dim, "pca mean")?;
        let components = (0..k).map(|_| read_f64s(r, dim, "pca component")).collect::<Result<Vec<_>>>()?;
        let explained_variance = read_f64s(r, k, "explained variance")?;
        expect_eof(r)?;
        Ok(Self { mean, components, explained_variance })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::fs::read(path)?.as_slice())
    }
}

/// Fits `k` principal components to the rows of `samples`.
pub fn fit_pca(samples: &[&[f64]], k: usize) -> Result<PcaBasis> {
    let m = samples.len();
    let d = samples.first().map_or(0, |s| s.len());
    if m == 0 || d == 0 {
        return Err(Error::Config("PCA needs at least one non-empty sample".into()));
    }
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::Inconsistent("PCA samples have different dimensions".into()));
    }
    if k == 0 || k > (m - 1).min(d) {
        return Err(Error::Config(format!("k = {k} exceeds min(m - 1, d) = {}", (m.max(1) - 1).min(d))));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (a, b) in mean.iter_mut().zip(s.iter()) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let centered = DMatrix::from_fn(m, d, |i, j| samples[i][j] - mean[j]);
    let denom = (m - 1) as f64;

    let (mut components, variances) = if m < d {
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        let top = order[0];
        let mut comps = Vec::with_capacity(k);
        let mut vars = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let lambda = eig.eigenvalues[idx];
            if !(lambda > 1e-12 * eig.eigenvalues[top].abs().max(f64::MIN_POSITIVE)) {
                return Err(Error::Config(format!("data has rank below k = {k}")));
            }
            let v = eig.eigenvectors.column(idx);
            let u = centered.transpose() * v / lambda.sqrt();
            comps.push(u.iter().cloned().collect::<Vec<f64>>());
            vars.push(lambda / denom);
        }
        (comps, vars)
    } else {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        let comps = order.iter().take(k).map(|&i| eig.eigenvectors.column(i).iter().cloned().collect()).collect();
        let vars = order.iter().take(k).map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        (comps, vars)
    };

    orthonormalize(&mut components);
    for c in &mut components {
        fix_sign(c);
    }
    Ok(PcaBasis { mean, components, explained_variance: variances })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite eigenvalues"));
    idx
}

/// Modified Gram-Schmidt, in place.
fn orthonormalize(vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        for j in 0..i {
            let dot: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = vs.split_at_mut(i);
            for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                *a -= dot * b;
            }
        }
        let n: f64 = vs[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        vs[i].iter_mut().for_each(|x| *x /= n);
    }
}

/// Largest-magnitude entry made positive (first one on exact ties).
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Squared reconstruction error summed over samples.
pub fn reconstruction_error(basis: &PcaBasis, samples: &[&[f64]]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let r = basis.reconstruct(&basis.project(s)?)?;
        total += r.iter().zip(s.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total)
}
