//! Interaction definition files.
//!
//! ```toml
//! site_dim = 2
//!
//! [[generator]]
//! shape = [0, 1]
//! re = [1, 0, 0, 0,  0, -1, 0, 0,  0, 0, -1, 0,  0, 0, 0, 1]
//!
//! [[generator]]
//! shape = [0]
//! re = [0, 1, 1, 0]
//! im = [0, 0, 0, 0]
//! ```
//!
//! Matrices are row-major over the sites of `shape` in the listed order.

use super::interaction::Interaction;
use crate::error::{Error, Result};
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub shape: Vec<i64>,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub site_dim: usize,
    #[serde(default, rename = "generator")]
    pub generators: Vec<GeneratorSpec>,
}

/// Square matrix from row-major real and optional imaginary parts.
pub fn matrix_from_parts(re: &[f64], im: Option<&[f64]>) -> Result<Mat<c64>> {
    let n = (re.len() as f64).sqrt().round() as usize;
    if n * n != re.len() {
        return Err(Error::Parse(format!("{} entries do not form a square matrix", re.len())));
    }
    if let Some(im) = im {
        if im.len() != re.len() {
            return Err(Error::Parse(format!("real part has {} entries, imaginary part {}", re.len(), im.len())));
        }
    }
    Ok(Mat::from_fn(n, n, |i, j| c64::new(re[i * n + j], im.map_or(0.0, |v| v[i * n + j]))))
}

/// Row-major real and imaginary parts of a matrix.
pub fn matrix_to_parts(m: &Mat<c64>) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = m.nrows();
    let re = (0..n * n).map(|k| m[(k / n, k % n)].re).collect();
    let im: Vec<f64> = (0..n * n).map(|k| m[(k / n, k % n)].im).collect();
    (re, im.iter().any(|&x| x != 0.0).then_some(im))
}

impl InteractionSpec {
    pub fn build(&self) -> Result<Interaction> {
        let mut gens = Vec::with_capacity(self.generators.len());
        for (k, g) in self.generators.iter().enumerate() {
            let m = matrix_from_parts(&g.re, g.im.as_deref())
                .map_err(|e| Error::Parse(format!("generator {k}: {e}")))?;
            gens.push((g.shape.clone(), m));
        }
        Interaction::new(self.site_dim, gens)
    }

    pub fn from_interaction(phi: &Interaction) -> Self {
        let generators = phi
            .terms()
            .iter()
            .map(|t| {
                let gaps: Vec<usize> =
                    (0..=t.diam()).filter(|x| !t.shape().contains(x)).map(|x| x as usize).collect();
                let d = phi.site_dim();
                let dims = vec![d; t.diam() as usize + 1];
                let m = crate::kernel::tensor::partial_trace_factors(t.operator().matrix(), &dims, &gaps);
                let m = crate::kernel::dense::scaled(&m, 1.0 / (d as f64).powi(gaps.len() as i32));
                let (re, im) = matrix_to_parts(&m);
                GeneratorSpec { shape: t.shape().to_vec(), re, im }
            })
            .collect();
        InteractionSpec { site_dim: phi.site_dim(), generators }
    }
}

pub fn parse_interaction(text: &str) -> Result<Interaction> {
    let spec: InteractionSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    spec.build()
}

pub fn load_interaction(path: &Path) -> Result<Interaction> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_interaction(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::Domain(msg) => Error::Domain(format!("{}: {msg}", path.display())),
        other => other,
    })
}
