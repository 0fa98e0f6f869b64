//! Triple definition files.
//!
//! ```toml
//! d = 2
//! b = 1
//! rho_re = [1.0]
//!
//! [[kraus]]
//! re = [0.7071067811865476, 0.0]
//!
//! [[kraus]]
//! re = [0.0, 0.7071067811865476]
//! ```
//!
//! Each Kraus operator is a row-major `(d b) × b` matrix; `rho` is row-major
//! `b × b`. Imaginary parts (`im`, `rho_im`) are optional.

use super::fcs::FcsTriple;
use crate::error::{Error, Result};
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausSpec {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    pub d: usize,
    pub b: usize,
    pub rho_re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_im: Option<Vec<f64>>,
    pub kraus: Vec<KrausSpec>,
}

fn rect(rows: usize, cols: usize, re: &[f64], im: Option<&[f64]>, what: &str) -> Result<Mat<c64>> {
    if re.len() != rows * cols {
        return Err(Error::Parse(format!("{what}: expected {} entries, got {}", rows * cols, re.len())));
    }
    if let Some(im) = im {
        if im.len() != re.len() {
            return Err(Error::Parse(format!("{what}: real part has {} entries, imaginary part {}", re.len(), im.len())));
        }
    }
    Ok(Mat::from_fn(rows, cols, |i, j| c64::new(re[i * cols + j], im.map_or(0.0, |v| v[i * cols + j]))))
}

fn parts(m: &Mat<c64>) -> (Vec<f64>, Option<Vec<f64>>) {
    let (r, c) = (m.nrows(), m.ncols());
    let re = (0..r * c).map(|k| m[(k / c, k % c)].re).collect();
    let im: Vec<f64> = (0..r * c).map(|k| m[(k / c, k % c)].im).collect();
    (re, im.iter().any(|&x| x != 0.0).then_some(im))
}

impl TripleSpec {
    /// Builds the triple without checking its defining properties.
    pub fn build_unchecked(&self) -> Result<FcsTriple> {
        let rho = rect(self.b, self.b, &self.rho_re, self.rho_im.as_deref(), "rho")?;
        let mut kraus = Vec::with_capacity(self.kraus.len());
        for (k, v) in self.kraus.iter().enumerate() {
            kraus.push(rect(self.d * self.b, self.b, &v.re, v.im.as_deref(), &format!("kraus {k}"))?);
        }
        FcsTriple::new_unchecked(self.d, kraus, rho)
    }

    pub fn build(&self) -> Result<FcsTriple> {
        let t = self.build_unchecked()?;
        FcsTriple::new(t.site_dim(), t.kraus().to_vec(), t.rho().clone())
    }

    pub fn from_triple(t: &FcsTriple) -> Self {
        let (rho_re, rho_im) = parts(t.rho());
        let kraus = t
            .kraus()
            .iter()
            .map(|v| {
                let (re, im) = parts(v);
                KrausSpec { re, im }
            })
            .collect();
        TripleSpec { d: t.site_dim(), b: t.bond_dim(), rho_re, rho_im, kraus }
    }
}

pub fn parse_triple_spec(text: &str) -> Result<TripleSpec> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_triple_spec(path: &Path) -> Result<TripleSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_triple_spec(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Loads a triple and enforces unitality, invariance and faithfulness.
pub fn load_triple(path: &Path) -> Result<FcsTriple> {
    load_triple_spec(path)?.build()
}
