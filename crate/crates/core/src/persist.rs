//! Versioned JSON model files.
//!
//! Matrices are stored row-major with explicit shapes. Floats are written
//! in shortest round-trip form, so a reloaded model predicts bit for bit
//! like the original on the same platform.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{LocalModel, LpModel, QualityWeights};
use crate::error::{Error, Result};
use crate::lda::LdaModel;
use crate::localproj::{Core, CoreMode};

pub const FORMAT: &str = "lop-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&DMatrix<f64>> for Matrix {
    fn from(m: &DMatrix<f64>) -> Self {
        Matrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl Matrix {
    fn into_dmatrix(self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::ModelFormat(format!(
                "matrix {}x{} has {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LdaFile {
    class_ids: Vec<usize>,
    means: Vec<Vec<f64>>,
    pooled_cov: Matrix,
    ridge: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LocalFile {
    owner: usize,
    members: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    basis: Matrix,
    singular_values: Vec<f64>,
    lda: LdaFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    k: usize,
    mode: CoreMode,
    exclude_core_in_weights: bool,
    classes: Vec<String>,
    feature_names: Vec<String>,
    train_fingerprint: String,
    weights: Matrix,
    q_plus: Matrix,
    q_minus: Matrix,
    locals: Vec<LocalFile>,
}

impl LpModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            k: self.k,
            mode: self.mode,
            exclude_core_in_weights: self.exclude_core_in_weights,
            classes: self.classes.clone(),
            feature_names: self.feature_names.clone(),
            train_fingerprint: self.train_fingerprint.clone(),
            weights: (&self.quality.weights).into(),
            q_plus: (&self.quality.q_plus).into(),
            q_minus: (&self.quality.q_minus).into(),
            locals: self
                .locals
                .iter()
                .map(|l| LocalFile {
                    owner: l.core.owner,
                    members: l.core.members.clone(),
                    center: l.core.center.as_slice().to_vec(),
                    scale: l.core.scale.as_slice().to_vec(),
                    basis: (&l.core.basis).into(),
                    singular_values: l.core.singular_values.as_slice().to_vec(),
                    lda: LdaFile {
                        class_ids: l.lda.class_ids.clone(),
                        means: l.lda.means.iter().map(|m| m.as_slice().to_vec()).collect(),
                        pooled_cov: (&l.lda.pooled_cov).into(),
                        ridge: l.lda.ridge,
                    },
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT {
            return Err(Error::ModelFormat(format!("unknown format `{}`", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
        }
        let p = file.feature_names.len();
        let g = file.classes.len();
        let locals = file
            .locals
            .into_iter()
            .map(|l| {
                if l.center.len() != p || l.scale.len() != p {
                    return Err(Error::ModelFormat(format!("local model {} has wrong dimension", l.owner)));
                }
                let basis = l.basis.into_dmatrix()?;
                if basis.nrows() != p || basis.ncols() != l.singular_values.len() {
                    return Err(Error::ModelFormat(format!("local model {} basis shape", l.owner)));
                }
                if l.lda.class_ids.iter().any(|&c| c >= g) {
                    return Err(Error::ModelFormat(format!("local model {} class ids", l.owner)));
                }
                let core = Core {
                    owner: l.owner,
                    members: l.members,
                    center: DVector::from_vec(l.center),
                    scale: DVector::from_vec(l.scale),
                    basis,
                    singular_values: DVector::from_vec(l.singular_values),
                };
                let lda = LdaModel::from_parts(
                    l.lda.class_ids,
                    l.lda.means.into_iter().map(DVector::from_vec).collect(),
                    l.lda.pooled_cov.into_dmatrix()?,
                    l.lda.ridge,
                )?;
                if lda.dim() != core.rank() + 1 {
                    return Err(Error::ModelFormat(format!("local model {} discriminant dimension", l.owner)));
                }
                Ok(LocalModel { core, lda })
            })
            .collect::<Result<Vec<_>>>()?;
        let quality = QualityWeights {
            q_plus: file.q_plus.into_dmatrix()?,
            q_minus: file.q_minus.into_dmatrix()?,
            weights: file.weights.into_dmatrix()?,
        };
        if quality.weights.shape() != (locals.len(), g) {
            return Err(Error::ModelFormat("weight matrix shape".into()));
        }
        Ok(LpModel {
            k: file.k,
            mode: file.mode,
            exclude_core_in_weights: file.exclude_core_in_weights,
            classes: file.classes,
            feature_names: file.feature_names,
            locals,
            quality,
            train_fingerprint: file.train_fingerprint,
            train_posteriors: None,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use crate::ensemble::{LpModel, LpOptions, Scheme};
    use crate::error::Error;
    use crate::synthetic::gaussian_classes;

    #[test]
    fn round_trip_is_bitwise() {
        let train = gaussian_classes(&[10, 10, 10], 15, 3.0, 21);
        let test = gaussian_classes(&[5, 5, 5], 15, 3.0, 22);
        let model = LpModel::fit(&train, 4, LpOptions::default()).unwrap();
        let back = LpModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back.locals, model.locals);
        for i in 0..test.n() {
            let x = test.row(i);
            for scheme in [Scheme::Weighted, Scheme::Unweighted] {
                assert_eq!(model.posterior(x.as_slice(), scheme), back.posterior(x.as_slice(), scheme));
            }
        }
        assert_eq!(back.to_json().unwrap(), model.to_json().unwrap());
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(matches!(LpModel::from_json("{}"), Err(Error::Json(_))));
        let train = gaussian_classes(&[6, 6], 4, 3.0, 1);
        let json = LpModel::fit(&train, 2, LpOptions::default()).unwrap().to_json().unwrap();
        let wrong = json.replace("\"version\":1", "\"version\":9");
        assert!(matches!(LpModel::from_json(&wrong), Err(Error::ModelFormat(_))));
    }
}
