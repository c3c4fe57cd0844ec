use super::idx::{idx_to_tensor, IdxArray};
use super::labels::parse_labels;
use super::matrix::{is_matrix_file, matrix_from_bytes};
use super::MultiViewDataset;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A TOML file naming the view files of a dataset.
///
/// ```toml
/// views = ["view1.mat", "view2-images.idx"]
/// labels = "labels.txt"
/// eta = 0.5
/// ```
///
/// Relative paths resolve against the manifest's directory. View files may
/// be flat matrices or IDX image files; labels may be a text file, a rank-1
/// IDX file or an `n × 1` flat matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub views: Vec<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub eta: Option<f64>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_view(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if is_matrix_file(&bytes) {
        matrix_from_bytes(&bytes, path)
    } else {
        let t = idx_to_tensor(IdxArray::parse(&bytes, path)?)?;
        if t.shape().len() == 1 {
            let n = t.len();
            t.reshape(&[n, 1])
        } else {
            Ok(t)
        }
    }
}

fn load_label_file(path: &Path) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let as_ints = |t: Tensor| -> Result<Vec<usize>> {
        t.data()
            .iter()
            .map(|&x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(Error::format(path, format!("label {x} is not a non-negative integer")))
                }
            })
            .collect()
    };
    if is_matrix_file(&bytes) {
        as_ints(matrix_from_bytes(&bytes, path)?)
    } else if bytes.len() >= 4 && bytes[..4] == [0, 0, 8, 1] {
        let a = IdxArray::parse(&bytes, path)?;
        Ok(a.data.iter().map(|&b| b as usize).collect())
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::format(path, "labels are not text"))?;
        parse_labels(&text, path)
    }
}

/// Loads the dataset a manifest describes, with the manifest's η if any.
pub fn load_manifest(path: &Path) -> Result<(MultiViewDataset, Option<f64>)> {
    let m = Manifest::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let views = m
        .views
        .iter()
        .map(|p| load_view(&resolve(base, p)))
        .collect::<Result<Vec<_>>>()?;
    let labels = m
        .labels
        .as_ref()
        .map(|p| load_label_file(&resolve(base, p)))
        .transpose()?;
    Ok((MultiViewDataset::new(views, labels)?, m.eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{save_matrix, write_idx, write_labels};

    #[test]
    fn mixed_formats_load() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        save_matrix(&d.join("a.mat"), &Tensor::matrix(3, 2, vec![1., 2., 3., 4., 5., 6.])).unwrap();
        write_idx(
            &d.join("b.idx"),
            &IdxArray {
                dims: vec![3, 2, 2],
                data: (0..12).collect(),
            },
        )
        .unwrap();
        write_labels(&d.join("y.txt"), &[0, 1, 1]).unwrap();
        Manifest {
            views: vec!["a.mat".into(), "b.idx".into()],
            labels: Some("y.txt".into()),
            eta: Some(0.3),
        }
        .write(&d.join("m.toml"))
        .unwrap();
        let (ds, eta) = load_manifest(&d.join("m.toml")).unwrap();
        assert_eq!(eta, Some(0.3));
        assert_eq!(ds.view_dims(), vec![2, 4]);
        assert_eq!(ds.labels().unwrap(), &[0, 1, 1]);
        assert_eq!(ds.view(1).get(2, 3), 1.0);
    }

    #[test]
    fn missing_view_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.toml");
        std::fs::write(&m, "views = [\"nope.mat\", \"nope2.mat\"]\n").unwrap();
        let err = load_manifest(&m).unwrap_err().to_string();
        assert!(err.contains("nope.mat"), "{err}");
    }
}
