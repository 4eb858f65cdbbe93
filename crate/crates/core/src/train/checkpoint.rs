use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyper, ModelParams};
use crate::prototypes::{PrototypeFile, PrototypeSet};

/// Serialized model: hyperparameters, encoder weights and the prototypes
/// it was trained against. Floats round-trip bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub hyper: Hyper,
    pub input_dim: usize,
    pub params: ModelParams,
    pub prototypes: PrototypeFile,
}

impl Checkpoint {
    pub fn new(hyper: Hyper, params: ModelParams, protos: PrototypeSet) -> Self {
        Checkpoint {
            hyper,
            input_dim: params.input_dim(),
            params,
            prototypes: PrototypeFile {
                num_classes: protos.num_classes(),
                dim: protos.dim(),
                rows: protos.matrix().to_rows(),
            },
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads and validates shapes against the stored hyperparameters.
    pub fn load(path: impl AsRef<Path>) -> Result<(Hyper, ModelParams, PrototypeSet)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        ck.params
            .check(&ck.hyper)
            .map_err(|e| Error::schema("params", e.to_string()))?;
        if ck.params.input_dim() != ck.input_dim {
            return Err(Error::schema("input_dim", "does not match params.w1 rows"));
        }
        let protos = ck.prototypes.into_set()?;
        if protos.dim() != ck.hyper.dim {
            return Err(Error::schema("prototypes.dim", "does not match hyper.dim"));
        }
        Ok((ck.hyper, ck.params, protos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use crate::prototypes::solve_prototypes;
    use crate::tensor::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let hyper = Hyper::default();
        let params = init_params(&hyper, 7, &mut Rng::new(1));
        let protos = solve_prototypes(3, hyper.dim, 50, 0.1, &mut Rng::new(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        Checkpoint::new(hyper, params.clone(), protos.clone()).save(&path).unwrap();
        let (h, p, pr) = Checkpoint::load(&path).unwrap();
        assert_eq!(h, hyper);
        assert_eq!(pr, protos);
        for (a, b) in p.tensors().iter().zip(params.tensors()) {
            let bits = |t: &[f64]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let hyper = Hyper::default();
        let params = init_params(&hyper, 4, &mut Rng::new(1));
        let protos = solve_prototypes(3, hyper.dim, 10, 0.1, &mut Rng::new(2)).unwrap();
        let mut ck = Checkpoint::new(hyper, params, protos);
        ck.hyper.hidden = 10;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        ck.save(&path).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
