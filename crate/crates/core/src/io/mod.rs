//! Checkpoint loading, shape manifests and layer classification.

pub mod checkpoint;
pub mod manifest;

pub use checkpoint::{
    encode_checkpoint, load_checkpoint, parse_checkpoint, write_checkpoint, Dtype, TensorRecord,
};
pub use manifest::{
    builtin_manifest, classify_layer, classify_layer_vgg, classify_shape, Arch, LayerKind,
    ManifestEntry, ShapeManifest,
};

use crate::error::{Error, Result};
use crate::segment::{Matrix2D, Tensor4D};

impl TensorRecord {
    pub fn to_matrix(&self) -> Result<Matrix2D> {
        match self.shape.as_slice() {
            [m, n] => Matrix2D::new(*m, *n, self.values.clone()),
            _ => Err(Error::Rank {
                expected: 2,
                shape: self.shape.clone(),
            }),
        }
    }

    pub fn to_tensor4d(&self) -> Result<Tensor4D> {
        Tensor4D::new(&self.shape, self.values.clone())
    }
}
