//! Versioned JSON checkpoint of named parameter tensors with shapes.

use super::{NetConfig, NetError, QNet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct TensorData {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: NetConfig,
    pub tensors: BTreeMap<String, TensorData>,
}

impl Checkpoint {
    pub fn from_net(net: &QNet) -> Checkpoint {
        let tensors = net
            .params
            .iter()
            .map(|(def, value)| {
                (
                    def.name.clone(),
                    TensorData { shape: [def.rows, def.cols], data: value.data.clone() },
                )
            })
            .collect();
        Checkpoint { version: CHECKPOINT_VERSION, config: net.cfg.clone(), tensors }
    }

    /// Rebuilds the network, validating every tensor name and shape against
    /// the architecture implied by the stored config.
    pub fn into_net(self) -> Result<QNet, NetError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(NetError::Version(self.version));
        }
        let mut net = QNet::new(self.config, 0);
        let mut seen = 0usize;
        for block in 0..net.params.block_count() {
            let def = net.params.def(block).clone();
            let tensor = self
                .tensors
                .get(&def.name)
                .ok_or_else(|| NetError::MissingTensor(def.name.clone()))?;
            if tensor.shape != [def.rows, def.cols] || tensor.data.len() != def.rows * def.cols {
                return Err(NetError::ShapeMismatch {
                    name: def.name.clone(),
                    expected: [def.rows, def.cols],
                    got: tensor.shape,
                });
            }
            for (idx, &v) in tensor.data.iter().enumerate() {
                net.params.set_coord(block, idx, v);
            }
            seen += 1;
        }
        if seen != self.tensors.len() {
            let known: std::collections::HashSet<&str> =
                (0..net.params.block_count()).map(|b| net.params.def(b).name.as_str()).collect();
            let extra = self
                .tensors
                .keys()
                .find(|k| !known.contains(k.as_str()))
                .cloned()
                .unwrap_or_default();
            return Err(NetError::UnknownTensor(extra));
        }
        Ok(net)
    }
}

pub fn save(net: &QNet, path: &Path) -> Result<(), NetError> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(file), &Checkpoint::from_net(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<QNet, NetError> {
    let file = std::fs::File::open(path)?;
    let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
    ckpt.into_net()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{HeadMode, InteractMode};

    #[test]
    fn round_trip_preserves_parameters() {
        let net = QNet::new(NetConfig::with_labels(2), 7);
        let ckpt = Checkpoint::from_net(&net);
        let text = serde_json::to_string(&ckpt).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        let net2 = back.into_net().unwrap();
        for block in 0..net.params.block_count() {
            assert_eq!(net.params.value(block).data, net2.params.value(block).data);
        }
    }

    #[test]
    fn shape_validation_rejects_other_architecture() {
        let net = QNet::new(NetConfig::with_labels(0), 7);
        let mut ckpt = Checkpoint::from_net(&net);
        // Lie about the architecture: claim a different hidden width.
        ckpt.config.hidden_dim = 16;
        assert!(matches!(ckpt.into_net(), Err(NetError::ShapeMismatch { .. })));
    }

    #[test]
    fn mode_configs_change_layout() {
        let mut cfg = NetConfig::with_labels(0);
        cfg.interact_mode = InteractMode::Sum;
        cfg.head_mode = HeadMode::Unfactored;
        let net = QNet::new(cfg, 3);
        let ckpt = Checkpoint::from_net(&net);
        assert!(ckpt.into_net().is_ok());
    }
}
