//! Fault location selection and parameter corruption for the MLP controller.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::hardware::{decode_f32, encode_f32, flip_bit};
use super::{FaultError, FaultModel, FaultSpec, FaultTarget, MlLocation, MlModel};
use crate::agent::Weights;
use crate::rng::{derive_seed, SimRng};

/// One network parameter: `col = None` addresses the bias of `row`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamIndex {
    pub layer: usize,
    pub row: usize,
    pub col: Option<usize>,
}

fn layer_params(layer: usize, (rows, cols): (usize, usize), biases: bool) -> impl Iterator<Item = ParamIndex> {
    (0..rows).flat_map(move |row| {
        (0..cols)
            .map(move |c| ParamIndex { layer, row, col: Some(c) })
            .chain(biases.then_some(ParamIndex { layer, row, col: None }))
    })
}

/// Resolves an ML fault target into concrete parameter indices, sorted.
/// Random choices depend only on `shape` and `spec.seed`.
pub fn select_locations(shape: &[(usize, usize)], spec: &FaultSpec) -> Result<Vec<ParamIndex>, FaultError> {
    let FaultTarget::MlLocation(loc) = &spec.target else {
        return Err(FaultError::InvalidTarget { id: spec.id.clone(), message: "not an ml_location".into() });
    };
    let shape_err = |message: String| FaultError::Shape { id: spec.id.clone(), message };
    if shape.is_empty() {
        return Err(shape_err("network has no layers".into()));
    }
    let mut rng = SimRng::seed_from_u64(derive_seed(spec.seed, &["select_locations"]));
    let out: BTreeSet<ParamIndex> = match loc {
        MlLocation::All { include_biases } => shape
            .iter()
            .enumerate()
            .flat_map(|(l, &s)| layer_params(l, s, *include_biases))
            .collect(),
        MlLocation::RandomLayer { include_biases } => {
            let l = rng.below(shape.len());
            layer_params(l, shape[l], *include_biases).collect()
        }
        MlLocation::RandomWeights { n } => {
            let all: Vec<ParamIndex> = shape.iter().enumerate().flat_map(|(l, &s)| layer_params(l, s, false)).collect();
            if *n > all.len() {
                return Err(shape_err(format!("asked for {n} weights, network has {}", all.len())));
            }
            // partial Fisher-Yates: n draws
            let mut idx: Vec<usize> = (0..all.len()).collect();
            for i in 0..*n {
                let j = i + rng.below(all.len() - i);
                idx.swap(i, j);
            }
            idx[..*n].iter().map(|&i| all[i]).collect()
        }
        MlLocation::Explicit { layer, rows, cols, include_biases } => {
            let &(nr, nc) = shape
                .get(*layer)
                .ok_or_else(|| shape_err(format!("layer {layer} out of range (network has {})", shape.len())))?;
            if let Some(r) = rows.iter().find(|&&r| r >= nr) {
                return Err(shape_err(format!("row {r} out of range for layer {layer} with {nr} rows")));
            }
            if let Some(c) = cols.iter().find(|&&c| c >= nc) {
                return Err(shape_err(format!("col {c} out of range for layer {layer} with {nc} cols")));
            }
            rows.iter()
                .flat_map(|&row| {
                    cols.iter()
                        .map(move |&c| ParamIndex { layer: *layer, row, col: Some(c) })
                        .chain(include_biases.then_some(ParamIndex { layer: *layer, row, col: None }))
                })
                .collect()
        }
    };
    Ok(out.into_iter().collect())
}

/// Corrupts the targeted parameters, in index order. Untargeted parameters
/// are untouched. Gaussian noise consumes one normal per target even at σ = 0.
pub fn inject_ml_fault(
    weights: &Weights,
    target: &[ParamIndex],
    spec: &FaultSpec,
    rng: &mut SimRng,
) -> Result<Weights, FaultError> {
    let FaultModel::Ml(model) = &spec.model else {
        return Err(FaultError::InvalidTarget { id: spec.id.clone(), message: "not an ml fault".into() });
    };
    let mut out = weights.clone();
    for p in target {
        let layer = out.layers.get_mut(p.layer).ok_or_else(|| FaultError::Shape {
            id: spec.id.clone(),
            message: format!("layer {} out of range", p.layer),
        })?;
        let slot = match p.col {
            Some(c) => layer.w.get_mut(p.row).and_then(|r| r.get_mut(c)),
            None => layer.b.get_mut(p.row),
        }
        .ok_or_else(|| FaultError::Shape { id: spec.id.clone(), message: format!("{p:?} out of range") })?;
        match model {
            MlModel::Gaussian { sigma } => {
                let n = rng.normal();
                if *sigma != 0.0 {
                    *slot += sigma * n;
                }
            }
            MlModel::Bitflip { bit } => {
                let b = bit.unwrap_or_else(|| rng.below(32) as u8);
                *slot = decode_f32(flip_bit(encode_f32(*slot), b));
            }
            MlModel::Zero => *slot = 0.0,
        }
    }
    Ok(out)
}
