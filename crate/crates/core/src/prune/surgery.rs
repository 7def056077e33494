use super::{Downstream, PrunePlan};
use crate::error::{Error, Result};
use crate::model::{DenseParams, LayerParams, LayerSpec, Model};
use crate::scalar::Scalar;
use crate::tensor::{ConvParams, Tensor};

/// Keep the entries of axis `axis` not listed in `removed` (ascending).
fn drop_axis<T: Scalar>(t: &Tensor<T>, axis: usize, removed: &[usize]) -> Tensor<T> {
    let shape = t.shape();
    let outer: usize = shape[..axis].iter().product();
    let dim = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let keep: Vec<usize> = (0..dim).filter(|i| removed.binary_search(i).is_err()).collect();
    let mut data = Vec::with_capacity(outer * keep.len() * inner);
    for o in 0..outer {
        for &k in &keep {
            let start = (o * dim + k) * inner;
            data.extend_from_slice(&t.data()[start..start + inner]);
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = keep.len();
    Tensor::new(new_shape, data).expect("sizes computed from shape")
}

/// Physically removes the planned filters and the downstream weights that
/// read them. The result has fresh (empty) momentum buffers.
pub fn apply_prune<T: Scalar>(model: &Model<T>, plan: &PrunePlan) -> Result<Model<T>> {
    if plan.is_empty() {
        return Ok(model.clone());
    }
    for layer_id in plan.touched_layers() {
        let count = model
            .filter_count(layer_id)
            .map_err(|e| Error::PlanMismatch(format!("layer {layer_id}: {e}")))?;
        let map_len = plan.survivor_map(layer_id).map_or(0, <[_]>::len);
        if map_len != count {
            return Err(Error::PlanMismatch(format!(
                "plan was built for {map_len} filters in layer {layer_id}, model has {count}"
            )));
        }
    }
    // downstream shapes must also agree; a stale plan can match filter
    // counts yet point at a differently-sized dense input
    let shapes = model.shapes();
    for d in plan.downstream() {
        if let Downstream::DenseRows { layer_id, rows } = d {
            let in_features = shapes.get(*layer_id).map_or(0, |s| s[0]);
            if rows.last().is_some_and(|&r| r >= in_features) {
                return Err(Error::PlanMismatch(format!(
                    "dense layer {layer_id} has {in_features} inputs, plan removes row {}",
                    rows.last().unwrap()
                )));
            }
        }
    }

    let mut layers = model.layers().to_vec();
    let mut params: Vec<LayerParams<T>> = model.params().to_vec();
    for layer_id in plan.touched_layers() {
        let removed = plan.removed_in(layer_id);
        let LayerParams::Conv(p) = &params[layer_id] else {
            return Err(Error::NotConv { layer_id });
        };
        params[layer_id] = LayerParams::Conv(ConvParams {
            weights: drop_axis(&p.weights, 0, &removed),
            bias: drop_axis(&p.bias, 0, &removed),
            stride: p.stride,
            padding: p.padding,
        });
        if let LayerSpec::Conv { out_channels, .. } = &mut layers[layer_id] {
            *out_channels -= removed.len();
        }
    }
    for d in plan.downstream() {
        match d {
            Downstream::ConvInput { layer_id, channels } => {
                let LayerParams::Conv(p) = &params[*layer_id] else {
                    return Err(Error::PlanMismatch(format!("layer {layer_id} is not a conv consumer")));
                };
                params[*layer_id] = LayerParams::Conv(ConvParams {
                    weights: drop_axis(&p.weights, 1, channels),
                    bias: p.bias.clone(),
                    stride: p.stride,
                    padding: p.padding,
                });
            }
            Downstream::DenseRows { layer_id, rows } => {
                let LayerParams::Dense(p) = &params[*layer_id] else {
                    return Err(Error::PlanMismatch(format!("layer {layer_id} is not a dense consumer")));
                };
                params[*layer_id] = LayerParams::Dense(DenseParams {
                    weights: drop_axis(&p.weights, 0, rows),
                    bias: p.bias.clone(),
                });
            }
        }
    }
    Model::from_parts(model.input_shape(), layers, params, model.seed(), model.step())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::toy_model_specs;
    use crate::prune::FilterId;

    fn batch() -> Tensor<f64> {
        Tensor::from_fn(&[2, 2, 8, 8], |i| ((i * 37 % 101) as f64 / 50.0) - 1.0)
    }

    #[test]
    fn empty_plan_is_identity() {
        let m = Model::<f64>::build(&toy_model_specs(4, 3), [2, 8, 8], 5).unwrap();
        assert_eq!(apply_prune(&m, &PrunePlan::empty()).unwrap(), m);
    }

    #[test]
    fn matches_masked_forward_and_counts() {
        let m = Model::<f64>::build(&toy_model_specs(4, 3), [2, 8, 8], 5).unwrap();
        let plan = PrunePlan::new(&m, [FilterId::new(0, 2), FilterId::new(3, 1), FilterId::new(3, 3)]).unwrap();
        let p = apply_prune(&m, &plan).unwrap();
        let a = p.forward(&batch()).unwrap();
        let b = m.forward_masked(&batch(), &plan.masks()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9);
        }
        // conv0 [4,2,3,3] -> [3,2,3,3], conv3 [4,4,3,3] -> [2,3,3,3], dense [16,3] -> [8,3]
        let removed = (76 - 57) + (148 - 56) + (48 - 24);
        assert_eq!(m.parameter_count() - p.parameter_count(), removed);
        assert!(!p.has_velocity());
    }

    #[test]
    fn stale_plan_rejected() {
        let m = Model::<f64>::build(&toy_model_specs(4, 3), [2, 8, 8], 5).unwrap();
        let plan = PrunePlan::new(&m, [FilterId::new(0, 2)]).unwrap();
        let p = apply_prune(&m, &plan).unwrap();
        assert!(matches!(apply_prune(&p, &plan), Err(Error::PlanMismatch(_))));
    }
}
