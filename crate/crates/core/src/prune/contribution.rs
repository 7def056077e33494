use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::parallel;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean gradient norm of the logits with respect to each filter's pre-ReLU
/// feature map, per filter of one conv layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionTable {
    pub layer_id: usize,
    pub gamma: Vec<f64>,
    pub sample_count: usize,
}

/// For each of the first `sample_count` images and each output class `j`,
/// backpropagates the one-hot cotangent `e_j` from the logits to the conv
/// layer's output. The per-image norm for filter `i` is the Frobenius norm
/// over all (class, position) entries of its slice; `γ_i` averages these
/// norms over the images.
pub fn contribution_index<T: Scalar>(
    model: &Model<T>,
    dataset: &Dataset<T>,
    layer_id: usize,
    sample_count: usize,
) -> Result<ContributionTable> {
    let filters = model.filter_count(layer_id)?;
    if sample_count == 0 {
        return Err(Error::InvalidArgument("contribution index needs at least one image".into()));
    }
    if sample_count > dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "sample_count {sample_count} exceeds dataset size {}",
            dataset.len()
        )));
    }
    let last = model.layers().len() - 1;
    let classes = model.class_count();
    let images: Vec<usize> = (0..sample_count).collect();
    let per_image: Vec<Result<Vec<f64>>> = parallel::map_ordered(&images, |&n| {
        let x = dataset.images.select_items(&[n]);
        let cap = model.forward_capture(&x)?;
        let mut sq = vec![0.0f64; filters];
        for j in 0..classes {
            let mut seed = Tensor::zeros(&[1, classes]);
            seed.data_mut()[j] = T::one();
            let g = model.output_gradient(&cap, last, seed, layer_id)?;
            let plane = g.len() / filters;
            for (i, chunk) in g.data().chunks_exact(plane).enumerate() {
                sq[i] += chunk.iter().map(|v| v.as_f64().powi(2)).sum::<f64>();
            }
        }
        Ok(sq.into_iter().map(f64::sqrt).collect())
    });
    let mut gamma = vec![0.0f64; filters];
    for norms in per_image {
        for (g, v) in gamma.iter_mut().zip(norms?) {
            *g += v;
        }
    }
    for g in &mut gamma {
        *g /= sample_count as f64;
    }
    Ok(ContributionTable {
        layer_id,
        gamma,
        sample_count,
    })
}
