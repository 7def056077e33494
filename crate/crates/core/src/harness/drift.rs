use crate::am::{activation_maximize, pattern_distance, AmConfig, Pattern};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::parallel;
use crate::scalar::Scalar;

/// Pattern distance between each surviving filter before and after, given
/// `(old_index, new_index)` pairs and one AM configuration for both models.
pub fn pattern_drift<T: Scalar>(
    before: &Model<T>,
    after: &Model<T>,
    layer_id: usize,
    survivors: &[(usize, usize)],
    am: &AmConfig,
) -> Result<Vec<f64>> {
    parallel::map_ordered(survivors, |&(old, new)| {
        let p = activation_maximize(before, layer_id, old, am)?;
        let q = activation_maximize(after, layer_id, new, am)?;
        Ok(pattern_distance(&p, &q)?.as_f64())
    })
    .into_iter()
    .collect()
}

/// As [`pattern_drift`], reusing patterns already computed on the
/// unpruned model (indexed by filter).
pub fn pattern_drift_from<T: Scalar>(
    before: &[Pattern<T>],
    after: &Model<T>,
    layer_id: usize,
    survivors: &[(usize, usize)],
    am: &AmConfig,
) -> Result<Vec<f64>> {
    parallel::map_ordered(survivors, |&(old, new)| {
        let p = before.get(old).filter(|p| p.layer_id == layer_id).ok_or(Error::FilterOutOfRange {
            layer_id,
            filter_id: old,
            filter_count: before.len(),
        })?;
        if p.config != *am {
            return Err(Error::InvalidArgument(
                "cached pattern was computed with a different AM configuration".into(),
            ));
        }
        let q = activation_maximize(after, layer_id, new, am)?;
        Ok(pattern_distance(p, &q)?.as_f64())
    })
    .into_iter()
    .collect()
}
