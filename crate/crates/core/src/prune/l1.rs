use super::{FilterId, PrunePlan};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;

/// Sum of absolute weights of every filter (bias excluded).
pub fn l1_norms<T: Scalar>(model: &Model<T>, layer_id: usize) -> Result<Vec<f64>> {
    let conv = model.conv(layer_id)?;
    Ok((0..conv.out_channels())
        .map(|o| conv.filter(o).iter().map(|w| w.as_f64().abs()).sum())
        .collect())
}

/// Filter indices in ascending ℓ1 order; equal norms keep index order.
pub fn l1_rank<T: Scalar>(model: &Model<T>, layer_id: usize) -> Result<Vec<usize>> {
    let norms = l1_norms(model, layer_id)?;
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    Ok(order)
}

/// Removes the `m` smallest-norm filters; `1 <= m < filter count`.
pub fn l1_select<T: Scalar>(model: &Model<T>, layer_id: usize, m: usize) -> Result<PrunePlan> {
    let count = model.filter_count(layer_id)?;
    if m == 0 {
        return Err(Error::InvalidArgument("l1_select needs m >= 1".into()));
    }
    if m >= count {
        return Err(Error::Infeasible {
            requested: m,
            max_feasible: count - 1,
        });
    }
    let order = l1_rank(model, layer_id)?;
    PrunePlan::new(model, order[..m].iter().map(|&f| FilterId::new(layer_id, f)))
}
