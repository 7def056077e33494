use crate::error::{Error, Result};

/// Largest removal budget that leaves every cluster at least one filter.
pub fn max_feasible(cluster_sizes: &[usize]) -> usize {
    cluster_sizes.iter().map(|&s| s.saturating_sub(1)).sum()
}

/// Splits `m` removals across clusters proportionally to their size.
///
/// Minimizes `Σ (q_c − m·s_c/S)²` over integer quotas with `0 ≤ q_c ≤ s_c − 1`
/// and `Σ q_c = m`. Units are handed out one at a time to the cluster whose
/// cost grows least; for this separable convex objective that is optimal and
/// coincides with largest-remainder rounding when no cap binds. Ties go to
/// the larger cluster, then the lower cluster id.
pub fn allocate_quotas(cluster_sizes: &[usize], m: usize) -> Result<Vec<usize>> {
    let max = max_feasible(cluster_sizes);
    if m > max {
        return Err(Error::Infeasible {
            requested: m,
            max_feasible: max,
        });
    }
    let total: i128 = cluster_sizes.iter().map(|&s| s as i128).sum();
    let mut quotas = vec![0usize; cluster_sizes.len()];
    for _ in 0..m {
        // marginal cost ∝ q·S − m·s (scaled by S, exact in integers)
        let pick = (0..cluster_sizes.len())
            .filter(|&c| quotas[c] + 1 < cluster_sizes[c])
            .min_by(|&a, &b| {
                let ka = quotas[a] as i128 * total - m as i128 * cluster_sizes[a] as i128;
                let kb = quotas[b] as i128 * total - m as i128 * cluster_sizes[b] as i128;
                ka.cmp(&kb)
                    .then(cluster_sizes[b].cmp(&cluster_sizes[a]))
                    .then(a.cmp(&b))
            })
            .expect("m <= max_feasible leaves an uncapped cluster");
        quotas[pick] += 1;
    }
    Ok(quotas)
}
