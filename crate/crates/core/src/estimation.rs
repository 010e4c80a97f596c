//! Empirical distribution estimates for one class: per-instance ECDFs of
//! within- and between-class distances, their pooled averages, the
//! `ψ̂(t) = Ḡ̂⁻¹(1 − F̄̂(t))` map, the cut-off `t̂*` and `τ̂ = Ḡ̂(t̂*)`.
//!
//! All comparisons are `d ≤ t`. Quantities that are ratios of counts are
//! evaluated on the integer counts, so the fixed-point scan never depends
//! on floating-point rounding of a probability.

use rayon::prelude::*;

use crate::data::ClassBlocks;
use crate::error::{Error, Result};

/// Right-continuous step function `G(t) = #{x ≤ t} / m` over a finite sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("NaN in ECDF sample".into()));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    /// ECDF of the union of several samples (each value keeps its multiplicity).
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a EmpiricalCdf>) -> Self {
        let mut all: Vec<f64> = parts.into_iter().flat_map(|p| p.sorted.iter().copied()).collect();
        all.sort_unstable_by(f64::total_cmp);
        Self { sorted: all }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Sorted sample, with repeats.
    pub fn support(&self) -> &[f64] {
        &self.sorted
    }

    #[inline]
    pub fn count_le(&self, t: f64) -> usize {
        self.sorted.partition_point(|&v| v <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        self.count_le(t) as f64 / self.len() as f64
    }

    /// Smallest support point `t` with `count_le(t) ≥ k`; `k = 0` maps to the
    /// smallest support point.
    pub fn quantile_count(&self, k: usize) -> f64 {
        self.sorted[k.clamp(1, self.sorted.len()) - 1]
    }

    /// Generalized inverse `inf{t : G(t) ≥ q}`, with `G⁻¹(q ≤ 0)` the
    /// smallest support point.
    pub fn quantile(&self, q: f64) -> f64 {
        let m = self.len();
        let mut k = (q * m as f64).ceil().clamp(0.0, m as f64) as usize;
        while k > 0 && (k - 1) as f64 / m as f64 >= q {
            k -= 1;
        }
        while k < m && (k as f64 / m as f64) < q {
            k += 1;
        }
        self.quantile_count(k)
    }
}

/// Mixture `F̂_i = Σ_k N_k/(N − N₁) · F̂_i^(k)` of per-class ECDFs.
///
/// Evaluated through counts: `N_k/(N − N₁) · c_k/N_k = c_k/(N − N₁)`, so it
/// coincides exactly with the plain ECDF of all cross-distances of the row.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureCdf {
    components: Vec<(String, EmpiricalCdf)>,
    total: usize,
}

impl MixtureCdf {
    pub fn new(components: Vec<(String, EmpiricalCdf)>) -> Self {
        let total = components.iter().map(|(_, c)| c.len()).sum();
        Self { components, total }
    }

    pub fn components(&self) -> &[(String, EmpiricalCdf)] {
        &self.components
    }

    /// Mixture weights `N_k / (N − N₁)`.
    pub fn weights(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|(_, c)| c.len() as f64 / self.total as f64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count_le(&self, t: f64) -> usize {
        self.components.iter().map(|(_, c)| c.count_le(t)).sum()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.count_le(t) as f64 / self.total as f64
    }

    /// The pooled sample behind the mixture.
    pub fn flatten(&self) -> EmpiricalCdf {
        EmpiricalCdf::concat(self.components.iter().map(|(_, c)| c))
    }
}

/// `Ĝ_i` and `F̂_i` for every member `i` of a class.
#[derive(Debug, Clone)]
pub struct InstanceCdfs {
    pub within: Vec<EmpiricalCdf>,
    pub between: Vec<MixtureCdf>,
}

fn require_outside(blocks: &ClassBlocks) -> Result<()> {
    if blocks.outside_size() == 0 {
        return Err(Error::EstimationImpossible {
            class: blocks.class.clone(),
            reason: "no instances outside the class".into(),
        });
    }
    Ok(())
}

/// Per-instance ECDFs: `Ĝ_i` over the `N₁ − 1` within-distances of row `i`
/// and `F̂_i` as the size-weighted mixture of one ECDF per foreign class.
pub fn per_instance_cdfs(blocks: &ClassBlocks) -> Result<InstanceCdfs> {
    require_outside(blocks)?;
    let n1 = blocks.class_size();
    let rows: Vec<(EmpiricalCdf, MixtureCdf)> = (0..n1)
        .into_par_iter()
        .map(|i| {
            let within: Vec<f64> = blocks
                .within
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .collect();
            let row = blocks.between.row(i);
            let mut start = 0;
            let mut parts = Vec::with_capacity(blocks.segments.len());
            for seg in &blocks.segments {
                let part = EmpiricalCdf::new(row[start..start + seg.len].to_vec())?;
                parts.push((seg.label.clone(), part));
                start += seg.len;
            }
            Ok((EmpiricalCdf::new(within)?, MixtureCdf::new(parts)))
        })
        .collect::<Result<_>>()?;
    let (within, between) = rows.into_iter().unzip();
    Ok(InstanceCdfs { within, between })
}

/// `Ḡ̂` and `F̄̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledCdfs {
    pub within: EmpiricalCdf,
    pub between: EmpiricalCdf,
}

/// Averages the per-instance ECDFs.
///
/// Every `Ĝ_i` has `N₁ − 1` points and every `F̂_i` has `N − N₁`, so each
/// average is the ECDF of the concatenated samples.
pub fn pooled_cdfs(cdfs: &InstanceCdfs) -> Result<PooledCdfs> {
    if cdfs.within.len() < 2 || cdfs.within.len() != cdfs.between.len() {
        return Err(Error::InvalidInput(
            "pooling needs at least two instances with both ECDFs".into(),
        ));
    }
    let gw = cdfs.within[0].len();
    let fw = cdfs.between[0].len();
    if cdfs.within.iter().any(|c| c.len() != gw) || cdfs.between.iter().any(|c| c.len() != fw) {
        return Err(Error::InvalidInput("per-instance ECDFs differ in size".into()));
    }
    let flat: Vec<EmpiricalCdf> = cdfs.between.iter().map(MixtureCdf::flatten).collect();
    Ok(PooledCdfs {
        within: EmpiricalCdf::concat(&cdfs.within),
        between: EmpiricalCdf::concat(&flat),
    })
}

/// Same functions as `pooled_cdfs(per_instance_cdfs(blocks))` without the
/// per-instance detour. `Ḡ̂` is built from the upper triangle only, so its
/// sample holds each within pair once instead of twice.
pub fn pooled_from_blocks(blocks: &ClassBlocks) -> Result<PooledCdfs> {
    require_outside(blocks)?;
    let n1 = blocks.class_size();
    let mut upper = Vec::with_capacity(n1 * (n1 - 1) / 2);
    for i in 0..n1 {
        upper.extend_from_slice(&blocks.within.row(i)[i + 1..]);
    }
    Ok(PooledCdfs {
        within: EmpiricalCdf::new(upper)?,
        between: EmpiricalCdf::new(blocks.between.values().to_vec())?,
    })
}

/// `ψ̂(t) = Ḡ̂⁻¹(1 − F̄̂(t))`, on integer counts.
pub fn psi_hat(within: &EmpiricalCdf, between: &EmpiricalCdf, t: f64) -> f64 {
    psi_at_count(within, between.len(), between.count_le(t))
}

fn psi_at_count(within: &EmpiricalCdf, f_total: usize, f_count: usize) -> f64 {
    // smallest k with k / m_g >= (m_f - c_f) / m_f
    let (mg, mf) = (within.len() as u128, f_total as u128);
    let need = ((mf - f_count as u128) * mg).div_ceil(mf);
    within.quantile_count(need as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub t_star: f64,
    pub tau: f64,
    /// `#{within sample ≤ t*}`; `tau` is this over the within-sample size.
    pub within_count: usize,
    /// False when no support point satisfied `ψ̂(t) ≤ t` and `t_star` fell
    /// back to the largest support point.
    pub converged: bool,
}

/// `t̂* = inf{t : ψ̂(t) ≤ t}` by a scan of the merged support of both ECDFs.
///
/// `ψ̂` is a non-increasing step function that only changes at support points
/// of `F̄̂`, and its values are support points of `Ḡ̂`, so the infimum over
/// the real line is attained on the merged support.
pub fn solve_t_star(within: &EmpiricalCdf, between: &EmpiricalCdf) -> Result<FixedPoint> {
    if within.is_empty() || between.is_empty() {
        return Err(Error::InvalidInput("fixed point needs two non-empty ECDFs".into()));
    }
    let (g, f) = (within.support(), between.support());
    let (mut i, mut j) = (0, 0);
    while i < g.len() || j < f.len() {
        let t = match (g.get(i), f.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < g.len() && g[i] <= t {
            i += 1;
        }
        while j < f.len() && f[j] <= t {
            j += 1;
        }
        if psi_at_count(within, f.len(), j) <= t {
            return Ok(FixedPoint {
                t_star: t,
                tau: i as f64 / g.len() as f64,
                within_count: i,
                converged: true,
            });
        }
    }
    let t = g[g.len() - 1].max(f[f.len() - 1]);
    log::warn!("no support point satisfies psi(t) <= t; using t = {t}");
    Ok(FixedPoint {
        t_star: t,
        tau: 1.0,
        within_count: g.len(),
        converged: false,
    })
}

/// Class-level estimates: `t̂*`, `τ̂` and the pooled ECDFs they came from.
#[derive(Debug, Clone)]
pub struct ClassEstimates {
    pub t_star_hat: f64,
    pub tau_hat: f64,
    /// Numerator of `τ̂` over the within sample of `g_bar_hat`.
    pub tau_count: usize,
    pub converged: bool,
    pub g_bar_hat: EmpiricalCdf,
    pub f_bar_hat: EmpiricalCdf,
}

impl ClassEstimates {
    pub fn from_pooled(pooled: PooledCdfs) -> Result<Self> {
        let fp = solve_t_star(&pooled.within, &pooled.between)?;
        Ok(Self {
            t_star_hat: fp.t_star,
            tau_hat: fp.tau,
            tau_count: fp.within_count,
            converged: fp.converged,
            g_bar_hat: pooled.within,
            f_bar_hat: pooled.between,
        })
    }
}

/// Estimates for one class directly from its distance blocks.
pub fn estimate_class(blocks: &ClassBlocks) -> Result<ClassEstimates> {
    ClassEstimates::from_pooled(pooled_from_blocks(blocks)?)
}
