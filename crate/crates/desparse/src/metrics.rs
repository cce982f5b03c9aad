//! Evaluation metrics: peak localization error, spatial dispersion, the
//! spatially tolerant family-wise error rate (δ-FWER) and δ-precision/recall
//! curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// The true support together with the spatial tolerance δ (mm).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportSpec {
    pub true_support: Vec<usize>,
    pub delta: f64,
}

impl SupportSpec {
    pub fn new(true_support: Vec<usize>, delta: f64) -> Result<Self> {
        if delta < 0.0 {
            return Err(Error::InvalidParam(format!("delta must be ≥ 0, got {delta}")));
        }
        Ok(Self { true_support, delta })
    }
}

/// Peak localization error: geodesic distance from the argmax of |map| to the
/// true source. Ties at the maximum break toward the lowest index.
pub fn ple(map: &[f64], true_source: usize, g: &Geometry) -> Result<f64> {
    if map.len() != g.p() {
        return Err(Error::ShapeMismatch(format!(
            "map has {} entries but geometry has {} features",
            map.len(),
            g.p()
        )));
    }
    if map.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("amplitude map"));
    }
    let mut peak = 0;
    for (j, v) in map.iter().enumerate() {
        if v.abs() > map[peak].abs() {
            peak = j;
        }
    }
    g.geodesic_distance(peak, true_source)
}

/// Spatial dispersion: amplitude-weighted RMS geodesic distance to the true
/// support,
/// `SD = sqrt( Σ_j map_j² d(j, Supp)² / Σ_j map_j² )`.
///
/// A zero map has no spread and returns 0.
pub fn spatial_dispersion(map: &[f64], true_support: &[usize], g: &Geometry) -> Result<f64> {
    if map.len() != g.p() {
        return Err(Error::ShapeMismatch(format!(
            "map has {} entries but geometry has {} features",
            map.len(),
            g.p()
        )));
    }
    if true_support.is_empty() {
        return Err(Error::InvalidParam("spatial dispersion needs a non-empty support".into()));
    }
    let dist = g.distances_from_set(true_support);
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, v) in map.iter().enumerate() {
        let w = v * v;
        num += w * dist[j] * dist[j];
        den += w;
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

/// The far set `N^δ = {j : d(j, Supp) ≥ δ}` — features whose discovery counts
/// as a spatially intolerable error.
pub fn far_set(spec: &SupportSpec, g: &Geometry) -> Vec<usize> {
    let dist = g.distances_from_set(&spec.true_support);
    (0..g.p()).filter(|&j| dist[j] >= spec.delta).collect()
}

/// Empirical δ-FWER: the fraction of runs whose minimum p-value over the far
/// set `N^δ` is ≤ α. An empty far set yields 0 (no discovery can be far).
pub fn delta_fwer(
    pval_runs: &[Vec<f64>],
    spec: &SupportSpec,
    g: &Geometry,
    alpha: f64,
) -> Result<f64> {
    if pval_runs.is_empty() {
        return Err(Error::InvalidParam("need at least one run".into()));
    }
    let far = far_set(spec, g);
    if far.is_empty() {
        return Ok(0.0);
    }
    let mut violations = 0usize;
    for (r, pvals) in pval_runs.iter().enumerate() {
        if pvals.len() != g.p() {
            return Err(Error::ShapeMismatch(format!(
                "run {r} has {} p-values but geometry has {} features",
                pvals.len(),
                g.p()
            )));
        }
        let min_far = far.iter().map(|&j| pvals[j]).fold(f64::INFINITY, f64::min);
        if min_far <= alpha {
            violations += 1;
        }
    }
    Ok(violations as f64 / pval_runs.len() as f64)
}

/// One point of a precision/recall curve, tagged with the p-value threshold
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// δ-precision/recall curve, sweeping the selection threshold across the
/// sorted unique p-values (plus the empty selection).
///
/// A selected feature is a within-tolerance discovery when it lies at
/// geodesic distance < δ of the support (at δ = 0 this degrades to exact
/// membership); a support feature is recalled when some selected feature lies
/// within δ of it. Empty selections have precision 1 by convention.
pub fn delta_precision_recall(
    pvals: &[f64],
    spec: &SupportSpec,
    g: &Geometry,
) -> Result<Vec<PrPoint>> {
    if pvals.len() != g.p() {
        return Err(Error::ShapeMismatch(format!(
            "map has {} p-values but geometry has {} features",
            pvals.len(),
            g.p()
        )));
    }
    if spec.true_support.is_empty() {
        return Err(Error::InvalidParam("precision/recall needs a non-empty support".into()));
    }
    let dist_to_support = g.distances_from_set(&spec.true_support);
    let within = |j: usize| dist_to_support[j] == 0.0 || dist_to_support[j] < spec.delta;

    let mut thresholds: Vec<f64> = pvals.to_vec();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let mut curve = Vec::with_capacity(thresholds.len() + 1);
    curve.push(PrPoint { threshold: f64::NEG_INFINITY, precision: 1.0, recall: 0.0 });
    for &thr in &thresholds {
        let selected: Vec<usize> = (0..g.p()).filter(|&j| pvals[j] <= thr).collect();
        if selected.is_empty() {
            curve.push(PrPoint { threshold: thr, precision: 1.0, recall: 0.0 });
            continue;
        }
        let tp = selected.iter().filter(|&&j| within(j)).count();
        let precision = tp as f64 / selected.len() as f64;

        let sel_dist = g.distances_from_set(&selected);
        let recalled = spec
            .true_support
            .iter()
            .filter(|&&k| sel_dist[k] == 0.0 || sel_dist[k] < spec.delta)
            .count();
        let recall = recalled as f64 / spec.true_support.len() as f64;
        curve.push(PrPoint { threshold: thr, precision, recall });
    }
    Ok(curve)
}

/// Best achievable precision at each requested recall level (the standard
/// step-function envelope: max precision among points with recall ≥ r, 0 when
/// unreachable).
pub fn precision_at_recall(curve: &[PrPoint], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&r| {
            curve
                .iter()
                .filter(|pt| pt.recall >= r)
                .map(|pt| pt.precision)
                .fold(0.0_f64, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn chain(p: usize, spacing: f64) -> Geometry {
        let positions =
            Array2::from_shape_fn((p, 2), |(i, k)| if k == 0 { i as f64 * spacing } else { 0.0 });
        let edges: Vec<_> = (0..p - 1).map(|i| (i, i + 1, spacing)).collect();
        Geometry::new(positions, &edges).unwrap()
    }

    fn grid(rows: usize, cols: usize, spacing: f64) -> Geometry {
        let positions = Array2::from_shape_fn((rows * cols, 2), |(i, k)| {
            if k == 0 {
                (i % cols) as f64 * spacing
            } else {
                (i / cols) as f64 * spacing
            }
        });
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1, spacing));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols, spacing));
                }
            }
        }
        Geometry::new(positions, &edges).unwrap()
    }

    #[test]
    fn ple_peak_at_source_and_hops() {
        let g = chain(8, 1.0);
        let mut map = vec![0.0; 8];
        map[4] = 3.0;
        assert_eq!(ple(&map, 4, &g).unwrap(), 0.0);
        assert_eq!(ple(&map, 6, &g).unwrap(), 2.0);
        // ties break to the lowest index
        let map = vec![1.0; 8];
        assert_eq!(ple(&map, 0, &g).unwrap(), 0.0);
        // negative amplitudes count by magnitude
        let mut map = vec![0.0; 8];
        map[2] = -5.0;
        map[5] = 4.0;
        assert_eq!(ple(&map, 2, &g).unwrap(), 0.0);
    }

    #[test]
    fn ple_matches_argmax_oracle_on_grid() {
        let g = grid(20, 20, 1.0);
        let mut rng_state = 12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10 {
            let map: Vec<f64> = (0..400).map(|_| next() * 2.0 - 1.0).collect();
            let src = (next() * 400.0) as usize;
            // exhaustive argmax + manhattan hop oracle
            let mut peak = 0;
            for j in 0..400 {
                if map[j].abs() > map[peak].abs() {
                    peak = j;
                }
            }
            let manhattan = ((peak / 20) as i64 - (src / 20) as i64).abs()
                + ((peak % 20) as i64 - (src % 20) as i64).abs();
            assert_eq!(ple(&map, src, &g).unwrap(), manhattan as f64);
        }
    }

    #[test]
    fn spatial_dispersion_cases() {
        let g = chain(10, 1.0);
        // mass exactly on the support → 0
        let mut map = vec![0.0; 10];
        map[3] = 2.0;
        map[4] = 1.0;
        assert_eq!(spatial_dispersion(&map, &[3, 4], &g).unwrap(), 0.0);
        // all mass at distance 5
        let mut map = vec![0.0; 10];
        map[9] = 7.0;
        assert_eq!(spatial_dispersion(&map, &[4], &g).unwrap(), 5.0);
        // mixed map matches the direct sum
        let map = vec![1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let support = [3];
        let expect = ((1.0 * 9.0 + 4.0 * 0.0 + 1.0 * 36.0) / 6.0_f64).sqrt();
        let got = spatial_dispersion(&map, &support, &g).unwrap();
        assert!((got - expect).abs() < 1e-12);
        // zero map → 0
        assert_eq!(spatial_dispersion(&[0.0; 10], &[3], &g).unwrap(), 0.0);
    }

    #[test]
    fn delta_fwer_counts_planted_violations() {
        let g = chain(10, 1.0);
        let spec = SupportSpec::new(vec![0], 3.0).unwrap();
        // far set is {3..9}; plant violations in 2 of 5 runs
        let mut runs = vec![vec![1.0; 10]; 5];
        runs[1][5] = 0.01;
        runs[3][9] = 0.04;
        runs[4][1] = 0.001; // near the support: not a δ-violation
        let f = delta_fwer(&runs, &spec, &g, 0.05).unwrap();
        assert!((f - 0.4).abs() < 1e-12);

        // all p-values 1 → 0
        let runs = vec![vec![1.0; 10]; 4];
        assert_eq!(delta_fwer(&runs, &spec, &g, 0.05).unwrap(), 0.0);

        // δ beyond the graph diameter → empty far set → 0 by convention
        let spec = SupportSpec::new(vec![0], 100.0).unwrap();
        let runs = vec![vec![0.0; 10]];
        assert_eq!(delta_fwer(&runs, &spec, &g, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn delta_fwer_monotone_in_delta() {
        let g = grid(6, 6, 1.0);
        let mut rng_state = 777u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let runs: Vec<Vec<f64>> =
            (0..20).map(|_| (0..36).map(|_| next()).collect()).collect();
        let mut prev = 1.0;
        for delta in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let spec = SupportSpec::new(vec![14, 15], delta).unwrap();
            let f = delta_fwer(&runs, &spec, &g, 0.1).unwrap();
            assert!(f <= prev + 1e-12, "δ-FWER not non-increasing at δ={delta}");
            prev = f;
        }
    }

    #[test]
    fn perfect_selector_reaches_perfect_point() {
        let g = chain(8, 1.0);
        let spec = SupportSpec::new(vec![2, 3], 1.0).unwrap();
        let mut pvals = vec![0.9; 8];
        pvals[2] = 0.01;
        pvals[3] = 0.01;
        let curve = delta_precision_recall(&pvals, &spec, &g).unwrap();
        assert!(curve.iter().any(|pt| pt.precision == 1.0 && pt.recall == 1.0));
        // empty selection point has precision 1, recall 0
        assert_eq!(curve[0].precision, 1.0);
        assert_eq!(curve[0].recall, 0.0);
    }

    #[test]
    fn curve_matches_hand_computed_fixture() {
        let g = chain(6, 1.0);
        // support {1}; δ = 1.5 so features 0, 1, 2 count as within tolerance
        let spec = SupportSpec::new(vec![1], 1.5).unwrap();
        let pvals = vec![0.20, 0.05, 0.90, 0.10, 0.90, 0.90];
        let curve = delta_precision_recall(&pvals, &spec, &g).unwrap();
        // thresholds: 0.05 → select {1}: precision 1, recall 1
        // 0.10 → {1,3}: precision 1/2 (feature 3 is 2 away), recall 1
        // 0.20 → {0,1,3}: precision 2/3, recall 1
        // 0.90 → all: precision 3/6, recall 1
        let expect = [
            (f64::NEG_INFINITY, 1.0, 0.0),
            (0.05, 1.0, 1.0),
            (0.10, 0.5, 1.0),
            (0.20, 2.0 / 3.0, 1.0),
            (0.90, 0.5, 1.0),
        ];
        assert_eq!(curve.len(), expect.len());
        for (pt, (thr, prec, rec)) in curve.iter().zip(expect.iter()) {
            assert_eq!(pt.threshold, *thr);
            assert!((pt.precision - prec).abs() < 1e-12);
            assert!((pt.recall - rec).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_zero_degrades_to_exact_membership() {
        let g = chain(6, 1.0);
        let spec0 = SupportSpec::new(vec![2], 0.0).unwrap();
        let pvals = vec![0.5, 0.01, 0.02, 0.5, 0.5, 0.5];
        let curve0 = delta_precision_recall(&pvals, &spec0, &g).unwrap();
        // δ-precision at any δ > 0 dominates the δ = 0 (standard) precision
        for delta in [0.5, 1.0, 2.0] {
            let spec = SupportSpec::new(vec![2], delta).unwrap();
            let curve = delta_precision_recall(&pvals, &spec, &g).unwrap();
            for (a, b) in curve.iter().zip(curve0.iter()) {
                assert!(a.precision >= b.precision - 1e-12);
            }
        }
    }

    #[test]
    fn precision_at_recall_envelope() {
        let curve = vec![
            PrPoint { threshold: 0.0, precision: 1.0, recall: 0.0 },
            PrPoint { threshold: 0.1, precision: 0.8, recall: 0.5 },
            PrPoint { threshold: 0.2, precision: 0.9, recall: 0.5 },
            PrPoint { threshold: 0.3, precision: 0.4, recall: 1.0 },
        ];
        let vals = precision_at_recall(&curve, &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(vals, vec![0.9, 0.9, 0.4, 0.4]);
        // unreachable recall → 0
        let vals = precision_at_recall(&curve[..3], &[1.0]);
        assert_eq!(vals, vec![0.0]);
    }
}
