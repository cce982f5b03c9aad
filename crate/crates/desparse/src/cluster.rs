//! Spatially constrained agglomerative Ward clustering of features and the
//! design-compression machinery (cd-MTLasso).
//!
//! Merging is restricted to cluster pairs adjacent in the feature graph, so
//! every emitted cluster is a connected region. The merge cost is the Ward
//! variance increase `|G_a||G_b|/(|G_a|+|G_b|) · ‖μ_a − μ_b‖²` on the column
//! feature profiles, with ties broken on the smallest pair of lowest cluster
//! indices to keep the sequence deterministic.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use ndarray::{Array1, Array2};

use crate::design::{DesignMatrix, MultiResponse};
use crate::desparsify::{d_mtlasso, ClusterInfo, DmtConfig, InferenceResult};
use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// A partition of the p features into C spatially connected clusters.
#[derive(Debug, Clone)]
pub struct Clustering {
    labels: Vec<usize>,
    c: usize,
    sizes: Vec<usize>,
    /// Geodesic diameter (mm) of each cluster.
    diameters: Vec<f64>,
}

impl Clustering {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn members(&self, r: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&j| self.labels[j] == r).collect()
    }

    pub fn avg_diameter(&self) -> f64 {
        self.diameters.iter().sum::<f64>() / self.c as f64
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameters.iter().fold(0.0_f64, |a, &b| a.max(b))
    }
}

/// The p×C membership-averaging matrix `A` (column r carries 1/|G_r| on the
/// members of cluster r), stored sparsely as labels plus sizes.
#[derive(Debug, Clone)]
pub struct CompressionMap {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl CompressionMap {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn c(&self) -> usize {
        self.sizes.len()
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    /// Apply the compression: `Z = X A` (column r of Z is the mean of the
    /// member columns of cluster r).
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = x.nrows();
        let mut z = Array2::zeros((n, self.c()));
        for (j, &r) in self.labels.iter().enumerate() {
            let col = x.column(j);
            let mut zr = z.column_mut(r);
            zr.zip_mut_with(&col, |a, b| *a += b);
        }
        for (r, &s) in self.sizes.iter().enumerate() {
            z.column_mut(r).mapv_inplace(|v| v / s as f64);
        }
        z
    }

    /// Materialize `A` densely (for tests and diagnostics).
    pub fn as_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.p(), self.c()));
        for (j, &r) in self.labels.iter().enumerate() {
            a[[j, r]] = 1.0 / self.sizes[r] as f64;
        }
        a
    }
}

struct ClusterState {
    alive: bool,
    epoch: u32,
    size: usize,
    sum: Array1<f64>,
    members: Vec<usize>,
    neighbors: BTreeSet<usize>,
}

fn ward_cost(a: &ClusterState, b: &ClusterState) -> f64 {
    let (na, nb) = (a.size as f64, b.size as f64);
    let mut d2 = 0.0;
    for (sa, sb) in a.sum.iter().zip(b.sum.iter()) {
        let diff = sa / na - sb / nb;
        d2 += diff * diff;
    }
    na * nb / (na + nb) * d2
}

/// Agglomerative Ward clustering of the design columns restricted to pairs
/// adjacent in the feature graph; stops at exactly `c` clusters.
///
/// `x_sub` may be any row subsample of the design (the ensemble fits
/// clusterings on small subsamples); only its column count must match the
/// geometry.
pub fn ward_cluster(x_sub: &Array2<f64>, g: &Geometry, c: usize) -> Result<Clustering> {
    let p = g.p();
    if x_sub.ncols() != p {
        return Err(Error::ShapeMismatch(format!(
            "design sample has {} columns but geometry has {p} features",
            x_sub.ncols()
        )));
    }
    if c < 1 || c > p {
        return Err(Error::InvalidC { c, p });
    }

    let mut clusters: Vec<ClusterState> = (0..p)
        .map(|j| ClusterState {
            alive: true,
            epoch: 0,
            size: 1,
            sum: x_sub.column(j).to_owned(),
            members: vec![j],
            neighbors: g.neighbors(j).iter().map(|&(k, _)| k).collect(),
        })
        .collect();

    // heap entries: Reverse((cost_bits, a, b, epoch_a, epoch_b)); costs are
    // non-negative so their IEEE bit patterns order like the values
    let mut heap: BinaryHeap<Reverse<(u64, usize, usize, u32, u32)>> = BinaryHeap::new();
    for a in 0..p {
        for &b in clusters[a].neighbors.clone().iter() {
            if a < b {
                let cost = ward_cost(&clusters[a], &clusters[b]);
                heap.push(Reverse((cost.to_bits(), a, b, 0, 0)));
            }
        }
    }

    let mut remaining = p;
    while remaining > c {
        let (a, b) = loop {
            let Some(Reverse((_, a, b, ea, eb))) = heap.pop() else {
                return Err(Error::UnmergeableClusters { remaining, target: c });
            };
            if clusters[a].alive
                && clusters[b].alive
                && clusters[a].epoch == ea
                && clusters[b].epoch == eb
            {
                break (a, b);
            }
        };

        // merge b into a (a < b by construction)
        let (size_b, sum_b, members_b, neighbors_b) = {
            let cb = &mut clusters[b];
            cb.alive = false;
            (cb.size, cb.sum.clone(), std::mem::take(&mut cb.members), cb.neighbors.clone())
        };
        {
            let ca = &mut clusters[a];
            ca.size += size_b;
            ca.sum += &sum_b;
            ca.members.extend(members_b);
            ca.epoch += 1;
            ca.neighbors.remove(&b);
            for &nb in &neighbors_b {
                if nb != a {
                    ca.neighbors.insert(nb);
                }
            }
        }
        // prune references to dead clusters and refresh costs to the rest
        let nbs: Vec<usize> = clusters[a].neighbors.iter().copied().collect();
        let mut live_nbs = Vec::with_capacity(nbs.len());
        for nb in nbs {
            if clusters[nb].alive {
                live_nbs.push(nb);
            } else {
                clusters[a].neighbors.remove(&nb);
            }
        }
        for nb in live_nbs {
            clusters[nb].neighbors.remove(&b);
            clusters[nb].neighbors.insert(a);
            let cost = ward_cost(&clusters[a], &clusters[nb]);
            let (lo, hi) = if a < nb { (a, nb) } else { (nb, a) };
            heap.push(Reverse((
                cost.to_bits(),
                lo,
                hi,
                clusters[lo].epoch,
                clusters[hi].epoch,
            )));
        }
        remaining -= 1;
    }

    // relabel alive clusters by their smallest member index
    let mut alive: Vec<usize> = (0..p).filter(|&i| clusters[i].alive).collect();
    alive.sort_by_key(|&i| *clusters[i].members.iter().min().unwrap());
    let mut labels = vec![usize::MAX; p];
    let mut sizes = Vec::with_capacity(c);
    let mut diameters = Vec::with_capacity(c);
    for (r, &i) in alive.iter().enumerate() {
        for &j in &clusters[i].members {
            labels[j] = r;
        }
        sizes.push(clusters[i].size);
        diameters.push(g.diameter_of(&clusters[i].members));
    }
    Ok(Clustering { labels, c, sizes, diameters })
}

/// Compress the design by cluster-mean averaging: `Z = X A`.
///
/// The returned matrix is the raw average (the caller re-standardizes it
/// before inference, which the clustered pipeline does automatically).
pub fn compress(x: &DesignMatrix, cl: &Clustering) -> Result<(Array2<f64>, CompressionMap)> {
    if cl.p() != x.p() {
        return Err(Error::ShapeMismatch(format!(
            "clustering covers {} features but design has {}",
            cl.p(),
            x.p()
        )));
    }
    let map = CompressionMap { labels: cl.labels.clone(), sizes: cl.sizes.clone() };
    let z = map.apply(x.data());
    Ok((z, map))
}

/// Spread cluster-level p-values back to features: `p_j = q_{label(j)}`.
pub fn expand_pvalues(q: &[f64], cl: &Clustering) -> Vec<f64> {
    cl.labels.iter().map(|&r| q[r]).collect()
}

/// Clustered desparsified multi-task Lasso: Ward clustering on the full
/// design, compression, d-MTLasso on the compressed design, cluster-level
/// Bonferroni correction, then expansion back to features.
pub fn cd_mtlasso(
    x: &DesignMatrix,
    y: &MultiResponse,
    g: &Geometry,
    c: usize,
    cfg: &DmtConfig,
) -> Result<InferenceResult> {
    let cl = ward_cluster(x.data(), g, c)?;
    cd_mtlasso_with_clustering(x, y, &cl, cfg)
}

/// The clustered pipeline with a caller-supplied clustering (the ensemble
/// fits its clusterings on row subsamples but always infers on the full
/// data).
pub fn cd_mtlasso_with_clustering(
    x: &DesignMatrix,
    y: &MultiResponse,
    cl: &Clustering,
    cfg: &DmtConfig,
) -> Result<InferenceResult> {
    let (z_raw, _map) = compress(x, cl)?;
    let z = DesignMatrix::standardize(z_raw)?;
    let inner = d_mtlasso(&z, y, cfg)?;
    let c = cl.c() as f64;
    let q_corrected: Vec<f64> = inner.pval.iter().map(|&v| (c * v).min(1.0)).collect();

    let t = inner.t();
    let mut beta = Array2::zeros((cl.p(), t));
    for (j, &r) in cl.labels.iter().enumerate() {
        beta.row_mut(j).assign(&inner.beta_debiased.row(r));
    }
    let excluded: Vec<usize> = (0..cl.p())
        .filter(|&j| inner.excluded.contains(&cl.labels[j]))
        .collect();

    Ok(InferenceResult {
        beta_debiased: beta,
        stat: expand_pvalues(&inner.stat, cl),
        pval: expand_pvalues(&inner.pval, cl),
        pval_corrected: expand_pvalues(&q_corrected, cl),
        noise: inner.noise,
        s_hat: inner.s_hat,
        excluded,
        lambda: inner.lambda,
        solver_gap: inner.solver_gap,
        solver_sweeps: inner.solver_sweeps,
        converged: inner.converged,
        cluster: Some(ClusterInfo {
            c: cl.c(),
            avg_diameter: cl.avg_diameter(),
            max_diameter: cl.max_diameter(),
            labels: cl.labels.clone(),
        }),
    })
}
