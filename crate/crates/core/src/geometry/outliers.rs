//! Statistical outlier removal over mean k-nearest-neighbour distances.

use std::num::NonZero;

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use super::{GeometryConfig, GeometryError, Point, PointCloud};

/// Mean Euclidean distance from each point to its `k` nearest other points.
///
/// Requires `pc.len() > k`.
pub fn mean_knn_distances(pc: &PointCloud, k: usize) -> Result<Vec<f64>, GeometryError> {
    let n = pc.len();
    if k == 0 || n <= k {
        return Err(GeometryError::TooFewPoints { have: n, need: k + 1 });
    }
    let coords: Vec<[f64; 3]> = pc.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords)
        .map_err(|e| GeometryError::DegenerateCloud(format!("kd-tree construction failed: {e}")))?;
    let query_n = NonZero::new(k + 1).expect("k + 1 > 0");

    let mut out = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(k + 1);
    for (i, p) in pc.iter().enumerate() {
        let found = tree
            .query(&coords[i])
            .nearest_n::<SquaredEuclidean<f64>>(query_n)
            .execute();
        // Distances are recomputed here rather than taken from the tree so the
        // values do not depend on the tree's internal arithmetic.
        dists.clear();
        dists.extend(
            found
                .iter()
                .map(|r| r.item as usize)
                .filter(|&j| j != i)
                .map(|j| distance(p, &pc.points[j])),
        );
        dists.sort_by(f64::total_cmp);
        // Coincident points may push `i` itself out of the result; keep exactly k.
        dists.truncate(k);
        out.push(dists.iter().sum::<f64>() / k as f64);
    }
    Ok(out)
}

fn distance(a: &Point, b: &Point) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Drops points whose mean kNN distance exceeds `mean + sigma_mult · std`
/// (population statistics over all points). Input order is preserved.
pub fn remove_outliers(pc: &PointCloud, cfg: &GeometryConfig) -> Result<PointCloud, GeometryError> {
    let m = mean_knn_distances(pc, cfg.n_neighbors)?;
    let n = m.len() as f64;
    let mean = m.iter().sum::<f64>() / n;
    let var = m.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(pc.clone());
    }
    let cutoff = mean + cfg.sigma_mult * std;
    Ok(pc
        .iter()
        .zip(&m)
        .filter(|(_, &mi)| mi <= cutoff)
        .map(|(p, _)| *p)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> GeometryConfig {
        GeometryConfig { n_neighbors: n, ..Default::default() }
    }

    #[test]
    fn identical_points_are_all_kept() {
        let pc = PointCloud::new(vec![Point::new(1.0, 2.0, 3.0); 64]);
        let out = remove_outliers(&pc, &cfg(10)).unwrap();
        assert_eq!(out.len(), 64);
    }

    #[test]
    fn too_few_points() {
        let pc = PointCloud::new(vec![Point::new(0.0, 0.0, 1.0); 5]);
        assert_eq!(
            remove_outliers(&pc, &cfg(10)),
            Err(GeometryError::TooFewPoints { have: 5, need: 11 })
        );
        let exactly = PointCloud::new(vec![Point::new(0.0, 0.0, 1.0); 10]);
        assert!(remove_outliers(&exactly, &cfg(10)).is_err());
    }

    #[test]
    fn grid_neighbour_distances() {
        // four points on a unit square: each has two neighbours at 1, one at sqrt 2
        let pc = PointCloud::new(vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
        ]);
        let m = mean_knn_distances(&pc, 2).unwrap();
        assert!(m.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let m3 = mean_knn_distances(&pc, 3).unwrap();
        let want = (2.0 + 2f64.sqrt()) / 3.0;
        assert!(m3.iter().all(|&x| (x - want).abs() < 1e-15));
    }
}
