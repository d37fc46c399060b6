use crate::Vector;

/// Number of arc-length samples used by [`frechet_distance`].
pub const FRECHET_SAMPLES: usize = 500;

/// Resamples a polyline to `n` points equally spaced in arc length.
pub fn arc_length_resample(path: &[Vector], n: usize) -> Vec<Vector> {
    assert!(!path.is_empty(), "path must be non-empty");
    if path.len() == 1 || n <= 1 {
        return vec![path[0].clone(); n.max(1)];
    }
    let mut cum = Vec::with_capacity(path.len());
    cum.push(0.0);
    for w in path.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + (&w[1] - &w[0]).norm());
    }
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![path[0].clone(); n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let s = total * i as f64 / (n - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let u = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(&path[seg] + (&path[seg + 1] - &path[seg]) * u);
    }
    out
}

/// Discrete Fréchet distance between two point sequences.
pub fn discrete_frechet(a: &[Vector], b: &[Vector]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "paths must be non-empty");
    let m = b.len();
    let mut prev = vec![0.0_f64; m];
    let mut cur = vec![0.0_f64; m];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = (pa - pb).norm();
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Discrete Fréchet distance after resampling both paths to
/// [`FRECHET_SAMPLES`] points equally spaced in arc length.
pub fn frechet_distance(path_a: &[Vector], path_b: &[Vector]) -> f64 {
    let a = arc_length_resample(path_a, FRECHET_SAMPLES);
    let b = arc_length_resample(path_b, FRECHET_SAMPLES);
    discrete_frechet(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Vector {
        Vector::from_row_slice(&[x, y])
    }

    #[test]
    fn identical_paths() {
        let a = vec![p(0.0, 0.0), p(1.0, 0.5), p(2.0, 2.0)];
        assert!(frechet_distance(&a, &a) < 1e-12);
    }

    #[test]
    fn parallel_segments() {
        let a = vec![p(0.0, 0.0), p(1.0, 0.0)];
        let b = vec![p(0.0, 0.3), p(1.0, 0.3)];
        assert!((frechet_distance(&a, &b) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn resampling_is_uniform() {
        let a = vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0)];
        let r = arc_length_resample(&a, 5);
        assert!((&r[2] - p(1.0, 0.0)).norm() < 1e-12);
        assert!((&r[4] - p(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn time_reparameterized_curve() {
        let curve = |s: f64| p(s.cos() * (1.0 + s), s.sin());
        let a: Vec<_> = (0..=200).map(|i| curve(3.0 * i as f64 / 200.0)).collect();
        let b: Vec<_> = (0..=317).map(|i| curve(3.0 * (i as f64 / 317.0).powi(2))).collect();
        let max_seg = b.windows(2).map(|w| (&w[1] - &w[0]).norm()).fold(0.0, f64::max);
        assert!(frechet_distance(&a, &b) < max_seg);
    }
}
