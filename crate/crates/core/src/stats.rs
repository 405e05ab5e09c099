//! Deterministic reductions and summary statistics.

/// Sums equal-length vectors with a fixed pairwise tree, so the result
/// depends only on the input order, never on how the inputs were produced.
pub fn pairwise_sum(vectors: &[Vec<f64>]) -> Vec<f64> {
    match vectors.len() {
        0 => Vec::new(),
        1 => vectors[0].clone(),
        n => {
            let (left, right) = vectors.split_at(n / 2);
            let mut acc = pairwise_sum(left);
            for (a, b) in acc.iter_mut().zip(pairwise_sum(right)) {
                *a += b;
            }
            acc
        }
    }
}

pub fn pairwise_sum_scalar(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum_scalar(l) + pairwise_sum_scalar(r)
        }
    }
}

pub fn pairwise_mean(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len() as f64;
    let mut s = pairwise_sum(vectors);
    for x in &mut s {
        *x /= n;
    }
    s
}

/// Sample mean and standard error `sd / sqrt(n)` (with the `n - 1` variance).
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum_scalar(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum_scalar(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}
