//! Scalar-generic numeric kernels: softmax, Shannon entropy, cosine similarity,
//! rank correlation. Everything here is parametric over the float type via
//! `num_traits::Float`; the rest of the crate instantiates them at [`crate::Score`].
//!
//! Inputs are assumed finite; NaN handling is out of contract.

use num_traits::Float;

/// Numerically stable softmax (max-shifted). Empty input yields an empty vec.
pub fn softmax<F: Float>(logits: &[F]) -> Vec<F> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum = exps.iter().cloned().fold(F::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// Shannon entropy in nats, with the 0·ln 0 = 0 convention.
/// The input is expected to be a probability distribution.
pub fn shannon_entropy<F: Float>(probs: &[F]) -> F {
    probs.iter().fold(F::zero(), |acc, &p| {
        if p > F::zero() {
            acc - p * p.ln()
        } else {
            acc
        }
    })
}

/// Natural log of an integer count, for entropy normalization.
pub fn ln_count<F: Float>(n: usize) -> F {
    F::from(n).expect("count representable as float").ln()
}

/// Cosine similarity of two equal-length vectors. Zero vectors yield 0.
pub fn cosine<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = F::zero();
    let mut na = F::zero();
    let mut nb = F::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na == F::zero() || nb == F::zero() {
        return F::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// L2 norm.
pub fn l2_norm<F: Float>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Scale `v` to unit L2 norm in place. Zero vectors are left unchanged.
pub fn l2_normalize<F: Float>(v: &mut [F]) {
    let norm = l2_norm(v);
    if norm > F::zero() {
        for x in v.iter_mut() {
            *x = *x / norm;
        }
    }
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<F: Float>(xs: &[F]) -> Option<F> {
    if xs.is_empty() {
        return None;
    }
    let sum = xs.iter().cloned().fold(F::zero(), |a, b| a + b);
    Some(sum / F::from(xs.len()).unwrap())
}

/// Pearson correlation coefficient. `None` when lengths differ, fewer than two
/// points, or either input is constant (zero variance).
pub fn pearson<F: Float>(x: &[F], y: &[F]) -> Option<F> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = F::from(x.len()).unwrap();
    let mx = x.iter().cloned().fold(F::zero(), |a, b| a + b) / n;
    let my = y.iter().cloned().fold(F::zero(), |a, b| a + b) / n;
    let mut sxy = F::zero();
    let mut sxx = F::zero();
    let mut syy = F::zero();
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == F::zero() || syy == F::zero() {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Fractional ranks (1-based), ties receiving the average of their positions.
pub fn average_ranks<F: Float>(xs: &[F]) -> Vec<F> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![F::zero(); xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average 1-based rank
        let avg = F::from(i + j + 2).unwrap() / F::from(2).unwrap();
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks. `None` under the
/// same degeneracies as [`pearson`], including a constant input.
pub fn spearman<F: Float>(x: &[F], y: &[F]) -> Option<F> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_uniform_for_equal_logits() {
        let p = softmax(&[0.7f64; 4]);
        for &pi in &p {
            assert!((pi - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_of_uniform_is_ln_n() {
        let h: f64 = shannon_entropy(&[0.25; 4]);
        assert!((h - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_zero_prob_term_ignored() {
        let h: f64 = shannon_entropy(&[1.0, 0.0, 0.0]);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn cosine_self_is_one() {
        let v = [0.3f64, -0.4, 0.5];
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_is_undefined() {
        assert_eq!(pearson(&[1.0f64, 1.0, 1.0], &[0.1, 0.5, 0.9]), None);
    }

    #[test]
    fn ranks_average_ties() {
        let r = average_ranks(&[0.0f64, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(r, vec![1.5, 1.5, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn spearman_monotone_transform_is_one() {
        let x = [0.0f64, 0.0, 1.0, 1.0, 1.0];
        let y = [0.0f64, 0.0, 0.8, 0.8, 0.8];
        let rho = spearman(&x, &y).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_reversed_is_minus_one() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        let y = [9.0f64, 7.0, 5.0, 3.0];
        let rho = spearman(&x, &y).unwrap();
        assert!((rho + 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn prop_softmax_sums_to_one(logits in prop::collection::vec(-20.0f64..20.0, 1..64)) {
            let p = softmax(&logits);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn prop_entropy_bounded_by_ln_n(logits in prop::collection::vec(-5.0f64..5.0, 1..64)) {
            let p = softmax(&logits);
            let h = shannon_entropy(&p);
            prop_assert!(h >= -1e-12);
            prop_assert!(h <= ln_count::<f64>(p.len()) + 1e-9);
        }

        #[test]
        fn prop_cosine_in_unit_interval_for_nonneg(
            a in prop::collection::vec(0.0f64..1.0, 4),
            b in prop::collection::vec(0.0f64..1.0, 4),
        ) {
            let c = cosine(&a, &b);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c));
        }
    }
}
