//! Depth-1 (core-to-periphery divergence) and Depth-2 (heterogeneity among
//! secondary codes).

use crate::embed::clamped_cosine;

/// Fused vectors of one patent's main and secondary IPC codes.
#[derive(Debug, Clone)]
pub struct DepthInputs<'a> {
    pub patent_id: &'a str,
    pub main: &'a [f64],
    pub secondary: Vec<&'a [f64]>,
    /// Smoothing constant of the dynamic weight `n / (n + k)`.
    pub smoothing_k: u32,
}

/// `1 - min_i s(main, sec_i)` with clamped cosines; 0 without secondary codes.
pub fn depth1(inputs: &DepthInputs<'_>) -> f64 {
    if inputs.secondary.is_empty() {
        return 0.0;
    }
    let s_min = inputs.secondary.iter().map(|v| clamped_cosine(inputs.main, v)).fold(f64::INFINITY, f64::min);
    (1.0 - s_min).clamp(0.0, 1.0)
}

/// Blend weight `α = n / (n + k)` for `n` secondary codes.
pub fn dynamic_alpha(n: usize, k: u32) -> f64 {
    n as f64 / (n as f64 + k as f64)
}

fn pair_similarities(secondary: &[&[f64]]) -> Vec<(usize, usize, f64)> {
    let n = secondary.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j, clamped_cosine(secondary[i], secondary[j])));
        }
    }
    out
}

/// `1 - (α·S_avg + (1-α)·S_max)` over all unordered secondary pairs; 0 when
/// there are fewer than two secondary codes.
pub fn depth2(inputs: &DepthInputs<'_>) -> f64 {
    let n = inputs.secondary.len();
    if n < 2 {
        return 0.0;
    }
    let pairs = pair_similarities(&inputs.secondary);
    let s_avg = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64;
    let s_max = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    blend(n, inputs.smoothing_k, s_avg, s_max)
}

fn blend(n: usize, k: u32, s_avg: f64, s_max: f64) -> f64 {
    let alpha = dynamic_alpha(n, k);
    (1.0 - (alpha * s_avg + (1.0 - alpha) * s_max)).clamp(0.0, 1.0)
}

/// Depth-2 with the pair mean weighted by `w_i·w_j`, where `weights` holds one
/// non-negative weight per secondary code (for instance the patent's attention
/// on each code). Falls back to the unweighted mean when all weights vanish.
pub fn depth2_weighted(inputs: &DepthInputs<'_>, weights: &[f64]) -> f64 {
    let n = inputs.secondary.len();
    if n < 2 {
        return 0.0;
    }
    assert_eq!(weights.len(), n, "one weight per secondary code");
    let pairs = pair_similarities(&inputs.secondary);
    let (mut num, mut den) = (0.0, 0.0);
    for &(i, j, s) in &pairs {
        let w = weights[i].max(0.0) * weights[j].max(0.0);
        num += w * s;
        den += w;
    }
    let s_avg = if den > 0.0 { num / den } else { pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64 };
    let s_max = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    blend(n, inputs.smoothing_k, s_avg, s_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Unit vector at angle θ in the plane, so cos between two such vectors is cos(Δθ).
    fn at(theta: f64) -> Vec<f64> {
        vec![theta.cos(), theta.sin()]
    }

    #[test]
    fn no_secondaries_scores_zero() {
        let main = at(0.0);
        let inputs = DepthInputs { patent_id: "p", main: &main, secondary: vec![], smoothing_k: 1 };
        assert_eq!(depth1(&inputs), 0.0);
        assert_eq!(depth2(&inputs), 0.0);
    }

    #[test]
    fn identical_secondary_scores_zero() {
        let main = at(0.3);
        let inputs = DepthInputs { patent_id: "p", main: &main, secondary: vec![&main], smoothing_k: 1 };
        assert_eq!(depth1(&inputs), 0.0);
        assert_eq!(depth2(&inputs), 0.0);
        let two = DepthInputs { patent_id: "p", main: &main, secondary: vec![&main, &main], smoothing_k: 1 };
        assert_eq!(depth2(&two), 0.0);
    }

    #[test]
    fn depth1_uses_least_similar_secondary() {
        // clamped cosines 0.9, 0.4, 0.7 -> 1 - 0.4
        let main = at(0.0);
        let s: Vec<Vec<f64>> = [0.9f64, 0.4, 0.7].iter().map(|c| at(c.acos())).collect();
        let inputs = DepthInputs {
            patent_id: "p",
            main: &main,
            secondary: s.iter().map(Vec::as_slice).collect(),
            smoothing_k: 1,
        };
        assert!((depth1(&inputs) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn depth2_three_secondaries() {
        // 3-d construction with pairwise cosines exactly {0.2, 0.5, 0.8}
        let (c01, c02, c12): (f64, f64, f64) = (0.2, 0.5, 0.8);
        let v0 = vec![1.0, 0.0, 0.0];
        let v1 = vec![c01, (1.0 - c01 * c01).sqrt(), 0.0];
        let y2 = (c12 - c02 * c01) / v1[1];
        let v2 = vec![c02, y2, (1.0 - c02 * c02 - y2 * y2).sqrt()];
        let main = vec![0.0, 0.0, 1.0];
        let inputs = DepthInputs { patent_id: "p", main: &main, secondary: vec![&v0, &v1, &v2], smoothing_k: 1 };
        // oracle: α = 3/4, S = 0.75·0.5 + 0.25·0.8 = 0.575
        assert!((depth2(&inputs) - 0.425).abs() < 1e-9);
    }

    #[test]
    fn weighted_variant_with_equal_weights_matches() {
        let v: Vec<Vec<f64>> = [0.1, 0.9, 1.7, 2.2].iter().map(|&t| at(t)).collect();
        let main = at(0.0);
        let inputs = DepthInputs {
            patent_id: "p",
            main: &main,
            secondary: v.iter().map(Vec::as_slice).collect(),
            smoothing_k: 2,
        };
        assert!((depth2_weighted(&inputs, &[0.25; 4]) - depth2(&inputs)).abs() < 1e-12);
        assert!((depth2_weighted(&inputs, &[0.0; 4]) - depth2(&inputs)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn depths_bounded_and_permutation_invariant(
            angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 0..7),
            main_angle in 0.0f64..std::f64::consts::TAU,
            k in 1u32..5,
            rot in 0usize..7,
        ) {
            let main = at(main_angle);
            let vecs: Vec<Vec<f64>> = angles.iter().map(|&a| at(a)).collect();
            let mut refs: Vec<&[f64]> = vecs.iter().map(Vec::as_slice).collect();
            let inputs = DepthInputs { patent_id: "p", main: &main, secondary: refs.clone(), smoothing_k: k };
            let (d1, d2) = (depth1(&inputs), depth2(&inputs));
            prop_assert!((0.0..=1.0).contains(&d1));
            prop_assert!((0.0..=1.0).contains(&d2));
            if !refs.is_empty() {
                let r = rot % refs.len();
                refs.rotate_left(r);
                refs.reverse();
            }
            let permuted = DepthInputs { patent_id: "p", main: &main, secondary: refs, smoothing_k: k };
            prop_assert_eq!(depth1(&permuted), d1);
            prop_assert!((depth2(&permuted) - d2).abs() < 1e-12);
        }
    }
}
