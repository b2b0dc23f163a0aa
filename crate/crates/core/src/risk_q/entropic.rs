use super::RiskError;

/// `Σ_l γ^l · cost_l`.
pub fn discounted_cost(costs: &[f64], gamma: f64) -> f64 {
    costs.iter().rev().fold(0.0, |acc, c| c + gamma * acc)
}

/// Certainty equivalent `(1/α)·log Σ p_i exp(α x_i)` of a finite lottery.
///
/// Weights are assumed to sum to one. The maximum is factored out and the
/// remainder evaluated through `ln_1p`/`exp_m1`, which keeps the result
/// accurate both for large `α·x` and for `α` near zero. `α = 0` gives the
/// expectation.
pub fn entropic_aggregate<I>(weighted: I, alpha: f64) -> f64
where
    I: IntoIterator<Item = (f64, f64)> + Clone,
{
    if alpha == 0.0 {
        return weighted.into_iter().map(|(p, x)| p * x).sum();
    }
    let top = weighted
        .clone()
        .into_iter()
        .filter(|(p, _)| *p > 0.0)
        .map(|(_, x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    let tilt: f64 = weighted
        .into_iter()
        .map(|(p, x)| p * (alpha * (x - top)).exp_m1())
        .sum();
    top + tilt.max(-1.0).ln_1p() / alpha
}

/// Entropic risk `(1/α)·log mean(exp(α·L_i))` of equally weighted samples.
pub fn entropic_value(samples: &[f64], alpha: f64) -> Result<f64, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::BadParams("entropic_value needs at least one sample".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(RiskError::BadParams(format!("alpha must be >= 0, got {alpha}")));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(RiskError::NonFinite(*x));
    }
    let w = 1.0 / samples.len() as f64;
    Ok(entropic_aggregate(samples.iter().map(|&x| (w, x)), alpha))
}

/// Second-order expansion `mean + (α/2)·variance` of the entropic value.
pub fn mean_variance_approx(samples: &[f64], alpha: f64) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    mean + 0.5 * alpha * var
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn discounted_sums() {
        assert!((discounted_cost(&[1.0, 1.0, 1.0], 0.3) - 1.39).abs() < 1e-15);
        assert_eq!(discounted_cost(&[0.0; 5], 0.3), 0.0);
        assert!((discounted_cost(&[2.0, -1.0], 0.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_lottery() {
        let exact = 5.0 * ((1.0 + 2f64.exp()) / 2.0).ln();
        let v = entropic_value(&[0.0, 10.0], 0.2).unwrap();
        assert!((v - exact).abs() < 1e-12);
        assert!((v - 7.168_904_152).abs() < 1e-9);
        assert!((mean_variance_approx(&[0.0, 10.0], 0.2) - 7.5).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_is_the_mean() {
        assert_eq!(entropic_value(&[1.0, 2.0, 6.0], 0.0).unwrap(), 3.0);
    }

    #[test]
    fn large_costs_stay_finite() {
        let v = entropic_value(&[10_000.0, -10_000.0, 0.0], 0.2).unwrap();
        assert!(v.is_finite());
        // Dominated by the largest cost: 10000 + 5·ln(1/3).
        assert!((v - (10_000.0 - 5.0 * 3f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(entropic_value(&[], 0.2).is_err());
        assert!(entropic_value(&[1.0], -0.1).is_err());
        assert!(entropic_value(&[f64::NAN], 0.2).is_err());
    }

    proptest! {
        #[test]
        fn constant_samples_are_invariant(c in -1e4f64..1e4, n in 1usize..20, alpha in 0.0f64..5.0) {
            let v = entropic_value(&vec![c; n], alpha).unwrap();
            prop_assert!((v - c).abs() <= 1e-9 * c.abs().max(1.0));
        }

        /// The gap is about α·Var/2, so the sets are kept to a bounded range.
        #[test]
        fn near_zero_alpha_matches_mean(xs in proptest::collection::vec(-10.0f64..10.0, 1..30)) {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            prop_assert!((entropic_value(&xs, 1e-6).unwrap() - mean).abs() <= 1e-4);
        }

        #[test]
        fn nondecreasing_in_alpha(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..30),
            a in 0.0f64..2.0,
            da in 0.0f64..2.0,
        ) {
            let lo = entropic_value(&xs, a).unwrap();
            let hi = entropic_value(&xs, a + da).unwrap();
            prop_assert!(hi >= lo - 1e-9 * lo.abs().max(1.0));
        }

        /// Equal-mean two-point lotteries: the wider one is strictly riskier.
        #[test]
        fn variance_is_penalized(m in -10.0f64..10.0, d1 in 0.1f64..5.0, extra in 0.1f64..5.0, alpha in 0.01f64..2.0) {
            let narrow = entropic_value(&[m - d1, m + d1], alpha).unwrap();
            let wide = entropic_value(&[m - d1 - extra, m + d1 + extra], alpha).unwrap();
            prop_assert!(wide > narrow);
        }
    }
}
