use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RauError;

/// Truncated exponential reward law on `(-tau_l, tau_h]`.
///
/// The magnitude `|x|` is `|tau_h|` plus an exponential excess with scale
/// `sigma`, truncated so that `|x| < tau_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncExpParams {
    pub tau_l: f64,
    pub tau_h: f64,
    pub sigma: f64,
}

impl TruncExpParams {
    pub fn new(tau_l: f64, tau_h: f64, sigma: f64) -> Result<Self, RauError> {
        let p = TruncExpParams { tau_l, tau_h, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RauError> {
        let finite = self.tau_l.is_finite() && self.tau_h.is_finite() && self.sigma.is_finite();
        if !finite || self.tau_h > 0.0 || self.sigma <= 0.0 || self.tau_l <= self.tau_h.abs() {
            return Err(RauError::BadTruncExp(*self));
        }
        Ok(())
    }

    /// Width of the excess range, `tau_l - |tau_h|`.
    fn span(&self) -> f64 {
        self.tau_l - self.tau_h.abs()
    }

    /// Normalizer `1 - exp(-span / sigma)`, computed without cancellation.
    fn mass(&self) -> f64 {
        -(-self.span() / self.sigma).exp_m1()
    }

    pub fn pdf(&self, x: f64) -> Result<f64, RauError> {
        if !x.is_finite() {
            return Err(RauError::NonFinite(x));
        }
        if x <= -self.tau_l || x > self.tau_h {
            return Ok(0.0);
        }
        let excess = x.abs() - self.tau_h.abs();
        Ok((-excess / self.sigma).exp() / (self.sigma * self.mass()))
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -self.tau_l {
            return 0.0;
        }
        if x >= self.tau_h {
            return 1.0;
        }
        // X <= x  <=>  excess >= e
        let e = -x - self.tau_h.abs();
        let tail = (-e / self.sigma).exp() - (-self.span() / self.sigma).exp();
        tail / self.mass()
    }

    pub fn mean(&self) -> f64 {
        let l = self.span();
        let s = self.sigma;
        // Mean of the truncated excess: s - l e^{-l/s} / (1 - e^{-l/s}).
        let excess = s - l * (-l / s).exp() / self.mass();
        -(self.tau_h.abs() + excess)
    }

    /// Inverse-CDF draw from `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let excess = -self.sigma * (u * (-self.span() / self.sigma).exp_m1()).ln_1p();
        -(self.tau_h.abs() + excess.min(self.span()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> TruncExpParams {
        TruncExpParams::new(10.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn density_closed_form() {
        let p = unit();
        let norm = 1.0 - (-10.0f64).exp();
        assert!((p.pdf(0.0).unwrap() - 1.0 / norm).abs() < 1e-15);
        assert!((p.pdf(0.0).unwrap() - 1.000_045_4).abs() < 1e-7);
        assert!((p.pdf(-1.0).unwrap() - (-1.0f64).exp() / norm).abs() < 1e-15);
        assert!((p.pdf(-1.0).unwrap() - 0.367_896).abs() < 1e-6);
        assert_eq!(p.pdf(0.5).unwrap(), 0.0);
        assert_eq!(p.pdf(-10.0).unwrap(), 0.0);
        assert!(p.pdf(f64::NAN).is_err());
    }

    /// Composite Simpson quadrature, used as an independent oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn density_integrates_to_one_and_matches_cdf() {
        for p in [unit(), TruncExpParams::new(3.0, -0.5, 0.7).unwrap()] {
            let pdf = |x: f64| p.pdf(x).unwrap();
            let total = simpson(pdf, -p.tau_l + 1e-12, p.tau_h, 20_000);
            assert!((total - 1.0).abs() < 1e-8, "{total}");
            for x in [-2.5, -1.0, -0.6] {
                let by_quad = simpson(pdf, -p.tau_l + 1e-12, x, 20_000);
                assert!((by_quad - p.cdf(x)).abs() < 1e-8);
            }
            let mean = simpson(|x| x * p.pdf(x).unwrap(), -p.tau_l + 1e-12, p.tau_h, 20_000);
            assert!((mean - p.mean()).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_matches_closed_form() {
        let e10 = (-10.0f64).exp();
        let expect = -(1.0 - 10.0 * e10 / (1.0 - e10));
        assert!((unit().mean() - expect).abs() < 1e-15);
        assert!((unit().mean() + 0.999_546).abs() < 1e-6);
        let wide = TruncExpParams::new(10_000.0, 0.0, 1.0).unwrap();
        assert!((wide.mean() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let p = TruncExpParams::new(3.0, -0.5, 0.7).unwrap();
        for u in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let x = p.quantile(u);
            assert!((p.cdf(x) - (1.0 - u)).abs() < 1e-12, "u {u}");
        }
    }

    #[test]
    fn samples_stay_in_support() {
        let p = TruncExpParams::new(2.0, -0.25, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let x = p.sample(&mut rng);
            assert!(x > -p.tau_l && x <= p.tau_h, "{x}");
        }
    }

    #[test]
    fn sampler_matches_cdf_in_ks_distance() {
        let p = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| p.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = p.cdf(x);
            d = d.max((f - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - f).abs());
        }
        assert!(d <= 0.01, "KS statistic {d}");
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(TruncExpParams::new(10.0, 0.5, 1.0).is_err());
        assert!(TruncExpParams::new(10.0, 0.0, 0.0).is_err());
        assert!(TruncExpParams::new(1.0, -2.0, 1.0).is_err());
        assert!(TruncExpParams::new(f64::INFINITY, 0.0, 1.0).is_err());
    }
}
