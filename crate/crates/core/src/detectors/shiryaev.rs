use super::{check_llr, require_observation, Observation, SequentialDetector};
use crate::error::{QcdError, Result};
use crate::numeric::{log_add_exp, softplus};

/// Prior-only propagation `p + (1 − p)ρ`: the probability that the change
/// has happened by the next step before its observation is seen.
#[inline]
pub fn prior_update(p: f64, rho: f64) -> f64 {
    p + (1.0 - p) * rho
}

/// Bayes update of the prior-propagated posterior with likelihood ratio `e^llr`.
#[inline]
fn bayes_update(p_tilde: f64, llr: f64) -> f64 {
    if p_tilde >= 1.0 {
        return 1.0;
    }
    if p_tilde <= 0.0 {
        return 0.0;
    }
    if llr > 0.0 {
        // odds form avoids overflowing e^llr
        1.0 / (1.0 + (1.0 - p_tilde) / p_tilde * (-llr).exp())
    } else {
        let a = p_tilde * llr.exp();
        a / (a + 1.0 - p_tilde)
    }
}

/// One step of the Shiryaev posterior recursion `p' = Φ(X, p)`.
#[inline]
pub fn posterior_update(p: f64, rho: f64, llr: f64) -> f64 {
    bayes_update(prior_update(p, rho), llr)
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(QcdError::invalid_model(format!("rho must lie in [0, 1), got {rho}")))
    }
}

fn check_posterior_threshold(a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(QcdError::invalid_model(format!("posterior threshold A must lie in (0, 1), got {a}")))
    }
}

/// Shiryaev detector in posterior-probability form: stop at the first `n`
/// with `p_n ≥ A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiryaevState {
    p: f64,
    rho: f64,
    threshold: f64,
    stopped: bool,
    n: u64,
}

impl ShiryaevState {
    pub fn new(rho: f64, threshold_a: f64) -> Result<Self> {
        check_rho(rho)?;
        check_posterior_threshold(threshold_a)?;
        Ok(Self { p: 0.0, rho, threshold: threshold_a, stopped: false, n: 0 })
    }

    /// Start from posterior `p` instead of 0.
    pub fn with_posterior(mut self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QcdError::invalid_input(format!("posterior must lie in [0, 1], got {p}")));
        }
        self.p = p;
        Ok(self)
    }

    pub fn step(&mut self, llr: f64) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.n));
        }
        check_llr(llr)?;
        self.p = posterior_update(self.p, self.rho, llr);
        self.n += 1;
        self.stopped = self.p >= self.threshold;
        Ok(self.stopped)
    }

    pub fn posterior(&self) -> f64 {
        self.p
    }

    /// `Λ = p / (1 − p)`.
    pub fn lambda(&self) -> f64 {
        self.p / (1.0 - self.p)
    }

    /// `R_ρ = Λ / ρ`.
    pub fn r_statistic(&self) -> f64 {
        self.lambda() / self.rho
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn steps(&self) -> u64 {
        self.n
    }
}

impl SequentialDetector for ShiryaevState {
    fn advance(&mut self, obs: Option<Observation>) -> Result<bool> {
        self.step(require_observation(obs)?.llr)
    }

    fn statistic(&self) -> f64 {
        self.p
    }

    fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn observations_used(&self) -> u64 {
        self.n
    }
}

/// Shiryaev detector in odds form, `Λ_n = p_n / (1 − p_n)`, carried as `ln Λ`:
/// `Λ_{n+1} = (ρ + Λ_n) L(X_{n+1}) / (1 − ρ)`, `Λ_0 = 0`. Stops at `Λ ≥ a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiryaevLambdaState {
    log_lambda: f64,
    log_rho: f64,
    drift: f64,
    log_threshold: f64,
    stopped: bool,
    n: u64,
}

impl ShiryaevLambdaState {
    /// `threshold_a` is the odds threshold `a = A / (1 − A)`.
    pub fn new(rho: f64, threshold_a: f64) -> Result<Self> {
        check_rho(rho)?;
        if !(threshold_a > 0.0) {
            return Err(QcdError::invalid_model(format!("odds threshold must be > 0, got {threshold_a}")));
        }
        Ok(Self {
            log_lambda: f64::NEG_INFINITY,
            log_rho: rho.ln(),
            drift: -(-rho).ln_1p(),
            log_threshold: threshold_a.ln(),
            stopped: false,
            n: 0,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(QcdError::invalid_input(format!("lambda must be >= 0, got {lambda}")));
        }
        self.log_lambda = lambda.ln();
        Ok(self)
    }

    pub fn step(&mut self, llr: f64) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.n));
        }
        check_llr(llr)?;
        self.log_lambda = log_add_exp(self.log_rho, self.log_lambda) + llr + self.drift;
        self.n += 1;
        self.stopped = self.log_lambda >= self.log_threshold;
        Ok(self.stopped)
    }

    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    /// `Z_n = ln Λ_n`.
    pub fn log_lambda(&self) -> f64 {
        self.log_lambda
    }

    pub fn posterior(&self) -> f64 {
        // p = Λ / (1 + Λ) = sigmoid(ln Λ)
        1.0 / (1.0 + (-self.log_lambda).exp())
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

/// Shiryaev detector in the scaled form `R_{n,ρ} = Λ_n / ρ`, carried as `ln R`:
/// `R_{n+1} = (1 + R_n) L(X_{n+1}) / (1 − ρ)`, `R_0 = 0`. Stops at `R ≥ a/ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiryaevRState {
    log_r: f64,
    drift: f64,
    log_threshold: f64,
    stopped: bool,
    n: u64,
}

impl ShiryaevRState {
    /// `threshold` is on the R scale, i.e. `a / ρ`.
    pub fn new(rho: f64, threshold: f64) -> Result<Self> {
        check_rho(rho)?;
        if !(threshold > 0.0) {
            return Err(QcdError::invalid_model(format!("R threshold must be > 0, got {threshold}")));
        }
        Ok(Self {
            log_r: f64::NEG_INFINITY,
            drift: -(-rho).ln_1p(),
            log_threshold: threshold.ln(),
            stopped: false,
            n: 0,
        })
    }

    pub fn with_r(mut self, r: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(QcdError::invalid_input(format!("R must be >= 0, got {r}")));
        }
        self.log_r = r.ln();
        Ok(self)
    }

    pub fn step(&mut self, llr: f64) -> Result<bool> {
        if self.stopped {
            return Err(QcdError::AlreadyStopped(self.n));
        }
        check_llr(llr)?;
        self.log_r = softplus(self.log_r) + llr + self.drift;
        self.n += 1;
        self.stopped = self.log_r >= self.log_threshold;
        Ok(self.stopped)
    }

    pub fn r(&self) -> f64 {
        self.log_r.exp()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_likelihood_gives_prior_update() {
        let mut s = ShiryaevState::new(0.01, 0.99).unwrap();
        s.step(0.0).unwrap();
        assert!((s.posterior() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn two_hypothesis_bayes_update() {
        let mut s = ShiryaevState::new(0.0, 0.99).unwrap().with_posterior(0.5).unwrap();
        s.step(3f64.ln()).unwrap();
        assert!((s.posterior() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn posterior_one_is_absorbing() {
        for llr in [-50.0, -1.0, 0.0, 3.0, 800.0] {
            assert_eq!(posterior_update(1.0, 0.3, llr), 1.0);
        }
    }

    #[test]
    fn extreme_llr_stays_in_unit_interval() {
        assert_eq!(posterior_update(0.2, 0.01, 1e4), 1.0);
        let p = posterior_update(0.2, 0.01, -1e4);
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn lambda_form_direct_substitution() {
        // Λ' = (ρ + Λ) e^llr / (1 − ρ) with Λ = 0, llr = 0
        let mut s = ShiryaevLambdaState::new(0.01, 99.0).unwrap();
        s.step(0.0).unwrap();
        assert!((s.lambda() - 0.01 / 0.99).abs() < 1e-16);
    }

    #[test]
    fn r_form_direct_substitution() {
        let mut s = ShiryaevRState::new(0.25, 1e6).unwrap().with_r(3.0).unwrap();
        s.step(0.0).unwrap();
        assert!((s.r() - 4.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn one_step_preserves_odds_mapping() {
        for &(p, rho, llr) in &[(0.0, 0.01, 0.3), (0.2, 0.05, -1.2), (0.7, 0.01, 2.5), (0.01, 0.3, 0.0)] {
            let mut ps = ShiryaevState::new(rho, 0.999).unwrap().with_posterior(p).unwrap();
            let mut ls = ShiryaevLambdaState::new(rho, 1e9).unwrap().with_lambda(p / (1.0 - p)).unwrap();
            ps.step(llr).unwrap();
            ls.step(llr).unwrap();
            let expect = ps.posterior() / (1.0 - ps.posterior());
            assert!(((ls.lambda() - expect) / expect).abs() < 1e-12, "p={p} rho={rho} llr={llr}");
        }
    }

    #[test]
    fn stepping_after_stop_is_an_error() {
        let mut s = ShiryaevState::new(0.5, 0.6).unwrap();
        assert!(s.step(10.0).unwrap());
        assert_eq!(s.step(0.0), Err(QcdError::AlreadyStopped(1)));
    }

    #[test]
    fn rejects_non_finite_llr_and_bad_params() {
        let mut s = ShiryaevState::new(0.1, 0.9).unwrap();
        assert!(s.step(f64::NAN).is_err());
        assert!(ShiryaevState::new(1.0, 0.9).is_err());
        assert!(ShiryaevState::new(0.1, 1.0).is_err());
    }
}
