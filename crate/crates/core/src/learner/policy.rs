use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::Action;

const A: usize = Action::COUNT;

/// Probability per action, in canonical [`Action`] order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution(pub [f64; A]);

impl PolicyDistribution {
    pub fn uniform() -> Self {
        Self([1.0 / A as f64; A])
    }

    pub fn one_hot(action: Action) -> Self {
        let mut p = [0.0; A];
        p[action.index()] = 1.0;
        Self(p)
    }

    /// Normalises non-negative weights; all-zero weights give the uniform
    /// distribution.
    pub fn from_weights(weights: [f64; A]) -> Self {
        let w = weights.map(|x| if x.is_finite() && x > 0.0 { x } else { 0.0 });
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Self::uniform();
        }
        Self(w.map(|x| x / total))
    }

    pub fn probs(&self) -> &[f64; A] {
        &self.0
    }

    pub fn prob(&self, action: Action) -> f64 {
        self.0[action.index()]
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|&p| p.is_finite() && p >= 0.0)
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }

    /// First action with the highest probability.
    pub fn argmax(&self) -> Action {
        let mut best = 0;
        for i in 1..A {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Action::ALL[best]
    }

    /// Inverse-CDF sample using a single uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return Action::ALL[i];
            }
        }
        Action::ALL[last]
    }

    /// Sharpens (`t < 1`) or flattens (`t > 1`) the distribution: `p^(1/t)`
    /// renormalised.
    pub fn with_temperature(&self, t: f64) -> Self {
        if t == 1.0 {
            return *self;
        }
        Self::from_weights(self.0.map(|p| p.powf(1.0 / t)))
    }

    /// Adds `bias` elementwise, clamps at zero and renormalises.
    pub fn biased(&self, bias: &[f64; A]) -> Self {
        let mut w = self.0;
        for (x, b) in w.iter_mut().zip(bias) {
            *x += b;
        }
        Self::from_weights(w)
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64; A]) -> PolicyDistribution {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|z| (z - m).exp());
    let total: f64 = e.iter().sum();
    PolicyDistribution(e.map(|x| x / total))
}

/// Sigmoid output of the value head, in (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ValueEstimate(pub f64);

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64; 5], b: &[f64; 5], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        assert!(close(&softmax(&[0.0; 5]).0, &[0.2; 5], 1e-15));
        let p = softmax(&[2f64.ln(), 0.0, 0.0, 0.0, 0.0]);
        assert!(close(&p.0, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0], 1e-15));
        let z = [0.3, -1.2, 4.0, 0.0, 2.5];
        let shifted = z.map(|x| x + 123.4);
        assert!(close(&softmax(&z).0, &softmax(&shifted).0, 1e-12));
        assert!(softmax(&[1e308, -1e308, 0.0, 0.0, 0.0]).is_valid());
    }

    #[test]
    fn sampling_respects_zero_mass() {
        let p = PolicyDistribution([0.0, 0.5, 0.0, 0.5, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = p.sample(&mut rng);
            assert!(a == Action::Down || a == Action::Right);
        }
        assert_eq!(
            PolicyDistribution::one_hot(Action::Left).sample(&mut rng),
            Action::Left
        );
    }

    #[test]
    fn bias_and_temperature_stay_valid() {
        let p = PolicyDistribution([0.1, 0.2, 0.3, 0.4, 0.0]);
        assert!(p.biased(&[-1.0, 0.5, 0.0, 0.0, 0.2]).is_valid());
        assert_eq!(p.biased(&[-1.0; 5]), PolicyDistribution::uniform());
        assert!(p.with_temperature(0.5).is_valid());
        assert!(p.with_temperature(0.5).prob(Action::Right) > 0.4);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
