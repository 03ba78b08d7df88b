use rand::{Rng, RngCore};

use super::{EnvironmentError, Result};
use crate::rng::StreamRng;
use crate::Sign;

/// `Plus` iff `y ≥ u`; a tie counts as the guess being above.
pub fn true_feedback(y: f64, u: f64) -> Sign {
    if y >= u {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Flips each bit independently with probability `p`.
///
/// One uniform is drawn per bit even when `p = 0`, so the stream position
/// depends only on the round count.
#[derive(Clone, Debug)]
pub struct FeedbackChannel {
    p: f64,
    rng: StreamRng,
    draws: u64,
    flips: u64,
}

impl FeedbackChannel {
    pub fn new(p: f64, rng: StreamRng) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(EnvironmentError::InvalidChannel(p));
        }
        Ok(FeedbackChannel {
            p,
            rng,
            draws: 0,
            flips: 0,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn apply(&mut self, sigma: Sign) -> Sign {
        let u: f64 = (&mut self.rng as &mut dyn RngCore).random();
        self.draws += 1;
        if u < self.p {
            self.flips += 1;
            sigma.flipped()
        } else {
            sigma
        }
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn flips(&self) -> u64 {
        self.flips
    }

    pub fn flip_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.flips as f64 / self.draws as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn tie_rule() {
        assert_eq!(true_feedback(0.5, 0.3), Sign::Plus);
        assert_eq!(true_feedback(0.1, 0.3), Sign::Minus);
        assert_eq!(true_feedback(0.3, 0.3), Sign::Plus);
    }

    #[test]
    fn noiseless_is_identity() {
        let mut c = FeedbackChannel::new(0.0, stream(1, 2)).unwrap();
        for i in 0..1000 {
            let s = if i % 3 == 0 { Sign::Plus } else { Sign::Minus };
            assert_eq!(c.apply(s), s);
        }
        assert_eq!(c.flips(), 0);
        assert_eq!(c.draws(), 1000);
    }

    #[test]
    fn flip_rate_within_three_sigma() {
        let n = 100_000;
        for p in [0.25, 0.5 - 1e-3] {
            let mut c = FeedbackChannel::new(p, stream(7, 2)).unwrap();
            for _ in 0..n {
                c.apply(Sign::Plus);
            }
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (c.flip_rate() - p).abs() <= 3.0 * sigma,
                "p = {p}: {}",
                c.flip_rate()
            );
        }
    }

    #[test]
    fn replays_and_rejects() {
        let run = || {
            let mut c = FeedbackChannel::new(0.3, stream(9, 2)).unwrap();
            (0..64).map(|_| c.apply(Sign::Minus)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        assert!(FeedbackChannel::new(0.5, stream(0, 0)).is_err());
        assert!(FeedbackChannel::new(-0.1, stream(0, 0)).is_err());
    }
}
