//! Component-wise activation functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Identity,
    Tanh,
    HardTanh,
    Sigmoid,
    Relu,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::Identity,
        ActivationKind::Tanh,
        ActivationKind::HardTanh,
        ActivationKind::Sigmoid,
        ActivationKind::Relu,
    ];

    /// `σ(-a) == -σ(a)`.
    pub fn is_odd(self) -> bool {
        matches!(self, Self::Identity | Self::Tanh | Self::HardTanh)
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, Self::Tanh | Self::HardTanh | Self::Sigmoid)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Tanh => "tanh",
            Self::HardTanh => "hardtanh",
            Self::Sigmoid => "sigmoid",
            Self::Relu => "relu",
        }
    }

    /// Unchecked scalar evaluation used in the integrator loops.
    #[inline]
    pub(crate) fn eval(self, a: f64) -> f64 {
        match self {
            Self::Identity => a,
            Self::Tanh => a.tanh(),
            // |a| == 1 takes the linear branch, keeping the function continuous
            Self::HardTanh => {
                if a.abs() <= 1.0 {
                    a
                } else {
                    a.signum()
                }
            }
            Self::Sigmoid => 1.0 / (1.0 + (-a).exp()),
            Self::Relu => a.max(0.0),
        }
    }

    #[inline]
    pub(crate) fn eval_in_place(self, v: &mut [f64]) {
        if self != Self::Identity {
            v.iter_mut().for_each(|x| *x = self.eval(*x));
        }
    }

    pub fn apply_scalar(self, a: f64) -> Result<f64> {
        if a.is_nan() {
            return Err(Error::NonFinite("activation input"));
        }
        Ok(self.eval(a))
    }

    pub fn apply_vec(self, v: &[f64]) -> Result<Vec<f64>> {
        v.iter().map(|&a| self.apply_scalar(a)).collect()
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown activation `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ActivationKind::*;

    #[test]
    fn definitional_values() {
        assert_eq!(HardTanh.apply_scalar(0.5).unwrap(), 0.5);
        assert_eq!(HardTanh.apply_scalar(-3.0).unwrap(), -1.0);
        assert_eq!(HardTanh.apply_scalar(1.0).unwrap(), 1.0);
        assert_eq!(Tanh.apply_scalar(0.0).unwrap(), 0.0);
        assert_eq!(Sigmoid.apply_scalar(0.0).unwrap(), 0.5);
        assert_eq!(Relu.apply_scalar(-2.0).unwrap(), 0.0);
        assert_eq!(Relu.apply_scalar(2.5).unwrap(), 2.5);
    }

    #[test]
    fn vector_application() {
        assert_eq!(Tanh.apply_vec(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(HardTanh.apply_vec(&[2.0, -2.0, 0.3]).unwrap(), vec![1.0, -1.0, 0.3]);
        let v = [1.5, -7.0, 0.0, 1e300];
        assert_eq!(Identity.apply_vec(&v).unwrap(), v.to_vec());
    }

    #[test]
    fn nan_is_rejected() {
        for k in ActivationKind::ALL {
            assert!(matches!(k.apply_scalar(f64::NAN), Err(Error::NonFinite(_))));
            assert!(k.apply_vec(&[0.0, f64::NAN]).is_err());
        }
    }

    #[test]
    fn flags() {
        let odd: Vec<_> = ActivationKind::ALL.into_iter().filter(|k| k.is_odd()).collect();
        let bounded: Vec<_> = ActivationKind::ALL.into_iter().filter(|k| k.is_bounded()).collect();
        assert_eq!(odd, vec![Identity, Tanh, HardTanh]);
        assert_eq!(bounded, vec![Tanh, HardTanh, Sigmoid]);
    }

    #[test]
    fn string_vocabulary() {
        for k in ActivationKind::ALL {
            assert_eq!(k.to_string().parse::<ActivationKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("Tanh".parse::<ActivationKind>().is_err());
        assert!("softplus".parse::<ActivationKind>().is_err());
    }

    proptest! {
        #[test]
        fn odd_kinds_are_odd(a in -1e3f64..1e3) {
            for k in [Identity, Tanh, HardTanh] {
                prop_assert_eq!(k.apply_scalar(-a).unwrap(), -k.apply_scalar(a).unwrap());
            }
        }

        #[test]
        fn bounded_kinds_are_bounded(a in -1e6f64..1e6) {
            prop_assert!(Tanh.apply_scalar(a).unwrap().abs() <= 1.0);
            prop_assert!(HardTanh.apply_scalar(a).unwrap().abs() <= 1.0);
            let s = Sigmoid.apply_scalar(a).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn hardtanh_is_identity_on_unit_interval(a in -1.0f64..=1.0) {
            prop_assert_eq!(HardTanh.apply_scalar(a).unwrap(), a);
        }

        #[test]
        fn tanh_and_hardtanh_saturate_together(a in 8.0f64..1e4, neg in any::<bool>()) {
            let a = if neg { -a } else { a };
            let d = Tanh.apply_scalar(a).unwrap() - HardTanh.apply_scalar(a).unwrap();
            prop_assert!(d.abs() <= 1e-6);
        }
    }
}
