use serde::{Deserialize, Serialize};

use crate::model::SegmentView;

/// Cylindrical test functionals: each reads finitely many segment values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctional {
    /// 1 + tanh⟨v, ξ(0)⟩, values in (0, 2).
    Tanh { v: Vec<f64> },
    /// exp(−a·Σ_k |ξ(θ_k)|²), values in (0, 1].
    GaussianBump { a: f64, thetas: Vec<f64> },
    /// 2 + cos⟨v, ξ(θ)⟩, values in [1, 3].
    Cosine { v: Vec<f64>, theta: f64 },
    /// ⟨v, ξ(θ)⟩ + c; unbounded, used for variance decay.
    Linear { v: Vec<f64>, theta: f64, c: f64 },
    Constant { c: f64 },
}

impl TestFunctional {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Tanh { .. } => "tanh",
            Self::GaussianBump { .. } => "gaussian_bump",
            Self::Cosine { .. } => "cosine",
            Self::Linear { .. } => "linear",
            Self::Constant { .. } => "constant",
        }
    }

    /// Whether the functional is bounded and strictly positive.
    pub fn is_positive_bounded(&self) -> bool {
        match self {
            Self::Tanh { .. } | Self::Cosine { .. } => true,
            Self::GaussianBump { a, .. } => *a >= 0.0,
            Self::Constant { c } => *c > 0.0,
            Self::Linear { .. } => false,
        }
    }

    pub fn eval(&self, seg: SegmentView<'_>) -> f64 {
        let d = seg.d;
        let mut buf = vec![0.0; d];
        match self {
            Self::Tanh { v } => 1.0 + dot(v, seg.endpoint()).tanh(),
            Self::GaussianBump { a, thetas } => {
                let mut s = 0.0;
                for &th in thetas {
                    seg.eval(th, &mut buf);
                    s += buf.iter().map(|x| x * x).sum::<f64>();
                }
                (-a * s).exp()
            }
            Self::Cosine { v, theta } => {
                seg.eval(*theta, &mut buf);
                2.0 + dot(v, &buf).cos()
            }
            Self::Linear { v, theta, c } => {
                seg.eval(*theta, &mut buf);
                dot(v, &buf) + c
            }
            Self::Constant { c } => *c,
        }
    }

    /// The three bounded functionals used by default in Harnack checks.
    pub fn default_set(d: usize, r0: f64) -> Vec<TestFunctional> {
        vec![
            Self::Tanh { v: vec![1.0; d] },
            Self::GaussianBump {
                a: 0.5,
                thetas: vec![0.0, -0.5 * r0],
            },
            Self::Cosine {
                v: vec![1.5; d],
                theta: -r0,
            },
        ]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Grid, Segment};

    #[test]
    fn values_on_a_ramp() {
        let seg = Segment::from_fn(Grid::new(1.0, 0.25).unwrap(), 1, |t| vec![t]).unwrap();
        let v = seg.view();
        assert_eq!(TestFunctional::Tanh { v: vec![2.0] }.eval(v), 1.0);
        let bump = TestFunctional::GaussianBump { a: 1.0, thetas: vec![-0.5, -1.0] };
        assert!((bump.eval(v) - (-1.25f64).exp()).abs() < 1e-15);
        let lin = TestFunctional::Linear { v: vec![3.0], theta: -0.5, c: 1.0 };
        assert_eq!(lin.eval(v), -0.5);
        for f in TestFunctional::default_set(1, 1.0) {
            assert!(f.is_positive_bounded() && f.eval(v) > 0.0);
        }
    }
}
