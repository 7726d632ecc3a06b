//! Symmetric quadrature rules on the reference triangle `(0,0), (1,0), (0,1)`.
//!
//! Weights sum to the reference area `1/2`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Polynomial degree integrated exactly.
    pub degree: usize,
    /// Reference coordinates `(xi, eta)`.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Cheapest available rule exact for polynomials of total degree `degree`.
    pub fn new(degree: usize) -> Result<QuadRule> {
        let mut b = Builder::default();
        let exact = match degree {
            0 | 1 => {
                b.centroid(1.0);
                1
            }
            2 => {
                b.orbit3(1.0 / 6.0, 1.0 / 3.0);
                2
            }
            3 | 4 => {
                b.orbit3(0.445_948_490_915_965, 0.223_381_589_678_011);
                b.orbit3(0.091_576_213_509_771, 0.109_951_743_655_322);
                4
            }
            5 => {
                let s = sqrt(15.0);
                b.centroid(9.0 / 40.0);
                b.orbit3((6.0 - s) / 21.0, (155.0 - s) / 1200.0);
                b.orbit3((6.0 + s) / 21.0, (155.0 + s) / 1200.0);
                5
            }
            6 => {
                b.orbit3(0.249_286_745_170_910, 0.116_786_275_726_379);
                b.orbit3(0.063_089_014_491_502, 0.050_844_906_370_207);
                b.orbit6(0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374);
                6
            }
            d => return Err(Error::UnsupportedQuadrature(d)),
        };
        Ok(QuadRule { degree: exact, points: b.points, weights: b.weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Accumulates symmetric orbits given in barycentric form, weights normalised to area 1.
#[derive(Default)]
struct Builder {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl Builder {
    fn push(&mut self, l1: f64, l2: f64, w: f64) {
        self.points.push([l1, l2]);
        self.weights.push(0.5 * w);
    }

    fn centroid(&mut self, w: f64) {
        self.push(1.0 / 3.0, 1.0 / 3.0, w);
    }

    /// Points `(a, a, 1-2a)` and permutations.
    fn orbit3(&mut self, a: f64, w: f64) {
        let c = 1.0 - 2.0 * a;
        self.push(a, a, w);
        self.push(c, a, w);
        self.push(a, c, w);
    }

    /// Points `(a, b, 1-a-b)` and all six permutations.
    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for (x, y) in [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)] {
            self.push(x, y, w);
        }
    }
}
