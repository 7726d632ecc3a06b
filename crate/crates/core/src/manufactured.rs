//! Benchmark problems: a manufactured smooth solution and four interface
//! configurations, each with default parameters and a recommended setup.

use alloc::boxed::Box;
use alloc::sync::Arc;

use crate::diagnostics::ExactSolution;
use crate::ieq::PhysParams;
use crate::math::{cos, exp, sin, sqrt, tanh};
use crate::mesh::Rect;
use crate::stepper::Forcing;

const PI: f64 = core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    /// Smooth manufactured solution on `[0, 4 pi]^2` with analytic forcing.
    Manufactured,
    /// Two touching bubbles on the unit square.
    TwoBubbles,
    /// Four circles in a swirling flow on `[-1, 1]^2`.
    FourCircles,
    /// Three overlapping discs in a strong swirl on `[-2, 2]^2`.
    Annulus,
    /// Sharp one-dimensional interface on a thin strip.
    Interface,
}

/// Parameters and recommended discretization of an example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub example: Example,
    pub domain: Rect,
    pub params: PhysParams,
    pub tau: f64,
    pub t_end: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Example {
    pub const ALL: [Example; 5] =
        [Example::Manufactured, Example::TwoBubbles, Example::FourCircles, Example::Annulus, Example::Interface];

    pub fn name(self) -> &'static str {
        match self {
            Example::Manufactured => "ex41_manufactured",
            Example::TwoBubbles => "ex42_two_bubbles",
            Example::FourCircles => "ex43_four_circles",
            Example::Annulus => "ex44_annulus",
            Example::Interface => "ex45_interface",
        }
    }

    /// Accepts the full name or its short `exNN` prefix.
    pub fn parse(s: &str) -> Option<Example> {
        let s = s.trim();
        Example::ALL.into_iter().find(|e| e.name() == s || e.name().get(..4) == Some(s))
    }

    pub fn preset(self) -> Preset {
        let p = |gamma, mu, lambda, eps, shift| PhysParams { gamma, mu, lambda, eps, shift };
        match self {
            Example::Manufactured => Preset {
                example: self,
                domain: Rect::new(0.0, 4.0 * PI, 0.0, 4.0 * PI),
                params: p(1.0, 1.0, 1.0, 1.0, 50.0),
                tau: 1e-6,
                t_end: 1e-5,
                nx: 16,
                ny: 16,
            },
            Example::TwoBubbles => Preset {
                example: self,
                domain: Rect::new(0.0, 1.0, 0.0, 1.0),
                params: p(0.01, 0.01, 0.01 * 0.01, 0.01, 100.0),
                tau: 5e-4,
                t_end: 3.2,
                nx: 128,
                ny: 128,
            },
            Example::FourCircles => Preset {
                example: self,
                domain: Rect::new(-1.0, 1.0, -1.0, 1.0),
                params: p(1.0, 1.0, 0.25, 0.25, 1.0),
                tau: 1e-6,
                t_end: 0.1,
                nx: 80,
                ny: 80,
            },
            Example::Annulus => Preset {
                example: self,
                domain: Rect::new(-2.0, 2.0, -2.0, 2.0),
                params: p(1.0, 1.0, 1.0 / 16.0, 1.0 / 16.0, 1.0),
                tau: 1e-5,
                t_end: 0.1,
                nx: 80,
                ny: 80,
            },
            Example::Interface => Preset {
                example: self,
                domain: Rect::new(-0.5, 0.5, -0.2, 0.2),
                params: p(0.1, 1.0, 0.01, 1.0 / (500.0 * sqrt(10.0)), 100.0),
                tau: 1e-7,
                t_end: 1e-5,
                nx: 10,
                ny: 4,
            },
        }
    }

    /// Initial phase field for the given parameters.
    pub fn initial_phase(self, params: &PhysParams) -> Box<dyn Fn([f64; 2]) -> f64 + Send + Sync> {
        let eps = params.eps;
        match self {
            Example::Manufactured => Box::new(move |x| Manufactured::phi_at(x, 0.0)),
            Example::TwoBubbles => Box::new(move |x| two_bubbles(x, eps)),
            Example::FourCircles => Box::new(move |x| four_circles(x, eps)),
            Example::Annulus => Box::new(move |x| annulus(x, eps)),
            Example::Interface => Box::new(interface),
        }
    }

    /// Initial velocity.
    pub fn initial_velocity(self) -> Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync> {
        match self {
            Example::Manufactured => Box::new(|x| Manufactured::u_at(x, 0.0)),
            Example::FourCircles => Box::new(swirl),
            Example::Annulus => Box::new(|x| {
                let v = swirl(x);
                [ANNULUS_AMPLITUDE * v[0], ANNULUS_AMPLITUDE * v[1]]
            }),
            Example::TwoBubbles | Example::Interface => Box::new(|_| [0.0, 0.0]),
        }
    }

    pub fn forcing(self, params: &PhysParams) -> Option<Arc<dyn Forcing>> {
        match self {
            Example::Manufactured => Some(Arc::new(Manufactured { params: *params })),
            _ => None,
        }
    }

    pub fn exact(self, params: &PhysParams) -> Option<Arc<dyn ExactSolution + Send + Sync>> {
        match self {
            Example::Manufactured => Some(Arc::new(Manufactured { params: *params })),
            _ => None,
        }
    }
}

/// Bubble radius of the two-bubble example.
pub const BUBBLE_RADIUS: f64 = 0.15;

/// Velocity amplitude of the three-disc example.
pub const ANNULUS_AMPLITUDE: f64 = 100.0;

/// Bubble centres `(0.5 -+ r/sqrt2, 0.5 +- r/sqrt2)`.
pub fn bubble_centres() -> [[f64; 2]; 2] {
    let s = BUBBLE_RADIUS / sqrt(2.0);
    [[0.5 - s, 0.5 + s], [0.5 + s, 0.5 - s]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))
}

pub fn two_bubbles(x: [f64; 2], eps: f64) -> f64 {
    let r = BUBBLE_RADIUS;
    let [a, b] = bubble_centres();
    1.0 - tanh((dist(x, a) - r) / (2.0 * eps)) - tanh((dist(x, b) - r) / (2.0 * eps))
}

pub fn four_circles(x: [f64; 2], eps: f64) -> f64 {
    let e2 = eps * eps;
    let f = |cx: f64, cy: f64| tanh(((x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy) - 0.04) / e2);
    f(0.3, 0.0) * f(-0.3, 0.0) * f(0.0, 0.3) * f(0.0, -0.3)
}

/// `-tanh(d / (sqrt2 eps))` with `d = max(-d1, d2, d3)`, `d_j = |x - m_j| - r_j`.
pub fn annulus(x: [f64; 2], eps: f64) -> f64 {
    let r13 = 2.0 - 1.5 * eps;
    let d1 = dist(x, [0.0, 2.0]) - r13;
    let d2 = dist(x, [0.0, 0.0]) - 1.0;
    let d3 = dist(x, [0.0, -2.0]) - r13;
    let d = (-d1).max(d2).max(d3);
    -tanh(d / (sqrt(2.0) * eps))
}

/// Half-width of the transition layer of the interface example.
pub fn interface_half_width() -> f64 {
    sqrt(2.0) / 20.0
}

/// `1` left of the layer, `-1` right of it, `-sin(pi x / (2 x1))` inside.
pub fn interface(x: [f64; 2]) -> f64 {
    let x1 = interface_half_width();
    if x[0] < -x1 {
        1.0
    } else if x[0] > x1 {
        -1.0
    } else {
        -sin(PI * x[0] / (2.0 * x1))
    }
}

/// `(sin^2(pi x) sin(2 pi y), sin(2 pi x) sin^2(pi y))`.
pub fn swirl(x: [f64; 2]) -> [f64; 2] {
    let (sx, sy) = (sin(PI * x[0]), sin(PI * x[1]));
    [sx * sx * sin(2.0 * PI * x[1]), sin(2.0 * PI * x[0]) * sy * sy]
}

/// Closed-form solution and forcing of the smooth benchmark (exact pressure zero).
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub params: PhysParams,
}

impl Manufactured {
    fn phi_at(x: [f64; 2], t: f64) -> f64 {
        sin(t) * cos(x[0] / 2.0) * cos(x[1] / 2.0)
    }

    fn u_at(x: [f64; 2], t: f64) -> [f64; 2] {
        let e = exp(-49.0 * t / 64.0);
        let (sx4, sy4) = (sin(x[0] / 4.0), sin(x[1] / 4.0));
        [e * sx4 * sx4 * sin(x[1] / 2.0), -e * sin(x[0] / 2.0) * sy4 * sy4]
    }

    fn grad_phi_at(x: [f64; 2], t: f64) -> [f64; 2] {
        let s = sin(t);
        let (a, b) = (x[0] / 2.0, x[1] / 2.0);
        [-0.5 * s * sin(a) * cos(b), -0.5 * s * cos(a) * sin(b)]
    }

    fn grad_u_at(x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let e = exp(-49.0 * t / 64.0);
        let (a, b) = (x[0] / 2.0, x[1] / 2.0);
        let (sx4, sy4) = (sin(x[0] / 4.0), sin(x[1] / 4.0));
        [
            [0.25 * e * sin(a) * sin(b), 0.5 * e * sx4 * sx4 * cos(b)],
            [-0.5 * e * cos(a) * sy4 * sy4, -0.25 * e * sin(a) * sin(b)],
        ]
    }

    /// `grad w` with `w = lambda (f(phi) - lap phi)`.
    fn grad_w(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let p = &self.params;
        let phi = Self::phi_at(x, t);
        let fp = (3.0 * phi * phi - 1.0) / (p.eps * p.eps);
        let g = Self::grad_phi_at(x, t);
        let k = p.lambda * (fp + 0.5);
        [k * g[0], k * g[1]]
    }
}

impl ExactSolution for Manufactured {
    fn phi(&self, x: [f64; 2], t: f64) -> f64 {
        Self::phi_at(x, t)
    }

    fn grad_phi(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        Self::grad_phi_at(x, t)
    }

    fn u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        Self::u_at(x, t)
    }

    fn grad_u(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        Self::grad_u_at(x, t)
    }
}

impl Forcing for Manufactured {
    fn phase(&self, x: [f64; 2], t: f64) -> f64 {
        let p = &self.params;
        let (a, b) = (x[0] / 2.0, x[1] / 2.0);
        let phi = Self::phi_at(x, t);
        let phi_t = cos(t) * cos(a) * cos(b);
        let g = Self::grad_phi_at(x, t);
        let u = Self::u_at(x, t);
        let e2 = p.eps * p.eps;
        let fp = (3.0 * phi * phi - 1.0) / e2;
        let fpp = 6.0 * phi / e2;
        // lap phi = -phi/2 for this mode
        let lap_w = p.lambda * (fpp * (g[0] * g[0] + g[1] * g[1]) - 0.5 * (fp + 0.5) * phi);
        phi_t + u[0] * g[0] + u[1] * g[1] - p.gamma * lap_w
    }

    fn momentum(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let p = &self.params;
        let e = exp(-49.0 * t / 64.0);
        let (a, b) = (x[0] / 2.0, x[1] / 2.0);
        let (sx4, sy4) = (sin(x[0] / 4.0), sin(x[1] / 4.0));
        let u = Self::u_at(x, t);
        let gu = Self::grad_u_at(x, t);
        let lap = [
            e * sin(b) * (cos(a) / 8.0 - sx4 * sx4 / 4.0),
            -e * sin(a) * (cos(b) / 8.0 - sy4 * sy4 / 4.0),
        ];
        let phi = Self::phi_at(x, t);
        let gw = self.grad_w(x, t);
        let mut h = [0.0; 2];
        for c in 0..2 {
            let adv = u[0] * gu[c][0] + u[1] * gu[c][1];
            h[c] = -49.0 / 64.0 * u[c] - p.mu * lap[c] + adv + phi * gw[c];
        }
        h
    }
}
