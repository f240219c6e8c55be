use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::C64;

/// A real phase-space state: angles, actions and the normal modes `q`
/// (`q̄` is the complex conjugate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub q: Vec<C64>,
}

impl PhasePoint {
    /// Builds a point, reducing the angles to `[0, 2π)`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, q: Vec<C64>) -> Self {
        let mut p = PhasePoint { x, y, q };
        p.wrap_angles();
        p
    }

    pub fn zero(n: usize, sites: usize) -> Self {
        PhasePoint {
            x: vec![0.0; n],
            y: vec![0.0; n],
            q: vec![C64::new(0.0, 0.0); sites],
        }
    }

    pub fn wrap_angles(&mut self) {
        for x in &mut self.x {
            *x = x.rem_euclid(TAU);
            if *x >= TAU {
                *x = 0.0;
            }
        }
    }

    pub fn to_eval(&self) -> EvalPoint {
        EvalPoint {
            x: self.x.iter().map(|&v| C64::new(v, 0.0)).collect(),
            y: self.y.iter().map(|&v| C64::new(v, 0.0)).collect(),
            q: self.q.clone(),
            qbar: self.q.iter().map(|c| c.conj()).collect(),
        }
    }
}

/// A complexified point: `x`, `y` may be complex and `q̄` is independent of `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub q: Vec<C64>,
    pub qbar: Vec<C64>,
}

impl EvalPoint {
    /// Projects to a real point and returns the reality defect
    /// `max(|Im x|, |Im y|, |q̄ − conj q|)`.
    pub fn to_phase(&self) -> (PhasePoint, f64) {
        let mut defect = 0.0f64;
        for v in self.x.iter().chain(self.y.iter()) {
            defect = defect.max(v.im.abs());
        }
        for (a, b) in self.q.iter().zip(&self.qbar) {
            defect = defect.max((b - a.conj()).norm());
        }
        let p = PhasePoint::new(
            self.x.iter().map(|v| v.re).collect(),
            self.y.iter().map(|v| v.re).collect(),
            self.q.clone(),
        );
        (p, defect)
    }

    /// `self + h·v`.
    pub fn add_scaled(&self, h: f64, v: &Tangent) -> EvalPoint {
        let f = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x + y * h).collect();
        EvalPoint {
            x: f(&self.x, &v.dx),
            y: f(&self.y, &v.dy),
            q: f(&self.q, &v.dq),
            qbar: f(&self.qbar, &v.dqbar),
        }
    }

    /// Componentwise difference `self − other` as a tangent vector.
    pub fn diff(&self, other: &EvalPoint) -> Tangent {
        let f = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Tangent {
            dx: f(&self.x, &other.x),
            dy: f(&self.y, &other.y),
            dq: f(&self.q, &other.q),
            dqbar: f(&self.qbar, &other.qbar),
        }
    }

    pub fn midpoint(&self, other: &EvalPoint) -> EvalPoint {
        let f = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x + y) * 0.5).collect();
        EvalPoint {
            x: f(&self.x, &other.x),
            y: f(&self.y, &other.y),
            q: f(&self.q, &other.q),
            qbar: f(&self.qbar, &other.qbar),
        }
    }

    /// Largest componentwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &EvalPoint) -> f64 {
        self.diff(other).max_abs()
    }
}

/// Tangent vector `(dx, dy, dq, dq̄)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    pub dx: Vec<C64>,
    pub dy: Vec<C64>,
    pub dq: Vec<C64>,
    pub dqbar: Vec<C64>,
}

impl Tangent {
    pub fn zero(n: usize, sites: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        Tangent {
            dx: vec![z; n],
            dy: vec![z; n],
            dq: vec![z; sites],
            dqbar: vec![z; sites],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.dx
            .iter()
            .chain(&self.dy)
            .chain(&self.dq)
            .chain(&self.dqbar)
            .fold(0.0, |m, c| m.max(c.norm()))
    }

    /// `self + h·other`.
    pub fn add_scaled(&self, h: f64, other: &Tangent) -> Tangent {
        let f = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x + y * h).collect();
        Tangent {
            dx: f(&self.dx, &other.dx),
            dy: f(&self.dy, &other.dy),
            dq: f(&self.dq, &other.dq),
            dqbar: f(&self.dqbar, &other.dqbar),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_are_wrapped() {
        let p = PhasePoint::new(vec![-0.5, 7.0, TAU], vec![], vec![]);
        assert!((p.x[0] - (TAU - 0.5)).abs() < 1e-15);
        assert!((p.x[1] - (7.0 - TAU)).abs() < 1e-15);
        assert_eq!(p.x[2], 0.0);
    }

    #[test]
    fn real_point_round_trip_has_no_defect() {
        let p = PhasePoint::new(vec![1.0], vec![0.2], vec![C64::new(0.1, -0.3)]);
        let (back, defect) = p.to_eval().to_phase();
        assert_eq!(defect, 0.0);
        assert_eq!(back, p);
    }
}
