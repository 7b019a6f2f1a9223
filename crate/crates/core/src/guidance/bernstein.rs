//! Bernstein-basis polynomial curves over a finite domain [0, T],
//! evaluated with the numerically stable de Casteljau recursion.

use nalgebra::SVector;

use super::GuidanceError;

/// Curve of order N with N+1 control points in D dimensions, defined on
/// the domain [0, domain_end]. The same type serves paths (virtual-time
/// domain) and trajectories (wall-clock domain).
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinPoly<const D: usize> {
    points: Vec<SVector<f64, D>>,
    domain_end: f64,
}

pub const DOMAIN_SLACK: f64 = 1e-9;

impl<const D: usize> BernsteinPoly<D> {
    pub fn new(points: Vec<SVector<f64, D>>, domain_end: f64) -> Result<Self, GuidanceError> {
        if points.len() < 2 {
            return Err(GuidanceError::Schema(format!(
                "curve needs at least 2 control points (order >= 1), got {}",
                points.len()
            )));
        }
        if !(domain_end > 0.0) || !domain_end.is_finite() {
            return Err(GuidanceError::Schema(format!(
                "domain end must be positive and finite, got {domain_end}"
            )));
        }
        if points
            .iter()
            .any(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(GuidanceError::Schema(
                "control points must be finite".into(),
            ));
        }
        Ok(Self { points, domain_end })
    }

    pub fn order(&self) -> usize {
        self.points.len() - 1
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn control_points(&self) -> &[SVector<f64, D>] {
        &self.points
    }

    fn check_domain(&self, tau: f64) -> Result<f64, GuidanceError> {
        if tau < -DOMAIN_SLACK || tau > self.domain_end + DOMAIN_SLACK {
            return Err(GuidanceError::Domain {
                tau,
                domain_end: self.domain_end,
            });
        }
        Ok(tau.clamp(0.0, self.domain_end))
    }

    /// de Casteljau evaluation at tau in [0, domain_end].
    pub fn eval(&self, tau: f64) -> Result<SVector<f64, D>, GuidanceError> {
        let tau = self.check_domain(tau)?;
        let t = tau / self.domain_end;
        let mut work = self.points.clone();
        let n = work.len();
        for level in 1..n {
            for i in 0..(n - level) {
                work[i] = work[i] * (1.0 - t) + work[i + 1] * t;
            }
        }
        Ok(work[0])
    }

    /// Hodograph: the derivative curve of order N-1 with control points
    /// `N (p_{j+1} - p_j) / T` on the same domain.
    pub fn derivative(&self) -> Self {
        let n = self.order() as f64;
        let pts: Vec<SVector<f64, D>> = if self.points.len() == 2 {
            // order-1 derivative is a constant curve; keep two equal points
            let d = (self.points[1] - self.points[0]) * (n / self.domain_end);
            vec![d, d]
        } else {
            self.points
                .windows(2)
                .map(|w| (w[1] - w[0]) * (n / self.domain_end))
                .collect()
        };
        Self {
            points: pts,
            domain_end: self.domain_end,
        }
    }

    /// Lower bound on the distance from the origin to the curve over a
    /// parameter subinterval, from the convex-hull property applied to
    /// subdivided control polygons. Used to certify curve regularity.
    fn min_norm_lower_bound(points: &[SVector<f64, D>], depth: usize, eps: f64) -> f64 {
        let min_pt = points
            .iter()
            .map(|p| p.norm())
            .fold(f64::INFINITY, f64::min);
        // distance from origin to the hull is at least max(0, closest
        // point of the hull); a cheap valid bound uses support along the
        // mean direction
        let mean: SVector<f64, D> = points.iter().sum::<SVector<f64, D>>() / points.len() as f64;
        let mean_norm = mean.norm();
        let bound = if mean_norm > 0.0 {
            let dir = mean / mean_norm;
            points
                .iter()
                .map(|p| p.dot(&dir))
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        if bound > eps || depth == 0 {
            return bound.max(0.0).min(min_pt);
        }
        // subdivide at t = 1/2 and recurse
        let n = points.len();
        let mut work = points.to_vec();
        let mut left = Vec::with_capacity(n);
        let mut right = vec![SVector::<f64, D>::zeros(); n];
        left.push(work[0]);
        right[n - 1] = work[n - 1];
        for level in 1..n {
            for i in 0..(n - level) {
                work[i] = (work[i] + work[i + 1]) * 0.5;
            }
            left.push(work[0]);
            right[n - 1 - level] = work[n - 1 - level];
        }
        let a = Self::min_norm_lower_bound(&left, depth - 1, eps);
        let b = Self::min_norm_lower_bound(&right, depth - 1, eps);
        a.min(b)
    }

    /// Verifies `||p'(tau)|| > eps` over the whole domain by a subdivision
    /// bound on the hodograph backed by dense sampling.
    pub fn verify_regular(&self, eps: f64) -> Result<(), GuidanceError> {
        let hodo = self.derivative();
        let bound = Self::min_norm_lower_bound(hodo.control_points(), 12, eps);
        if bound > eps {
            return Ok(());
        }
        // inconclusive bound: fall back to dense sampling
        let samples = 2000;
        let mut min_speed = f64::INFINITY;
        for i in 0..=samples {
            let tau = self.domain_end * i as f64 / samples as f64;
            min_speed = min_speed.min(hodo.eval(tau).unwrap().norm());
        }
        if min_speed > 10.0 * eps {
            Ok(())
        } else {
            Err(GuidanceError::IrregularCurve { min_speed })
        }
    }
}

pub type Curve2 = BernsteinPoly<2>;
pub type Curve1 = BernsteinPoly<1>;
