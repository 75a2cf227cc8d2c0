//! Deterministic sampling helpers shared by bound estimation and the
//! verification checks.
//!
//! Two kinds of streams are used: seeded pseudorandom draws (ChaCha8) for the
//! stochastic checks, and an unseeded low-discrepancy lattice for bound
//! estimation where reproducibility without a seed parameter is wanted.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// Axis-aligned box, one interval per coordinate.
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds must share length");
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l <= u),
            "box lower bound exceeds upper bound"
        );
        Self {
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    /// Map a unit-cube point into the box.
    fn lerp(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            self.lower[i] + u[i] * (self.upper[i] - self.lower[i])
        })
    }

    /// All 2^d corner points (d capped by the caller).
    pub fn corners(&self) -> Vec<DVector<f64>> {
        let d = self.dim();
        assert!(d <= 20, "corner enumeration limited to 20 dimensions");
        (0..(1usize << d))
            .map(|mask| {
                DVector::from_fn(d, |i, _| {
                    if mask & (1 << i) != 0 {
                        self.upper[i]
                    } else {
                        self.lower[i]
                    }
                })
            })
            .collect()
    }
}

/// Uniform time grid from `t0` to `t0 + horizon` (inclusive) at `step`.
pub fn uniform_grid(t0: f64, horizon: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && horizon >= 0.0);
    let n = (horizon / step).round() as usize;
    (0..=n).map(|i| t0 + i as f64 * step).collect()
}

/// Uniformly distributed unit vector.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform draw from the closed ball of given radius.
pub fn in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> DVector<f64> {
    if dim == 0 {
        return DVector::zeros(0);
    }
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    unit_vector(rng, dim) * r
}

/// Uniform draw from a box.
pub fn in_box<R: Rng + ?Sized>(rng: &mut R, b: &SampleBox) -> DVector<f64> {
    let u: Vec<f64> = (0..b.dim()).map(|_| rng.random::<f64>()).collect();
    b.lerp(&u)
}

const LATTICE_PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Kronecker lattice point `i` in the unit cube (golden-ratio style
/// low-discrepancy sequence with irrational increments `√p mod 1`).
fn lattice_point(i: usize, dim: usize) -> Vec<f64> {
    assert!(dim <= LATTICE_PRIMES.len(), "lattice limited to 16 dims");
    (0..dim)
        .map(|j| {
            let alpha = (LATTICE_PRIMES[j] as f64).sqrt().fract();
            ((i as f64 + 1.0) * alpha).fract()
        })
        .collect()
}

/// Deterministic low-discrepancy points in a box, corners included.
pub fn lattice_in_box(b: &SampleBox, count: usize) -> Vec<DVector<f64>> {
    let mut pts = if b.dim() <= 12 {
        b.corners()
    } else {
        Vec::new()
    };
    pts.extend((0..count).map(|i| b.lerp(&lattice_point(i, b.dim()))));
    pts
}

fn clamp_to_box(mut p: DVector<f64>, restrict: Option<&SampleBox>) -> DVector<f64> {
    if let Some(b) = restrict {
        for i in 0..p.len() {
            p[i] = p[i].clamp(b.lower[i], b.upper[i]);
        }
    }
    p
}

/// Deterministic points covering the closed ball of given radius,
/// optionally intersected with a box.
///
/// The stream mixes interior lattice points with their projections onto the
/// bounding sphere and includes every antipode; points leaving the box are
/// clamped onto its faces (clamping only shrinks coordinates, so clamped
/// points stay in the ball). Norm and face extremes of the sampled function
/// are therefore hit sharply.
pub fn lattice_in_ball(
    dim: usize,
    radius: f64,
    restrict: Option<&SampleBox>,
    count: usize,
) -> Vec<DVector<f64>> {
    if dim == 0 {
        return vec![DVector::zeros(0)];
    }
    lattice_in_ball_product(dim, radius, restrict, 0, 0.0, count)
        .into_iter()
        .map(|(a, _)| a)
        .collect()
}

/// Deterministic joint samples from `ball_a(radius_a) × ball_b(radius_b)`,
/// the first factor optionally box-restricted (points leaving the box are
/// clamped onto its faces).
///
/// Besides interior points the stream contains sphere projections of both
/// factors in all sign combinations, so maxima attained at joint norm or
/// box-face extremes are sampled sharply.
pub fn lattice_in_ball_product(
    dim_a: usize,
    radius_a: f64,
    restrict_a: Option<&SampleBox>,
    dim_b: usize,
    radius_b: f64,
    count: usize,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    if dim_a == 0 {
        return lattice_in_ball(dim_b, radius_b, None, count)
            .into_iter()
            .map(|b| (DVector::zeros(0), b))
            .collect();
    }
    let cube_a = SampleBox::new(vec![-radius_a; dim_a], vec![radius_a; dim_a]);
    let cube_b = SampleBox::new(vec![-radius_b; dim_b.max(1)], vec![radius_b; dim_b.max(1)]);

    let mut pts: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(count);
    let push = |a: DVector<f64>, b: DVector<f64>, pts: &mut Vec<_>| {
        pts.push((clamp_to_box(a, restrict_a), b));
    };

    let mut i = 0usize;
    let max_tries = count.saturating_mul(16).max(4096);
    while pts.len() < count && i < max_tries {
        let u = lattice_point(i, dim_a + dim_b);
        i += 1;
        let a = cube_a.lerp(&u[..dim_a]);
        let b = if dim_b == 0 {
            DVector::zeros(0)
        } else {
            cube_b.lerp(&u[dim_a..])
        };
        if a.norm() > radius_a || b.norm() > radius_b {
            continue;
        }
        if i.is_multiple_of(4) && a.norm() > 1e-12 {
            let a_s = &a * (radius_a / a.norm());
            let b_s = if b.norm() > 1e-12 {
                &b * (radius_b / b.norm())
            } else {
                b.clone()
            };
            push(a_s.clone(), b_s.clone(), &mut pts);
            push(-&a_s, -&b_s, &mut pts);
            push(a_s.clone(), -&b_s, &mut pts);
            push(-&a_s, b_s, &mut pts);
        }
        push(-&a, -&b, &mut pts);
        push(a, b, &mut pts);
    }
    pts
}
