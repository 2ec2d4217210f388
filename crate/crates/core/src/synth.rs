//! Seeded synthetic datasets.
//!
//! Every generator draws from a ChaCha8 stream seeded with the given
//! `u64`, so output is reproducible across platforms.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{PssaError, Result};
use crate::linalg::Matrix;
use crate::polysphere::{circle_frame, point_on_circle, PolyspherePoint};
use crate::torus::{dual_lattice_basis, IntMatrix, TorusPoint};
use crate::tree::{Dataset, ManifoldDescriptor};

pub const EXAMPLE_IDS: [&str; 7] = [
    "sphere-1",
    "sphere-2",
    "sphere-3",
    "torus-25",
    "torus-123",
    "polysphere-coupled",
    "polysphere-torus",
];

/// Resonance rows of the nested three-torus family.
pub const TORUS_123_RESONANCE: [[i64; 3]; 3] = [[-1, -1, 1], [-2, 1, 0], [0, 1, -1]];

/// Target mean errors of the two constrained directions of `torus-123`.
pub const TORUS_123_TARGETS: [f64; 2] = [0.049, 0.169];

/// Noise level per angle of `torus-25`.
pub const TORUS_25_SIGMA: f64 = 0.1 / (2.0 * PI);

/// A generated dataset with a description of its parameters.
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub id: String,
    pub seed: u64,
    pub manifold: ManifoldDescriptor,
    pub data: Dataset,
    /// One line per generator parameter.
    pub header: Vec<String>,
}

pub fn generate(id: &str, seed: u64) -> Result<SynthDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (data, header) = match id {
        "sphere-1" => sphere_gaussian(&mut rng, [0.0; 4], [1.0, 1.0, 0.1, 0.05], 20),
        "sphere-2" => sphere_gaussian(&mut rng, [0.0; 4], [1.0, 0.3, 0.1, 0.05], 20),
        "sphere-3" => sphere_gaussian(&mut rng, [1.0, 0.0, 0.0, 0.0], [0.0, 0.4, 0.1, 0.05], 20),
        "torus-25" => torus_25(&mut rng, 50),
        "torus-123" => torus_123(&mut rng, 50)?,
        "polysphere-coupled" => polysphere_coupled(&mut rng, 30)?,
        "polysphere-torus" => polysphere_torus(&mut rng, 40)?,
        other => return Err(PssaError::UnknownExample(other.into())),
    };
    let manifold = data.manifold()?;
    Ok(SynthDataset {
        id: id.into(),
        seed,
        manifold,
        data,
        header,
    })
}

/// Radial projection of `N(mean, diag(sd)²)` samples onto S³.
fn sphere_gaussian(rng: &mut ChaCha8Rng, mean: [f64; 4], sd: [f64; 4], d: usize) -> (Dataset, Vec<String>) {
    let mut x = Matrix::zeros(4, d);
    let mut j = 0;
    while j < d {
        let v: Vec<f64> = (0..4)
            .map(|i| mean[i] + sd[i] * normal(rng))
            .collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        for (i, a) in v.iter().enumerate() {
            x[(i, j)] = a / norm;
        }
        j += 1;
    }
    let header = vec![
        format!("points: {d}"),
        format!("gaussian mean: {mean:?}"),
        format!("gaussian standard deviations: {sd:?}"),
        "each sample divided by its norm".into(),
    ];
    (Dataset::Sphere(x), header)
}

/// Noisy points along the closed geodesic `2x₁ + 5x₂ = c`.
fn torus_25(rng: &mut ChaCha8Rng, d: usize) -> (Dataset, Vec<String>) {
    let noise = Normal::new(0.0, TORUS_25_SIGMA).expect("valid sigma");
    let c: f64 = rng.random();
    let points = (0..d)
        .map(|_| {
            let s: f64 = rng.random();
            let x1 = c * 2.0 / 29.0 + 5.0 * s + noise.sample(&mut *rng);
            let x2 = c * 5.0 / 29.0 - 2.0 * s + noise.sample(&mut *rng);
            TorusPoint::new(vec![x1, x2]).expect("finite")
        })
        .collect();
    let header = vec![
        format!("points: {d}"),
        format!("geodesic: 2*x1 + 5*x2 = {c}"),
        format!("gaussian noise per angle, sd {TORUS_25_SIGMA}"),
        "angles in turns, wrapped to [0,1)".into(),
    ];
    (Dataset::Torus(points), header)
}

/// Points along a geodesic of direction `[1,2,3]` on T³, with noise along
/// the dual basis of the first two resonance rows.
fn torus_123(rng: &mut ChaCha8Rng, d: usize) -> Result<(Dataset, Vec<String>)> {
    let a = IntMatrix::from_rows(&TORUS_123_RESONANCE[..2].iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    let b = dual_lattice_basis(&a)?.columns_f64();
    let sd = TORUS_123_TARGETS.map(|t| 2.0 * t / PI);
    let offset: [f64; 2] = [rng.random(), rng.random()];
    let points = (0..d)
        .map(|_| {
            let t: f64 = rng.random();
            let e: Vec<f64> = (0..2)
                .map(|j| offset[j] + sd[j] * normal(rng))
                .collect();
            let x: Vec<f64> = (0..3)
                .map(|i| t * (i as f64 + 1.0) + e[0] * b[0][i] + e[1] * b[1][i])
                .collect();
            TorusPoint::new(x).expect("finite")
        })
        .collect();
    let header = vec![
        format!("points: {d}"),
        "geodesic direction: [1, 2, 3]".into(),
        format!("resonance rows: {:?}", &TORUS_123_RESONANCE[..2]),
        format!("offsets: {offset:?}"),
        format!("gaussian noise along dual basis columns, sd {sd:?}"),
        "angles in turns, wrapped to [0,1)".into(),
    ];
    Ok((Dataset::Torus(points), header))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian3(rng: &mut ChaCha8Rng, sd: f64) -> Vector3<f64> {
    Vector3::new(normal(rng), normal(rng), normal(rng)) * sd
}

/// Rotation used by `polysphere-coupled`.
pub fn coupled_rotation() -> Rotation3<f64> {
    Rotation3::from_euler_angles(0.4, -0.7, 1.1)
}

/// Pairs `(x, Rx)` with `x` near the equator and small noise on `Rx`.
fn polysphere_coupled(rng: &mut ChaCha8Rng, d: usize) -> Result<(Dataset, Vec<String>)> {
    let r = coupled_rotation();
    let (spread, noise) = (0.3, 0.05);
    let points = (0..d)
        .map(|_| {
            let phi = 2.0 * PI * rng.random::<f64>();
            let lat: f64 = spread * normal(rng);
            let x = Vector3::new(lat.cos() * phi.cos(), lat.cos() * phi.sin(), lat.sin());
            let y = (r * x + gaussian3(rng, noise)).normalize();
            PolyspherePoint::new(vec![x, y])
        })
        .collect::<Result<Vec<_>>>()?;
    let header = vec![
        format!("points: {d}"),
        "first factor: uniform longitude, gaussian latitude".into(),
        format!("latitude sd: {spread}"),
        format!("second factor: R x plus gaussian noise sd {noise}, renormalized"),
        format!("R rows: {:?}", crate::polysphere::matrix3_rows(r.matrix())),
    ];
    Ok((Dataset::Polysphere(points), header))
}

/// Two great circles whose angles are locked, `θ₂ = θ₁ + φ`.
fn polysphere_torus(rng: &mut ChaCha8Rng, d: usize) -> Result<(Dataset, Vec<String>)> {
    let axes = [Vector3::new(0.0, 0.0, 1.0), Vector3::new(1.0, 1.0, 1.0).normalize()];
    let phase = 0.25;
    let (angle_sd, normal_sd) = (0.02, 0.03);
    let points = (0..d)
        .map(|_| {
            let t: f64 = rng.random();
            let angles = [t, t + phase + angle_sd * normal(rng)];
            let factors = axes
                .iter()
                .zip(angles)
                .map(|(axis, a)| {
                    let h: f64 = normal_sd * normal(rng);
                    (point_on_circle(axis, a) * h.cos() + axis * h.sin()).normalize()
                })
                .collect();
            PolyspherePoint::new(factors)
        })
        .collect::<Result<Vec<_>>>()?;
    let frames: Vec<_> = axes.iter().map(circle_frame).collect();
    let header = vec![
        format!("points: {d}"),
        format!("circle axes: {:?}", axes.iter().map(|a| [a.x, a.y, a.z]).collect::<Vec<_>>()),
        format!("circle frame of factor 2: {:?}", [frames[1].0.as_slice(), frames[1].1.as_slice()]),
        format!("angles in turns: theta2 = theta1 + {phase} + gaussian sd {angle_sd}"),
        format!("gaussian tilt off each circle, sd {normal_sd} rad"),
    ];
    Ok((Dataset::Polysphere(points), header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let s = generate("sphere-1", 1).unwrap();
        assert_eq!(s.manifold, ManifoldDescriptor::Sphere { n: 3 });
        assert_eq!(s.data.len(), 20);
        let t = generate("torus-25", 1).unwrap();
        assert_eq!(t.manifold, ManifoldDescriptor::Torus { n: 2 });
        assert_eq!(t.data.len(), 50);
        let Dataset::Torus(p) = &t.data else { panic!() };
        assert!(p.iter().flat_map(|x| x.coords()).all(|&v| (0.0..1.0).contains(&v)));
        assert!(matches!(generate("nope", 1), Err(PssaError::UnknownExample(_))));
    }

    #[test]
    fn torus_123_lies_near_geodesic() {
        let Dataset::Torus(p) = generate("torus-123", 3).unwrap().data else { panic!() };
        // the third relation is not imposed, so only the first two are small
        for x in &p {
            let v = x.coords();
            let r = crate::torus::wrap_half(-v[0] - v[1] + v[2] - (-p[0].coords()[0] - p[0].coords()[1] + p[0].coords()[2]));
            assert!(r.abs() < 0.25);
        }
    }
}
