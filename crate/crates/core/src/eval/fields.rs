use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inr::ScalarVolume;
use crate::region::lattice_coord;

/// Analytic test fields on `[-1, 1]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticField {
    /// Sum of 8 Gaussian bumps with positions, widths and amplitudes drawn
    /// from `seed`.
    Gaussians { seed: u64 },
    /// `sin(4x) cos(4y) + z`.
    Wave,
    /// Signed distance to the sphere of radius 0.5 at the origin.
    Sphere,
    /// Signed distance to a torus in the xy-plane (radii 0.5 and 0.2).
    Torus,
}

pub const SPHERE_RADIUS: f64 = 0.5;
pub const TORUS_MAJOR: f64 = 0.5;
pub const TORUS_MINOR: f64 = 0.2;
const GAUSSIAN_COUNT: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Bump {
    center: [f64; 3],
    inv_two_var: f64,
    amplitude: f64,
}

fn bumps(seed: u64) -> [Bump; GAUSSIAN_COUNT] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| {
        let center = std::array::from_fn(|_| rng.gen_range(-0.7..0.7));
        let width: f64 = rng.gen_range(0.15..0.35);
        Bump {
            center,
            inv_two_var: 1.0 / (2.0 * width * width),
            amplitude: rng.gen_range(0.5..1.0),
        }
    })
}

fn gaussian_sum(bumps: &[Bump], p: [f64; 3]) -> f64 {
    bumps
        .iter()
        .map(|b| {
            let d2: f64 = (0..3).map(|d| (p[d] - b.center[d]).powi(2)).sum();
            b.amplitude * (-d2 * b.inv_two_var).exp()
        })
        .sum()
}

impl SyntheticField {
    pub const DEFAULT_GAUSSIAN_SEED: u64 = 7;

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussians { .. } => "gaussians",
            Self::Wave => "wave",
            Self::Sphere => "sphere",
            Self::Torus => "torus",
        }
    }

    /// Field value at `p`.
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let [x, y, z] = p;
        match *self {
            Self::Gaussians { seed } => gaussian_sum(&bumps(seed), p),
            Self::Wave => (4.0 * x).sin() * (4.0 * y).cos() + z,
            Self::Sphere => (x * x + y * y + z * z).sqrt() - SPHERE_RADIUS,
            Self::Torus => {
                let q = (x * x + y * y).sqrt() - TORUS_MAJOR;
                (q * q + z * z).sqrt() - TORUS_MINOR
            }
        }
    }

    /// Samples on an `n`-per-axis grid spanning `[-1, 1]^3`, boundaries
    /// included.
    pub fn sample(&self, n: usize) -> Result<ScalarVolume> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "field sampling needs at least 2 points per axis, got {n}"
            )));
        }
        let bumps = match *self {
            Self::Gaussians { seed } => Some(bumps(seed)),
            _ => None,
        };
        ScalarVolume::from_fn([n, n, n], |i, j, k| {
            let p = [
                lattice_coord(-1.0, 1.0, i, n - 1),
                lattice_coord(-1.0, 1.0, j, n - 1),
                lattice_coord(-1.0, 1.0, k, n - 1),
            ];
            match &bumps {
                Some(bs) => gaussian_sum(bs, p),
                None => self.eval(p),
            }
        })
    }
}

impl fmt::Display for SyntheticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussians { seed } => write!(f, "gaussians:{seed}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for SyntheticField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussians" => Ok(Self::Gaussians { seed: Self::DEFAULT_GAUSSIAN_SEED }),
            "wave" => Ok(Self::Wave),
            "sphere" => Ok(Self::Sphere),
            "torus" => Ok(Self::Torus),
            _ => match s.strip_prefix("gaussians:") {
                Some(seed) => seed.parse().map(|seed| Self::Gaussians { seed }).map_err(|_| {
                    Error::InvalidArgument(format!("bad gaussian seed in '{s}'"))
                }),
                None => Err(Error::InvalidArgument(format!(
                    "unknown field '{s}' (expected gaussians[:SEED], wave, sphere or torus)"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sdf_values() {
        assert!((SyntheticField::Sphere.eval([0.0; 3]) + 0.5).abs() < 1e-15);
        assert!(SyntheticField::Sphere.eval([0.5, 0.0, 0.0]).abs() < 1e-15);
        assert!((SyntheticField::Torus.eval([0.5, 0.0, 0.0]) + 0.2).abs() < 1e-15);
        assert!(SyntheticField::Torus.eval([0.0, 0.7, 0.0]).abs() < 1e-15);
        assert!((SyntheticField::Wave.eval([0.0, 0.0, 0.3]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn sampling_matches_eval() {
        for f in [SyntheticField::Gaussians { seed: 3 }, SyntheticField::Wave, SyntheticField::Torus] {
            let v = f.sample(5).unwrap();
            assert_eq!(v.get(0, 0, 0), f.eval([-1.0; 3]));
            assert_eq!(v.get(2, 4, 1), f.eval([0.0, 1.0, -0.5]));
        }
    }

    #[test]
    fn gaussians_are_seeded() {
        let a = SyntheticField::Gaussians { seed: 1 }.eval([0.1, 0.2, 0.3]);
        let b = SyntheticField::Gaussians { seed: 1 }.eval([0.1, 0.2, 0.3]);
        let c = SyntheticField::Gaussians { seed: 2 }.eval([0.1, 0.2, 0.3]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn parse_names() {
        assert_eq!("wave".parse::<SyntheticField>().unwrap(), SyntheticField::Wave);
        assert_eq!(
            "gaussians:9".parse::<SyntheticField>().unwrap(),
            SyntheticField::Gaussians { seed: 9 }
        );
        assert!("cube".parse::<SyntheticField>().is_err());
    }
}
