//! Reproducible standard complex Gaussian coefficients and random sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::basis::SectionBasis;
use crate::{Error, Result};

/// A reproducible stream of random numbers, keyed by a master seed and a
/// stream index. Different indices give independent ChaCha20 streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GaussianStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl GaussianStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Stream of sample `sample` at tensor power `n`.
    pub fn for_sample(master_seed: u64, n: u32, sample: u32) -> Self {
        Self::new(master_seed, ((n as u64) << 32) | sample as u64)
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Uniform on `(0, 1]` with 53 random bits.
fn open_unit(rng: &mut impl RngCore) -> f64 {
    1.0 - (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One standard complex Gaussian: `√(−ln u₁) e^{2πi u₂}`, so that real and
/// imaginary parts are independent with variance 1/2.
pub fn std_complex_gaussian(rng: &mut impl RngCore) -> Complex64 {
    let u1 = open_unit(rng);
    let u2 = open_unit(rng);
    Complex64::from_polar((-u1.ln()).sqrt(), 2.0 * PI * u2)
}

pub fn sample_std_complex_gaussians(stream: GaussianStream, count: usize) -> Vec<Complex64> {
    let mut rng = stream.rng();
    (0..count).map(|_| std_complex_gaussian(&mut rng)).collect()
}

/// `s_n = Σ_j ξ_j f_j` over a fixed basis.
#[derive(Clone, Debug)]
pub struct RandomSection<'a> {
    coeffs: Vec<Complex64>,
    basis: &'a SectionBasis,
}

impl<'a> RandomSection<'a> {
    pub fn from_coeffs(basis: &'a SectionBasis, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.dimension() {
            return Err(Error::Shape {
                expected: basis.dimension(),
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs, basis })
    }

    /// The section whose only nonzero coefficient is `ξ_j = 1`.
    pub fn unit(basis: &'a SectionBasis, j: usize) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.dimension()];
        *coeffs
            .get_mut(j)
            .ok_or(Error::Shape { expected: basis.dimension(), got: j + 1 })? = Complex64::new(1.0, 0.0);
        Self::from_coeffs(basis, coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &'a SectionBasis {
        self.basis
    }

    /// `s_n(x)` in the unitary frame and `K_n(x,x)`.
    pub fn frame_value_and_diag(&self, x: Complex64, scratch: &mut Vec<Complex64>) -> Result<(Complex64, f64)> {
        self.basis.model().curvature_eigenvalue(x)?;
        Ok(self.basis.section_and_diagonal(x, &self.coeffs, scratch))
    }

    /// `|s_n(x)|_{hⁿ} = |Σ ξ_j f_j(x)| e^{-nφ(x)/2}`.
    pub fn evaluate_section_weighted(&self, x: Complex64) -> Result<f64> {
        Ok(self.frame_value_and_diag(x, &mut Vec::new())?.0.norm())
    }

    /// `α_n(x) = s_n(x)/√K_n(x,x)` in the unitary frame.
    pub fn normalized_process(&self, x: Complex64) -> Result<Complex64> {
        let (value, diag) = self.frame_value_and_diag(x, &mut Vec::new())?;
        Ok(value / diag.sqrt())
    }

    pub fn normalized_process_abs(&self, x: Complex64) -> Result<f64> {
        Ok(self.normalized_process(x)?.norm())
    }
}

pub fn draw_section(basis: &SectionBasis, stream: GaussianStream) -> RandomSection<'_> {
    RandomSection {
        coeffs: sample_std_complex_gaussians(stream, basis.dimension()),
        basis,
    }
}
