//! Numeric substrate: complex sample buffers, unitary radix-2 transforms and
//! seedable counter-based random streams.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Whether a buffer holds time-domain samples or per-bin frequency values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    Frequency,
}

/// A buffer of complex baseband samples or frequency-domain values.
#[derive(Debug, Clone)]
pub struct ComplexFrame {
    pub data: Vec<Complex64>,
    pub domain: Domain,
}

impl ComplexFrame {
    pub fn new(data: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Domain("frame must be non-empty".into()));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("frame contains non-finite samples".into()));
        }
        Ok(Self { data, domain })
    }

    pub fn time(data: Vec<Complex64>) -> Self {
        Self {
            data,
            domain: Domain::Time,
        }
    }

    pub fn frequency(data: Vec<Complex64>) -> Self {
        Self {
            data,
            domain: Domain::Frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Average power per sample.
    pub fn power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }
}

/// Radix-2 FFT with unitary normalization (1/sqrt(n) in both directions),
/// so Parseval holds with equality and per-bin noise variance equals the
/// time-domain variance.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    // twiddles[i] = exp(-j*2*pi*i/n) for i in 0..n/2
    twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "transform size must be a power of two, got {n}"
            )));
        }
        let twiddles = (0..n / 2)
            .map(|i| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .collect();
        Ok(Self { n, twiddles })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// In-place forward transform.
    pub fn forward(&self, x: &mut [Complex64]) {
        assert_eq!(x.len(), self.n, "buffer length must match transform size");
        self.transform(x, false);
    }

    /// In-place inverse transform.
    pub fn inverse(&self, x: &mut [Complex64]) {
        assert_eq!(x.len(), self.n, "buffer length must match transform size");
        self.transform(x, true);
    }

    fn transform(&self, x: &mut [Complex64], inverse: bool) {
        let n = self.n;
        // bit-reversal permutation
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
            if j > i {
                x.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = x[start + k];
                    let b = x[start + k + half] * w;
                    x[start + k] = a + b;
                    x[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
        let scale = 1.0 / (n as f64).sqrt();
        for v in x.iter_mut() {
            *v *= scale;
        }
    }
}

/// Forward DFT of a time-domain frame. Unitary normalization.
pub fn dft(frame: &ComplexFrame, n: usize) -> Result<ComplexFrame> {
    if frame.len() != n {
        return Err(Error::Framing(format!(
            "frame length {} does not match transform size {n}",
            frame.len()
        )));
    }
    let fft = Fft::new(n)?;
    let mut data = frame.data.clone();
    fft.forward(&mut data);
    Ok(ComplexFrame::frequency(data))
}

/// Inverse DFT of a frequency-domain frame. Unitary normalization.
pub fn inverse_dft(frame: &ComplexFrame, n: usize) -> Result<ComplexFrame> {
    if frame.len() != n {
        return Err(Error::Framing(format!(
            "frame length {} does not match transform size {n}",
            frame.len()
        )));
    }
    let fft = Fft::new(n)?;
    let mut data = frame.data.clone();
    fft.inverse(&mut data);
    Ok(ComplexFrame::time(data))
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Identical pairs yield identical sample sequences; distinct `stream_id`s
/// yield independent sequences from the same seed, so parallel trials never
/// share generator state.
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A pair of i.i.d. standard normal variates.
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        (self.rng.sample(StandardNormal), self.rng.sample(StandardNormal))
    }

    /// Circular complex Gaussian with unit total variance (1/2 per component).
    pub fn standard_complex(&mut self) -> Complex64 {
        let (re, im) = self.gaussian_pair();
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bit(&mut self) -> u8 {
        u8::from(self.rng.random::<bool>())
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_frame(n: usize, seed: u64) -> Vec<Complex64> {
        let mut s = RngStream::new(seed, 0);
        (0..n).map(|_| s.standard_complex()).collect()
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut data = vec![Complex64::default(); 8];
        data[0] = Complex64::new(1.0, 0.0);
        let spec = dft(&ComplexFrame::time(data), 8).unwrap();
        let expected = 1.0 / 8f64.sqrt();
        for v in &spec.data {
            assert!((v.re - expected).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_identity() {
        let data = random_frame(256, 7);
        let x = ComplexFrame::time(data.clone());
        let back = inverse_dft(&dft(&x, 256).unwrap(), 256).unwrap();
        for (a, b) in data.iter().zip(&back.data) {
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn parseval_up_to_4096() {
        let mut n = 2;
        while n <= 4096 {
            let data = random_frame(n, n as u64);
            let t_energy: f64 = data.iter().map(|c| c.norm_sqr()).sum();
            let spec = dft(&ComplexFrame::time(data), n).unwrap();
            let f_energy: f64 = spec.data.iter().map(|c| c.norm_sqr()).sum();
            assert!(
                (t_energy - f_energy).abs() < 1e-10 * t_energy,
                "Parseval violated at n={n}"
            );
            n *= 2;
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(Fft::new(96).is_err());
        assert!(dft(&ComplexFrame::time(vec![Complex64::default(); 12]), 12).is_err());
    }

    #[test]
    fn gaussian_moments() {
        // CLT bound: |mean| < 4/sqrt(n) for n = 1e6 draws.
        let mut s = RngStream::new(42, 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n / 2 {
            let (a, b) = s.gaussian_pair();
            sum += a + b;
            sumsq += a * a + b * b;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.006, "var {var}");
    }

    #[test]
    fn same_stream_reproduces() {
        let mut a = RngStream::new(3, 17);
        let mut b = RngStream::new(3, 17);
        for _ in 0..1000 {
            assert_eq!(a.gaussian_pair(), b.gaussian_pair());
        }
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let mut a = RngStream::new(3, 0);
        let mut b = RngStream::new(3, 1);
        let n = 1_000_000usize;
        let mut cross = 0.0;
        for _ in 0..n {
            let (x, _) = a.gaussian_pair();
            let (y, _) = b.gaussian_pair();
            cross += x * y;
        }
        assert!((cross / n as f64).abs() < 0.005);
    }
}
