use std::f64::consts::PI;

/// Time-spectral derivative operator on `2 * nharms + 1` equispaced samples
/// of one period.
///
/// `D[j][k] = (omega / 2) * (-1)^(j-k) / sin(pi * (j - k) / N)` for `j != k`,
/// zero on the diagonal. The matrix is circulant; it is assembled from the
/// first `nharms` offsets with the remaining offsets set to exact negatives,
/// so antisymmetry holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDeriv {
    nplanes: usize,
    omega: f64,
    d: Vec<f64>,
}

impl SpectralDeriv {
    pub fn new(nharms: usize, omega: f64) -> Self {
        let n = 2 * nharms + 1;
        let nf = n as f64;
        // g[s] is the entry at circulant offset s = (j - k) mod N.
        let mut g = vec![0.0; n];
        for s in 1..=nharms {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            g[s] = 0.5 * omega * sign / (PI * s as f64 / nf).sin();
            g[n - s] = -g[s];
        }
        let mut d = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                d[j * n + k] = g[(j + n - k) % n];
            }
        }
        SpectralDeriv { nplanes: n, omega, d }
    }

    pub fn nplanes(&self) -> usize {
        self.nplanes
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Period of the fundamental, `2 pi / omega`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.d[j * self.nplanes + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.d[j * self.nplanes..(j + 1) * self.nplanes]
    }

    /// `D * samples`, summing off-diagonal terms in ascending column order.
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        assert_eq!(samples.len(), self.nplanes);
        (0..self.nplanes)
            .map(|j| {
                let mut acc = 0.0;
                for (k, s) in samples.iter().enumerate() {
                    if k != j {
                        acc += self.at(j, k) * s;
                    }
                }
                acc
            })
            .collect()
    }

    /// Sample instants `t_j = j * T / N`.
    pub fn sample_times(&self) -> Vec<f64> {
        let t = self.period();
        (0..self.nplanes).map(|j| j as f64 * t / self.nplanes as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route: differentiate by explicit DFT, multiply by i*k*omega,
    /// transform back. Uses none of the closed-form matrix entries.
    fn dft_derivative(samples: &[f64], omega: f64) -> Vec<f64> {
        let n = samples.len();
        let nh = (n - 1) / 2;
        let mut out = vec![0.0; n];
        for k in 1..=nh {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, s) in samples.iter().enumerate() {
                let th = 2.0 * PI * (k * j) as f64 / n as f64;
                re += s * th.cos();
                im -= s * th.sin();
            }
            // coefficient c_k = (re + i im)/n; derivative coefficient = i k w c_k
            let (dre, dim) = (-(k as f64) * omega * im / n as f64, k as f64 * omega * re / n as f64);
            for (j, o) in out.iter_mut().enumerate() {
                let th = 2.0 * PI * (k * j) as f64 / n as f64;
                // real part of 2 * (dre + i dim) e^{i th}
                *o += 2.0 * (dre * th.cos() - dim * th.sin());
            }
        }
        out
    }

    #[test]
    fn steady_case_is_zero() {
        let d = SpectralDeriv::new(0, 3.0);
        assert_eq!(d.nplanes(), 1);
        assert_eq!(d.at(0, 0), 0.0);
    }

    #[test]
    fn one_harmonic_cosine() {
        let d = SpectralDeriv::new(1, 1.0);
        let t = d.sample_times();
        let f: Vec<f64> = t.iter().map(|t| t.cos()).collect();
        let got = d.apply(&f);
        let oracle = dft_derivative(&f, 1.0);
        for j in 0..3 {
            assert!((got[j] + t[j].sin()).abs() < 1e-12);
            assert!((got[j] - oracle[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dft_route() {
        for nharms in 1..=6 {
            let omega = 0.7 + nharms as f64 * 0.3;
            let d = SpectralDeriv::new(nharms, omega);
            let f: Vec<f64> = (0..d.nplanes()).map(|j| ((j * 7 + 3) % 11) as f64 - 5.0).collect();
            let a = d.apply(&f);
            let b = dft_derivative(&f, omega);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10, "nharms={nharms}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        for nharms in 0..=10 {
            let d = SpectralDeriv::new(nharms, 2.5);
            for v in d.apply(&vec![1.0; d.nplanes()]) {
                assert!(v.abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn exactly_antisymmetric() {
        for nharms in 0..=12 {
            let d = SpectralDeriv::new(nharms, 1.3);
            for j in 0..d.nplanes() {
                for k in (0..d.nplanes()).filter(|&k| k != j) {
                    assert_eq!(d.at(j, k).to_bits(), (-d.at(k, j)).to_bits());
                }
            }
        }
    }
}
