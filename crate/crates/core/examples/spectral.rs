//! The harmonic-balance time derivative: differentiates a sampled periodic
//! signal and compares with the analytic derivative.
//!
//! cargo run --example spectral [nharms]

use hbproxy::hbcore::SpectralDeriv;

fn main() {
    let nharms: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let omega = 2.0;
    let d = SpectralDeriv::new(nharms, omega);
    let t = d.sample_times();

    // Any signal with harmonics up to nharms is differentiated exactly.
    let f = |x: f64| 0.3 + (omega * x).sin() - 0.5 * (nharms as f64 * omega * x).cos();
    let df = |x: f64| omega * (omega * x).cos() + 0.5 * nharms as f64 * omega * (nharms as f64 * omega * x).sin();

    let samples: Vec<f64> = t.iter().map(|&x| f(x)).collect();
    let deriv = d.apply(&samples);
    println!("{} planes over period {:.4}", d.nplanes(), d.period());
    println!("{:>10} {:>14} {:>14} {:>10}", "t", "D q", "exact", "error");
    for (j, &x) in t.iter().enumerate() {
        println!("{x:>10.4} {:>14.9} {:>14.9} {:>10.1e}", deriv[j], df(x), (deriv[j] - df(x)).abs());
    }

    // One harmonic too many is aliased.
    let k = (nharms + 1) as f64 * omega;
    let aliased: Vec<f64> = t.iter().map(|&x| (k * x).sin()).collect();
    let err = d.apply(&aliased).iter().zip(&t).map(|(v, &x)| (v - k * (k * x).cos()).abs()).fold(0.0, f64::max);
    println!("harmonic {} is not resolved: error {err:.3}", nharms + 1);
}
