use super::profiles::MachineProfile;
use crate::error::{Error, Result};
use crate::exchange::{predicted_message_count, CutPlan, ExchangeMode};

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Message-passing efficiency at `n` resources relative to `s`:
/// `(tm_s / tm_n) / (n / s)`.
pub fn efficiency_mpi(tm_s: f64, tm_n: f64, s: f64, n: f64) -> Result<f64> {
    let (tm_s, tm_n, s, n) = (positive("TM_s", tm_s)?, positive("TM_n", tm_n)?, positive("s", s)?, positive("n", n)?);
    if n < s {
        return Err(Error::Domain(format!("n ({n}) must not be below s ({s})")));
    }
    Ok((tm_s / tm_n) / (n / s))
}

/// Hybrid efficiency at `m` resources relative to the message-passing run at
/// `n`: `(tm_n / th_m) / (m / n)`.
pub fn efficiency_hybrid(tm_n: f64, th_m: f64, n: f64, m: f64) -> Result<f64> {
    let (tm_n, th_m, n, m) = (positive("TM_n", tm_n)?, positive("TH_m", th_m)?, positive("n", n)?, positive("m", m)?);
    if m < n {
        return Err(Error::Domain(format!("m ({m}) must not be below n ({n})")));
    }
    Ok((tm_n / th_m) / (m / n))
}

/// Energy per iteration in watt-hours over all `nodes`:
/// `(t_total / 3600 * power_per_node * nodes) / iterations`.
pub fn power_per_iteration(t_total: f64, power_per_node: f64, nodes: f64, iterations: f64) -> Result<f64> {
    let t = positive("T_t", t_total)?;
    let p = positive("P_n", power_per_node)?;
    let nodes = positive("nodes", nodes)?;
    let ni = positive("ni", iterations)?;
    Ok((t / 3600.0 * p * nodes) / ni)
}

/// `messages * latency + bytes / bandwidth`, in seconds.
pub fn comm_time(messages: u64, bytes: u64, profile: &MachineProfile) -> f64 {
    messages as f64 * profile.latency_s() + bytes as f64 / profile.bandwidth_bytes_per_s()
}

/// Modelled time of one exchange. Latency is paid once per message of a
/// direction (both directions proceed concurrently); bandwidth is charged
/// for the payload of both directions.
pub fn predict_comm_time(plan: &CutPlan, mode: ExchangeMode, profile: &MachineProfile) -> f64 {
    let count = predicted_message_count(plan, mode);
    comm_time(count.messages_per_direction, count.total_bytes(), profile)
}

#[cfg(test)]
mod tests {
    use super::super::profiles::{B510, BGQ, XE6};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mpi_efficiency() {
        assert_eq!(efficiency_mpi(100.0, 25.0, 1.0, 4.0).unwrap(), 1.0);
        assert!((efficiency_mpi(100.0, 60.0, 1.0, 2.0).unwrap() - 0.833_333_333_333).abs() < 1e-9);
        assert!(efficiency_mpi(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(efficiency_mpi(1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn hybrid_efficiency() {
        assert!((efficiency_hybrid(4.0, 1.0, 1.0, 8.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((efficiency_hybrid(3.26, 1.0, 1.0, 4.0).unwrap() - 0.815).abs() < 1e-12);
        assert!((efficiency_hybrid(2.11, 1.0, 1.0, 4.0).unwrap() - 0.5275).abs() < 1e-12);
        assert!(efficiency_hybrid(1.0, -1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn energy() {
        assert!((power_per_iteration(3600.0, BGQ.power_per_node, 1.0, 100.0).unwrap() - 0.8).abs() < 1e-12);
        assert!((power_per_iteration(3600.0, XE6.power_per_node, 1.0, 100.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((power_per_iteration(7200.0, B510.power_per_node, 1.0, 1000.0).unwrap() - 0.996).abs() < 1e-12);
        assert!(power_per_iteration(3600.0, 80.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cost_model() {
        let t = comm_time(5000, 480_000, &XE6);
        assert!((t - 6.0857e-3).abs() / 6.0857e-3 < 1e-4, "{t}");
        let t1 = comm_time(1, 480_000, &XE6);
        assert!((t1 - 8.6914e-5).abs() / 8.6914e-5 < 1e-4, "{t1}");
        assert_eq!(comm_time(0, 0, &XE6), 0.0);
    }

    proptest! {
        #[test]
        fn energy_scale_invariant(t in 1.0f64..1e5, ni in 1.0f64..1e4, k in 0.1f64..10.0) {
            let a = power_per_iteration(t, 400.0, 2.0, ni).unwrap();
            let b = power_per_iteration(t * k, 400.0, 2.0, ni * k).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn mpi_efficiency_scale_invariant(ts in 1.0f64..1e4, tn in 1.0f64..1e4, k in 0.1f64..10.0, n in 1u32..64) {
            let a = efficiency_mpi(ts, tn, 1.0, n as f64).unwrap();
            let b = efficiency_mpi(ts * k, tn * k, 1.0, n as f64).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn fewer_messages_cost_less(m in 1u64..100_000, bytes in 0u64..10_000_000) {
            for p in [BGQ, XE6, B510] {
                prop_assert!(comm_time(m - 1, bytes, &p) < comm_time(m, bytes, &p));
            }
        }
    }
}
