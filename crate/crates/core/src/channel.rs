//! Link-level math: path loss, Rayleigh fading, inter-cell interference and
//! per-UE achievable rate.
//!
//! Everything here is a pure function over value inputs; callers own their
//! RNGs and may run any number of these in parallel.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("unknown index: {0}")]
    UnknownIndex(String),
}

/// Static link-budget parameters shared by every UE of a cell.
///
/// The noise figure is a power spectral density; the effective noise power
/// over one RB is `noise_psd * rb_bandwidth`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Bandwidth of one resource block, Hz.
    pub rb_bandwidth_hz: f64,
    /// Path loss exponent (>= 2).
    pub pathloss_exponent: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Per-UE transmit power applied on each assigned RB, dBm.
    pub tx_power_dbm: f64,
    /// Lower clamp on link distance, m; avoids the d^-eta singularity.
    pub min_distance_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            rb_bandwidth_hz: 200e3,
            pathloss_exponent: 3.0,
            noise_psd_dbm_hz: -173.0,
            tx_power_dbm: 56.0,
            min_distance_m: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.rb_bandwidth_hz > 0.0) {
            return Err(ChannelError::InvalidParams(
                "rb_bandwidth_hz must be positive".into(),
            ));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(ChannelError::InvalidParams(
                "pathloss_exponent must be >= 2".into(),
            ));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(ChannelError::InvalidParams(
                "min_distance_m must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Effective noise power over one RB, watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.rb_bandwidth_hz
    }

    /// Transmit power in watts.
    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// One UE-RB link at a single time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub distance_m: f64,
    /// Squared fading magnitude |h|^2; exponential with unit mean under
    /// Rayleigh fading.
    pub fading_gain: f64,
    /// Aggregate inter-cell interference, watts.
    pub interference_w: f64,
}

/// Draws |h|^2 for a Rayleigh-fading link: Exponential(mean 1).
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Per-cell slice of the network-wide allocation at one time step.
#[derive(Debug, Clone, Default)]
pub struct CellAllocation {
    /// `assigned[u][k]` is true when UE u of this cell holds RB k.
    pub assigned: Vec<Vec<bool>>,
    /// Transmit power per UE, watts.
    pub tx_power_w: Vec<f64>,
    /// Distance of each UE to its own serving RU, m.
    pub distance_m: Vec<f64>,
    /// `fading[u][k]` is |h|^2 for UE u on RB k.
    pub fading: Vec<Vec<f64>>,
}

/// Identifies one UE within a multi-cell allocation view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UeRef {
    pub cell: usize,
    pub ue: usize,
}

/// Inter-cell interference seen by `target` on RB `rb`: every UE of every
/// other cell assigned that RB contributes `p * d^-eta * |h|^2` where `d` is
/// the interferer's distance to its own RU.
pub fn interference(
    cells: &[CellAllocation],
    target: UeRef,
    rb: usize,
    pathloss_exponent: f64,
) -> Result<f64, ChannelError> {
    let own = cells
        .get(target.cell)
        .ok_or_else(|| ChannelError::UnknownIndex(format!("cell {}", target.cell)))?;
    let row = own
        .assigned
        .get(target.ue)
        .ok_or_else(|| ChannelError::UnknownIndex(format!("ue {}", target.ue)))?;
    if rb >= row.len() {
        return Err(ChannelError::UnknownIndex(format!("rb {rb}")));
    }
    let mut total = 0.0;
    for (ci, cell) in cells.iter().enumerate() {
        if ci == target.cell {
            continue;
        }
        for u in 0..cell.assigned.len() {
            if cell.assigned[u].get(rb).copied().unwrap_or(false) {
                total += cell.tx_power_w[u]
                    * cell.distance_m[u].powf(-pathloss_exponent)
                    * cell.fading[u][rb];
            }
        }
    }
    Ok(total)
}

/// Achievable rate in bits/s for one UE: sum over RBs held by the UE and
/// enabled for its slice of `B * log2(1 + SINR)`.
pub fn ue_rate(
    e_row: &[bool],
    b_row: &[bool],
    links: &[LinkSample],
    params: &ChannelParams,
) -> Result<f64, ChannelError> {
    if e_row.len() != b_row.len() || e_row.len() != links.len() {
        return Err(ChannelError::LengthMismatch(format!(
            "e_row {}, b_row {}, links {}",
            e_row.len(),
            b_row.len(),
            links.len()
        )));
    }
    let noise_w = params.noise_power_w();
    let p = params.tx_power_w();
    let mut rate = 0.0;
    for ((&e, &b), link) in e_row.iter().zip(b_row).zip(links) {
        if !(e && b) {
            continue;
        }
        let d = link.distance_m.max(params.min_distance_m);
        let sinr =
            p * d.powf(-params.pathloss_exponent) * link.fading_gain / (link.interference_w + noise_w);
        rate += params.rb_bandwidth_hz * (1.0 + sinr).log2();
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn unit_sinr_params() -> ChannelParams {
        // Chosen so that p * d^-eta * h / noise == 1 with d = 1, h = 1.
        let params = ChannelParams::default();
        let noise = params.noise_power_w();
        ChannelParams {
            tx_power_dbm: watts_to_dbm(noise),
            ..params
        }
    }

    #[test]
    fn fading_is_unit_mean_exponential() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut below_one = 0usize;
        for _ in 0..n {
            let h = sample_fading(&mut rng);
            assert!(h >= 0.0);
            sum += h;
            if h <= 1.0 {
                below_one += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        // CDF at 1: 1 - e^-1.
        let cdf = below_one as f64 / n as f64;
        assert!((cdf - (1.0 - (-1.0f64).exp())).abs() < 0.01, "cdf {cdf}");
    }

    #[test]
    fn interference_single_cell_is_zero() {
        let cell = CellAllocation {
            assigned: vec![vec![true, false]],
            tx_power_w: vec![1.0],
            distance_m: vec![5.0],
            fading: vec![vec![1.0, 1.0]],
        };
        let i = interference(&[cell], UeRef { cell: 0, ue: 0 }, 0, 3.0).unwrap();
        assert_eq!(i, 0.0);
    }

    #[test]
    fn interference_two_cells_direct_evaluation() {
        // One interferer: p = 1 W, d = 10 m, eta = 3, |h|^2 = 2 -> 2e-3 W.
        let own = CellAllocation {
            assigned: vec![vec![true]],
            tx_power_w: vec![1.0],
            distance_m: vec![1.0],
            fading: vec![vec![1.0]],
        };
        let other = CellAllocation {
            assigned: vec![vec![true]],
            tx_power_w: vec![1.0],
            distance_m: vec![10.0],
            fading: vec![vec![2.0]],
        };
        let i = interference(&[own, other], UeRef { cell: 0, ue: 0 }, 0, 3.0).unwrap();
        assert!((i - 2e-3).abs() < 1e-15, "{i}");
    }

    #[test]
    fn interference_empty_rb_is_zero() {
        let own = CellAllocation {
            assigned: vec![vec![true, true]],
            tx_power_w: vec![1.0],
            distance_m: vec![1.0],
            fading: vec![vec![1.0, 1.0]],
        };
        let other = CellAllocation {
            assigned: vec![vec![true, false]],
            tx_power_w: vec![1.0],
            distance_m: vec![10.0],
            fading: vec![vec![2.0, 2.0]],
        };
        let i = interference(&[own, other], UeRef { cell: 0, ue: 0 }, 1, 3.0).unwrap();
        assert_eq!(i, 0.0);
    }

    #[test]
    fn interference_unknown_index_errors() {
        let cell = CellAllocation {
            assigned: vec![vec![true]],
            tx_power_w: vec![1.0],
            distance_m: vec![1.0],
            fading: vec![vec![1.0]],
        };
        assert!(interference(&[cell.clone()], UeRef { cell: 1, ue: 0 }, 0, 3.0).is_err());
        assert!(interference(&[cell.clone()], UeRef { cell: 0, ue: 3 }, 0, 3.0).is_err());
        assert!(interference(&[cell], UeRef { cell: 0, ue: 0 }, 9, 3.0).is_err());
    }

    #[test]
    fn rate_zero_without_assignment() {
        let params = ChannelParams::default();
        let links = vec![
            LinkSample { distance_m: 10.0, fading_gain: 1.0, interference_w: 0.0 };
            4
        ];
        let rate = ue_rate(&[false; 4], &[true; 4], &links, &params).unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn rate_unit_sinr_single_rb() {
        let params = unit_sinr_params();
        let links = vec![LinkSample {
            distance_m: 1.0,
            fading_gain: 1.0,
            interference_w: 0.0,
        }];
        let rate = ue_rate(&[true], &[true], &links, &params).unwrap();
        // log2(1 + 1) = 1 -> rate equals the RB bandwidth.
        assert!((rate - 200e3).abs() < 1e-6, "{rate}");
    }

    #[test]
    fn rate_length_mismatch_errors() {
        let params = ChannelParams::default();
        let links = vec![LinkSample {
            distance_m: 1.0,
            fading_gain: 1.0,
            interference_w: 0.0,
        }];
        assert!(ue_rate(&[true, false], &[true], &links, &params).is_err());
    }

    #[test]
    fn rate_matches_scalar_oracle() {
        // Independently coded per-RB oracle, summed.
        let params = ChannelParams::default();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k = 3;
            let e: Vec<bool> = (0..k).map(|_| rng.random::<f64>() < 0.6).collect();
            let b: Vec<bool> = (0..k).map(|_| rng.random::<f64>() < 0.8).collect();
            let links: Vec<LinkSample> = (0..k)
                .map(|_| LinkSample {
                    distance_m: 1.0 + 200.0 * rng.random::<f64>(),
                    fading_gain: sample_fading(&mut rng),
                    interference_w: 1e-16 * rng.random::<f64>(),
                })
                .collect();
            let got = ue_rate(&e, &b, &links, &params).unwrap();
            let mut want = 0.0;
            for idx in 0..k {
                if e[idx] && b[idx] {
                    let num = params.tx_power_w()
                        * links[idx].distance_m.max(params.min_distance_m).powf(-3.0)
                        * links[idx].fading_gain;
                    let den = links[idx].interference_w + params.noise_power_w();
                    want += params.rb_bandwidth_hz * (1.0 + num / den).ln() / 2f64.ln();
                }
            }
            let rel = (got - want).abs() / want.abs().max(1e-12);
            assert!(rel < 1e-9, "rel {rel}");
        }
    }

    #[test]
    fn noise_conversion_round_trip() {
        for dbm in [-173.0, -100.0, 0.0, 56.0] {
            let back = watts_to_dbm(dbm_to_watts(dbm));
            assert!((back - dbm).abs() / dbm.abs().max(1.0) < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        let mut p = ChannelParams::default();
        assert!(p.validate().is_ok());
        p.pathloss_exponent = 1.5;
        assert!(p.validate().is_err());
        p = ChannelParams {
            rb_bandwidth_hz: 0.0,
            ..ChannelParams::default()
        };
        assert!(p.validate().is_err());
    }
}
