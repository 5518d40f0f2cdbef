//! Seven-branch angle diversity receiver (ADR), receiver noise, OOK error
//! probability and the SC / MRC combiners.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ReceiverConfig;
use crate::emitters::LambertianSource;
use crate::geometry::{az_el_to_direction, Vec3};
use crate::propagation::{PropagationError, ReceiverAperture, Scene};

/// Elementary charge (C).
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceiverError {
    #[error("cannot combine an empty branch list")]
    NoBranches,
    #[error("expected {expected} per-branch values, got {got}")]
    BranchCount { expected: usize, got: usize },
    #[error("invalid noise parameters: {0}")]
    Noise(String),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Standard normal tail probability, `½·erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Large-argument approximation `exp(-x²/2) / (x·√(2π))`. Only for
/// comparison; nothing in the simulator evaluates BER with it.
pub fn q_function_asymptotic(x: f64) -> f64 {
    (-x * x / 2.0).exp() / (x * (2.0 * PI).sqrt())
}

/// Inverse of [`q_function`] on `(0, 1)`, by bisection.
pub fn inverse_q(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// OOK bit error rate, `Q(√SINR)`.
pub fn ber_from_sinr(sinr: f64) -> f64 {
    q_function(sinr.max(0.0).sqrt())
}

/// Smallest SINR (linear) meeting `target_ber`.
pub fn sinr_for_ber(target_ber: f64) -> f64 {
    let x = inverse_q(target_ber).max(0.0);
    x * x
}

/// Receiver noise parameters for one cell system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Receiver bandwidth (Hz).
    pub bandwidth: f64,
    /// Preamplifier input-referred current noise density (A/√Hz).
    pub preamp_noise_density: f64,
    /// Background photocurrent driving background shot noise (A).
    pub background_current: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), ReceiverError> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(ReceiverError::Noise(format!("bandwidth must be > 0, got {}", self.bandwidth)));
        }
        if !(self.preamp_noise_density >= 0.0) {
            return Err(ReceiverError::Noise("preamp_noise_density must be >= 0".into()));
        }
        if !(self.background_current >= 0.0) {
            return Err(ReceiverError::Noise("background_current must be >= 0".into()));
        }
        Ok(())
    }

    pub fn preamp_variance(&self) -> f64 {
        self.preamp_noise_density * self.preamp_noise_density * self.bandwidth
    }

    pub fn background_variance(&self) -> f64 {
        2.0 * ELECTRON_CHARGE * self.background_current * self.bandwidth
    }

    pub fn signal_variance(&self, p_received: f64, responsivity: f64) -> f64 {
        2.0 * ELECTRON_CHARGE * responsivity * p_received * self.bandwidth
    }
}

/// Total noise current σ_t (A) with shot noise driven by `p_received` (W).
pub fn noise_sigma(p_received: f64, params: &NoiseParams, responsivity: f64) -> f64 {
    (params.preamp_variance()
        + params.background_variance()
        + params.signal_variance(p_received, responsivity))
    .sqrt()
}

/// Received optical power on logic 1 and logic 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OokSignal {
    pub p1: f64,
    pub p0: f64,
}

impl OokSignal {
    /// Ideal-extinction OOK around an average received power.
    pub fn from_average(p_avg: f64) -> Self {
        OokSignal {
            p1: 2.0 * p_avg,
            p0: 0.0,
        }
    }

    pub fn swing(&self) -> f64 {
        self.p1 - self.p0
    }
}

/// SINR of one branch; an empty interferer list gives the SNR.
pub fn branch_sinr(signal: OokSignal, interferers: &[OokSignal], sigma_t: f64, responsivity: f64) -> f64 {
    let r2 = responsivity * responsivity;
    let interference: f64 = interferers.iter().map(|i| r2 * i.swing() * i.swing()).sum();
    r2 * signal.swing() * signal.swing() / (sigma_t * sigma_t + interference)
}

/// Selection combining: the best branch.
pub fn combine_sc(branch_sinrs: &[f64]) -> Result<f64, ReceiverError> {
    branch_sinrs
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(ReceiverError::NoBranches)
}

/// Maximum ratio combining as a plain sum of branch SINRs.
pub fn combine_mrc(branch_sinrs: &[f64]) -> Result<f64, ReceiverError> {
    if branch_sinrs.is_empty() {
        return Err(ReceiverError::NoBranches);
    }
    Ok(branch_sinrs.iter().sum())
}

/// OOK bit rate `efficiency · bandwidth` when the BER target is met, else 0.
pub fn max_rate_at_ber(sinr: f64, bandwidth: f64, target_ber: f64, efficiency: f64) -> f64 {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return 0.0;
    }
    if ber_from_sinr(sinr) <= target_ber {
        efficiency * bandwidth
    } else {
        0.0
    }
}

/// One photodetector of the ADR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverBranch {
    pub aperture: ReceiverAperture,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// A/W
    pub responsivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleDiversityReceiver {
    pub position: Vec3,
    pub branches: Vec<ReceiverBranch>,
}

impl AngleDiversityReceiver {
    /// Side branches in configuration order followed by the upward branch.
    /// Stored azimuths include the configured offset.
    pub fn new(position: Vec3, cfg: &ReceiverConfig) -> Result<Self, ReceiverError> {
        let mut branches = Vec::with_capacity(cfg.side_azimuths_deg.len() + 1);
        let mut push = |az: f64, el: f64, fov: f64| -> Result<(), ReceiverError> {
            let az = (az + cfg.azimuth_offset_deg).rem_euclid(360.0);
            branches.push(ReceiverBranch {
                aperture: ReceiverAperture::new(position, az_el_to_direction(az, el), fov, cfg.area_m2)?,
                azimuth_deg: az,
                elevation_deg: el,
                responsivity: cfg.responsivity_a_per_w,
            });
            Ok(())
        };
        for &az in &cfg.side_azimuths_deg {
            push(az, cfg.side_elevation_deg, cfg.side_fov_deg)?;
        }
        push(cfg.top_azimuth_deg, cfg.top_elevation_deg, cfg.top_fov_deg)?;
        Ok(AngleDiversityReceiver { position, branches })
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn apertures(&self) -> impl Iterator<Item = &ReceiverAperture> {
        self.branches.iter().map(|b| &b.aperture)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchMetrics {
    pub snr: f64,
    pub sinr: f64,
    pub signal: OokSignal,
    /// One entry per interfering system.
    pub interferers: Vec<OokSignal>,
    pub sigma_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdrEvaluation {
    pub sc_sinr: f64,
    pub mrc_sinr: f64,
    pub branches: Vec<BranchMetrics>,
}

impl AdrEvaluation {
    pub fn sc_snr(&self) -> f64 {
        self.branches.iter().map(|b| b.snr).fold(0.0, f64::max)
    }

    pub fn mrc_snr(&self) -> f64 {
        self.branches.iter().map(|b| b.snr).sum()
    }
}

/// Branch metrics and combined SINRs from average received powers.
///
/// `serving` holds the serving-source power on each branch; `interfering`
/// holds one per-branch power vector for each interfering system.
pub fn evaluate_branches(
    receiver: &AngleDiversityReceiver,
    serving: &[f64],
    interfering: &[Vec<f64>],
    noise: &NoiseParams,
) -> Result<AdrEvaluation, ReceiverError> {
    let j = receiver.len();
    if serving.len() != j {
        return Err(ReceiverError::BranchCount { expected: j, got: serving.len() });
    }
    if let Some(bad) = interfering.iter().find(|v| v.len() != j) {
        return Err(ReceiverError::BranchCount { expected: j, got: bad.len() });
    }
    let branches: Vec<BranchMetrics> = receiver
        .branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let signal = OokSignal::from_average(serving[k]);
            let interferers: Vec<OokSignal> =
                interfering.iter().map(|sys| OokSignal::from_average(sys[k])).collect();
            let sigma_total = noise_sigma(signal.p1, noise, b.responsivity);
            BranchMetrics {
                snr: branch_sinr(signal, &[], sigma_total, b.responsivity),
                sinr: branch_sinr(signal, &interferers, sigma_total, b.responsivity),
                signal,
                interferers,
                sigma_total,
            }
        })
        .collect();
    let sinrs: Vec<f64> = branches.iter().map(|b| b.sinr).collect();
    Ok(AdrEvaluation {
        sc_sinr: combine_sc(&sinrs)?,
        mrc_sinr: combine_mrc(&sinrs)?,
        branches,
    })
}

/// Full ADR evaluation at the receiver's position: powers from the serving
/// source and from every source of each interfering system.
pub fn evaluate_adr(
    receiver: &AngleDiversityReceiver,
    serving: &LambertianSource,
    interfering: &[&[LambertianSource]],
    scene: &Scene,
    noise: &NoiseParams,
) -> Result<AdrEvaluation, ReceiverError> {
    let views: Vec<_> = receiver.apertures().map(|a| scene.view(a)).collect();
    let per_branch = |src: &LambertianSource| -> Result<Vec<f64>, ReceiverError> {
        let field = scene.illuminate(std::slice::from_ref(src)).remove(0);
        receiver
            .apertures()
            .zip(&views)
            .map(|(a, v)| Ok(scene.budget(src, &field, v, a)?.total))
            .collect()
    };
    let serving_p = per_branch(serving)?;
    let mut interfering_p = Vec::with_capacity(interfering.len());
    for system in interfering {
        let mut acc = vec![0.0; receiver.len()];
        for src in system.iter() {
            for (a, p) in acc.iter_mut().zip(per_branch(src)?) {
                *a += p;
            }
        }
        interfering_p.push(acc);
    }
    evaluate_branches(receiver, &serving_p, &interfering_p, noise)
}
