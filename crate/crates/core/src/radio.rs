//! Link budget: path loss, log-normal shadowing, SINR and Shannon capacity.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub const MACRO_TX_DBM: f64 = 43.0;
pub const MICRO_TX_DBM: f64 = 10.0;
pub const SHADOWING_STD_DB: f64 = 8.0;
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
pub const DEFAULT_BANDWIDTH_MHZ: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadioError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("invalid radio parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Macro,
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Carrier {
    Licensed,
    Unlicensed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxConfig {
    pub tx_power_dbm: f64,
    pub kind: CellKind,
    pub carrier: Carrier,
}

impl TxConfig {
    pub fn macro_default() -> Self {
        TxConfig { tx_power_dbm: MACRO_TX_DBM, kind: CellKind::Macro, carrier: Carrier::Licensed }
    }

    pub fn micro_default() -> Self {
        TxConfig { tx_power_dbm: MICRO_TX_DBM, kind: CellKind::Micro, carrier: Carrier::Unlicensed }
    }
}

/// `intercept + slope * log10(R)` with R clamped to at least 1 m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDistanceModel {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl LogDistanceModel {
    /// 15.3 + 37.6 log10(R)
    pub const MACRO: LogDistanceModel = LogDistanceModel { intercept_db: 15.3, slope_db: 37.6 };
    /// 37 + 30 log10(R); a simulator choice for the microcell tier.
    pub const MICRO: LogDistanceModel = LogDistanceModel { intercept_db: 37.0, slope_db: 30.0 };

    pub fn loss_db(&self, distance_m: f64) -> Result<f64, RadioError> {
        if distance_m.is_nan() || distance_m <= 0.0 {
            return Err(RadioError::NonPositiveDistance(distance_m));
        }
        Ok(self.intercept_db + self.slope_db * distance_m.max(1.0).log10())
    }
}

pub fn macro_path_loss_db(distance_m: f64) -> Result<f64, RadioError> {
    LogDistanceModel::MACRO.loss_db(distance_m)
}

pub fn micro_path_loss_db(distance_m: f64) -> Result<f64, RadioError> {
    LogDistanceModel::MICRO.loss_db(distance_m)
}

/// Zero-mean Gaussian shadowing in dB.
#[derive(Debug, Clone, Copy)]
pub struct Shadowing {
    std_db: f64,
    normal: Option<Normal<f64>>,
}

impl Shadowing {
    pub fn new(std_db: f64) -> Result<Self, RadioError> {
        if !(std_db.is_finite() && std_db >= 0.0) {
            return Err(RadioError::InvalidParameter(format!("shadowing std {std_db} dB")));
        }
        let normal = if std_db > 0.0 { Some(Normal::new(0.0, std_db).expect("finite positive std")) } else { None };
        Ok(Shadowing { std_db, normal })
    }

    pub fn std_db(&self) -> f64 {
        self.std_db
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.normal {
            Some(n) => n.sample(rng),
            None => 0.0,
        }
    }
}

pub fn shadowing_db<R: Rng + ?Sized>(shadowing: &Shadowing, rng: &mut R) -> f64 {
    shadowing.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub shadow_db: f64,
    pub rx_dbm: f64,
}

impl LinkBudget {
    pub fn compute(tx: &TxConfig, model: &LogDistanceModel, distance_m: f64, shadow_db: f64) -> Result<Self, RadioError> {
        let path_loss_db = model.loss_db(distance_m)?;
        Ok(LinkBudget { distance_m, path_loss_db, shadow_db, rx_dbm: tx.tx_power_dbm - path_loss_db - shadow_db })
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Thermal noise floor over `bandwidth_mhz`; about -101 dBm at 20 MHz.
pub fn noise_floor_dbm(bandwidth_mhz: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * (bandwidth_mhz * 1e6).log10()
}

pub fn sinr_db(signal_dbm: f64, interferers_dbm: &[f64], noise_dbm: f64) -> f64 {
    let interference: f64 = interferers_dbm.iter().map(|&i| dbm_to_mw(i)).sum();
    10.0 * (dbm_to_mw(signal_dbm) / (interference + dbm_to_mw(noise_dbm))).log10()
}

pub fn shannon_throughput_mbps(sinr_db: f64, bandwidth_mhz: f64) -> f64 {
    bandwidth_mhz * (1.0 + dbm_to_mw(sinr_db)).log2()
}
