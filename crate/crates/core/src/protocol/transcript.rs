use serde::{Deserialize, Serialize};

use super::config::ProtocolConfig;
use crate::bounds::BoundValue;
use crate::error::Result;
use crate::estimation::{GroupMeans, LoccEstimate};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: String,
    pub detail: String,
}

/// Sampled positions and the measured statistics shared by every
/// candidate twisting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    pub positions_x: Vec<u64>,
    /// Flattened group assignment: group `g` holds
    /// `positions_z[g * m_prime .. (g + 1) * m_prime]`.
    pub positions_z: Vec<u64>,
    pub discarded_z: Vec<u64>,
    pub m_x: u64,
    pub m_z: u64,
    pub m_prime: u64,
    pub group_means: GroupMeans,
    pub eps_x_hat: f64,
    pub candidates: Vec<LoccEstimate>,
    pub chosen: usize,
    pub eps_z_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStatus {
    pub feasible: bool,
    pub detail: String,
    /// Whether `m_x` and `m_z` came from the solver.
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub r: u64,
    pub finalf: Option<BoundValue>,
    pub insecurity: Option<BoundValue>,
    pub beta_b: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyReport {
    pub sifted_len: usize,
    pub sifted_errors: usize,
    pub sifted_a: String,
    pub sifted_b: String,
    pub syndrome_bits: u64,
    pub syndrome_bits_per_block: usize,
    pub leak_above_shannon: f64,
    pub errors_after_ec: usize,
    pub final_len: usize,
    pub pa_exhausted: bool,
    pub final_a: String,
    pub final_b: String,
    pub agreement: bool,
}

/// Matched-pair bookkeeping for prepare-and-measure runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmReport {
    pub uses_per_basis: u64,
    /// Indexed by `j_a * t + j_b`.
    pub matched_counts: Vec<u64>,
    pub surplus_discarded: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema: u32,
    pub kind: String,
    pub seed: u64,
    pub config: ProtocolConfig,
    pub events: Vec<Event>,
    pub solver: SolverStatus,
    pub estimation: Option<EstimationRecord>,
    pub pm: Option<PmReport>,
    pub eps_x_hat: Option<f64>,
    pub eps_z_hat: Option<f64>,
    pub key_rate: Option<f64>,
    pub net_key_rate: Option<f64>,
    pub abort: bool,
    pub abort_reason: Option<String>,
    pub key: Option<KeyReport>,
    pub security: SecurityReport,
}

impl Transcript {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn final_key_len(&self) -> usize {
        self.key.as_ref().map_or(0, |k| k.final_len)
    }

    /// Abort implies no key; a delivered key either agrees or is flagged.
    pub fn check_invariants(&self) -> bool {
        if self.abort {
            return self.final_key_len() == 0;
        }
        match &self.key {
            Some(k) => k.agreement == (k.final_a == k.final_b),
            None => false,
        }
    }
}

/// Packs bits MSB-first into lowercase hex; the bit count is stored
/// alongside where it matters.
pub fn bits_to_hex(bits: &[bool]) -> String {
    let bytes: Vec<u8> =
        bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b as u8) << (7 - i))).collect();
    hex::encode(bytes)
}

pub(crate) struct EventLog(pub Vec<Event>);

impl EventLog {
    pub fn push(&mut self, step: &str, detail: impl Into<String>) {
        let detail = detail.into();
        log::debug!("{step}: {detail}");
        self.0.push(Event { step: step.to_string(), detail });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_packing() {
        assert_eq!(bits_to_hex(&[]), "");
        assert_eq!(bits_to_hex(&[true]), "80");
        let bits = [false, false, false, false, true, true, true, true, true];
        assert_eq!(bits_to_hex(&bits), "0f80");
    }
}
