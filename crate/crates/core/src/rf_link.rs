//! Free-space link budget: received power, SNR, MCS rate lookup and the
//! inversion of path loss into a maximum serving distance.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// IEEE 802.11ac, 160 MHz channel: minimum SNR per MCS and aggregate rate.
pub const DEFAULT_MCS_CSV: &str = include_str!("../data/mcs_80211ac_160mhz.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Transmit power, dBm.
    pub tx_power: f64,
    /// Noise power, dBm. Treated as constant.
    pub noise_power: f64,
    /// Carrier frequency, Hz.
    pub frequency: f64,
    /// Extra SNR demanded on top of each MCS threshold, dB.
    pub snr_margin: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            tx_power: 20.0,
            noise_power: -85.0,
            frequency: 5.25e9,
            snr_margin: 1.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(PlanError::domain(format!(
                "frequency must be positive, got {}",
                self.frequency
            )));
        }
        if !(self.snr_margin >= 0.0) {
            return Err(PlanError::domain(format!(
                "SNR margin must be non-negative, got {}",
                self.snr_margin
            )));
        }
        if !self.tx_power.is_finite() || !self.noise_power.is_finite() {
            return Err(PlanError::domain("transmit and noise power must be finite"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    /// Distance at which free-space path gain is exactly 0 dB.
    pub fn unity_gain_distance(&self) -> f64 {
        self.wavelength() / (4.0 * PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    #[serde(rename = "min_snr_db")]
    pub min_snr: f64,
    #[serde(rename = "aggregate_rate_mbps")]
    pub aggregate_rate: f64,
}

/// SNR-threshold to aggregate-rate steps, strictly increasing in both columns.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(PlanError::Parse("MCS table has no entries".into()));
        }
        for e in &entries {
            if !e.min_snr.is_finite() || !(e.aggregate_rate > 0.0) || !e.aggregate_rate.is_finite() {
                return Err(PlanError::Parse(format!("invalid MCS entry {e:?}")));
            }
        }
        for w in entries.windows(2) {
            if !(w[1].min_snr > w[0].min_snr) || !(w[1].aggregate_rate > w[0].aggregate_rate) {
                return Err(PlanError::Parse(format!(
                    "MCS entries must be strictly increasing: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["min_snr_db", "aggregate_rate_mbps"] {
            return Err(PlanError::Parse(format!(
                "MCS table header must be `min_snr_db,aggregate_rate_mbps`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<McsEntry>, _>>()?;
        Self::new(entries)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("min_snr_db,aggregate_rate_mbps\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.min_snr, e.aggregate_rate));
        }
        out
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn min_threshold(&self) -> f64 {
        self.entries[0].min_snr
    }

    pub fn max_rate(&self) -> f64 {
        self.entries[self.entries.len() - 1].aggregate_rate
    }

    /// Highest entry whose threshold is met by `snr`.
    pub fn entry_for_snr(&self, snr: f64) -> Option<&McsEntry> {
        let idx = self.entries.partition_point(|e| e.min_snr <= snr);
        idx.checked_sub(1).map(|i| &self.entries[i])
    }

    /// Lowest entry whose fair share over `n_sharing` users covers `required_rate`.
    pub fn min_entry_for_rate(&self, required_rate: f64, n_sharing: usize) -> Option<&McsEntry> {
        let n = n_sharing as f64;
        self.entries.iter().find(|e| e.aggregate_rate / n >= required_rate)
    }
}

impl Default for McsTable {
    fn default() -> Self {
        Self::from_reader(DEFAULT_MCS_CSV.as_bytes()).expect("shipped MCS table is valid")
    }
}

/// Received power in dBm under free-space path loss.
pub fn received_power(budget: &LinkBudget, distance: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(PlanError::domain(format!("distance must be positive, got {distance}")));
    }
    Ok(budget.tx_power + 20.0 * (budget.wavelength() / (4.0 * PI * distance)).log10())
}

pub fn snr(budget: &LinkBudget, distance: f64) -> Result<f64> {
    Ok(received_power(budget, distance)? - budget.noise_power)
}

/// Per-user fair-share rate in Mbit/s; zero below the lowest threshold.
pub fn rate_for_snr(table: &McsTable, snr: f64, n_sharing: usize) -> f64 {
    debug_assert!(n_sharing >= 1);
    table
        .entry_for_snr(snr)
        .map_or(0.0, |e| e.aggregate_rate / n_sharing.max(1) as f64)
}

/// SNR (including the budget's margin) a user with `required_rate` needs
/// when `n_sharing` users share the channel.
pub fn target_snr(budget: &LinkBudget, table: &McsTable, required_rate: f64, n_sharing: usize) -> Result<f64> {
    if !(required_rate > 0.0) || n_sharing == 0 {
        return Err(PlanError::domain(format!(
            "required rate must be positive and n_sharing >= 1 (got {required_rate}, {n_sharing})"
        )));
    }
    table
        .min_entry_for_rate(required_rate, n_sharing)
        .map(|e| e.min_snr + budget.snr_margin)
        .ok_or(PlanError::RateUnreachable {
            required_rate,
            n_sharing,
        })
}

/// Largest distance at which the link still meets the SNR of the smallest
/// MCS entry whose fair share covers `required_rate`, plus the margin.
pub fn max_distance_for_rate(
    budget: &LinkBudget,
    table: &McsTable,
    required_rate: f64,
    n_sharing: usize,
) -> Result<f64> {
    let target = target_snr(budget, table, required_rate, n_sharing)?;
    Ok(distance_for_snr(budget, target))
}

/// Inverse of [`snr`].
pub fn distance_for_snr(budget: &LinkBudget, snr: f64) -> f64 {
    budget.unity_gain_distance() * 10f64.powf((budget.tx_power - budget.noise_power - snr) / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn budget() -> LinkBudget {
        LinkBudget::default()
    }

    #[test]
    fn received_power_at_one_metre() {
        let p = received_power(&budget(), 1.0).unwrap();
        assert!((p - (-26.85)).abs() < 0.05, "{p}");
    }

    #[test]
    fn doubling_distance_costs_six_db() {
        let b = budget();
        for d in [0.3, 1.0, 17.0, 420.0] {
            let drop = received_power(&b, d).unwrap() - received_power(&b, 2.0 * d).unwrap();
            assert!((drop - 20.0 * 2f64.log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn unity_gain_point() {
        let b = budget();
        let d = b.wavelength() / (4.0 * PI);
        assert!((received_power(&b, d).unwrap() - b.tx_power).abs() < 1e-12);
        assert!((snr(&b, d).unwrap() - 105.0).abs() < 1e-12);
    }

    #[test]
    fn snr_examples() {
        let b = budget();
        assert!((snr(&b, 1.0).unwrap() - 58.15).abs() < 0.05);
        let noisy = LinkBudget {
            noise_power: -82.0,
            ..b
        };
        let diff = snr(&b, 33.0).unwrap() - snr(&noisy, 33.0).unwrap();
        assert!((diff - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_distance_rejected() {
        assert!(matches!(received_power(&budget(), 0.0), Err(PlanError::Domain(_))));
        assert!(matches!(snr(&budget(), -3.0), Err(PlanError::Domain(_))));
    }

    #[test]
    fn rate_lookup_examples() {
        let t = McsTable::default();
        assert_eq!(rate_for_snr(&t, 13.1, 1), 53.0);
        assert!((rate_for_snr(&t, 22.6, 5) - 57.4).abs() < 1e-12);
        assert_eq!(rate_for_snr(&t, 13.0, 1), 0.0);
        assert_eq!(rate_for_snr(&t, 99.0, 1), 553.0);
    }

    #[test]
    fn max_distance_examples() {
        let b = budget();
        let t = McsTable::default();
        let d = max_distance_for_rate(&b, &t, 53.0, 1).unwrap();
        assert!((d - 159.5).abs() < 0.5, "{d}");
        let d0 = max_distance_for_rate(&LinkBudget { snr_margin: 0.0, ..b }, &t, 53.0, 1).unwrap();
        assert!(d0 > d);
        assert!(matches!(
            max_distance_for_rate(&b, &t, 554.0, 1),
            Err(PlanError::RateUnreachable { .. })
        ));
    }

    #[test]
    fn round_trip_every_entry() {
        let b = budget();
        let t = McsTable::default();
        for e in t.entries() {
            for n in 1..=4 {
                let d = max_distance_for_rate(&b, &t, e.aggregate_rate / n as f64, n).unwrap();
                assert!(snr(&b, d).unwrap() >= e.min_snr + b.snr_margin - 1e-9);
            }
        }
    }

    #[test]
    fn shipped_table_is_table_one() {
        let t = McsTable::default();
        let expect = [
            (13.1, 53.0),
            (13.6, 103.0),
            (16.1, 152.0),
            (19.5, 198.0),
            (22.6, 287.0),
            (27.1, 368.0),
            (28.4, 405.0),
            (29.9, 447.0),
            (34.1, 518.0),
            (35.3, 553.0),
        ];
        let got: Vec<_> = t.entries().iter().map(|e| (e.min_snr, e.aggregate_rate)).collect();
        assert_eq!(got, expect);
        assert_eq!(t.to_csv_string(), DEFAULT_MCS_CSV);
    }

    #[test]
    fn unsorted_table_rejected() {
        let csv = "min_snr_db,aggregate_rate_mbps\n14,100\n13,120\n";
        assert!(McsTable::from_reader(csv.as_bytes()).is_err());
        let csv = "snr,rate\n13,100\n";
        assert!(McsTable::from_reader(csv.as_bytes()).is_err());
    }

    #[test]
    fn rate_lookup_matches_linear_scan() {
        use rand::{Rng, SeedableRng};
        let t = McsTable::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let s: f64 = rng.gen_range(0.0..45.0);
            let n: usize = rng.gen_range(1..=12);
            let mut oracle = 0.0;
            for e in t.entries() {
                if e.min_snr <= s {
                    oracle = e.aggregate_rate / n as f64;
                }
            }
            assert_eq!(rate_for_snr(&t, s, n), oracle);
        }
    }

    proptest! {
        #[test]
        fn received_power_strictly_decreasing(d in 0.01f64..1000.0, k in 1.0001f64..10.0) {
            let b = budget();
            prop_assert!(received_power(&b, d * k).unwrap() < received_power(&b, d).unwrap());
        }

        #[test]
        fn rate_step_function(s1 in 0.0f64..45.0, s2 in 0.0f64..45.0, n in 1usize..20) {
            let t = McsTable::default();
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(rate_for_snr(&t, lo, n) <= rate_for_snr(&t, hi, n));
            prop_assert!((rate_for_snr(&t, hi, n) * n as f64 - rate_for_snr(&t, hi, 1)).abs() < 1e-9);
        }
    }
}
