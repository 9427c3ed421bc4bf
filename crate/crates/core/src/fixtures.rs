//! Reference network: a 2.542 km feeder into a 1x8 splitter with eight
//! bobbins of drop fibre, and the matching calibration database rows.

use chrono::NaiveDate;

use crate::calibration::CalibrationRecord;
use crate::model::{Branch, NetworkDesign};

/// `(id, insertion loss dB, return loss dB, length km, loss dB/km)`
const BRANCHES: [(u32, f64, f64, f64, f64); 8] = [
    (1, 10.375, 71.14, 5.6578, 0.190),
    (2, 12.173, 59.61, 6.0108, 0.224),
    (3, 11.438, 60.14, 5.7039, 0.200),
    (4, 10.088, 73.25, 3.3251, 0.233),
    (5, 10.804, 72.18, 2.5168, 0.193),
    (6, 9.684, 78.01, 2.6294, 0.219),
    (7, 11.219, 71.94, 19.4239, 0.203),
    (8, 10.50, 72.65, 12.4718, 0.223),
];

pub const FEEDER_LENGTH_KM: f64 = 2.5420;
pub const FEEDER_LOSS_PER_KM: f64 = 0.2;

/// Database codes of the drop branches 1..=8, in order.
const CODES: [&str; 8] = [
    "PON02UDI", "PON03UDI", "PON03UDI", "PON04UDI", "PON05UDI", "PON06UDI", "PON07UDI", "PON08UDI",
];

pub fn reference_network() -> NetworkDesign {
    let branches = BRANCHES
        .iter()
        .zip(CODES)
        .map(|(&(id, il, rl, len, loss), code)| Branch {
            id,
            length_km: len,
            insertion_loss_db: il,
            loss_per_km: loss,
            return_loss_db: rl,
            connected: true,
            code: Some(code.to_string()),
            geometry: None,
        })
        .collect();
    NetworkDesign {
        feeder_length_km: FEEDER_LENGTH_KM,
        feeder_loss_per_km: FEEDER_LOSS_PER_KM,
        feeder_code: Some("PON01UDI".into()),
        splitter_ratio: 8,
        branches,
        launch_level_db: 0.0,
    }
}

/// The nine-row design database (feeder plus eight drops), external numbering
/// 01..09, all dated 2014-08-05.
pub fn reference_database() -> Vec<CalibrationRecord> {
    let date = NaiveDate::from_ymd_opt(2014, 8, 5).expect("valid date");
    let rows: [(&str, u32, f64); 9] = [
        ("PON01UDI", 1, 2.5420),
        ("PON02UDI", 2, 5.6578),
        ("PON03UDI", 3, 6.0108),
        ("PON03UDI", 4, 5.7039),
        ("PON04UDI", 5, 3.3251),
        ("PON05UDI", 6, 2.5168),
        ("PON06UDI", 7, 2.6294),
        ("PON07UDI", 8, 19.4239),
        ("PON08UDI", 9, 12.4718),
    ];
    rows.iter()
        .map(|&(code, branch, len)| CalibrationRecord::new(code, branch, len, date).expect("valid row"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_network_is_valid() {
        let d = reference_network();
        d.validate().unwrap();
        assert_eq!(d.connected_count(), 8);
        assert_eq!(d.branch(7).unwrap().length_km, 19.4239);
    }
}
