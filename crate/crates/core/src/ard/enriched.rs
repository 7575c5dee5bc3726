use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NsumError, Result};

/// Sample drawn from the hidden population itself: for each member, how many
/// alters they know and how many of those are aware of their membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedArd {
    pub member_ids: Vec<String>,
    pub out_reports: Vec<u32>,
    pub aware_counts: Vec<u32>,
    /// Inclusion probability of each member in the hidden-population sample.
    pub inclusion_probs: Vec<f64>,
    /// Size of the frame population the main survey samples from.
    pub frame_total: u64,
}

impl EnrichedArd {
    pub fn hidden_sample_size(&self) -> usize {
        self.member_ids.len()
    }

    pub fn check(&self) -> Result<()> {
        let m = self.member_ids.len();
        if m == 0 {
            return Err(NsumError::InvalidInput("enriched sample is empty".into()));
        }
        if self.out_reports.len() != m || self.aware_counts.len() != m || self.inclusion_probs.len() != m {
            return Err(NsumError::InvalidInput("enriched ARD columns differ in length".into()));
        }
        if self.frame_total == 0 {
            return Err(NsumError::InvalidInput("frame total must be positive".into()));
        }
        for i in 0..m {
            if self.aware_counts[i] > self.out_reports[i] {
                return Err(NsumError::InvalidInput(format!(
                    "member {}: aware count {} exceeds out reports {}",
                    self.member_ids[i], self.aware_counts[i], self.out_reports[i]
                )));
            }
            let p = self.inclusion_probs[i];
            if !(p > 0.0 && p <= 1.0) {
                return Err(NsumError::InvalidInput(format!(
                    "member {}: inclusion probability {p} outside (0, 1]",
                    self.member_ids[i]
                )));
            }
        }
        Ok(())
    }
}

/// Reads `member_id,out_reports,aware_counts,inclusion_prob`.
pub fn load_enriched(path: &Path, frame_total: u64) -> Result<EnrichedArd> {
    let text = fs::read_to_string(path).map_err(|e| NsumError::io(path, e))?;
    let out = parse_enriched(&text, frame_total)?;
    out.check()?;
    Ok(out)
}

pub fn parse_enriched(text: &str, frame_total: u64) -> Result<EnrichedArd> {
    #[derive(Deserialize)]
    struct Row {
        member_id: String,
        out_reports: u32,
        aware_counts: u32,
        inclusion_prob: f64,
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut e = EnrichedArd {
        member_ids: Vec::new(),
        out_reports: Vec::new(),
        aware_counts: Vec::new(),
        inclusion_probs: Vec::new(),
        frame_total,
    };
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|err| NsumError::Parse {
            line: err.position().map_or(0, |p| p.line()),
            column: 0,
            message: err.to_string(),
        })?;
        e.member_ids.push(row.member_id);
        e.out_reports.push(row.out_reports);
        e.aware_counts.push(row.aware_counts);
        e.inclusion_probs.push(row.inclusion_prob);
    }
    Ok(e)
}

pub fn render_enriched(e: &EnrichedArd) -> String {
    let mut s = String::from("member_id,out_reports,aware_counts,inclusion_prob\n");
    for i in 0..e.member_ids.len() {
        s.push_str(&format!(
            "{},{},{},{}\n",
            e.member_ids[i], e.out_reports[i], e.aware_counts[i], e.inclusion_probs[i]
        ));
    }
    s
}

pub fn save_enriched(e: &EnrichedArd, path: &Path) -> Result<()> {
    fs::write(path, render_enriched(e)).map_err(|err| NsumError::io(path, err))
}
