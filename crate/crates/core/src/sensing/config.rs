use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scene_grid::{ArrayGeometry, Grid};
use crate::waveforms::{
    alltop_waveforms, kerdock_family, kerdock_waveforms, read_waveforms_csv, WaveformSet,
};

use super::SensingOperator;

/// Where the transmit waveforms come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum WaveformSpec {
    Kerdock {
        p: usize,
        n_tx: usize,
        #[serde(default)]
        j_select: usize,
    },
    Alltop {
        p: usize,
        n_tx: usize,
    },
    /// A waveform CSV file.
    File {
        path: PathBuf,
    },
}

impl WaveformSpec {
    pub fn build(&self) -> Result<WaveformSet> {
        match self {
            WaveformSpec::Kerdock { p, n_tx, j_select } => {
                kerdock_waveforms(&kerdock_family(*p)?, *n_tx, *j_select)
            }
            WaveformSpec::Alltop { p, n_tx } => alltop_waveforms(*p, *n_tx),
            WaveformSpec::File { path } => read_waveforms_csv(BufReader::new(File::open(path)?)),
        }
    }
}

/// Serializable description of a [`SensingOperator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub waveforms: WaveformSpec,
    pub geometry: ArrayGeometry,
    pub n_doppler: usize,
}

impl OperatorConfig {
    pub fn build(&self) -> Result<SensingOperator> {
        let set = self.waveforms.build()?;
        let grid = Grid::new(
            set.len(),
            self.n_doppler,
            self.geometry.n_tx(),
            self.geometry.n_rx(),
        )?;
        SensingOperator::new(set, self.geometry.clone(), grid)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_grid::sample_geometry;

    #[test]
    fn json_round_trip_and_build() {
        let cfg = OperatorConfig {
            waveforms: WaveformSpec::Kerdock {
                p: 5,
                n_tx: 2,
                j_select: 1,
            },
            geometry: sample_geometry(2, 3, 9).unwrap(),
            n_doppler: 4,
        };
        let back = OperatorConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let op = back.build().unwrap();
        assert_eq!(op.grid().n_cells(), 5 * 4 * 6);

        let bad = r#"{"waveforms":{"family":"alltop","p":7,"n_tx":1},"geometry":{"tx_positions":[0.1],"rx_positions":[0.2],"seed":0},"n_doppler":3,"typo":1}"#;
        assert!(OperatorConfig::from_json(bad).is_err());
        let ok = bad.replace(r#","typo":1"#, "");
        assert_eq!(
            OperatorConfig::from_json(&ok)
                .unwrap()
                .build()
                .unwrap()
                .n_samples(),
            7
        );
    }
}
