//! Example datasets shipped with the library.

use crate::csvio::parse_dataset;
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct BundledDataset {
    pub name: &'static str,
    pub description: &'static str,
    /// Number of studies in the source.
    pub k: usize,
    pub covariates: &'static [&'static str],
    pub source: &'static str,
    csv: Option<&'static str>,
}

impl BundledDataset {
    pub fn is_available(&self) -> bool {
        self.csv.is_some()
    }

    /// The bundled CSV text, including its provenance comment.
    pub fn csv(&self) -> Result<&'static str> {
        self.csv
            .ok_or_else(|| Error::NotBundled(self.name.to_string()))
    }

    pub fn load(&self) -> Result<Dataset> {
        parse_dataset(self.csv()?)
    }
}

static DATASETS: [BundledDataset; 4] = [
    BundledDataset {
        name: "sat",
        description: "SAT coaching experiments in eight schools (score differences)",
        k: 8,
        covariates: &[],
        source: "Rubin (1981), J. Educ. Stat. 6(4):377-401; bayesmeta R package (Rubin1981)",
        csv: Some(include_str!("../data/sat.csv")),
    },
    BundledDataset {
        name: "aspirin",
        description: "Aspirin after myocardial infarction, mortality log odds ratios",
        k: 6,
        covariates: &[],
        source: "Peto (1980), Lancet 315(8179):1172; bayesmeta R package (Peto1980)",
        csv: Some(include_str!("../data/aspirin.csv")),
    },
    BundledDataset {
        name: "no2",
        description: "NO2 exposure and childhood respiratory illness, log odds ratios",
        k: 9,
        covariates: &["gender", "smoke", "no2"],
        source: "Hasselblad, Eddy & Kotchmar (1992), J. Air Waste Manage. Assoc. 42(5):662-671; metadat R package",
        csv: None,
    },
    BundledDataset {
        name: "copd",
        description: "Tiotropium vs placebo in COPD, exacerbation log odds ratios",
        k: 22,
        covariates: &["fev1"],
        source: "Karner, Chong & Poole (2014), Cochrane Database Syst. Rev. CD009285; bayesmeta R package (KarnerEtAl2014)",
        csv: None,
    },
];

pub fn bundled() -> &'static [BundledDataset] {
    &DATASETS
}

pub fn find(name: &str) -> Result<&'static BundledDataset> {
    DATASETS
        .iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownDataset(name.to_string()))
}
