use metatrace::csvio::{parse_dataset, write_dataset};
use metatrace::datasets::{bundled, find};
use metatrace::*;
use sha2::{Digest, Sha256};

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn bundled_files_match_recorded_checksums() {
    let expected = [
        (
            "sat",
            "23a6dc53de315111cc8b692268450ceabb823b82ce4ef79fbdb4c93bc3491ba3",
        ),
        (
            "aspirin",
            "175b9463c49826f5275ecb2f071ba4628084cca0af65879ad9cc915ad2d8d55c",
        ),
    ];
    for (name, sum) in expected {
        assert_eq!(
            sha256_hex(find(name).unwrap().csv().unwrap()),
            sum,
            "{name}"
        );
    }
}

#[test]
fn registry_lists_four_datasets() {
    let entries: Vec<(&str, usize)> = bundled().iter().map(|d| (d.name, d.k)).collect();
    assert_eq!(
        entries,
        vec![("sat", 8), ("aspirin", 6), ("no2", 9), ("copd", 22)]
    );
    assert_eq!(find("no2").unwrap().covariates, &["gender", "smoke", "no2"]);
    assert_eq!(find("copd").unwrap().covariates, &["fev1"]);
    assert!(bundled().iter().all(|d| !d.source.is_empty()));
}

#[test]
fn sat_values() {
    let sat = find("sat").unwrap().load().unwrap();
    assert_eq!(sat.labels(), ["A", "B", "C", "D", "E", "F", "G", "H"]);
    assert_eq!(sat.y()[0], 28.39);
    assert_eq!(sat.se()[0], 14.9);
}

#[test]
fn aspirin_log_odds_ratios_follow_from_the_counts() {
    // deaths and patients, aspirin then placebo
    let counts = [
        ("UK-1", 49.0f64, 615.0, 67.0, 624.0),
        ("CDPA", 44.0, 758.0, 64.0, 771.0),
        ("GAMS", 102.0, 832.0, 126.0, 850.0),
        ("UK-2", 32.0, 317.0, 38.0, 309.0),
        ("PARIS", 85.0, 810.0, 52.0, 406.0),
        ("AMIS", 246.0, 2267.0, 219.0, 2257.0),
    ];
    let data = find("aspirin").unwrap().load().unwrap();
    for (i, (label, a, n1, c, n2)) in counts.iter().enumerate() {
        let (b, d) = (n1 - a, n2 - c);
        let y = ((a * d) / (b * c)).ln();
        let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
        assert_eq!(data.labels()[i], *label);
        assert!((data.y()[i] - y).abs() < 1e-15, "{label}");
        assert!((data.se()[i] - se).abs() < 1e-15, "{label}");
    }
}

#[test]
fn export_then_ingest_is_identical() {
    for d in bundled().iter().filter(|d| d.is_available()) {
        let data = d.load().unwrap();
        let text = write_dataset(&data, &[d.source]);
        assert_eq!(parse_dataset(&text).unwrap(), data);
    }
}

#[test]
fn unbundled_datasets_report_how_to_supply_them() {
    for name in ["no2", "copd"] {
        let err = find(name).unwrap().load().unwrap_err();
        assert_eq!(err, Error::NotBundled(name.into()));
        assert!(err.is_input_error());
    }
}

#[test]
fn covariate_columns_feed_the_design() {
    let text = "label,y,se,fev1\na,-0.3,0.2,1.1\nb,-0.1,0.3,1.6\nc,-0.4,0.25,0.9\nd,0.0,0.2,1.9\n";
    let data = parse_dataset(text).unwrap();
    let x = DesignMatrix::from_covariates(&data, &["fev1"]).unwrap();
    assert_eq!(x.column_labels(), ["intercept", "fev1"]);
    assert_eq!(x.row(2), [1.0, 0.9]);
    assert!(matches!(
        DesignMatrix::from_covariates(&data, &["age"]),
        Err(Error::UnknownCovariate(_))
    ));
}
