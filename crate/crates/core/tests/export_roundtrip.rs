use std::fs::File;
use std::io::BufReader;

use hardlogit::analytic;
use hardlogit::logloss;
use hardlogit::wcgen::{self, DataMatrix, ExportFormat, Variant, WorstCaseInstance};

#[test]
fn csv_and_libsvm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for variant in [Variant::FourBlock, Variant::TwoBlock] {
        let inst = WorstCaseInstance::new(7, 1.3, 1.0, variant).unwrap();
        let meta = analytic::dataset_meta(&inst).unwrap();
        let csv = dir.path().join(format!("{variant}.csv"));
        let svm = dir.path().join(format!("{variant}.libsvm"));
        wcgen::export(&inst, &meta, ExportFormat::Csv, &csv).unwrap();
        wcgen::export(&inst, &meta, ExportFormat::Libsvm, &svm).unwrap();
        let a = wcgen::parse_csv(BufReader::new(File::open(&csv).unwrap())).unwrap();
        let b = wcgen::parse_libsvm(BufReader::new(File::open(&svm).unwrap()), inst.k()).unwrap();
        assert_eq!(a.to_dense(), inst.to_dense());
        assert_eq!(b.to_dense(), inst.to_dense());
        assert_eq!(a.labels, inst.labels());
        assert_eq!(b.labels, inst.labels());

        let x = vec![0.3; inst.k()];
        let f = logloss::loss(&inst, &x).unwrap().value;
        assert_eq!(logloss::loss(&a, &x).unwrap().value, f);
    }
}

#[test]
fn sidecar_matches_analytic_profile() {
    let dir = tempfile::tempdir().unwrap();
    let inst = WorstCaseInstance::four_block(12, 1.3, 1.0).unwrap();
    let meta = analytic::dataset_meta(&inst).unwrap();
    let path = dir.path().join("meta.json");
    wcgen::export(&inst, &meta, ExportFormat::Json, &path).unwrap();
    let v: serde_json::Value = serde_json::from_reader(File::open(&path).unwrap()).unwrap();
    assert_eq!(v["N"], 48);
    assert_eq!(v["k"], 12);
    let prof = analytic::profile(&inst).unwrap();
    assert_eq!(v["f_star"].as_f64().unwrap(), prof.f_star);
    assert_eq!(v["c"].as_f64().unwrap(), prof.c);
}
