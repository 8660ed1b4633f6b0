mod common;

use gastridge::cycle::DriveCycle;
use gastridge::ga::{run_ga, GaConfig, HISTORY_HEADER};
use gastridge::lfm::VoltageTrace;
use gastridge::reference::{compute_error_series, ReferenceTrace, ERROR_HEADER};
use gastridge::stridge::SparseErrorModel;
use gastridge::{io, workflow};

use common::{planted_setup, walk};

#[test]
fn cycle_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = walk("w", 4, 300);
    let p = dir.path().join("w.csv");
    c.save_csv(&p).unwrap();
    let back = DriveCycle::load_csv(&p).unwrap();
    assert_eq!(back.current(), c.current());
    assert_eq!(back.timestamps(), c.timestamps());
}

#[test]
fn trace_reference_error_csv() {
    let dir = tempfile::tempdir().unwrap();
    let s = planted_setup(1e-3);
    let run = &s.valid_run;
    let tp = workflow::trace_path(dir.path(), "v");
    let rp = workflow::reference_path(dir.path(), "v");
    run.base.save_csv(&tp).unwrap();
    run.reference.save_csv(&rp).unwrap();
    assert_eq!(VoltageTrace::load_csv(&tp).unwrap(), run.base);
    let r = ReferenceTrace::load_csv(&rp).unwrap();
    assert_eq!(r.v_ref, run.reference.v_ref);
    assert_eq!(r.current, run.reference.current);

    let e = compute_error_series(&run.reference, &run.base).unwrap();
    io::write_csv(&workflow::error_path(dir.path(), "v"), &ERROR_HEADER, &[&run.base.t, &e]).unwrap();
    let (_, e_back) = workflow::load_pair(dir.path(), "v").unwrap();
    assert_eq!(e_back, e);
}

#[test]
fn model_json_and_history() {
    let s = planted_setup(0.0);
    let cfg = GaConfig {
        seed: 3,
        generations: 10,
        population_size: 16,
        ..GaConfig::default()
    };
    let r = run_ga(&cfg, &s.train, &s.valid, &s.lib).unwrap();
    let json = r.best.model.to_json().unwrap();
    let back = SparseErrorModel::from_json(&json).unwrap();
    assert_eq!(back, r.best.model);
    assert_eq!(back.to_json().unwrap(), json);

    let text = r.history_csv();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), HISTORY_HEADER.to_vec());
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), r.history.len());
    for (row, g) in rows.iter().zip(&r.history) {
        let best: f64 = row[1].parse().unwrap();
        assert_eq!(best, g.best_fitness);
    }
}
