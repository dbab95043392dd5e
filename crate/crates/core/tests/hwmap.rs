use proptest::prelude::{prop_assert, proptest};

use tau_snn::hwmap::{
    builtin_catalog, conversion_table, parse_catalog, recommend_devices, to_hardware_tau, to_software_tau, verdict,
    write_catalog, DeviceRecord, TaskRequirement, TechnologyClass, Verdict, DEFAULT_SAMPLE_RATE_HZ,
};
use tau_snn::training::Task;
use tau_snn::Error;

const LADDER: [f64; 9] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];

#[test]
fn conversion_table_at_360_hz() {
    let expected = [
        "0.0056", "0.0111", "0.0222", "0.0444", "0.0889", "0.1778", "0.3556", "0.7111", "1.4222",
    ];
    let table = conversion_table(&LADDER, DEFAULT_SAMPLE_RATE_HZ).unwrap();
    for ((_, secs), want) in table.iter().zip(expected) {
        assert_eq!(format!("{secs:.4}"), want);
    }
}

#[test]
fn ladder_round_trips() {
    for tau in LADDER {
        let back = to_software_tau(to_hardware_tau(tau, 360.0).unwrap(), 360.0).unwrap();
        assert!((back - tau).abs() <= 1e-9 * tau);
    }
}

fn verdicts(task: Task) -> Vec<(DeviceRecord, Verdict)> {
    recommend_devices(&TaskRequirement::for_task(task), &builtin_catalog()).unwrap()
}

fn failing_names(task: Task) -> Vec<String> {
    verdicts(task)
        .into_iter()
        .filter(|(_, v)| *v == Verdict::Fail)
        .map(|(d, _)| d.name)
        .collect()
}

#[test]
fn static_task_accepts_every_device() {
    assert!(verdicts(Task::Static).iter().all(|(_, v)| *v == Verdict::Pass));
}

#[test]
fn dynamic_task_fails_only_hfo2_among_fixed_values() {
    let fixed_fails: Vec<_> = verdicts(Task::Dynamic)
        .into_iter()
        .filter(|(d, v)| d.is_fixed_value() && *v == Verdict::Fail)
        .map(|(d, _)| d.name)
        .collect();
    assert_eq!(fixed_fails, vec!["High-k HfO₂ Transistor"]);
    assert_eq!(failing_names(Task::Dynamic), vec!["High-k HfO₂ Transistor"]);
}

#[test]
fn series_task_verdicts() {
    assert_eq!(
        failing_names(Task::Series),
        vec!["High-k HfO₂ Transistor", "Ferroelectric Memristor"]
    );
    let v = verdicts(Task::Series);
    let of = |name: &str| v.iter().find(|(d, _)| d.name.starts_with(name)).unwrap().1;
    assert_eq!(of("Li-based"), Verdict::Pass);
    assert_eq!(of("TiO₂:ZnO"), Verdict::Partial);
    assert_eq!(of("Standard CMOS"), Verdict::Partial);
    assert_eq!(of("Organic Ferroelectric FTJ"), Verdict::Pass);
}

#[test]
fn catalog_csv_round_trip() {
    let mut buf = Vec::new();
    write_catalog(&mut buf, &builtin_catalog()).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("name,technology_class,tau_min_s,tau_max_s,reference\n"));
    assert_eq!(parse_catalog(buf.as_slice()).unwrap(), builtin_catalog());
}

#[test]
fn malformed_catalog_rows_name_their_line() {
    let csv = "name,technology_class,tau_min_s,tau_max_s,reference\n\
               ok,memristor,0.1,0.2,[1]\n\
               bad,memristor,0.5,0.2,[2]\n";
    match parse_catalog(csv.as_bytes()) {
        Err(Error::Catalog { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected catalog error, got {other:?}"),
    }
    let csv = "name,technology_class,tau_min_s,tau_max_s,reference\nx,vacuum-tube,1,2,[3]\n";
    assert!(matches!(
        parse_catalog(csv.as_bytes()),
        Err(Error::Catalog { line: 2, .. })
    ));
    assert!(recommend_devices(&TaskRequirement::for_task(Task::Series), &[]).is_err());
}

proptest! {
    #[test]
    fn conversion_is_linear(tau in 1.0f64..1e4, a in 1.0f64..64.0, rate in 1.0f64..1e5) {
        let lhs = to_hardware_tau(a * tau, rate).unwrap();
        let rhs = a * to_hardware_tau(tau, rate).unwrap();
        prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * lhs.abs());
    }

    #[test]
    fn raising_the_requirement_never_turns_fail_into_pass(lo in 1e-4f64..10.0, span in 0.0f64..10.0, thr in 1e-4f64..10.0, up in 0.0f64..10.0) {
        let dev = DeviceRecord::new("d", TechnologyClass::Transistor, lo, lo + span, "").unwrap();
        let before = verdict(&dev, &TaskRequirement { task: Task::Series, min_tau_s: Some(thr) });
        let after = verdict(&dev, &TaskRequirement { task: Task::Series, min_tau_s: Some(thr + up) });
        prop_assert!(!(before == Verdict::Fail && after == Verdict::Pass));
        prop_assert!(!(before == Verdict::Fail && after == Verdict::Partial));
    }
}
