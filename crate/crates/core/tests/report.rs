mod common;

use common::*;
use pfl_core::report::{
    aggregate, build_report, export, ingest, max_safe_velocity, mean_force_change, render_tables,
    Compliance, IngestOptions, ReportOptions, SafeCell, SetupKey, SkinSetting, VelocityStats,
    WindowStats,
};
use pfl_core::pfl::{BodyRegionModel, ContactKind};
use pfl_core::trace::AnalysisConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn passive_skin_lowers_transient_force_by_forty_percent() {
    let report = build_report(&passive_skin_fixture(), &ReportOptions::default()).unwrap();
    let row = report
        .force_changes
        .iter()
        .find(|r| r.target.skin == SkinSetting::Passive && r.contact_kind == ContactKind::Transient)
        .unwrap();
    assert_eq!(row.baseline, SetupKey::new("ur10e", SkinSetting::None, "pre4"));
    assert!((row.change.mean + 40.0).abs() <= 0.5, "{}", row.change.mean);
    assert_eq!(row.change.per_place.len(), 2);
    for p in &row.change.per_place {
        assert!((p.percent + 40.0).abs() <= 0.5);
    }
}

fn cells_for(report: &pfl_core::report::Report, skin: SkinSetting) -> pfl_core::report::SafeVelocityCells {
    report.safe_velocities[0]
        .setups
        .iter()
        .find(|(k, _)| k.skin == skin)
        .unwrap()
        .1
}

#[test]
fn safe_velocity_cells_cover_every_form() {
    let report = build_report(&safe_velocity_fixture(), &ReportOptions::default()).unwrap();
    assert_eq!(report.safe_velocities.len(), 1);

    let bare = cells_for(&report, SkinSetting::None);
    assert_eq!(bare.first, SafeCell::Velocity(0.3));
    assert_eq!(bare.first.to_string(), "0.3");
    assert_eq!(bare.after.to_string(), "—");
    assert_eq!(bare.overall.to_string(), "0.3");

    let passive = cells_for(&report, SkinSetting::Passive);
    assert_eq!(passive.first.to_string(), "<0.2");
    assert_eq!(passive.overall.to_string(), "<0.2");

    let active = cells_for(&report, SkinSetting::Active("E-stop".into()));
    assert_eq!(active.first.to_string(), ">0.5");
    assert_eq!(active.after.to_string(), ">0.5");
    assert_eq!(active.overall.to_string(), ">0.5");
}

#[test]
fn reference_columns_for_both_robots() {
    for (robot, ts, modified) in [("ur10e", (0.26, 0.13), (0.35, 0.26)), ("kuka_iiwa", (0.32, 0.16), (0.43, 0.32))] {
        let records: Vec<_> = safe_velocity_fixture()
            .into_iter()
            .map(|mut r| {
                r.robot = robot.into();
                r
            })
            .collect();
        let report = build_report(&records, &ReportOptions::default()).unwrap();
        let row = &report.safe_velocities[0];
        let t = row.ts.unwrap();
        let m = row.modified_ts.unwrap();
        assert_eq!((t.first, t.after), ts, "{robot}");
        assert_eq!((m.first, m.after), modified, "{robot}");
    }
}

#[test]
fn unknown_robot_has_no_reference_columns() {
    let mut records = safe_velocity_fixture();
    for r in &mut records {
        r.robot = "prototype".into();
    }
    let report = build_report(&records, &ReportOptions::default()).unwrap();
    assert!(report.safe_velocities[0].ts.is_none());
}

#[test]
fn export_then_ingest_is_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let skins = [
        SkinSetting::None,
        SkinSetting::Passive,
        SkinSetting::Active("E-stop".into()),
    ];
    let records: Vec<_> = (0..10)
        .map(|i| {
            let place = rng.gen_range(0..5u8);
            let grid: &[f64] = if place < 3 { &QUASI_STATIC_GRID } else { &TRANSIENT_GRID };
            let mut r = record(
                "ur10e",
                place,
                grid[rng.gen_range(0..grid.len())],
                skins[i % 3].clone(),
                "pre4",
                1 + i as u32,
                impact_trace(rng.gen_range(50.0..500.0), Some(rng.gen_range(0.0..150.0))),
            );
            let u = unit_vector(&mut rng);
            r.direction = [u.x, u.y, u.z];
            r
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    export(&records, dir.path()).unwrap();
    let back = ingest(dir.path(), &IngestOptions::default()).unwrap();
    assert_eq!(back, records);
}

#[test]
fn rendering_is_byte_identical() {
    let mut records = passive_skin_fixture();
    records.extend(safe_velocity_fixture());
    let report = build_report(&records, &ReportOptions::default()).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = render_tables(&report, a.path()).unwrap();
    let again = build_report(&records, &ReportOptions::default()).unwrap();
    let fb = render_tables(&again, b.path()).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let text = std::fs::read_to_string(a.path().join("force_change.csv")).unwrap();
    assert!(text.starts_with("# pfl-report format 1"));
    assert!(text.contains("-40.0"));
}

#[test]
fn empty_corpus_gives_header_only_tables() {
    let corpus = tempfile::tempdir().unwrap();
    export(&[], corpus.path()).unwrap();
    let records = ingest(corpus.path(), &IngestOptions::default()).unwrap();
    assert!(records.is_empty());
    let report = build_report(&records, &ReportOptions::default()).unwrap();
    let out = tempfile::tempdir().unwrap();
    for path in render_tables(&report, out.path()).unwrap() {
        if path.extension().unwrap() != "csv" {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), 1, "{}", path.display());
    }
}

#[test]
fn missing_manifest_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ingest(dir.path(), &IngestOptions::default()).is_err());
}

#[test]
fn force_change_against_itself_is_zero() {
    let aggs = aggregate(&passive_skin_fixture(), &AnalysisConfig::default());
    let key = SetupKey::new("ur10e", SkinSetting::None, "pre4");
    let c = mean_force_change(&aggs, &key, &key, &[3, 4]).unwrap();
    assert_eq!(c.mean, 0.0);
}

fn stats(velocity: f64, peak: f64) -> VelocityStats {
    let w = WindowStats { mean: peak, max: peak };
    VelocityStats {
        velocity,
        count: 1,
        peak: w,
        first_window: w,
        after_window: WindowStats { mean: 0.0, max: 0.0 },
    }
}

fn cell_rank(c: SafeCell) -> (u8, f64) {
    match c {
        SafeCell::BelowMin(_) => (0, 0.0),
        SafeCell::Velocity(v) => (1, v),
        SafeCell::AboveMax(_) => (2, 0.0),
        SafeCell::NoConstraint => (3, 0.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn appending_compliant_faster_velocity_never_lowers_cell(
        peaks in prop::collection::vec(30.0f64..400.0, 1..7),
        extra in 30.0f64..280.0,
    ) {
        let body = BodyRegionModel::hand();
        let v: Vec<_> = peaks.iter().enumerate().map(|(i, &p)| stats(0.2 + 0.05 * i as f64, p)).collect();
        let before = max_safe_velocity(&v, &body, Compliance::WorstOf, 20.0).unwrap().first;
        let mut more = v.clone();
        more.push(stats(0.2 + 0.05 * v.len() as f64, extra));
        let after = max_safe_velocity(&more, &body, Compliance::WorstOf, 20.0).unwrap().first;
        if let SafeCell::AboveMax(_) = before {
            prop_assert_eq!(after, SafeCell::AboveMax(0.2 + 0.05 * v.len() as f64));
        } else {
            prop_assert_eq!(after, before);
        }
    }

    #[test]
    fn raising_a_peak_never_raises_cell(
        peaks in prop::collection::vec(30.0f64..400.0, 1..7),
        idx in 0usize..7,
        bump in 0.0f64..200.0,
    ) {
        let body = BodyRegionModel::hand();
        let v: Vec<_> = peaks.iter().enumerate().map(|(i, &p)| stats(0.2 + 0.05 * i as f64, p)).collect();
        let mut worse = v.clone();
        let i = idx % v.len();
        worse[i] = stats(worse[i].velocity, worse[i].first_window.max + bump);
        let a = max_safe_velocity(&v, &body, Compliance::WorstOf, 20.0).unwrap().first;
        let b = max_safe_velocity(&worse, &body, Compliance::WorstOf, 20.0).unwrap().first;
        prop_assert!(cell_rank(b) <= cell_rank(a), "{:?} {:?}", a, b);
    }

    #[test]
    fn scaling_target_scales_force_change(factor in 1.0f64..3.0) {
        let records: Vec<_> = passive_skin_fixture()
            .into_iter()
            .filter(|r| r.skin == SkinSetting::None)
            .flat_map(|r| {
                let mut t = r.clone();
                t.skin = SkinSetting::Passive;
                t.trace = r.trace.scaled(factor).unwrap();
                [r, t]
            })
            .collect();
        let aggs = aggregate(&records, &AnalysisConfig::default());
        let c = mean_force_change(
            &aggs,
            &SetupKey::new("ur10e", SkinSetting::None, "pre4"),
            &SetupKey::new("ur10e", SkinSetting::Passive, "pre4"),
            &[3, 4],
        ).unwrap();
        prop_assert!((c.mean - 100.0 * (factor - 1.0)).abs() < 1e-9);
    }
}
