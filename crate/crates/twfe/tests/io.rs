use std::fmt::Write as _;
use std::path::Path;

use twfe::io::{load_panel, read_panel, Schema};
use twfe::AppError;
use twfe_core::{twfe, BalanceMode, Error};

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const MINIMAL: &str = "unit,time,y,x\na,1,0,0\na,2,2,1\nb,1,0,0\nb,2,1,0\n";

#[test]
fn minimal_panel() {
    let dir = tempfile::tempdir().unwrap();
    let p = load_panel(&write(dir.path(), "p.csv", MINIMAL), &Schema::new("unit", "time")).unwrap();
    assert_eq!((p.n_units(), p.n_periods()), (2, 2));
    assert_eq!(p.periods(), &[1, 2]);
    assert!((twfe(&p, "y", "x", &[]).unwrap().beta - 1.0).abs() < 1e-12);
}

#[test]
fn missing_row_is_unbalanced() {
    let dir = tempfile::tempdir().unwrap();
    let body = "unit,time,y,x\na,1,0,0\na,2,2,1\nb,1,0,0\n";
    let err = load_panel(&write(dir.path(), "p.csv", body), &Schema::new("unit", "time")).unwrap_err();
    assert!(
        matches!(err, AppError::Panel { source: Error::UnbalancedPanel { ref unit, period: 2 }, .. } if unit == "b")
    );
    assert!(err.to_string().contains("unbalanced panel"));

    let schema = Schema { balance: BalanceMode::DropUnits, ..Schema::new("unit", "time") };
    let err = read_panel(&write(dir.path(), "q.csv", body), &schema).unwrap_err();
    // dropping b leaves a single unit
    assert!(matches!(err, AppError::Panel { .. }));
}

#[test]
fn drop_units_mode() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{MINIMAL}c,1,3,4\n");
    let schema = Schema { balance: BalanceMode::DropUnits, ..Schema::new("unit", "time") };
    let loaded = read_panel(&write(dir.path(), "p.csv", &body), &schema).unwrap();
    assert_eq!(loaded.dropped_units, 1);
    assert_eq!(loaded.rows, 5);
    assert_eq!(loaded.panel.units(), &["a".to_string(), "b".to_string()]);
}

#[test]
fn duplicate_row() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{MINIMAL}a,1,5,5\n");
    let err = load_panel(&write(dir.path(), "p.csv", &body), &Schema::new("unit", "time")).unwrap_err();
    assert!(matches!(err, AppError::Panel { source: Error::DuplicateObservation { .. }, .. }));
}

#[test]
fn non_numeric_value_names_row() {
    let dir = tempfile::tempdir().unwrap();
    let body = "unit,time,y,x\na,1,0,0\na,2,oops,1\nb,1,0,0\nb,2,1,0\n";
    let err = load_panel(&write(dir.path(), "p.csv", body), &Schema::new("unit", "time")).unwrap_err();
    match &err {
        AppError::Parse { row, column, .. } => {
            assert_eq!(*row, 3);
            assert_eq!(column, "y");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("row 3"));
    let body = "unit,time,y,x\na,1.5,0,0\n";
    let err = load_panel(&write(dir.path(), "q.csv", body), &Schema::new("unit", "time")).unwrap_err();
    assert!(matches!(err, AppError::Parse { row: 2, .. }));
}

#[test]
fn missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let schema = Schema { columns: Some(vec!["y".into(), "lemp".into()]), ..Schema::new("unit", "time") };
    let err = load_panel(&write(dir.path(), "p.csv", MINIMAL), &schema).unwrap_err();
    assert!(matches!(err, AppError::MissingColumn { ref column, .. } if column == "lemp"));
}

#[test]
fn delimiter_and_cluster_column() {
    let dir = tempfile::tempdir().unwrap();
    let body = "unit;time;region;y\na;1;n;0\na;2;n;1\nb;1;s;2\nb;2;s;0\nc;1;n;1\nc;2;n;1\n";
    let schema = Schema { delimiter: ';', cluster: Some("region".into()), ..Schema::new("unit", "time") };
    let p = load_panel(&write(dir.path(), "p.csv", body), &schema).unwrap();
    assert_eq!(p.variables().collect::<Vec<_>>(), vec!["y"]);
    assert_eq!(p.n_clusters(), 2);
    assert_eq!(p.clusters(), &[0, 1, 0]);
}

#[test]
fn row_order_is_irrelevant() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for u in 0..6 {
        for t in 2000..2005 {
            let x = ((u * 7 + t * 3) % 11) as f64 * 0.37;
            let y = x * 1.3 + ((u * u + t) % 5) as f64;
            rows.push(format!("s{u},{t},{y},{x}"));
        }
    }
    let header = "unit,time,y,x\n";
    let forward = format!("{header}{}\n", rows.join("\n"));
    rows.reverse();
    rows.swap(3, 17);
    let shuffled = format!("{header}{}\n", rows.join("\n"));
    let schema = Schema::new("unit", "time");
    let a = load_panel(&write(dir.path(), "a.csv", &forward), &schema).unwrap();
    let b = load_panel(&write(dir.path(), "b.csv", &shuffled), &schema).unwrap();
    assert_eq!(a, b);
    assert_eq!(twfe(&a, "y", "x", &[]).unwrap(), twfe(&b, "y", "x", &[]).unwrap());
}

#[test]
fn state_year_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("state,year,lemp,lmw\n");
    for s in 0..51 {
        for y in 1990..=2018 {
            writeln!(body, "st{s:02},{y},{},{}", (s * y % 97) as f64 / 10.0, (s + y) as f64 / 100.0).unwrap();
        }
    }
    let p = load_panel(&write(dir.path(), "p.csv", &body), &Schema::new("state", "year")).unwrap();
    assert_eq!((p.n_units(), p.n_periods()), (51, 29));
    assert_eq!((p.periods()[0], p.periods()[28]), (1990, 2018));
}
