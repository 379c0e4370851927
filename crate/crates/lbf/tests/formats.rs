//! End-to-end file format checks on realistic fixtures.

use std::fs::File;
use std::io::Write;

use nalgebra::DMatrix;

use lbf::io::{
    load_labels, load_matrix, load_points, load_trajectories, save_labels, save_matrix_binary,
    save_matrix_text,
};
use lbf::Error;

#[test]
fn trajectory_fixture_loads_transposed() {
    // a miniature feature-track file: 3 frames (6 coordinate rows), 4 tracks
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tracks.txt");
    let mut f = File::create(&path).unwrap();
    writeln!(f, "  10.5  210.0  13.25  99.0").unwrap();
    writeln!(f, "  20.0  110.0  23.00  45.5").unwrap();
    writeln!(f, "  11.5  211.0  14.25 100.0").unwrap();
    writeln!(f, "  21.0  111.0  24.00  46.5").unwrap();
    writeln!(f, "  12.5  212.0  15.25 101.0").unwrap();
    writeln!(f, "  22.0  112.0  25.00  47.5").unwrap();
    drop(f);

    let cloud = load_trajectories(&path, None).unwrap();
    assert_eq!(cloud.len(), 4);
    assert_eq!(cloud.ambient_dim(), 6);
    // second track, all frames, x/y interleaved by frame
    assert_eq!(
        cloud.point(1).as_slice(),
        &[210.0, 110.0, 211.0, 111.0, 212.0, 112.0]
    );

    // converting the fixture to binary preserves every bit
    let bin = dir.path().join("tracks.bin");
    save_matrix_binary(&bin, cloud.points()).unwrap();
    let back = load_matrix(&bin, None).unwrap();
    for (a, b) in cloud.points().iter().zip(back.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn sniffing_prefers_magic_and_falls_back_to_text() {
    let dir = tempfile::tempdir().unwrap();
    let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);

    let bin = dir.path().join("data.bin");
    save_matrix_binary(&bin, &m).unwrap();
    assert_eq!(load_matrix(&bin, Some(',')).unwrap(), m);

    let txt = dir.path().join("data.csv");
    save_matrix_text(&txt, &m, Some(',')).unwrap();
    assert_eq!(load_matrix(&txt, Some(',')).unwrap(), m);

    // a short text file (fewer than 4 bytes) still goes down the text path
    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "7\n").unwrap();
    assert_eq!(
        load_matrix(&tiny, Some(',')).unwrap(),
        DMatrix::from_row_slice(1, 1, &[7.0])
    );
}

#[test]
fn corrupt_binary_is_reported_with_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trunc.bin");
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    save_matrix_binary(&path, &m).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    match load_matrix(&path, None) {
        Err(Error::Io { path: p, .. }) => assert!(p.ends_with("trunc.bin")),
        other => panic!("expected io error, got {other:?}"),
    }

    // extra garbage after the payload is rejected too
    std::fs::write(&path, [bytes.as_slice(), b"x"].concat()).unwrap();
    assert!(matches!(load_matrix(&path, None), Err(Error::Parse { .. })));
}

#[test]
fn labels_fixture_with_outliers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.txt");
    let labels: Vec<i64> = vec![0, 0, 1, -1, 2, 2, -1];
    save_labels(&path, &labels).unwrap();
    assert_eq!(load_labels(&path).unwrap(), labels);

    let bad = dir.path().join("bad_labels.txt");
    std::fs::write(&bad, "0\n1\ntwo\n").unwrap();
    match load_labels(&bad) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn load_points_rejects_non_finite_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nan.csv");
    std::fs::write(&path, "1.0,2.0\nNaN,0.5\n").unwrap();
    // "NaN" parses as a float, so the failure is the cloud's finiteness check
    match load_points(&path, Some(',')) {
        Err(Error::NonFinite { row }) => assert_eq!(row, 1),
        other => panic!("expected non-finite error, got {other:?}"),
    }
}
