use std::io::Write;

use approxnewton::problems::{
    load_libsvm, load_libsvm_with, synthetic_spectrum_matrix, synthetic_two_class, write_libsvm, HingeSquaredSvm, LabelPolicy,
};
use approxnewton::Error;

#[test]
fn written_files_load_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic_two_class(50, 7, 1.0, 0.1, 3).unwrap();
    let path = dir.path().join("two_class.libsvm");
    write_libsvm(&data, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_libsvm(&path).unwrap();
    assert_eq!(back.features, data.features);
    assert_eq!(back.labels, data.labels);
    assert_eq!(back.name, "two_class");
}

#[test]
fn regression_targets_survive_with_raw_labels() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synthetic_spectrum_matrix(20, 3, 1.2, 1).unwrap();
    let path = dir.path().join("spectrum.txt");
    write_libsvm(&syn.data, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_libsvm_with(&path, LabelPolicy::Raw, Some(3)).unwrap();
    assert_eq!(back.labels, syn.data.labels);
}

#[test]
fn sparse_file_with_one_vs_rest_labels_feeds_an_svm() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cov.txt");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "1 1:0.5 3:1.0").unwrap();
    writeln!(f, "2 2:-1.0").unwrap();
    writeln!(f, "3 1:0.25 2:0.25 3:0.25").unwrap();
    drop(f);
    assert!(matches!(load_libsvm(&path), Err(Error::UnsupportedLabels(_))));
    let data = load_libsvm_with(&path, LabelPolicy::OneVsRest(2.0), None).unwrap();
    assert_eq!(data.labels.as_slice(), &[-1.0, 1.0, -1.0]);
    assert_eq!(data.dim(), 3);
    assert!(HingeSquaredSvm::new(&data, 1.0).is_ok());
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_libsvm("/nonexistent/file.libsvm"), Err(Error::Io(_))));
}
