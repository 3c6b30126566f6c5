//! Small reference models used by tests, benchmarks and the README.

use crate::field::FieldSpec;
use crate::instance::Instance;
use crate::matrix::FieldMatrix;
use crate::rational::int;
use crate::set::TerminalSet;
use crate::source::{LinearSource, SourceModel};

/// Six terminals over `W = (a, b, c)` observing `a+b, a+c, b+c, a, b, c`.
/// Over GF(2) the first three are linearly dependent.
pub fn triangle_source(p: u64) -> SourceModel {
    let f = FieldSpec::prime(p);
    let rows: [[u64; 3]; 6] = [
        [1, 1, 0],
        [1, 0, 1],
        [0, 1, 1],
        [1, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
    ];
    let mats = rows
        .iter()
        .map(|r| FieldMatrix::from_rows(&f, 3, &[r.to_vec()]).unwrap())
        .collect();
    SourceModel::linear(LinearSource::new(&f, 3, mats).unwrap()).unwrap()
}

/// Triangle source with the given receiving users (0-based) and unit weights.
pub fn triangle_instance(p: u64, users: &[usize]) -> Instance {
    Instance::new(
        triangle_source(p),
        TerminalSet::from_indices(users.iter().copied()),
        vec![int(1); 6],
        None,
    )
    .unwrap()
}

/// Two users and one helper sharing four packets `w0..w3`:
/// user 0 owns `{w1, w2}`, user 1 owns `{w0, w1, w3}`, the helper owns
/// `{w0, w2}`.
pub fn two_users_one_helper() -> Instance {
    let model = SourceModel::raw(
        &FieldSpec::prime(2),
        vec![vec![1, 2], vec![0, 1, 3], vec![0, 2]],
        4,
    )
    .unwrap();
    Instance::new(model, TerminalSet::from_indices([0, 1]), vec![int(1); 3], None).unwrap()
}
