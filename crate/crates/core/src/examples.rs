//! Small reference instances used throughout the tests and documentation.

use crate::instance::{Instance, InstanceBuilder, Score};

/// Two applicants tied at `c1`; `a2` also lists `c2` second. Unit quotas.
pub fn ex_a() -> Instance {
    let s = Score::points(5).0;
    InstanceBuilder::new()
        .company(0, 1)
        .company(0, 1)
        .applicant(0, &[(0, s)])
        .applicant(0, &[(0, s), (1, s)])
        .build()
}

/// Three unit-quota companies, two types (`a1..a3` and `a4, a5`), everyone
/// ranking `c1 > c2 > c3`. Raising the first type's scores shrinks the
/// number of first-type applicants matched from two to one.
pub fn ex_b() -> Instance {
    let scores: [[i64; 3]; 5] = [[5, 7, 1], [1, 1, 3], [1, 1, 1], [6, 1, 6], [2, 6, 2]];
    let mut b = InstanceBuilder::new().types(&["T1", "T2"]);
    for _ in 0..3 {
        b = b.company(0, 1);
    }
    for (i, row) in scores.iter().enumerate() {
        let ty = usize::from(i >= 3);
        let choices: Vec<(usize, i64)> = row.iter().enumerate().map(|(j, &p)| (j, Score::points(p).0)).collect();
        b = b.applicant(ty, &choices);
    }
    b.build()
}
