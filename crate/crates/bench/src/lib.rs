//! Fixtures shared by the benchmarks.

use qif_core::{corpus_family, CorpusId, ProgramFamily};

pub fn family(id: CorpusId, l: &str) -> ProgramFamily {
    corpus_family(id, &[("L".to_string(), l.to_string())]).expect("valid corpus binding")
}

/// The families used for comparison benchmarks, all defined on `2^k`, `k >= 2`.
pub fn comparison_families() -> Vec<ProgramFamily> {
    vec![
        family(CorpusId::P4, "N/2"),
        family(CorpusId::P4, "3logN"),
        family(CorpusId::P5, "4"),
        family(CorpusId::P6, "2"),
        family(CorpusId::P7, "1"),
    ]
}
