//! Renyi-entropy leakage of deterministic single-input single-output programs.
//!
//! A program with a uniform secret input `A` induces an output distribution;
//! its order-`a` leakage is the Renyi entropy `H_a(O)` of that distribution.
//! The crate computes these leakages exactly from integer channel counts,
//! compares programs through the asymptotics of their min-entropy leakage
//! ratio, classifies leakage levels and constructs pairs of programs that
//! different orders rank in opposite ways.
//!
//! ```
//! use qif_core::{corpus_family, leakage, CorpusId, RenyiOrder};
//!
//! let p2 = corpus_family(CorpusId::P2, &[]).unwrap();
//! assert_eq!(leakage(&p2, 1 << 16, RenyiOrder::Infinity).unwrap(), 3.0);
//! ```

pub mod comparator;
pub mod distributions;
pub mod entropy;
pub mod leakage;
pub mod programs;
pub mod witness;

pub use comparator::{
    classify_level, compare, compare_at_order, compare_series, estimate_ratio_limits, order_ratio_bounds,
    BoundednessReport, ComparatorError, Comparison, EstimatorConfig, Limit, RateClass, RateTag, RatioEstimate, Verdict,
};
pub use distributions::{Distribution, DistributionError, Run};
pub use entropy::{peak_ratio, renyi_entropy, t_alpha, Alpha, EntropyError, RenyiOrder};
pub use leakage::{
    alt_leakage, finite_order_check, leakage, leakage_series, leakage_series_multi, FiniteOrderReport, LeakageError,
    LeakageSeries, OrderClass, SeriesPoint, SizeSchedule,
};
pub use programs::{
    closed_form_matches_enumeration, corpus_family, enumerate_channel, enumerate_channels, parse_program, Bindings,
    CorpusId, CorpusProgram, ProgramAst, ProgramError, ProgramFamily, Threshold, DEFAULT_ENUM_CAP,
};
pub use witness::{
    build_conflict_witness, build_finite_gap_witness, verify_witness, Certification, ConflictWitness, FiniteGapWitness,
    Witness, WitnessCase, WitnessDistribution, WitnessError,
};
