//! Enriched strictly pseudocontractive operators in `R^n`.
//!
//! A map `T` is `(b, k)`-enriched strictly pseudocontractive when
//!
//! ```text
//! |b(x - y) + Tx - Ty|^2 <= (b + 1)^2 |x - y|^2 + k |x - y - (Tx - Ty)|^2
//! ```
//!
//! Averaging with `lambda = 1 / (b + 1)` turns such a map into a `k`-strict
//! pseudocontraction, and Krasnoselskij or Krasnoselskij-Mann iterations on
//! the averaged map converge to a fixed point.
//!
//! * [`space`]: vectors, the Hilbert-space identities, convex domains.
//! * [`operators`]: a catalog of maps with closed-form enrichment constants.
//! * [`enrichment`]: the averaging transform and sampled inequality checkers.
//! * [`iteration`]: iteration drivers, schedules and trace audits.
//! * [`harness`]: JSON experiments, CSV/JSON artifacts and the bundled suite.
//!
//! ```
//! use fixenrich::iteration::{krasnoselskij, IterationConfig, Scheme};
//! use fixenrich::operators::OperatorSpec;
//! use fixenrich::space::Vector;
//!
//! let op = OperatorSpec::scalar(-3.0);
//! let cert = op.analytic_certificate(0.0).unwrap();
//! let x0 = Vector::new(vec![1.0]).unwrap();
//! let trace = krasnoselskij(&IterationConfig::new(op, cert, Scheme::Krasnoselskij { gamma: 0.4 }, x0)).unwrap();
//! assert!(trace.is_converged());
//! ```

// Index loops read closer to the matrix formulas, and `!(x > 0.0)` is the
// NaN-rejecting comparison on purpose.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod enrichment;
pub mod error;
pub mod harness;
pub mod iteration;
pub mod operators;
pub mod space;

// The guide's snippets run as doctests, one module per chapter.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/space.md")]
    mod space {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/enrichment.md")]
    mod enrichment {}
    #[doc = include_str!("../../../book/src/krasnoselskij.md")]
    mod krasnoselskij {}
    #[doc = include_str!("../../../book/src/mann.md")]
    mod mann {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
