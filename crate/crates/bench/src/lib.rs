//! Benchmark instances shared by the criterion targets.

use costa_sos::dimension::Dimension;
use costa_sos::pipeline::{Conjecture, ProveRequest};

/// Instances quick enough to sample repeatedly, with a short label.
pub fn quick_instances() -> Vec<(&'static str, ProveRequest)> {
    vec![
        ("C2(3,1)", ProveRequest::new(Conjecture::C2, 3, Dimension::Concrete(1), true)),
        ("C2(2,n)", ProveRequest::new(Conjecture::C2, 2, Dimension::Generic, false)),
        ("C3(3,2)", ProveRequest::new(Conjecture::C3, 3, Dimension::Concrete(2), true)),
    ]
}
