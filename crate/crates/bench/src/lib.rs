//! Fixed bodies shared by the benchmarks.

use affcap_core::generate::{generate_body, GenKind};
use affcap_core::{Body, Polytope, StarBody};

/// Seeded GL image of `kind` in dimension `n`.
pub fn seeded(kind: GenKind, n: usize) -> Body {
    generate_body(kind, n, 7, 20.0).expect("benchmark body")
}

/// Named bodies in dimension 3, one per representation.
pub fn zoo() -> Vec<(&'static str, Body)> {
    vec![
        ("cube", Body::from(Polytope::cube(3))),
        ("gl-cross-polytope", seeded(GenKind::GlCrossPolytope, 3)),
        ("ellipsoid", seeded(GenKind::Ellipsoid, 3)),
        (
            "qball",
            Body::from(StarBody::qball(3, 3.0).expect("q-ball")),
        ),
    ]
}
