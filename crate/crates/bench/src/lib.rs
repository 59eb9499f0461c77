//! Fixtures shared by the kernel benchmarks in `benches/`.

use std::path::PathBuf;

use leafsim_core::{AmbientPoint, Complex64, Foliation, RunConfig};

/// A shipped configuration, built, with its first start point.
pub fn shipped(name: &str) -> (Foliation, AmbientPoint) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"));
    let cfg = RunConfig::load(&path).expect("shipped config loads");
    let f = cfg.build().expect("shipped config builds");
    (f, cfg.start_points()[0])
}

/// The linear model `(x, -i y, (1/2) z)` with a base point on the invariant plane.
pub fn linear_model() -> (Foliation, AmbientPoint) {
    let f = Foliation::linear(Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0), Some(Complex64::new(0.5, 0.0)))
        .expect("linear model");
    let p = AmbientPoint::new(0, &[Complex64::new(0.05, 0.01), Complex64::new(0.02, -0.03), Complex64::new(0.0, 0.0)]);
    (f, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_regular() {
        for (f, p) in [shipped("p2_degree2"), shipped("p3_degree2"), linear_model()] {
            assert!(f.dist_to_singular(&p) > 1e-3);
        }
    }
}
