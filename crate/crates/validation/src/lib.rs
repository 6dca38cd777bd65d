//! Holds the acceptance test target; run with `cargo test -p nvx-validation -- --nocapture`.
