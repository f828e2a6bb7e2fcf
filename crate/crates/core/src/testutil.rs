//! Strategies shared by the property tests.

use proptest::prelude::*;

use crate::channel::ChannelSpec;

/// Probability vector of length `len` with every entry at least `floor / len`.
pub fn prob_vec(len: usize, floor: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(floor..1.0f64, len).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn symbols(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Full-support channel with the idle input outside `X` and positive costs.
pub fn channel(
    nx: std::ops::RangeInclusive<usize>,
    ny: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = ChannelSpec> {
    (nx, ny).prop_flat_map(|(nx, ny)| {
        (
            prop::collection::vec(prob_vec(ny, 0.02), nx + 1),
            prop::collection::vec(0.2..3.0f64, nx),
        )
            .prop_map(move |(q, cost)| ChannelSpec {
                x_alphabet: symbols("x", nx),
                y_alphabet: symbols("y", ny),
                star_in_x: None,
                q,
                cost,
            })
    })
}
