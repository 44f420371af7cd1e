use std::collections::HashMap;

/// Centre of the most populated bin among bins of width `h` centred on the
/// multiples of `h`; ties go to the bin nearest zero.
pub(crate) fn mode_bin_center(values: &[f64], h: f64) -> f64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &v in values {
        *counts.entry((v / h).round() as i64).or_default() += 1;
    }
    let (idx, _) = counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.abs().cmp(&a.0.abs())))
        .expect("nonempty sample");
    idx as f64 * h
}
