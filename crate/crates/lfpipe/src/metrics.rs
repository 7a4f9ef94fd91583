//! Focus metrics for refocused frames.

/// Variance of the 4-neighbor Laplacian over fully valid neighborhoods.
///
/// Standard sharpness measure: in-focus regions have strong second
/// derivatives, blur suppresses them. Returns 0 when no interior pixel has
/// a completely valid neighborhood.
pub fn variance_of_laplacian(plane: &[u8], mask: &[bool], width: usize, height: usize) -> f64 {
    assert_eq!(plane.len(), width * height);
    assert_eq!(mask.len(), width * height);
    let mut values = Vec::new();
    for y in 1..height.saturating_sub(1) {
        for x in 1..width.saturating_sub(1) {
            let i = y * width + x;
            let ok = mask[i] && mask[i - 1] && mask[i + 1] && mask[i - width] && mask[i + width];
            if !ok {
                continue;
            }
            let lap = 4.0 * f64::from(plane[i])
                - f64::from(plane[i - 1])
                - f64::from(plane[i + 1])
                - f64::from(plane[i - width])
                - f64::from(plane[i + width]);
            values.push(lap);
        }
    }
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}
