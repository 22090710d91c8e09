//! Symmetric triangle quadrature.

/// Six-point rule of polynomial degree four: barycentric coordinates and weights
/// summing to one (multiply by the element area).
pub const DEGREE4_RULE: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_886_319;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223_381_589_678_011_465_944;
    const A2: f64 = 0.091_576_213_509_770_743_460;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109_951_743_655_321_867_389;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};
