//! Embedded residue scales, versioned.
//!
//! Tables are indexed by [`AminoAcid`](super::AminoAcid) discriminant
//! (alphabetical one-letter order A C D E F G H I K L M N P Q R S T V W Y).
//! Bump `SCALES_VERSION` if any value changes; serialized models record it.

/// Version tag for the embedded tables below.
pub const SCALES_VERSION: u32 = 1;

/// Kyte-Doolittle hydropathy values (Kyte & Doolittle 1982).
pub const KYTE_DOOLITTLE: [f64; 20] = [
    1.8,  // A
    2.5,  // C
    -3.5, // D
    -3.5, // E
    2.8,  // F
    -0.4, // G
    -3.2, // H
    4.5,  // I
    -3.9, // K
    3.8,  // L
    1.9,  // M
    -3.5, // N
    -1.6, // P
    -3.5, // Q
    -4.5, // R
    -0.8, // S
    -0.7, // T
    4.2,  // V
    -0.9, // W
    -1.3, // Y
];

/// Side-chain solubility values used by the Boman (2003) protein-binding
/// index: Radzicka & Wolfenden (1988) cyclohexane-to-water transfer free
/// energies in kcal/mol, hydrophilic residues positive. Proline was not
/// measured and is conventionally set to zero.
pub const BOMAN: [f64; 20] = [
    -1.81, // A
    -1.28, // C
    8.72,  // D
    6.81,  // E
    -2.98, // F
    -0.94, // G
    4.66,  // H
    -4.92, // I
    5.55,  // K
    -4.92, // L
    -2.35, // M
    6.64,  // N
    0.0,   // P
    5.54,  // Q
    14.92, // R
    3.40,  // S
    2.57,  // T
    -4.04, // V
    -2.33, // W
    -0.14, // Y
];

/// Ionizable-group pKa values (Lehninger set).
pub struct PkaTable {
    /// (residue index, pKa, +1 for basic / -1 for acidic side chains)
    pub side_chains: [(usize, f64, f64); 7],
    pub n_terminus: f64,
    pub c_terminus: f64,
}

/// Lehninger pKa values. Indices follow the alphabetical residue order.
pub const LEHNINGER_PKA: PkaTable = PkaTable {
    side_chains: [
        (2, 3.65, -1.0),  // D
        (3, 4.25, -1.0),  // E
        (1, 8.18, -1.0),  // C
        (19, 10.07, -1.0), // Y
        (6, 6.00, 1.0),   // H
        (8, 10.53, 1.0),  // K
        (14, 12.48, 1.0), // R
    ],
    n_terminus: 9.69,
    c_terminus: 2.34,
};
