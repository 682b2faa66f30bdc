//! Counter-based deterministic pseudo-randomness.
//!
//! Every stochastic quantity in the crate (workload noise, random VM
//! filters) is derived from a key hashed through splitmix64, so replay
//! never depends on evaluation order or shared generator state.

/// splitmix64 finalizer: one full mixing round over a 64-bit state.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of key parts into a single well-mixed 64-bit key.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x51af_3ae0_d7c1_b573u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// FNV-1a over a string, for salting keys with identifiers.
pub fn hash_str(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Uniform f64 in [0, 1) from a key.
pub fn unit_f64(key: u64) -> f64 {
    (splitmix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic partial Fisher-Yates: selects `take` items keyed by `key`.
/// The returned indices are in selection order.
pub fn select_indices(n: usize, take: usize, key: u64) -> Vec<usize> {
    let take = take.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut state = key;
    for i in 0..take {
        state = splitmix64(state);
        let j = i + (state % (n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(take);
    idx
}
