//! Seed derivation and small random helpers.
//!
//! Every random stream in a run is derived from the config seed with
//! [`mix_seed`], so results do not depend on scheduling order.

use rand::Rng;

use crate::seq::{Sequence, ALPHABET};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Derives a child seed from a sequence of stream identifiers.
pub fn derive_seed(seed: u64, streams: &[u64]) -> u64 {
    streams.iter().fold(seed, |s, &x| mix_seed(s, x))
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn random_sequence<R: Rng>(rng: &mut R, length: usize) -> Sequence {
    let s: String = (0..length)
        .map(|_| ALPHABET[rng.random_range(0..20)] as char)
        .collect();
    Sequence::new(s).expect("non-empty alphabet string")
}

/// Uniform over the 19 residues different from `residue`.
pub fn random_residue_except<R: Rng>(rng: &mut R, residue: u8) -> u8 {
    loop {
        let r = ALPHABET[rng.random_range(0..20)];
        if r != residue {
            return r;
        }
    }
}

/// Copies `target` and substitutes `distance` distinct random positions.
pub fn mutate_at_distance<R: Rng>(rng: &mut R, target: &Sequence, distance: usize) -> Sequence {
    let positions = rand::seq::index::sample(rng, target.len(), distance.min(target.len()));
    let edits: Vec<(usize, u8)> = positions
        .iter()
        .map(|p| (p, random_residue_except(rng, target.as_bytes()[p])))
        .collect();
    target.with_substitutions(&edits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::hamming_edits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seeds_are_distinct() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
        assert_eq!(derive_seed(5, &[1, 2]), mix_seed(mix_seed(5, 1), 2));
    }

    #[test]
    fn mutation_distance_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_sequence(&mut rng, 100);
        let m = mutate_at_distance(&mut rng, &t, 30);
        assert_eq!(hamming_edits(&t, &m).count(), Some(30));
    }
}
