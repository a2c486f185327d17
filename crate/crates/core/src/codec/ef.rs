use crate::bits::BitStream;

/// Largest round count the 4-bit header field can carry.
pub const MAX_EF_ROUNDS: u8 = 15;

/// Marks every position where the bit differs from its predecessor
/// (the predecessor of the first bit is 0).
pub fn ef_encode(input: &BitStream) -> BitStream {
    let mut state = false;
    input
        .iter()
        .map(|b| {
            let edge = b != state;
            state = b;
            edge
        })
        .collect()
}

/// Inverse of [`ef_encode`]: the state starts at 0 and toggles on every 1.
pub fn ef_decode(input: &BitStream) -> BitStream {
    let mut state = false;
    input
        .iter()
        .map(|b| {
            state ^= b;
            state
        })
        .collect()
}

pub fn ef_decode_rounds(input: &BitStream, rounds: u8) -> BitStream {
    (0..rounds).fold(input.clone(), |acc, _| ef_decode(&acc))
}

/// Applies EF encoding 0..=`max_rounds` times and keeps the iterate with the
/// fewest 1s, preferring fewer rounds on ties.
pub fn ef_multiround(input: &BitStream, max_rounds: u8) -> (BitStream, u8) {
    let mut best = input.clone();
    let mut best_ones = best.count_ones();
    let mut best_rounds = 0;
    let mut current = input.clone();
    for round in 1..=max_rounds {
        current = ef_encode(&current);
        let ones = current.count_ones();
        if ones < best_ones {
            best = current.clone();
            best_ones = ones;
            best_rounds = round;
        }
    }
    (best, best_rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitStream {
        s.parse().unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(ef_encode(&bs("0000")), bs("0000"));
        assert_eq!(ef_encode(&bs("1111")), bs("1000"));
        assert_eq!(ef_encode(&bs("0110")), bs("0101"));
        assert_eq!(ef_encode(&BitStream::new()), BitStream::new());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(ef_decode(&bs("0000")), bs("0000"));
        assert_eq!(ef_decode(&bs("1000")), bs("1111"));
        assert_eq!(ef_decode(&bs("0101")), bs("0110"));
    }

    #[test]
    fn multiround_examples() {
        assert_eq!(ef_multiround(&bs("0000"), 15), (bs("0000"), 0));
        assert_eq!(ef_multiround(&bs("1111"), 15), (bs("1000"), 1));
    }

    #[test]
    fn multiround_is_undone_by_decoding_rounds() {
        let input = bs("1110_0111_1011_0001_1111_1110");
        let (coded, rounds) = ef_multiround(&input, 15);
        assert!(coded.count_ones() <= input.count_ones());
        assert_eq!(ef_decode_rounds(&coded, rounds), input);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(bits in proptest::collection::vec(any::<bool>(), 0..512)) {
            let b = BitStream::from_bits(bits);
            prop_assert_eq!(ef_decode(&ef_encode(&b)), b.clone());
            prop_assert_eq!(ef_encode(&ef_decode(&b)), b);
        }

        #[test]
        fn multiround_never_adds_ones(bits in proptest::collection::vec(any::<bool>(), 0..256), max in 1u8..=15) {
            let b = BitStream::from_bits(bits);
            let (out, rounds) = ef_multiround(&b, max);
            prop_assert!(out.count_ones() <= b.count_ones());
            prop_assert!(rounds <= max);
            prop_assert_eq!(ef_decode_rounds(&out, rounds), b);
        }
    }
}
