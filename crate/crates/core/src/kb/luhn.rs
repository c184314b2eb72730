#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LuhnError {
    #[error("empty digit string")]
    Empty,
    #[error("non-digit character {0:?} at position {1}")]
    NonDigit(char, usize),
}

/// Returns whether the Luhn checksum of `digits` is zero mod 10.
pub fn luhn_check(digits: &str) -> Result<bool, LuhnError> {
    if digits.is_empty() {
        return Err(LuhnError::Empty);
    }
    if let Some((i, c)) = digits.char_indices().find(|(_, c)| !c.is_ascii_digit()) {
        return Err(LuhnError::NonDigit(c, i));
    }
    Ok(luhn_digits(digits.bytes().map(|b| b - b'0')))
}

/// Luhn over raw digit values, rightmost digit first in the doubling cycle.
pub(crate) fn luhn_digits<I>(digits: I) -> bool
where
    I: DoubleEndedIterator<Item = u8>,
{
    let sum: u32 = digits
        .rev()
        .enumerate()
        .map(|(i, d)| {
            let d = d as u32;
            if i % 2 == 1 {
                let x = d * 2;
                if x > 9 {
                    x - 9
                } else {
                    x
                }
            } else {
                d
            }
        })
        .sum();
    sum.is_multiple_of(10)
}

/// Computes the check digit that makes `payload` followed by it Luhn-valid.
pub fn luhn_check_digit(payload: &[u8]) -> u8 {
    for d in 0..10u8 {
        if luhn_digits(payload.iter().copied().chain(std::iter::once(d))) {
            return d;
        }
    }
    unreachable!("one of ten check digits always satisfies Luhn")
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent formulation: double every second digit counting from the
    // right by summing the decimal digits of the product.
    fn oracle(s: &str) -> bool {
        let mut total = 0u32;
        for (i, c) in s.chars().rev().enumerate() {
            let mut d = c.to_digit(10).unwrap();
            if i % 2 == 1 {
                d *= 2;
                d = d / 10 + d % 10;
            }
            total += d;
        }
        total.is_multiple_of(10)
    }

    #[test]
    fn known_values() {
        assert_eq!(luhn_check("0"), Ok(true));
        assert!(oracle("4539578763621486"));
        assert_eq!(luhn_check("4539578763621486"), Ok(true));
        assert!(!oracle("4539578763621487"));
        assert_eq!(luhn_check("4539578763621487"), Ok(false));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(luhn_check(""), Err(LuhnError::Empty));
        assert_eq!(luhn_check("12a4"), Err(LuhnError::NonDigit('a', 2)));
    }

    #[test]
    fn check_digit_completes_payload() {
        let payload = [4, 5, 3, 9, 5, 7, 8, 7, 6, 3, 6, 2, 1, 4, 8];
        assert_eq!(luhn_check_digit(&payload), 6);
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_oracle(s in "[0-9]{1,30}") {
            proptest::prop_assert_eq!(luhn_check(&s).unwrap(), oracle(&s));
        }
    }
}
