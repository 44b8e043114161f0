/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Exhaustive search: the longest subsequence of `a` (over all 2^|a|
    /// subsets) that is also a subsequence of `b`.
    pub fn brute_force_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
        fn is_subsequence<T: PartialEq>(needle: &[&T], hay: &[T]) -> bool {
            let mut it = hay.iter();
            needle.iter().all(|n| it.any(|h| h == *n))
        }
        let mut best = 0;
        for mask in 0u32..(1 << a.len()) {
            let pick: Vec<&T> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
            if pick.len() > best && is_subsequence(&pick, b) {
                best = pick.len();
            }
        }
        best
    }

    /// Every sequence over `alphabet` of length `0..=max_len`.
    pub fn all_sequences(alphabet: &[char], max_len: usize) -> Vec<Vec<char>> {
        let mut out = vec![vec![]];
        let mut frontier: Vec<Vec<char>> = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &frontier {
                for &c in alphabet {
                    let mut t = s.clone();
                    t.push(c);
                    next.push(t);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(lcs_len(&[1, 2, 3, 4], &[1, 3, 4]), 3);
        assert_eq!(lcs_len::<u8>(&[], &[1]), 0);
        assert_eq!(lcs_len(&['a', 'b', 'c'], &['x', 'y', 'z']), 0);
    }

    #[test]
    fn dp_matches_exhaustive_search_up_to_length_four() {
        // the full length-6 sweep lives in the acceptance suite
        let seqs = all_sequences(&['a', 'b', 'c'], 4);
        for a in &seqs {
            for b in &seqs {
                assert_eq!(lcs_len(a, b), brute_force_lcs(a, b), "{a:?} {b:?}");
            }
        }
    }
}
