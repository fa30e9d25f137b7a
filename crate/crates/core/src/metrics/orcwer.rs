use crate::error::{Error, Result};
use crate::io::TranscriptSegment;

use super::levenshtein::{align, count_ops, EditCounts, EditOp};
use super::{WerAssignment, WerReport};

/// Largest number of hypothesis channels accepted.
pub const MAX_ORC_CHANNELS: usize = 4;

/// Largest number of memoized cost cells (segments + 1 times joint channel positions).
const MAX_STATES: usize = 1 << 25;

/// Optimal reference combination of segments onto channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OrcAlignment {
    pub counts: EditCounts,
    /// Output channel of each reference segment.
    pub assignment: Vec<usize>,
    /// For each channel: `(segment, word)` of every reference word routed to it,
    /// in order, and the alignment of those words against the channel.
    pub channels: Vec<ChannelAlignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAlignment {
    pub ref_words: Vec<(usize, usize)>,
    pub ops: Vec<EditOp>,
}

struct Space {
    lens: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl Space {
    fn new(lens: Vec<usize>) -> Option<Self> {
        let mut strides = Vec::with_capacity(lens.len());
        let mut size = 1usize;
        for &l in &lens {
            strides.push(size);
            size = size.checked_mul(l + 1)?;
        }
        Some(Space { lens, strides, size })
    }

    fn coord(&self, idx: usize, c: usize) -> usize {
        (idx / self.strides[c]) % (self.lens[c] + 1)
    }

    /// Indices of all states whose coordinate `c` is zero.
    fn line_bases(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.size).filter(move |&i| self.coord(i, c) == 0)
    }
}

/// Cost of aligning `seg` against `h[x..y]` for every start `x` and the
/// cheapest end `y >= x`, where ending at `y` costs an extra `f[y]`.
fn backward_line<T: PartialEq>(seg: &[T], h: &[T], f: &[u32], out: &mut [u32]) {
    let l = h.len();
    // g[x] for the current suffix of seg; starts with the empty suffix.
    let mut g = vec![0u32; l + 1];
    g[l] = f[l];
    for x in (0..l).rev() {
        g[x] = f[x].min(g[x + 1] + 1);
    }
    let mut next = vec![0u32; l + 1];
    for word in seg.iter().rev() {
        next[l] = g[l] + 1;
        for x in (0..l).rev() {
            let diag = g[x + 1] + u32::from(*word != h[x]);
            next[x] = (g[x] + 1).min(next[x + 1] + 1).min(diag);
        }
        std::mem::swap(&mut g, &mut next);
    }
    out.copy_from_slice(&g);
}

/// Forward counterpart: start at `x` with cost `f[x]` and report the cheapest
/// cost of ending at each `y` after consuming all of `seg`.
fn forward_line<T: PartialEq>(seg: &[T], h: &[T], f: &[u32]) -> Vec<u32> {
    let l = h.len();
    let mut g = vec![0u32; l + 1];
    g[0] = f[0];
    for y in 1..=l {
        g[y] = f[y].min(g[y - 1].saturating_add(1));
    }
    let mut next = vec![0u32; l + 1];
    for word in seg {
        next[0] = g[0].saturating_add(1);
        for y in 1..=l {
            let diag = g[y - 1].saturating_add(u32::from(*word != h[y - 1]));
            next[y] = g[y]
                .saturating_add(1)
                .min(next[y - 1].saturating_add(1))
                .min(diag);
        }
        std::mem::swap(&mut g, &mut next);
    }
    g
}

/// Minimum total edits over all assignments of reference segments to channels,
/// each channel scored by Levenshtein distance against the concatenation of its
/// segments. Among optimal assignments the lexicographically smallest channel
/// vector is chosen.
pub fn orc_align<T: PartialEq>(segments: &[Vec<T>], channels: &[Vec<T>]) -> Result<OrcAlignment> {
    if channels.is_empty() {
        return Err(Error::input("ORC-WER needs at least one hypothesis channel"));
    }
    if channels.len() > MAX_ORC_CHANNELS {
        return Err(Error::Budget(format!(
            "ORC-WER supports at most {MAX_ORC_CHANNELS} channels, got {}",
            channels.len()
        )));
    }
    let space = Space::new(channels.iter().map(Vec::len).collect())
        .filter(|s| s.size.saturating_mul(segments.len() + 1) <= MAX_STATES)
        .ok_or_else(|| {
            Error::Budget("ORC-WER state space too large for this session".to_string())
        })?;
    let n = segments.len();

    // cost_to_go[k][p]: best cost for segments k.. given channel prefixes p consumed.
    let mut cost_to_go: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    cost_to_go[n] = (0..space.size)
        .map(|i| {
            (0..channels.len())
                .map(|c| (space.lens[c] - space.coord(i, c)) as u32)
                .sum()
        })
        .collect();
    for k in (0..n).rev() {
        let after = &cost_to_go[k + 1];
        let mut here = vec![u32::MAX; space.size];
        for (c, h) in channels.iter().enumerate() {
            let stride = space.strides[c];
            let mut f = vec![0u32; h.len() + 1];
            let mut out = vec![0u32; h.len() + 1];
            for base in space.line_bases(c) {
                for (x, v) in f.iter_mut().enumerate() {
                    *v = after[base + x * stride];
                }
                backward_line(&segments[k], h, &f, &mut out);
                for (x, &v) in out.iter().enumerate() {
                    let cell = &mut here[base + x * stride];
                    *cell = (*cell).min(v);
                }
            }
        }
        cost_to_go[k] = here;
    }
    let best = cost_to_go[0][0];

    // Forward pass: keep the states reachable on optimal paths and commit to the
    // smallest channel that keeps the optimum attainable.
    let mut frontier: Vec<(usize, u32)> = vec![(0, 0)];
    let mut assignment = Vec::with_capacity(n);
    for k in 0..n {
        let after = &cost_to_go[k + 1];
        let mut chosen = None;
        for (c, h) in channels.iter().enumerate() {
            let stride = space.strides[c];
            let mut lines: std::collections::BTreeMap<usize, Vec<u32>> = Default::default();
            for &(idx, cost) in &frontier {
                let x = space.coord(idx, c);
                let f = lines
                    .entry(idx - x * stride)
                    .or_insert_with(|| vec![u32::MAX; h.len() + 1]);
                f[x] = f[x].min(cost);
            }
            let mut next = Vec::new();
            for (base, f) in lines {
                let g = forward_line(&segments[k], h, &f);
                for (y, &v) in g.iter().enumerate() {
                    let idx = base + y * stride;
                    if v != u32::MAX && v + after[idx] == best {
                        next.push((idx, v));
                    }
                }
            }
            if !next.is_empty() {
                chosen = Some((c, next));
                break;
            }
        }
        let (c, next) = chosen
            .ok_or_else(|| Error::Invariant("ORC-WER traceback lost the optimum".to_string()))?;
        assignment.push(c);
        frontier = next;
    }

    let mut per_channel = Vec::with_capacity(channels.len());
    let mut counts = EditCounts::default();
    for (c, h) in channels.iter().enumerate() {
        let ref_words: Vec<(usize, usize)> = assignment
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a == c)
            .flat_map(|(s, _)| (0..segments[s].len()).map(move |w| (s, w)))
            .collect();
        let words: Vec<&T> = ref_words.iter().map(|&(s, w)| &segments[s][w]).collect();
        let hyp: Vec<&T> = h.iter().collect();
        let ops = align(&words, &hyp);
        counts.add(&count_ops(&ops));
        per_channel.push(ChannelAlignment { ref_words, ops });
    }
    if counts.distance != best as usize {
        return Err(Error::Invariant(format!(
            "ORC-WER alignment totals {} edits, expected {best}",
            counts.distance
        )));
    }
    Ok(OrcAlignment {
        counts,
        assignment,
        channels: per_channel,
    })
}

pub(crate) fn check_sorted(segments: &[TranscriptSegment]) -> Result<()> {
    if let Some(w) = segments.windows(2).find(|w| w[1].start < w[0].start) {
        return Err(Error::input(format!(
            "reference segments must be ordered by start time ({:?} starts before {:?})",
            w[1].text, w[0].text
        )));
    }
    Ok(())
}

/// Optimal reference combination WER of start-ordered reference segments
/// against speaker-agnostic hypothesis channels.
pub fn compute_orcwer(reference: &[TranscriptSegment], channels: &[Vec<&str>]) -> Result<WerReport> {
    check_sorted(reference)?;
    let segments: Vec<Vec<&str>> = reference.iter().map(|s| s.words()).collect();
    let orc = orc_align(&segments, channels)?;
    let ref_words = segments.iter().map(Vec::len).sum();
    Ok(WerReport::from_counts(
        orc.counts,
        ref_words,
        WerAssignment::Channels(orc.assignment),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::levenshtein::edit_distance;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn single_channel_single_segment_is_levenshtein() {
        let r = vec![w("the cat sat on the mat")];
        let h = vec![w("a cat sat the mat today")];
        let orc = orc_align(&r, &h).unwrap();
        assert_eq!(orc.counts.distance, edit_distance(&r[0], &h[0]));
        assert_eq!(orc.assignment, vec![0]);
    }

    #[test]
    fn interleaved_speakers_on_one_channel() {
        let r = vec![w("a b"), w("c d")];
        let h = vec![w("a b c d"), vec![]];
        let orc = orc_align(&r, &h).unwrap();
        assert_eq!(orc.counts.distance, 0);
        assert_eq!(orc.assignment, vec![0, 0]);
    }

    #[test]
    fn splits_across_channels() {
        let r = vec![w("a b"), w("x y"), w("c")];
        let h = vec![w("a b c"), w("x y")];
        let orc = orc_align(&r, &h).unwrap();
        assert_eq!(orc.counts.distance, 0);
        assert_eq!(orc.assignment, vec![0, 1, 0]);
    }

    #[test]
    fn ties_take_smallest_channel() {
        let r = vec![w("a")];
        let h = vec![w("b"), w("b")];
        let orc = orc_align(&r, &h).unwrap();
        assert_eq!(orc.counts.distance, 2);
        assert_eq!(orc.assignment, vec![0]);
    }

    #[test]
    fn empty_reference_counts_insertions() {
        let r: Vec<Vec<&str>> = vec![];
        let h = vec![w("a b"), w("c")];
        let orc = orc_align(&r, &h).unwrap();
        assert_eq!(orc.counts.insertions, 3);
    }

    #[test]
    fn channel_cap() {
        let h: Vec<Vec<&str>> = vec![vec![]; 5];
        assert!(matches!(orc_align(&[w("a")], &h), Err(Error::Budget(_))));
        assert!(matches!(orc_align::<&str>(&[w("a")], &[]), Err(Error::Input(_))));
    }
}
