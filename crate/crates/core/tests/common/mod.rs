//! Generators and brute-force reference implementations shared by the
//! integration tests. Everything here is deliberately naive.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use diartool_core::doverlap::SpeakerGraph;
use diartool_core::io::{TaggedSegment, TranscriptSegment};
use diartool_core::{Tick, Timeline, Turn};

pub const VOCAB: [&str; 4] = ["a", "b", "c", "d"];

pub fn timeline(session: &str, turns: &[(&str, Tick, Tick)]) -> Timeline {
    Timeline::new(
        session,
        turns
            .iter()
            .map(|&(s, a, b)| Turn::new(session, s, a, b).unwrap())
            .collect(),
    )
    .unwrap()
}

/// Up to `max_speakers` speakers with a few turns each on `0..horizon`.
pub fn random_timeline<R: Rng>(rng: &mut R, prefix: &str, max_speakers: usize, horizon: Tick) -> Timeline {
    let n = rng.random_range(1..=max_speakers);
    let mut turns = Vec::new();
    for s in 0..n {
        for _ in 0..rng.random_range(1..=3) {
            let start = rng.random_range(0..horizon - 1);
            let end = rng.random_range(start + 1..=(start + horizon / 3).min(horizon));
            turns.push(Turn::new("s", format!("{prefix}{s}"), start, end).unwrap());
        }
    }
    Timeline::new("s", turns).unwrap()
}

/// Speakers active at tick `t` (covering `[t, t + 1)`).
fn active(tl: &Timeline, t: Tick) -> Vec<String> {
    let mut v: Vec<String> = tl
        .turns()
        .iter()
        .filter(|x| x.start <= t && t < x.end)
        .map(|x| x.speaker.clone())
        .collect();
    v.sort();
    v.dedup();
    v
}

fn injective_maps(n: usize, m: usize) -> Vec<Vec<Option<usize>>> {
    fn go(i: usize, n: usize, m: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        go(i + 1, n, m, used, cur, out);
        cur.pop();
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                go(i + 1, n, m, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n, m, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

/// `(missed, false_alarm, confusion, total)` by scoring every tick under every
/// partial one-to-one speaker mapping and keeping the smallest error.
pub fn der_oracle(reference: &Timeline, hypothesis: &Timeline, collar: Tick, ignore_overlap: bool) -> (Tick, Tick, Tick, Tick) {
    let refs = reference.speakers();
    let hyps = hypothesis.speakers();
    let horizon = reference
        .turns()
        .iter()
        .chain(hypothesis.turns())
        .map(|t| t.end)
        .max()
        .unwrap_or(0);
    let bounds: Vec<Tick> = reference.turns().iter().flat_map(|t| [t.start, t.end]).collect();
    let mut ticks = Vec::new();
    for t in 0..horizon {
        if bounds.iter().any(|&b| b - collar <= t && t < b + collar) {
            continue;
        }
        let r = active(reference, t);
        let h = active(hypothesis, t);
        if ignore_overlap && r.len() > 1 {
            continue;
        }
        let ri: Vec<usize> = r.iter().map(|s| refs.iter().position(|x| x == s).unwrap()).collect();
        let hi: Vec<usize> = h.iter().map(|s| hyps.iter().position(|x| x == s).unwrap()).collect();
        ticks.push((ri, hi));
    }
    let mut best: Option<(Tick, Tick, Tick, Tick)> = None;
    for map in injective_maps(hyps.len(), refs.len()) {
        let (mut miss, mut fa, mut conf, mut total) = (0, 0, 0, 0);
        for (r, h) in &ticks {
            let (nr, nh) = (r.len() as Tick, h.len() as Tick);
            let matched = h.iter().filter(|&&x| map[x].is_some_and(|y| r.contains(&y))).count() as Tick;
            total += nr;
            miss += (nr - nh).max(0);
            fa += (nh - nr).max(0);
            conf += nr.min(nh) - matched;
        }
        if best.is_none_or(|b| miss + fa + conf < b.0 + b.1 + b.2) {
            best = Some((miss, fa, conf, total));
        }
    }
    best.unwrap()
}

/// Edit distance by memoized recursion over suffixes.
pub fn lev_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = (go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]))
            .min(go(a, b, i + 1, j, memo) + 1)
            .min(go(a, b, i, j + 1, memo) + 1);
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

pub fn random_text<R: Rng>(rng: &mut R, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

pub fn segment(speaker: &str, start: Tick, text: &str) -> TranscriptSegment {
    TranscriptSegment {
        session: "s".into(),
        speaker: speaker.into(),
        start,
        end: start + 10,
        text: text.into(),
    }
}

/// Per-speaker word streams, speakers sorted by label.
pub fn streams(segs: &[TranscriptSegment]) -> Vec<(String, Vec<String>)> {
    let mut by: BTreeMap<String, Vec<&TranscriptSegment>> = BTreeMap::new();
    for s in segs {
        by.entry(s.speaker.clone()).or_default().push(s);
    }
    by.into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|s| (s.start, s.end));
            (k, v.iter().flat_map(|s| words(&s.text)).collect())
        })
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(n, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(n, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Minimum total edit distance over all pairings of padded speaker streams,
/// with the first optimal permutation in lexicographic order.
pub fn cpwer_oracle(reference: &[TranscriptSegment], hypothesis: &[TranscriptSegment]) -> (usize, Vec<usize>) {
    let r = streams(reference);
    let h = streams(hypothesis);
    let n = r.len().max(h.len());
    let empty: Vec<String> = Vec::new();
    let get = |side: &[(String, Vec<String>)], i: usize| side.get(i).map(|x| x.1.clone()).unwrap_or_else(|| empty.clone());
    let mut best = (usize::MAX, Vec::new());
    for p in permutations(n) {
        let cost: usize = (0..n).map(|i| lev_oracle(&get(&r, i), &get(&h, p[i]))).sum();
        if cost < best.0 {
            best = (cost, p);
        }
    }
    best
}

/// Cost of routing segment `i` to channel `assignment[i]`.
pub fn orc_cost(segments: &[Vec<String>], channels: &[Vec<String>], assignment: &[usize]) -> usize {
    (0..channels.len())
        .map(|c| {
            let r: Vec<String> = segments
                .iter()
                .zip(assignment)
                .filter(|(_, &a)| a == c)
                .flat_map(|(s, _)| s.clone())
                .collect();
            lev_oracle(&r, &channels[c])
        })
        .sum()
}

/// Every assignment in lexicographic order (segment 0 most significant).
pub fn assignments(n: usize, c: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..c).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Minimum cost over all assignments and the first assignment reaching it.
pub fn orc_oracle(segments: &[Vec<String>], channels: &[Vec<String>]) -> (usize, Vec<usize>) {
    let mut best = (usize::MAX, Vec::new());
    for a in assignments(segments.len(), channels.len()) {
        let cost = orc_cost(segments, channels, &a);
        if cost < best.0 {
            best = (cost, a);
        }
    }
    best
}

/// Indices `(r, h)` of matched tokens in a minimum-edit alignment that, walking
/// back from the end, prefers a diagonal step, then an insertion, then a deletion.
pub fn matched_pairs(a: &[String], b: &[String]) -> Vec<(usize, usize)> {
    let d = |i: usize, j: usize| lev_oracle(&a[..i], &b[..j]);
    let (mut i, mut j) = (a.len(), b.len());
    let mut out = Vec::new();
    while i > 0 || j > 0 {
        let here = d(i, j);
        if i > 0 && j > 0 && here == d(i - 1, j - 1) + usize::from(a[i - 1] != b[j - 1]) {
            if a[i - 1] == b[j - 1] {
                out.push((i - 1, j - 1));
            }
            i -= 1;
            j -= 1;
        } else if j > 0 && here == d(i, j - 1) + 1 {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    out.reverse();
    out
}

/// `(correct words, speaker errors)` from the first optimal segment routing
/// and the first optimal speaker pairing.
pub fn wder_oracle(reference: &[TranscriptSegment], hypothesis: &[TaggedSegment]) -> (usize, usize) {
    let mut reference = reference.to_vec();
    reference.sort_by_key(|s| (s.start, s.end));
    let n_ch = hypothesis.iter().map(|t| t.channel + 1).max().unwrap_or(1).max(1);
    let mut channels: Vec<Vec<(String, String)>> = vec![Vec::new(); n_ch];
    let mut hyp_sorted: Vec<&TaggedSegment> = hypothesis.iter().collect();
    hyp_sorted.sort_by_key(|t| (t.segment.start, t.segment.end));
    for t in hyp_sorted {
        for w in words(&t.segment.text) {
            channels[t.channel].push((w, t.segment.speaker.clone()));
        }
    }
    let seg_words: Vec<Vec<String>> = reference.iter().map(|s| words(&s.text)).collect();
    let ch_words: Vec<Vec<String>> = channels.iter().map(|c| c.iter().map(|x| x.0.clone()).collect()).collect();
    let (_, routing) = orc_oracle(&seg_words, &ch_words);

    let hyp_plain: Vec<TranscriptSegment> = hypothesis.iter().map(|t| t.segment.clone()).collect();
    let (_, perm) = cpwer_oracle(&reference, &hyp_plain);
    let r_names: Vec<String> = streams(&reference).into_iter().map(|x| x.0).collect();
    let h_names: Vec<String> = streams(&hyp_plain).into_iter().map(|x| x.0).collect();
    let mut hyp_to_ref: BTreeMap<String, String> = BTreeMap::new();
    for (i, &j) in perm.iter().enumerate() {
        if let (Some(r), Some(h)) = (r_names.get(i), h_names.get(j)) {
            hyp_to_ref.insert(h.clone(), r.clone());
        }
    }

    let (mut correct, mut errors) = (0, 0);
    for c in 0..n_ch {
        let mut ref_words: Vec<(String, String)> = Vec::new();
        for (i, seg) in reference.iter().enumerate() {
            if routing[i] == c {
                for w in &seg_words[i] {
                    ref_words.push((w.clone(), seg.speaker.clone()));
                }
            }
        }
        let a: Vec<String> = ref_words.iter().map(|x| x.0.clone()).collect();
        for (ri, hi) in matched_pairs(&a, &ch_words[c]) {
            correct += 1;
            if hyp_to_ref.get(&channels[c][hi].1) != Some(&ref_words[ri].1) {
                errors += 1;
            }
        }
    }
    (correct, errors)
}

/// Heaviest clique partition by enumerating a permutation per hypothesis
/// (hypothesis 0 fixed).
pub fn best_partition_weight(g: &SpeakerGraph) -> f64 {
    let (k, c) = (g.num_hypotheses(), g.size());
    let perms = permutations(c);
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; k];
    loop {
        let mut w = 0.0;
        for q in 0..c {
            for a in 0..k {
                for b in a + 1..k {
                    let ia = if a == 0 { q } else { perms[idx[a]][q] };
                    let ib = perms[idx[b]][q];
                    w += g.weight(a, ia, b, ib);
                }
            }
        }
        best = best.max(w);
        let mut pos = 1;
        loop {
            if pos >= k {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < perms.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

pub fn random_graph<R: Rng>(rng: &mut R, max_k: usize, max_c: usize) -> SpeakerGraph {
    let k = rng.random_range(2..=max_k);
    let counts: Vec<usize> = (0..k).map(|_| rng.random_range(1..=max_c)).collect();
    SpeakerGraph::from_weights(&counts, |_, _, _, _| {
        if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..1.0)
        }
    })
}

/// Block-diagonal 0/1 affinity with rows shuffled; returns the block of each row.
pub fn block_affinity<R: Rng>(rng: &mut R, sizes: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
    let mut id: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
        .collect();
    id.shuffle(rng);
    let n = id.len();
    (DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(id[i] == id[j]))), id)
}

/// Whether two labelings induce the same partition of rows.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
