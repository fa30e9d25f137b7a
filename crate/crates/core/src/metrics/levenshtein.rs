use serde::Serialize;

/// Edit counts for one alignment. `distance == insertions + deletions + substitutions`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EditCounts {
    pub distance: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
}

impl EditCounts {
    pub fn add(&mut self, other: &EditCounts) {
        self.distance += other.distance;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.substitutions += other.substitutions;
    }

    pub fn insertions_only(n: usize) -> Self {
        EditCounts {
            distance: n,
            insertions: n,
            ..Default::default()
        }
    }

    pub fn deletions_only(n: usize) -> Self {
        EditCounts {
            distance: n,
            deletions: n,
            ..Default::default()
        }
    }
}

/// One step of an alignment between a reference (`r`) and hypothesis (`h`) sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { r: usize, h: usize },
    Substitute { r: usize, h: usize },
    /// Hypothesis token with no reference counterpart.
    Insert { h: usize },
    /// Reference token with no hypothesis counterpart.
    Delete { r: usize },
}

fn table<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<Vec<usize>> {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i][j] = diag.min(d[i][j - 1] + 1).min(d[i - 1][j] + 1);
        }
    }
    d
}

/// Minimum-edit alignment, in sequence order.
///
/// Among co-optimal alignments the traceback prefers a diagonal step
/// (match or substitution), then an insertion, then a deletion.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<EditOp> {
    let d = table(reference, hypothesis);
    let (mut i, mut j) = (reference.len(), hypothesis.len());
    let mut ops = Vec::with_capacity(i.max(j));
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
                ops.push(if same {
                    EditOp::Match { r: i - 1, h: j - 1 }
                } else {
                    EditOp::Substitute { r: i - 1, h: j - 1 }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i][j] == d[i][j - 1] + 1 {
            ops.push(EditOp::Insert { h: j - 1 });
            j -= 1;
        } else {
            ops.push(EditOp::Delete { r: i - 1 });
            i -= 1;
        }
    }
    ops.reverse();
    ops
}

pub fn count_ops(ops: &[EditOp]) -> EditCounts {
    let mut c = EditCounts::default();
    for op in ops {
        match op {
            EditOp::Match { .. } => {}
            EditOp::Substitute { .. } => c.substitutions += 1,
            EditOp::Insert { .. } => c.insertions += 1,
            EditOp::Delete { .. } => c.deletions += 1,
        }
    }
    c.distance = c.insertions + c.deletions + c.substitutions;
    c
}

/// Word-level Levenshtein distance with its I/D/S breakdown.
pub fn levenshtein<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    count_ops(&align(reference, hypothesis))
}

/// Distance only, O(min(n, m)) memory.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let (a, b) = if reference.len() >= hypothesis.len() {
        (reference, hypothesis)
    } else {
        (hypothesis, reference)
    };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let diag = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = diag.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
