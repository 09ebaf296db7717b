use serde::{Deserialize, Serialize};

/// Edit operations of a minimum-cost alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn add(&mut self, other: EditCounts) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
    }
}

/// Levenshtein alignment of `hypothesis` against `reference`. Among
/// minimum-error alignments the one with fewest substitutions is chosen,
/// which fixes the insertion and deletion counts too.
pub fn edit_distance(reference: &[usize], hypothesis: &[usize]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    // (errors, substitutions, insertions, deletions), ordered by the first two
    type Cell = (usize, usize, usize, usize);
    let mut prev: Vec<Cell> = (0..=m).map(|j| (j, 0, j, 0)).collect();
    let mut cur: Vec<Cell> = vec![(0, 0, 0, 0); m + 1];
    for i in 1..=n {
        cur[0] = (i, 0, 0, i);
        for j in 1..=m {
            let d = prev[j - 1];
            let diag = if reference[i - 1] == hypothesis[j - 1] {
                d
            } else {
                (d.0 + 1, d.1 + 1, d.2, d.3)
            };
            let u = prev[j];
            let del = (u.0 + 1, u.1, u.2, u.3 + 1);
            let l = cur[j - 1];
            let ins = (l.0 + 1, l.1, l.2 + 1, l.3);
            cur[j] = [diag, del, ins]
                .into_iter()
                .min_by_key(|c| (c.0, c.1))
                .expect("three candidates");
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (_, s, ins, del) = prev[m];
    EditCounts {
        substitutions: s,
        insertions: ins,
        deletions: del,
    }
}

/// Error rate in percent; zero when there are no reference tokens.
pub fn error_rate(counts: EditCounts, reference_tokens: usize) -> f64 {
    if reference_tokens == 0 {
        0.0
    } else {
        100.0 * counts.errors() as f64 / reference_tokens as f64
    }
}

/// Corpus-level PER over `(reference, hypothesis)` pairs.
pub fn phoneme_error_rate<'a>(pairs: impl IntoIterator<Item = (&'a [usize], &'a [usize])>) -> (f64, EditCounts) {
    let mut total = EditCounts::default();
    let mut tokens = 0;
    for (r, h) in pairs {
        total.add(edit_distance(r, h));
        tokens += r.len();
    }
    (error_rate(total, tokens), total)
}
