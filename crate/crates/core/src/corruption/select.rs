//! Top-n magnitude selection with a bounded binary heap, `O(len * log n)`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelectStats {
    pub comparisons: u64,
}

/// Candidate `a` ranks below `b`: smaller magnitude, or equal magnitude and higher index.
#[inline]
fn worse(a: (f64, usize), b: (f64, usize), stats: &mut SelectStats) -> bool {
    stats.comparisons += 1;
    a.0 < b.0 || (a.0 == b.0 && a.1 > b.1)
}

/// Min-heap on rank: the root is the worst kept candidate.
struct Bounded {
    heap: Vec<(f64, usize)>,
}

impl Bounded {
    fn sift_up(&mut self, mut i: usize, stats: &mut SelectStats) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if worse(self.heap[i], self.heap[parent], stats) {
                self.heap.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize, stats: &mut SelectStats) {
        let len = self.heap.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut m = i;
            if l < len && worse(self.heap[l], self.heap[m], stats) {
                m = l;
            }
            if r < len && worse(self.heap[r], self.heap[m], stats) {
                m = r;
            }
            if m == i {
                break;
            }
            self.heap.swap(i, m);
            i = m;
        }
    }
}

/// Positions (into `values`) of the `n` largest magnitudes, ascending.
/// Ties in magnitude keep the lower position.
pub fn select_top_n(values: &[f64], n: usize) -> Result<(Vec<usize>, SelectStats)> {
    if n == 0 || n > values.len() {
        return Err(Error::validation(format!("n = {n} outside [1, {}]", values.len())));
    }
    let mut stats = SelectStats::default();
    let mut b = Bounded { heap: Vec::with_capacity(n) };
    for (i, v) in values.iter().enumerate() {
        let cand = (v.abs(), i);
        if b.heap.len() < n {
            b.heap.push(cand);
            let last = b.heap.len() - 1;
            b.sift_up(last, &mut stats);
        } else if worse(b.heap[0], cand, &mut stats) {
            b.heap[0] = cand;
            b.sift_down(0, &mut stats);
        }
    }
    let mut picked: Vec<usize> = b.heap.into_iter().map(|(_, i)| i).collect();
    picked.sort_unstable();
    Ok((picked, stats))
}

/// `v` on its `n` largest-magnitude coordinates, zero elsewhere.
pub fn top_n(v: &[f64], n: usize) -> Result<Vec<f64>> {
    let (picked, _) = select_top_n(v, n)?;
    let mut h = vec![0.0; v.len()];
    for i in picked {
        h[i] = v[i];
    }
    Ok(h)
}
