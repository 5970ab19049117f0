use serde::{Deserialize, Serialize};

use crate::quant::QuantizedModel;

/// Arena layout for the int8 activations of a model. Step 0 holds the
/// input; node `i` runs at step `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryPlan {
    pub arena_bytes: usize,
    pub offsets: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Inclusive `(first, last)` step during which each tensor is live.
    pub lifetimes: Vec<(usize, usize)>,
}

impl MemoryPlan {
    pub fn steps(&self) -> usize {
        self.lifetimes.iter().map(|l| l.1 + 1).max().unwrap_or(0)
    }

    pub fn live_at(&self, step: usize) -> impl Iterator<Item = usize> + '_ {
        self.lifetimes
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.0 <= step && step <= l.1)
            .map(|(i, _)| i)
    }

    /// Largest total size of simultaneously live tensors; a lower bound
    /// for any arena.
    pub fn peak_live_bytes(&self) -> usize {
        (0..self.steps())
            .map(|s| self.live_at(s).map(|t| self.sizes[t]).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn max_live_tensors(&self) -> usize {
        (0..self.steps())
            .map(|s| self.live_at(s).count())
            .max()
            .unwrap_or(0)
    }

    pub fn range(&self, t: usize) -> std::ops::Range<usize> {
        self.offsets[t]..self.offsets[t] + self.sizes[t]
    }
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Places tensors in `order`, each at the lowest offset that avoids every
/// already placed tensor with an overlapping lifetime.
fn place(sizes: &[usize], lifetimes: &[(usize, usize)], order: &[usize]) -> (usize, Vec<usize>) {
    let mut offsets = vec![0; sizes.len()];
    let mut placed: Vec<usize> = Vec::with_capacity(sizes.len());
    let mut arena = 0;
    for &t in order {
        let mut busy: Vec<(usize, usize)> = placed
            .iter()
            .filter(|&&p| overlaps(lifetimes[p], lifetimes[t]))
            .map(|&p| (offsets[p], offsets[p] + sizes[p]))
            .collect();
        busy.sort_unstable();
        let mut at = 0;
        for (start, end) in busy {
            if at + sizes[t] <= start {
                break;
            }
            at = at.max(end);
        }
        offsets[t] = at;
        arena = arena.max(at + sizes[t]);
        placed.push(t);
    }
    (arena, offsets)
}

/// Liveness-based greedy offset assignment. Two orders are tried
/// (largest first, execution order) and the smaller arena is kept.
pub fn plan_memory(model: &QuantizedModel) -> MemoryPlan {
    let n = model.tensors.len();
    let sizes: Vec<usize> = model.tensors.iter().map(|t| t.shape.numel()).collect();
    let mut lifetimes = vec![(usize::MAX, 0); n];
    lifetimes[model.input] = (0, 0);
    for (i, node) in model.nodes.iter().enumerate() {
        let step = i + 1;
        lifetimes[node.output] = (step, step);
        for &t in &node.inputs {
            lifetimes[t].1 = lifetimes[t].1.max(step);
        }
    }
    let end = model.nodes.len();
    lifetimes[model.output].1 = end;
    for l in &mut lifetimes {
        // Tensors nobody produces stay empty-lived at step 0.
        if l.0 == usize::MAX {
            *l = (0, 0);
        }
    }

    let by_order: Vec<usize> = {
        let mut o: Vec<usize> = (0..n).collect();
        o.sort_by_key(|&t| lifetimes[t].0);
        o
    };
    let by_size: Vec<usize> = {
        let mut o: Vec<usize> = (0..n).collect();
        o.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(lifetimes[a].0.cmp(&lifetimes[b].0)));
        o
    };
    let (a1, o1) = place(&sizes, &lifetimes, &by_size);
    let (a2, o2) = place(&sizes, &lifetimes, &by_order);
    let (arena_bytes, offsets) = if a2 < a1 { (a2, o2) } else { (a1, o1) };
    MemoryPlan {
        arena_bytes,
        offsets,
        sizes,
        lifetimes,
    }
}
