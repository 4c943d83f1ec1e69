//! Binary max-heap of variables keyed by activity.

#[derive(Debug, Clone, Default)]
pub(super) struct VarHeap {
    heap: Vec<u32>,
    position: Vec<Option<usize>>,
}

impl VarHeap {
    pub fn new(num_vars: usize) -> Self {
        VarHeap {
            heap: Vec::with_capacity(num_vars),
            position: vec![None; num_vars],
        }
    }

    pub fn contains(&self, v: u32) -> bool {
        self.position[v as usize].is_some()
    }

    pub fn insert(&mut self, v: u32, activity: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.position[v as usize] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, activity);
    }

    /// Restores heap order after `v`'s activity grew.
    pub fn increased(&mut self, v: u32, activity: &[f64]) {
        if let Some(pos) = self.position[v as usize] {
            self.sift_up(pos, activity);
        }
    }

    pub fn pop(&mut self, activity: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.position[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = Some(0);
            self.sift_down(0, activity);
        }
        Some(top)
    }

    // Ties go to the lower variable index so the order is fully deterministic.
    #[inline]
    fn before(a: u32, b: u32, activity: &[f64]) -> bool {
        let (x, y) = (activity[a as usize], activity[b as usize]);
        x > y || (x == y && a < b)
    }

    fn sift_up(&mut self, mut pos: usize, activity: &[f64]) {
        let v = self.heap[pos];
        while pos > 0 {
            let parent = (pos - 1) / 2;
            let p = self.heap[parent];
            if !Self::before(v, p, activity) {
                break;
            }
            self.heap[pos] = p;
            self.position[p as usize] = Some(pos);
            pos = parent;
        }
        self.heap[pos] = v;
        self.position[v as usize] = Some(pos);
    }

    fn sift_down(&mut self, mut pos: usize, activity: &[f64]) {
        let v = self.heap[pos];
        let len = self.heap.len();
        loop {
            let left = 2 * pos + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let child = if right < len && Self::before(self.heap[right], self.heap[left], activity) {
                right
            } else {
                left
            };
            let c = self.heap[child];
            if !Self::before(c, v, activity) {
                break;
            }
            self.heap[pos] = c;
            self.position[c as usize] = Some(pos);
            pos = child;
        }
        self.heap[pos] = v;
        self.position[v as usize] = Some(pos);
    }
}
