use std::ops::Range;

/// Hands out consecutive ranges of a flat parameter vector.
#[derive(Debug, Default, Clone)]
pub struct ParamLayout {
    len: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, n: usize) -> Range<usize> {
        let r = self.len..self.len + n;
        self.len += n;
        r
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}
