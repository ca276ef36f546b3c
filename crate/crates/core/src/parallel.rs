//! Data-parallel execution lane.
//!
//! With the `parallel` feature (default) independent work items such as
//! population members, replay seeds and evaluation instances run on the
//! rayon pool. Without it, or with [`Execution::Sequential`], the same
//! closures run in order on the calling thread. Results are always
//! returned in input order, so output does not depend on the lane.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map_mut<T, R, F>(self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items
                .par_iter_mut()
                .enumerate()
                .map(|(i, t)| f(i, t))
                .collect();
        }
        items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
        }
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_lanes_preserve_order() {
        let mut xs: Vec<u64> = (0..100).collect();
        let seq = Execution::Sequential.map_mut(&mut xs, |i, x| {
            *x += 1;
            (i as u64) * *x
        });
        let mut ys: Vec<u64> = (0..100).collect();
        let par = Execution::Parallel.map_mut(&mut ys, |i, x| {
            *x += 1;
            (i as u64) * *x
        });
        assert_eq!(seq, par);
        assert_eq!(xs, ys);
    }
}
