//! Execution strategy for the data-parallel inner loops.
//!
//! Every parallel loop in the crate goes through [`Exec::map_range`], which
//! collects results in index order. Outputs are therefore identical for
//! every thread count, and identical between the two strategies. Without the
//! `parallel` feature, [`Exec::Parallel`] runs sequentially.

/// How index-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True if this build can actually run loops on multiple threads.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `(0..n).map(f).collect()`, possibly across threads.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Apply `f` to each `chunk`-sized piece of `data` along with the index
    /// of its first element.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(c, piece)| f(c * chunk, piece));
            }
            _ => data
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(c, piece)| f(c * chunk, piece)),
        }
    }
}

impl Exec {
    /// Consume `items`, calling `f` on each, possibly across threads.
    pub fn for_each<I, F>(self, items: Vec<I>, f: F)
    where
        I: Send,
        F: Fn(I) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.into_par_iter().for_each(f);
            }
            _ => items.into_iter().for_each(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(
            Exec::Sequential.map_range(1000, f),
            Exec::Parallel.map_range(1000, f)
        );
        let mut a = vec![0usize; 103];
        let mut b = a.clone();
        let fill = |start: usize, s: &mut [usize]| {
            for (o, v) in s.iter_mut().enumerate() {
                *v = start + o;
            }
        };
        Exec::Sequential.for_each_chunk_mut(&mut a, 10, fill);
        Exec::Parallel.for_each_chunk_mut(&mut b, 10, fill);
        assert_eq!(a, b);
        assert_eq!(a, (0..103).collect::<Vec<_>>());
    }
}
