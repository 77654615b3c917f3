//! Serial / data-parallel execution switch.
//!
//! Every parallel loop in the crate goes through [`Execution`], which maps an
//! index range to an ordered `Vec`. Reductions are always performed serially
//! over that ordered output, so a parallel run reproduces the serial run bit
//! for bit. Without the `parallel` feature both variants run serially.

/// How index-parallel work is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0..len)` and returns results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            _ => (0..len).map(f).collect(),
        }
    }

    /// Runs `f(chunk_index, chunk)` over consecutive `chunk`-sized pieces of `data`.
    pub fn for_each_chunk<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        assert!(chunk > 0);
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c));
            }
            _ => data
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        for exec in [Execution::Serial, Execution::Parallel] {
            let v = exec.map(100, |i| i * i);
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn chunks_cover_everything() {
        for exec in [Execution::Serial, Execution::Parallel] {
            let mut v = vec![0usize; 37];
            exec.for_each_chunk(&mut v, 5, |c, chunk| {
                for (j, x) in chunk.iter_mut().enumerate() {
                    *x = c * 5 + j;
                }
            });
            assert_eq!(v, (0..37).collect::<Vec<_>>());
        }
    }
}
