//! Data-parallel helpers. With the `parallel` feature the work is spread
//! over the rayon pool; without it, or under [`Exec::Sequential`], items
//! are processed in order on the calling thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    /// Whether work actually runs on several threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// `items.map(f)`, results in input order.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// The first item, in input order, for which `f` returns `Some`.
pub fn find_map_first<T, R, F>(exec: Exec, items: &[T], f: F) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().find_map_first(f);
    }
    let _ = exec;
    items.iter().find_map(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let sq = |x: &u64| x * x;
        assert_eq!(map(Exec::Parallel, &xs, sq), map(Exec::Sequential, &xs, sq));
        let hit = |x: &u64| (x % 97 == 96).then_some(*x);
        assert_eq!(find_map_first(Exec::Parallel, &xs, hit), Some(96));
        assert_eq!(find_map_first(Exec::Sequential, &xs, hit), Some(96));
        assert_eq!(find_map_first(Exec::Parallel, &xs, |_| None::<u64>), None);
    }
}
