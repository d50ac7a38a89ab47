//! Shot-parallel driver. Shot i is a pure function of (seed, stream, i), so
//! splitting the index range across threads cannot change any value; the
//! thread count (capped by QEM_THREADS) only affects wall-clock time.

pub fn thread_count() -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("QEM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or(available);
    cap.min(available).max(1)
}

/// Evaluate `f(i)` for i in 0..n across up to `threads` chunks, returning
/// values in index order.
pub fn run_shots<F>(n: u64, threads: usize, f: F) -> Result<Vec<f64>, qem_core::Error>
where
    F: Fn(u64) -> Result<f64, qem_core::Error> + Sync,
{
    if threads <= 1 || n < 1024 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads as u64);
    let mut results: Vec<Result<Vec<f64>, qem_core::Error>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads as u64 {
            let start = t * chunk;
            let end = ((t + 1) * chunk).min(n);
            if start >= end {
                break;
            }
            let f = &f;
            handles.push(scope.spawn(move || (start..end).map(f).collect()));
        }
        for h in handles {
            results.push(h.join().expect("shot worker panicked"));
        }
    });
    let mut out = Vec::with_capacity(n as usize);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_values_independent_of_threads() {
        let f = |i: u64| Ok((i as f64).sin());
        let seq = run_shots(5000, 1, f).unwrap();
        let par = run_shots(5000, 4, f).unwrap();
        assert_eq!(seq, par);
    }
}
