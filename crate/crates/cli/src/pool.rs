//! Bounded worker pool with deterministic result ordering.
//!
//! Tasks are pulled by index from an atomic counter; results land in their
//! input slot, so output order never depends on completion order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Number of workers: `QLYAP_WORKERS` overrides the CLI value, which
/// overrides available parallelism.
pub fn resolve_workers(cli_value: Option<usize>) -> usize {
    if let Ok(text) = std::env::var("QLYAP_WORKERS") {
        if let Ok(n) = text.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    if let Some(n) = cli_value {
        if n >= 1 {
            return n;
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Run `count` indexed tasks on up to `workers` threads and collect results
/// in input order.
pub fn run_indexed<T, F>(count: usize, workers: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if count == 0 {
        return Vec::new();
    }
    let workers = workers.max(1).min(count);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= count {
                    break;
                }
                let result = task(idx);
                slots.lock().expect("pool poisoned")[idx] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("pool poisoned")
        .into_iter()
        .map(|slot| slot.expect("task completed"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_arrive_in_input_order() {
        let out = run_indexed(64, 8, |i| {
            // stagger completion
            std::thread::sleep(std::time::Duration::from_micros((64 - i as u64) * 10));
            i * i
        });
        let expect: Vec<usize> = (0..64).map(|i| i * i).collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn zero_tasks_is_fine() {
        let out: Vec<usize> = run_indexed(0, 4, |i| i);
        assert!(out.is_empty());
    }
}
