//! Fixed-width worker pool feeding results to a single consumer.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

/// Run `work` over `jobs` on `workers` threads. `on_result` runs on the
/// calling thread, once per job, in completion order.
pub fn run_pool<J, R, W, C>(jobs: &[J], workers: usize, work: W, mut on_result: C)
where
    J: Sync,
    R: Send,
    W: Fn(&J) -> R + Sync,
    C: FnMut(usize, R),
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                if tx.send((i, work(job))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, result) in rx {
            on_result(i, result);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_job_runs_once() {
        let jobs: Vec<usize> = (0..50).collect();
        let mut seen = [0; 50];
        run_pool(
            &jobs,
            4,
            |j| j * 2,
            |i, r| {
                assert_eq!(r, i * 2);
                seen[i] += 1;
            },
        );
        assert!(seen.iter().all(|n| *n == 1));
        run_pool(&Vec::<usize>::new(), 3, |j| *j, |_, _| panic!("no jobs"));
    }
}
