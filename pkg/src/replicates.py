from concurrent.futures import ThreadPoolExecutor, as_completed

from loguru import logger

from .process import ReplicateSeed


class ReplicateRunner:
    """Fans replicate indices out over a thread pool.

    Results are stored by replicate index, so the returned list is identical
    for any worker count.
    """

    def __init__(self, master_seed: int, num_workers: int = 4):
        if num_workers < 1:
            raise ValueError(f"num_workers: must be >= 1, got {num_workers}")
        self.master_seed = master_seed
        self.num_workers = num_workers

    def run(self, task, replicates: int) -> list:
        if replicates < 1:
            raise ValueError(f"replicates: must be >= 1, got {replicates}")
        results = [None] * replicates
        if self.num_workers == 1:
            for r in range(replicates):
                results[r] = task(ReplicateSeed(self.master_seed, r))
            return results

        with ThreadPoolExecutor(max_workers=self.num_workers) as executor:
            futures = {
                executor.submit(task, ReplicateSeed(self.master_seed, r)): r
                for r in range(replicates)
            }
            for future in as_completed(futures):
                r = futures[future]
                try:
                    results[r] = future.result()
                except Exception as e:
                    logger.error(f"Replicate {r} failed: {e}")
                    raise
        return results
