"""Bounded micro-batcher: concurrent requests share model invocations.

Handler threads enqueue work items and block on a future; a single worker
drains up to ``max_batch`` items at a time and runs them through the engine
in one call. Responses always match their requests; only latency is shared.
"""

from __future__ import annotations

import queue
import threading
from concurrent.futures import Future
from typing import Callable, Sequence


class MicroBatcher:
    def __init__(self, run_batch: Callable[[Sequence[object]], Sequence[object]], max_batch: int):
        self._run_batch = run_batch
        self._max_batch = max_batch
        self._queue: queue.Queue = queue.Queue()
        self._worker = threading.Thread(target=self._loop, daemon=True)
        self._worker.start()

    def submit(self, item: object) -> object:
        future: Future = Future()
        self._queue.put((item, future))
        return future.result()

    def _loop(self) -> None:
        while True:
            item, future = self._queue.get()
            batch = [(item, future)]
            while len(batch) < self._max_batch:
                try:
                    batch.append(self._queue.get_nowait())
                except queue.Empty:
                    break
            items = [entry for entry, _ in batch]
            try:
                results = self._run_batch(items)
                for (_, fut), result in zip(batch, results):
                    fut.set_result(result)
            except Exception as exc:  # deliver the failure to every waiter
                for _, fut in batch:
                    if not fut.done():
                        fut.set_exception(exc)
