"""Single-machine preemptive SRPT instance that orders the real scheduler's queue.

Every job is shrunk to ``(g_i / G) * n * alpha_min_est`` seconds of work on
one virtual machine.  The machine is stepped one slot at a time together with
the simulation clock and reports which jobs finished inside each slot.
"""

from __future__ import annotations

import heapq
import math
from typing import Iterable, List, Optional, Sequence, Tuple

EPS = 1e-12


def scaled_work(gpus: int, total_gpus: int, iterations: float, alpha_min: float) -> float:
    return gpus / total_gpus * iterations * alpha_min


class VirtualMachine:
    """SRPT with exact preemption inside slots.

    Slot ``t`` covers the interval ``[t*L, (t+1)*L]``.  Jobs added for slot
    ``t`` arrive at ``t*L``.
    """

    def __init__(self, slot_length: float = 1.0):
        self.slot_length = slot_length
        self.now = 0.0
        self._heap: List[Tuple[float, int, int]] = []  # (remaining, arrival, job_id)
        self._instant: List[Tuple[int, int]] = []  # zero-work arrivals
        self._pending: List[Tuple[int, float, int]] = []  # added, not yet released
        self.completed: List[Tuple[float, int]] = []  # (instant, job_id) in order
        self.last_slot: Optional[int] = None

    def __len__(self):
        return len(self._heap) + len(self._instant) + len(self._pending)

    def add(self, job_id: int, arrival: int, work: float) -> None:
        if work < 0:
            raise ValueError("work must be >= 0")
        if self.last_slot is not None and arrival <= self.last_slot:
            raise ValueError("job added for a slot that was already advanced")
        if work <= EPS:
            self._instant.append((arrival, job_id))
        else:
            self._pending.append((arrival, work, job_id))

    def remaining(self) -> List[Tuple[int, float]]:
        return sorted((jid, w) for w, _, jid in self._heap)

    def _run_until(self, end: float, done: list) -> None:
        tol = EPS * max(1.0, end)
        while self._heap and self.now < end - tol:
            work, arrival, job_id = heapq.heappop(self._heap)
            if self.now + work <= end + tol:
                self.now += work
                done.append((self.now, arrival, job_id))
            else:
                heapq.heappush(self._heap, (work - (end - self.now), arrival, job_id))
                self.now = end
        if self.now < end:
            self.now = end

    def advance(self, t: int) -> List[int]:
        """Run through the end of slot ``t``; return ids finishing since the last call.

        Slots skipped since the previous call are processed too, so the
        caller may jump ahead whenever it knows nothing completes meanwhile.
        """
        if self.last_slot is not None and t <= self.last_slot:
            raise ValueError("slots must strictly increase")
        self.last_slot = t
        L = self.slot_length
        done: List[Tuple[float, int, int]] = []
        due = sorted(x for x in self._instant if x[0] <= t)
        self._instant = [x for x in self._instant if x[0] > t]
        for arrival, job_id in due:
            done.append((arrival * L, arrival, job_id))
        # work already queued keeps running through any skipped slots
        self._run_until(t * L, done)
        keep = []
        for arrival, work, job_id in self._pending:
            if arrival <= t:
                heapq.heappush(self._heap, (work, arrival, job_id))
            else:
                keep.append((arrival, work, job_id))
        self._pending = keep
        self._run_until((t + 1) * L, done)
        done.sort()
        self.completed.extend((inst, jid) for inst, _, jid in done)
        return [jid for _, _, jid in done]

    def next_completion_slot(self) -> Optional[int]:
        """Slot in which the next job finishes if nothing else arrives."""
        cands = [a for a, _ in self._instant] + [a for a, _, _ in self._pending]
        if self._heap:
            finish = self.now + self._heap[0][0]
            slot = math.ceil(finish / self.slot_length - EPS * max(1.0, finish)) - 1
            floor = 0 if self.last_slot is None else self.last_slot + 1
            cands.append(max(slot, floor))
        return min(cands) if cands else None


def srpt_schedule(jobs: Sequence[Tuple[float, float]]) -> List[float]:
    """Offline preemptive SRPT; ``jobs`` are (arrival instant, work).

    Returns each job's completion instant.  Ties break by (arrival, index).
    """
    order = sorted(range(len(jobs)), key=lambda i: (jobs[i][0], i))
    completion = [0.0] * len(jobs)
    heap: List[Tuple[float, float, int]] = []
    now = 0.0
    k = 0
    while k < len(order) or heap:
        if not heap:
            now = max(now, jobs[order[k]][0])
        while k < len(order) and jobs[order[k]][0] <= now:
            i = order[k]
            heapq.heappush(heap, (jobs[i][1], jobs[i][0], i))
            k += 1
        work, arr, i = heapq.heappop(heap)
        next_arrival = jobs[order[k]][0] if k < len(order) else math.inf
        if now + work <= next_arrival:
            now += work
            completion[i] = now
        else:
            heapq.heappush(heap, (work - (next_arrival - now), arr, i))
            now = next_arrival
    return completion


def srpt_total_completion(jobs: Iterable[Tuple[float, float]]) -> float:
    return float(sum(srpt_schedule(list(jobs))))
