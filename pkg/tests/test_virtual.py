import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddlsched.virtual import VirtualMachine, scaled_work, srpt_schedule, srpt_total_completion


def replay(jobs, L=1.0, skip_to=None):
    """Feed (arrival slot, work) jobs slot by slot; return (order, completion instants)."""
    vm = VirtualMachine(L)
    for i, (r, w) in enumerate(jobs):
        vm.add(i, r, w)
    order = []
    slots = skip_to if skip_to is not None else range(10**6)
    for t in slots:
        order += vm.advance(t)
        if len(order) == len(jobs):
            break
    inst = dict((jid, c) for c, jid in vm.completed)
    return order, inst


def test_two_jobs():
    order, inst = replay([(0, 3.0), (0, 1.0)])
    assert order == [1, 0]
    assert inst == {1: 1.0, 0: 4.0}
    assert srpt_total_completion([(0, 3.0), (0, 1.0)]) == 5.0


def test_two_jobs_against_all_schedules():
    # any preemptive schedule of two jobs is dominated by one finishing a job first
    best = min(sum(itertools.accumulate(p)) for p in itertools.permutations([3.0, 1.0]))
    assert srpt_total_completion([(0, 3.0), (0, 1.0)]) == best


def test_zero_work_completes_at_arrival():
    vm = VirtualMachine()
    vm.add(0, 0, 5.0)
    vm.add(1, 2, 0.0)
    assert vm.advance(0) == []
    assert vm.advance(1) == []
    assert vm.advance(2) == [1]
    assert (2.0, 1) in vm.completed


def test_fractional_job():
    vm = VirtualMachine()
    vm.add(0, 0, 2.5)
    assert vm.advance(0) == []
    assert vm.advance(1) == []
    assert vm.advance(2) == [0]
    assert vm.completed == [(2.5, 0)]


def test_closed_form():
    for count in range(1, 8):
        assert srpt_total_completion([(0.0, 2.0)] * count) == pytest.approx(
            2.0 * count * (count + 1) / 2)
    assert srpt_total_completion([(3.0, 4.5)]) == 7.5


def test_scaled_work():
    assert scaled_work(4, 32, 100, 0.5) == pytest.approx(6.25)


def test_rejects_out_of_order():
    vm = VirtualMachine()
    vm.advance(3)
    with pytest.raises(ValueError):
        vm.advance(3)
    with pytest.raises(ValueError):
        vm.add(0, 2, 1.0)
    with pytest.raises(ValueError):
        VirtualMachine().add(0, 0, -1.0)


def fifo_total(jobs):
    now, tot = 0.0, 0.0
    for r, w in sorted(jobs, key=lambda j: j[0]):
        now = max(now, r) + w
        tot += now
    return tot


def sjf_total(jobs):
    """Non-preemptive shortest-job-first among arrived jobs."""
    left = sorted(jobs)
    now, tot = 0.0, 0.0
    while left:
        ready = [j for j in left if j[0] <= now] or [min(left)]
        j = min(ready, key=lambda x: (x[1], x[0]))
        left.remove(j)
        now = max(now, j[0]) + j[1]
        tot += now
    return tot


def random_preemptive_total(jobs, rng, quantum):
    """Serve a random arrived job for a random slice until everything finishes."""
    rem = [w for _, w in jobs]
    now = 0.0
    tot = sum(r for r, w in jobs if w <= 0)  # zero work finishes on arrival
    while any(x > 0 for x in rem):
        ready = [i for i, (r, _) in enumerate(jobs) if r <= now + 1e-12 and rem[i] > 0]
        if not ready:
            now = min(r for i, (r, _) in enumerate(jobs) if rem[i] > 0)
            continue
        i = ready[int(rng.integers(len(ready)))]
        run = min(rem[i], float(rng.uniform(0.1, 1.0)) * quantum)
        now += run
        rem[i] -= run
        if rem[i] <= 1e-12:
            rem[i] = 0.0
            tot += now
    return tot


jobs_strategy = st.lists(st.tuples(st.integers(0, 6), st.floats(0.0, 5.0)),
                         min_size=1, max_size=6)


@given(jobs_strategy, st.integers(0, 2**32 - 1))
def test_srpt_dominates(jobs, seed):
    inst = [(float(r), w) for r, w in jobs]
    opt = srpt_total_completion(inst)
    tol = 1e-9 * max(1.0, opt)
    assert opt <= fifo_total(inst) + tol
    assert opt <= sjf_total(inst) + tol
    rng = np.random.default_rng(seed)
    for _ in range(20):
        assert opt <= random_preemptive_total(inst, rng, 1.0) + tol


@given(jobs_strategy)
def test_online_matches_offline(jobs):
    order, inst = replay(jobs)
    offline = srpt_schedule([(float(r), w) for r, w in jobs])
    for i, c in enumerate(offline):
        assert inst[i] == pytest.approx(c, abs=1e-9)
    assert sorted(order, key=lambda i: (offline[i], jobs[i][0], i)) == order


@given(jobs_strategy, st.lists(st.booleans(), min_size=40, max_size=40))
def test_skipped_slots_do_not_lose_time(jobs, keep):
    """Visiting only some slots still completes every job at the same instant."""
    arrivals = {r for r, _ in jobs}
    visited = [t for t in range(40) if keep[t] or t in arrivals] + list(range(40, 10**4))
    _, dense = replay(jobs)
    _, sparse = replay(jobs, skip_to=visited)
    for i in dense:
        assert sparse[i] == pytest.approx(dense[i], abs=1e-9)


@given(jobs_strategy)
def test_work_conserving(jobs):
    inst = [(float(r), w) for r, w in jobs]
    comp = srpt_schedule(inst)
    # the machine is busy from the first arrival until the last completion,
    # except for gaps in which nothing has arrived and is unfinished
    events = sorted(inst)
    now = 0.0
    for r, w in events:
        now = max(now, r) + w
    assert max(comp) == pytest.approx(now, abs=1e-9)


@given(jobs_strategy)
def test_next_completion_slot(jobs):
    vm = VirtualMachine()
    for i, (r, w) in enumerate(jobs):
        vm.add(i, r, w)
    t = 0
    while len(vm.completed) < len(jobs):
        nxt = vm.next_completion_slot()
        assert nxt is not None and nxt >= t
        # nothing finishes before the predicted slot
        done = vm.advance(nxt)
        t = nxt + 1
        arrived = any(r <= nxt for r, _ in jobs)
        assert done or arrived
    assert vm.next_completion_slot() is None
    assert math.isfinite(sum(c for c, _ in vm.completed))
