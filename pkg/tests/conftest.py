import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ddlsched.model import MB, AllReduceKind, ClusterConfig, JobSpec, StageProfile, gbps

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def stage(fp=0.01, bp=0.02, din=0.0, dout=0.0, h=0.0, k=1, kind=AllReduceKind.RAR):
    return StageProfile(fp, bp, din, dout, h, k, kind)


def sync_pair_stages():
    """Three stages of two replicas: a 20 MB first-stage sync pair, 1 MB links to stage 2."""
    return (
        stage(din=0.0, dout=1 * MB, h=20 * MB, k=2),
        stage(din=1 * MB, dout=0.5 * MB, h=5 * MB, k=2),
        stage(din=0.5 * MB, dout=0.0, h=2 * MB, k=2),
    )


@pytest.fixture
def sync_pair_job():
    return JobSpec(0, sync_pair_stages())


@pytest.fixture
def cluster_8x4():
    return ClusterConfig(8, 4, gbps(1), 300e9)


@st.composite
def stage_lists(draw, max_gpus=6, max_stages=3, min_gpus=1):
    """Valid stage tuples: boundary data obeys the inter-stage identity."""
    num = draw(st.integers(1, max_stages))
    ks = draw(st.lists(st.integers(1, 3), min_size=num, max_size=num)
              .filter(lambda ks: min_gpus <= sum(ks) <= max_gpus))
    kind = draw(st.sampled_from(list(AllReduceKind)))
    consts = [draw(st.floats(0.0, 50.0)) * MB for _ in range(num - 1)]
    out = []
    for s, k in enumerate(ks):
        fp = draw(st.floats(1e-4, 0.05))
        out.append(StageProfile(
            fp_time=fp,
            bp_time=draw(st.floats(0.0, 0.1)),
            data_in=consts[s - 1] * ks[s - 1] / 2 if s > 0 else 0.0,
            data_out=consts[s] * ks[s + 1] / 2 if s + 1 < num else 0.0,
            param_size=draw(st.floats(0.0, 300.0)) * MB,
            replicas=k,
            allreduce_kind=kind,
        ))
    return tuple(out)


def random_workload(rng, cluster, num_jobs, max_arrival=50, max_iterations=2000):
    """Random multi-stage jobs that each fit the cluster, with exact predictions."""
    from ddlsched.bounds import random_stages

    jobs = []
    for i in range(num_jobs):
        gpus = int(rng.integers(1, min(cluster.total_gpus, 12) + 1))
        jobs.append(JobSpec(i, random_stages(rng, gpus, max_stages=4),
                            int(rng.integers(0, max_arrival + 1)),
                            int(rng.integers(1, max_iterations + 1)),
                            group_id=int(rng.integers(0, 5)), user_id=int(rng.integers(0, 3))))
    return jobs
