import pytest

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def record(cid, title, passed, detail):
    ACCEPTANCE[cid] = (title, bool(passed), detail)
    print(f"[{'PASS' if passed else 'FAIL'}] {cid}. {title}: {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=int):
        title, ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid}. {title}: {detail}")


@pytest.fixture(scope="session")
def record_acceptance():
    return record


@pytest.fixture(scope="session")
def desk_experiment():
    """alpha = 0.5, theta = 1, n = 1e5, R = 1e4, d = 3; simulated once per session."""
    from ewens_pitman import montecarlo
    from ewens_pitman.ep_sampler import ModelParams

    plan = montecarlo.ExperimentPlan(ModelParams(0.5, 1.0), 10**5, 10**4, d=3,
                                     master_seed=20240607, parallelism=montecarlo.default_parallelism())
    return plan, montecarlo.run_experiment(plan)
