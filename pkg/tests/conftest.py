import pytest

from shocklab.gas import build_shock, make_polytropic
from shocklab.profile import solve_profile


@pytest.fixture(scope="session")
def model():
    return make_polytropic(2.0)


@pytest.fixture(scope="session")
def shock(model):
    return build_shock(model, 1.0, 2.0, 0.0)


@pytest.fixture(scope="session")
def profile(model, shock):
    return solve_profile(model, shock)


@pytest.fixture(scope="session")
def pipeline(model, shock, profile):
    """Factory for closed shift pipelines on coarse donors, cached per arguments."""
    import math

    from shocklab.periodic import Mode, PeriodicPerturbation, evolve_periodic, init_periodic, time_averaged_pressure_integral
    from shocklab.shifts import (
        InitialDataSpec,
        PressureIntegrals,
        asymptotic_shifts,
        close_zero_mass,
        integrate_shifts,
        solve_initial_shifts,
    )

    cache = {}

    def build(eps, n_cells=64, t_end=14.0, close=True):
        key = (eps, n_cells, t_end, close)
        if key in cache:
            return cache[key]
        left = PeriodicPerturbation(math.pi, (Mode(1, eps, 0.5 * eps, 0.3, 1.1),))
        right = PeriodicPerturbation(math.pi, (Mode(1, eps, 0.5 * eps, 2.0, -0.4),))
        data = InitialDataSpec(left, right)
        lrun = evolve_periodic(init_periodic((shock.v_left, shock.u_left), left, n_cells), model, t_end)
        rrun = evolve_periodic(init_periodic((shock.v_right, shock.u_right), right, n_cells), model, t_end)
        if eps > 0:
            pi = PressureIntegrals(time_averaged_pressure_integral(lrun, model),
                                   time_averaged_pressure_integral(rrun, model))
        else:
            pi = PressureIntegrals()
        if close:
            data = close_zero_mass(data, pi, model, profile)
        x0, y0 = solve_initial_shifts(data, profile)
        traj = integrate_shifts(x0, y0, lrun, rrun, profile, model)
        traj = traj.with_formula(*asymptotic_shifts(data, x0, y0, pi, model, profile))
        cache[key] = dict(data=data, left=lrun, right=rrun, traj=traj, pi=pi)
        return cache[key]

    return build


ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one ``CRITERION n: PASS|FAIL`` line; printed in the terminal summary."""

    def report(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
