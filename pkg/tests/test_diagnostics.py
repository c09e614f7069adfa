import math

import numpy as np
import pytest

from fracheat import (
    EXISTS,
    INCONCLUSIVE,
    BallTooSmall,
    ClassifierThresholds,
    DomainSpec,
    InsufficientEvidence,
    NonpositiveState,
    PotentialSpec,
    Trajectory,
    assemble_operator,
    build_grid,
    classify,
    energy_inequality_certificate,
    evolve,
    exponential_bound_certificate,
    ground_state_comparability,
    hardy_sharp_constant,
    initial_state,
    log_estimate_certificate,
    monotone_family,
    refinement_series,
    sample_potential,
    shrinking_ball_certificate,
    spectral_bottom,
)

ALPHA = 0.5
DOM = DomainSpec.interval(1.0)

# regression: free-evolution comparability ratio for a ball of radius 1/8,
# t = 0.5, interval at h = 1/256 (refinement study fixture)
COMPARABILITY_RATIO_H256 = 9.895758445453769


def test_energy_certificate_zero_phi(interval_op):
    u = np.ones(interval_op.n)
    cert = energy_inequality_certificate(interval_op, u, np.zeros(interval_op.n))
    assert cert.lhs == 0.0 and cert.rhs == 0.0 and cert.satisfied


def test_energy_certificate_constant_u(interval_op):
    rng = np.random.default_rng(0)
    phi = rng.standard_normal(interval_op.n)
    u = np.full(interval_op.n, 2.5)
    cert = energy_inequality_certificate(interval_op, u, phi)
    killing = interval_op.cell_volume * np.sum(phi * phi * interval_op.kappa)
    assert cert.lhs == pytest.approx(killing, rel=1e-10)
    assert cert.satisfied
    assert cert.slack > 0  # strict for nonconstant phi: kernel part of rhs is positive


def test_energy_certificate_random_sweep(interval_op):
    rng = np.random.default_rng(1)
    for _ in range(300):
        u = rng.uniform(0.1, 1.1, interval_op.n)
        phi = rng.standard_normal(interval_op.n)
        cert = energy_inequality_certificate(interval_op, u, phi)
        assert cert.satisfied
        assert cert.slack >= -1e-12


def test_energy_certificate_rejects_nonpositive(interval_op):
    phi = np.ones(interval_op.n)
    u = np.ones(interval_op.n)
    u[3] = 0.0
    with pytest.raises(NonpositiveState):
        energy_inequality_certificate(interval_op, u, phi)
    phi2 = np.zeros(interval_op.n)
    phi2[5] = 1.0
    u2 = np.ones(interval_op.n)
    u2[10] = -0.5  # off the support, still inadmissible
    with pytest.raises(NonpositiveState):
        energy_inequality_certificate(interval_op, u2, phi2)


def test_log_certificate_eigenmode_identity(interval_op):
    res = spectral_bottom(interval_op)
    vol = interval_op.cell_volume
    phi0 = res.eigvec / math.sqrt(vol)
    dt = 1.0 / 64.0
    traj = evolve(interval_op, None, phi0, 0.5, dt, lambda0=res.lambda0)
    cert = log_estimate_certificate(traj, phi0, np.zeros(interval_op.n), 0.25, 0.5)
    assert cert.satisfied
    assert cert.lhs == pytest.approx(-res.lambda0, rel=1e-9)
    assert cert.rhs == pytest.approx(-math.log(1.0 + dt * res.lambda0) / dt, rel=1e-9)
    assert cert.rhs >= cert.lhs


def test_log_certificate_adjacent_times(interval_op):
    # t2 = t1 + dt reproduces the single-step inequality
    fld = sample_potential(PotentialSpec.bounded("0.5"), interval_op.grid, ALPHA)
    dt = 1.0 / 32.0
    traj = evolve(interval_op, fld, initial_state(interval_op.grid), 0.25, dt)
    rng = np.random.default_rng(2)
    raw = np.abs(rng.standard_normal(interval_op.n)) + 0.05
    Phi = raw / math.sqrt(interval_op.cell_volume * np.sum(raw * raw))
    t1 = 0.125
    cert = log_estimate_certificate(traj, Phi, fld, t1, t1 + dt)
    u1, u2 = traj.state_at(t1), traj.state_at(t1 + dt)
    direct = interval_op.cell_volume * np.sum(np.log(u2 / u1) * Phi * Phi) / dt
    assert cert.rhs == pytest.approx(direct, rel=1e-12)
    assert cert.satisfied


def test_log_certificate_validation(interval_op):
    fld = sample_potential(PotentialSpec.bounded("0.5"), interval_op.grid, ALPHA)
    traj = evolve(interval_op, fld, initial_state(interval_op.grid), 0.25, 1.0 / 32.0)
    good = np.ones(interval_op.n) / math.sqrt(interval_op.cell_volume * interval_op.n)
    with pytest.raises(ValueError):
        log_estimate_certificate(traj, good, fld, 0.125, 0.125)
    with pytest.raises(ValueError):
        log_estimate_certificate(traj, 2.0 * good, fld, 0.125, 0.25)
    # synthetic trajectory with a dead node on the support
    states = traj.states.copy()
    states[4, :] = np.maximum(states[4, :], 0.0)
    states[4, 7] = 0.0
    broken = Trajectory(
        times=traj.times, states=states, k=None, dt=traj.dt,
        grid=traj.grid, operator=traj.operator, l2_norms=traj.l2_norms,
    )
    t_bad = traj.times[4]
    with pytest.raises(NonpositiveState):
        log_estimate_certificate(broken, good, fld, t_bad, 0.25)


def test_exponential_bound_certificates(interval_op):
    res = spectral_bottom(interval_op)
    vol = interval_op.cell_volume
    phi0 = res.eigvec / math.sqrt(vol)
    dt = 1.0 / 64.0
    # equality on the ground mode with V = 0
    traj = evolve(interval_op, None, phi0, 0.5, dt, lambda0=res.lambda0)
    cert = exponential_bound_certificate(traj, res.lambda0)
    assert cert.satisfied
    assert abs(cert.lhs - 1.0) <= 1e-8
    # bounded potential: satisfied with positive slack
    fld = sample_potential(PotentialSpec.bounded("0.5 + 0.3*cos(3*x)"), interval_op.grid, ALPHA)
    lam = spectral_bottom(interval_op, fld.values).lambda0
    traj2 = evolve(interval_op, fld, initial_state(interval_op.grid), 0.5, dt, lambda0=lam)
    cert2 = exponential_bound_certificate(traj2, lam)
    assert cert2.satisfied and cert2.slack > 0
    # constant potential: equality on the ground mode again
    c = 0.3
    lam3 = res.lambda0 - c
    traj3 = evolve(interval_op, np.full(interval_op.n, c), phi0, 0.5, dt, lambda0=lam3)
    cert3 = exponential_bound_certificate(traj3, lam3)
    assert cert3.satisfied and abs(cert3.lhs - 1.0) <= 1e-8


def test_comparability_ground_mode_exact(interval_op):
    res = spectral_bottom(interval_op)
    phi0 = res.eigvec / math.sqrt(interval_op.cell_volume)
    cert = ground_state_comparability(interval_op, phi0, 0.25)
    assert cert.lhs == pytest.approx(1.0, abs=1e-9)
    assert cert.satisfied


def test_comparability_fixture_and_distance_bound():
    g = build_grid(DOM, 1.0 / 256.0)
    op = assemble_operator(g, ALPHA)
    u0 = initial_state(g, kind="ball", radius=0.125)
    cert = ground_state_comparability(op, u0, 0.5)
    assert cert.satisfied
    assert cert.lhs == pytest.approx(COMPARABILITY_RATIO_H256, rel=1e-6)
    assert cert.details["ground_over_distance"] > 0.5


def test_comparability_distance_coefficient_stable():
    vals = []
    for h in (1.0 / 64.0, 1.0 / 128.0):
        op = assemble_operator(build_grid(DOM, h), ALPHA)
        u0 = initial_state(op.grid, kind="ball", radius=0.125)
        cert = ground_state_comparability(op, u0, 0.5)
        vals.append(cert.details["ground_over_distance"])
    assert abs(vals[1] - vals[0]) / vals[0] < 0.05


BALLS = [0.5, 0.25, 0.125, 0.0625, 0.03125]


def test_shrinking_ball_supercritical():
    # base resolution must make the largest ball's bottom negative
    c = 2.0 * hardy_sharp_constant(1, ALPHA)
    cert = shrinking_ball_certificate(DOM, ALPHA, PotentialSpec.hardy_interior(c), BALLS, 1 / 512)
    assert cert.satisfied
    assert cert.details["window"] >= 3
    assert abs(cert.details["fitted_exponent"] - ALPHA / 1.0) <= 0.3 * (ALPHA / 1.0)
    lams = cert.details["lambda0s"]
    assert all(b < a for a, b in zip(lams, lams[1:]))


def test_shrinking_ball_subcritical_and_bounded():
    c = 0.5 * hardy_sharp_constant(1, ALPHA)
    sub = shrinking_ball_certificate(DOM, ALPHA, PotentialSpec.hardy_interior(c), BALLS, 1 / 256)
    assert not sub.satisfied
    bnd = shrinking_ball_certificate(DOM, ALPHA, PotentialSpec.bounded("1.0"), BALLS, 1 / 256)
    assert not bnd.satisfied


def test_shrinking_ball_too_small():
    with pytest.raises(BallTooSmall):
        shrinking_ball_certificate(DOM, ALPHA, PotentialSpec.bounded("1.0"), [0.5, 0.25], 0.25)


def _pipeline(coupling_ratio, hs, k_schedule, dt):
    pot = (
        PotentialSpec.bounded("0.3")
        if coupling_ratio is None
        else PotentialSpec.hardy_interior(coupling_ratio * hardy_sharp_constant(1, ALPHA))
    )
    series = refinement_series(DOM, ALPHA, pot, hs, k_schedule)
    family = []
    for h in hs:
        op = assemble_operator(build_grid(DOM, h), ALPHA)
        family.extend(monotone_family(op, pot, k_schedule, initial_state(op.grid), 0.5, dt))
    return series, family


def test_classify_bounded_exists():
    series, family = _pipeline(None, [1 / 16, 1 / 32, 1 / 64], [0.25, None], 1.0 / 32.0)
    verdict = classify(series, family)
    assert verdict.label == EXISTS
    assert verdict.epsilon == 0.01
    again = classify(series, family)
    assert again.label == verdict.label


def test_classify_insufficient_evidence():
    series, family = _pipeline(None, [1 / 16, 1 / 32], [None], 1.0 / 32.0)
    with pytest.raises(InsufficientEvidence):
        classify(series, family)
    series3, family3 = _pipeline(None, [1 / 16, 1 / 32, 1 / 64], [None], 1.0 / 32.0)
    with pytest.raises(InsufficientEvidence):
        classify(series3, family3[:-1])
    with pytest.raises(InsufficientEvidence):
        classify(series3, family3, ClassifierThresholds(probe_time=0.123))


def test_classify_monotone_in_coupling():
    # if a coupling blows up, every stronger coupling does too (same schedules)
    hs = [1 / 128, 1 / 256, 1 / 512]
    thresholds = ClassifierThresholds(
        rel_tol=0.05, divergence_ratio=1.15, growth_ratio=1.15, probe_time=0.5
    )
    labels = {}
    for mult in (2.0, 3.0):
        pot = PotentialSpec.hardy_interior(mult * hardy_sharp_constant(1, ALPHA))
        series = refinement_series(DOM, ALPHA, pot, hs, [None])
        family = []
        for h in hs:
            op = assemble_operator(build_grid(DOM, h), ALPHA)
            family.extend(monotone_family(op, pot, [None], initial_state(op.grid), 0.5, 1 / 64))
        labels[mult] = classify(series, family, thresholds).label
    if labels[2.0] == "BLOW_UP":
        assert labels[3.0] == "BLOW_UP"


def test_classify_inconclusive_on_mixed_signals():
    series, family = _pipeline(None, [1 / 16, 1 / 32, 1 / 64], [None], 1.0 / 32.0)
    # corrupt the finest spectral entry so neither test can pass
    from fracheat.spectral import SpectralEntry

    entries = list(series.entries)
    last = entries[-1]
    entries[-1] = SpectralEntry(h=last.h, k=last.k, epsilon=last.epsilon,
                                lambda0=last.lambda0 - 0.2, iterations=last.iterations)
    series.entries = entries
    assert classify(series, family).label == INCONCLUSIVE
