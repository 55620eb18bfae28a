import numpy as np
import pytest

from nonradial.certificate import (EBox, SWEEP_MAX_STEPS, aggregation_constant,
                                   bound_constants, certify_at, delta_eta,
                                   search_admissible)
from nonradial.expr import hypothesis_check, parse


def test_ebox_bounds():
    box = EBox(R=0.5, gamma=0.2, dim=2, components=1)
    assert box.p_bound == pytest.approx(18.0 * 0.25 * 0.2)
    assert box.q_bound == pytest.approx(6.0 * 0.5 * 0.2)
    assert box.r_bound == pytest.approx(0.4)
    ranges = box.variable_ranges()
    assert ranges["x1"] == 0.5
    assert ranges["p1"] == box.p_bound
    assert ranges["q1_2"] == box.q_bound
    assert ranges["r1_12"] == box.r_bound


def test_ebox_validation():
    with pytest.raises(ValueError):
        EBox(R=0.0, gamma=1.0, dim=2, components=1)
    with pytest.raises(ValueError):
        EBox(R=1.0, gamma=-1.0, dim=2, components=1)


def test_aggregation_constant():
    assert aggregation_constant(2, 1) == 18.0
    assert aggregation_constant(3, 1) == 40.5
    assert aggregation_constant(3, 2) == 81.0


def test_bound_constants_validation():
    spec = parse("a1 = p1^2", 2, 1)
    box = EBox(R=1.0, gamma=1.0, dim=2, components=1)
    with pytest.raises(ValueError):
        bound_constants(spec, box, samples_per_axis=2)
    with pytest.raises(ValueError):
        bound_constants(parse("a1 = p1^2", 3, 1), box)


def test_zero_table():
    spec = parse("a1 = 0", 2, 1)
    box = EBox(R=1.0, gamma=1.0, dim=2, components=1)
    table = bound_constants(spec, box)
    assert all(v == 0.0 for v in table.as_dict().values() if v != 0.5)
    delta, eta, parts = delta_eta(table, 0.8, 1.0, 1.0)
    assert delta == 0.0 and eta == 0.0
    assert parts["K"] == 18.0


def test_hand_table_second_derivative_square():
    # a = r11^2 on gamma = 0.5 (so the r range is [-1, 1]); the box corners
    # are sampled, so the sups are exact:
    #   C = sup|2 r| = 2,   D = sup r^2 = 1,
    #   Ha_C = 2 * (2)^(1/2),  Ha_D = 2 * (2)^(1/2),  H1_C = H1_D = 2
    spec = parse("a1 = r1_11^2", 2, 1)
    box = EBox(R=1.0, gamma=0.5, dim=2, components=1)
    t = bound_constants(spec, box, alpha=0.5)
    assert t.A == 0.0 and t.B == 0.0 and t.a0 == 0.0
    assert t.C == pytest.approx(2.0, rel=1e-12)
    assert t.D == pytest.approx(1.0, rel=1e-12)
    assert t.Ha_C == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-12)
    assert t.Ha_D == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-12)
    assert t.H1_C == pytest.approx(2.0, rel=1e-12)
    assert t.H1_D == pytest.approx(2.0, rel=1e-12)


def test_table_monotone_in_box():
    spec = parse("a1 = p1^2 + q1_1^2 + exp(x1)*r1_12^2", 2, 1)
    tables = [bound_constants(spec, EBox(R=1.0, gamma=g, dim=2, components=1))
              for g in (0.25, 0.5, 1.0)]
    for key in ("A", "B", "C", "D", "Ha_A", "Ha_D", "H1_C"):
        vals = [getattr(t, key) for t in tables]
        assert vals[0] <= vals[1] <= vals[2]


def test_delta_monotone_in_gamma_and_cop():
    spec = parse("a1 = p1^2", 2, 1)
    box = EBox(R=1.0, gamma=1.0, dim=2, components=1)
    table = bound_constants(spec, box)
    d1, e1, _ = delta_eta(table, 0.5, 1.0, 0.5)
    d2, e2, _ = delta_eta(table, 0.5, 1.0, 1.0)
    assert d1 <= d2 and e1 <= e2
    d3, _, _ = delta_eta(table, 1.0, 1.0, 0.5)
    assert d3 == pytest.approx(2.0 * d1, rel=1e-14)


def test_certify_at_recompute_is_bit_exact():
    spec = parse("a1 = p1^2", 2, 1)
    hyp = hypothesis_check(spec, "thm13")
    cert = certify_at(spec, "thm13", 1.0, 0.01, 0.5, 4, 0.5, hyp)
    delta, eta, _ = delta_eta(cert.table, 0.5, 1.0, 0.01)
    assert delta == cert.delta and eta == cert.eta
    text = cert.to_text()
    assert "verdict" in text and "constants_quality = lower-bound-empirical" in text


def test_search_quadratic_thm13_admissible():
    spec = parse("a1 = p1^2", 2, 1)
    cert = search_admissible(spec, "thm13", C_op=0.5)
    assert cert.admissible
    assert cert.R == 1.0                       # thm13 keeps R fixed
    assert cert.delta < 1.0 and cert.eta < cert.gamma / 2.0
    Rs = [row[0] for row in cert.sweep]
    gs = [row[1] for row in cert.sweep]
    assert all(r == 1.0 for r in Rs)
    assert all(gs[k + 1] == gs[k] / 2.0 for k in range(len(gs) - 1))
    assert len(cert.sweep) <= SWEEP_MAX_STEPS


def test_search_hypothesis_failure_stops_immediately():
    spec = parse("a1 = 2*p1", 2, 1)
    cert = search_admissible(spec, "thm13")
    assert not cert.admissible
    assert cert.binding == "hypothesis"
    assert len(cert.sweep) == 1
    assert not cert.hypothesis.passed


def test_search_not_admissible_reports_binding():
    # a huge operator constant keeps delta >= 1 for the few steps allowed
    spec = parse("a1 = p1^2", 2, 1)
    cert = search_admissible(spec, "thm13", C_op=1e6, max_steps=3)
    assert not cert.admissible
    assert cert.binding in ("delta >= 1", "eta >= gamma/2")
    assert len(cert.sweep) == 3
    assert "binding_constraint" in cert.to_text()


def test_search_unknown_mode():
    with pytest.raises(ValueError):
        search_admissible(parse("a1 = 0", 2, 1), "thm99")


def test_thm12_gamma_floor_for_nonzero_a0():
    # a = 1: the displacement floor C_op K |a(0)| survives R -> 0, so the
    # starting gamma = 1 must be raised past 4 * 0.5 * 18 = 36, i.e. to 64
    spec = parse("a1 = 1", 2, 1)
    cert = search_admissible(spec, "thm12", C_op=0.5)
    assert cert.gamma == 64.0
    assert cert.admissible
    assert cert.delta == 0.0


def test_thm12_sweep_shrinks_R():
    spec = parse("a1 = exp(2*p1) - 1 - 2*p1", 2, 1)
    cert = search_admissible(spec, "thm12", C_op=0.5, max_steps=10)
    Rs = [row[0] for row in cert.sweep]
    gs = [row[1] for row in cert.sweep]
    assert all(Rs[k + 1] == Rs[k] / 2.0 for k in range(len(Rs) - 1))
    assert all(g == gs[0] for g in gs)


def test_thm11_R_to_zero_limit():
    # with a(0) = 0 and no r terms, both delta and eta vanish as R -> 0,
    # so the sweep must terminate admissible
    spec = parse("a1 = p1^2 + q1_1^2", 2, 1)
    cert = search_admissible(spec, "thm11", C_op=0.8)
    assert cert.admissible
    ds = [row[2] for row in cert.sweep]
    assert all(ds[k + 1] <= ds[k] for k in range(len(ds) - 1))


def test_certificates_deterministic():
    spec = parse("a1 = p1^2 + sin(q1_1)*q1_2", 2, 1)
    a = search_admissible(spec, "thm13", C_op=0.7)
    b = search_admissible(parse("a1 = p1^2 + sin(q1_1)*q1_2", 2, 1),
                          "thm13", C_op=0.7)
    assert a.to_text() == b.to_text()
