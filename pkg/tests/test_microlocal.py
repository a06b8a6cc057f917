import json
from dataclasses import replace

import numpy as np
import pytest

from aqftlab import microlocal as ml

P = ml.WFParams()
SH = (32, 32)
C = (16, 16)


@pytest.fixture(scope="module")
def wf_delta():
    return ml.wf_estimate(ml.delta(SH, C), P)


@pytest.fixture(scope="module")
def wf_line():
    return ml.wf_estimate(ml.vacuum_line(64), P)


def test_delta_flagged_everywhere_at_its_point(wf_delta):
    assert wf_delta.entries == {C: frozenset(range(P.n_dirs))}


def test_gaussian_not_flagged():
    assert len(ml.wf_estimate(ml.gaussian(SH, C), P)) == 0


def test_smooth_addition_ignored(wf_delta):
    assert ml.wf_estimate(ml.delta(SH, C) + ml.gaussian(SH, C), P) == wf_delta


def test_oscillatory_family_single_direction():
    est = ml.wf_estimate(ml.oscillatory_family(SH), P)
    assert len(est) > 0 and len(est.directions()) == 1


def test_vacuum_line_positive_frequency(wf_line):
    assert len(wf_line) > 0 and wf_line.directions() == {0}


def test_one_dimensional_delta():
    est = ml.wf_estimate(ml.delta((64,), (32,)), P)
    assert est.entries == {(32,): frozenset({0, 1})}


def test_hormander_products(wf_delta, wf_line):
    d1 = ml.wf_estimate(ml.delta((64,), (32,)), P)
    assert not ml.hormander_product_ok(d1, d1)
    assert ml.hormander_product_ok(wf_line, wf_line)
    assert ml.hormander_product_ok(wf_delta, ml.wf_estimate(ml.gaussian(SH, C), P))


def test_hormander_layout_mismatch(wf_delta, wf_line):
    with pytest.raises(ValueError):
        ml.hormander_product_ok(wf_delta, wf_line)


def test_microcausality():
    assert ml.microcausal_check(ml.vacuum_kernel(), P).passed
    assert ml.microcausal_check(ml.gaussian((48, 48), (20, 20)), P).passed
    assert not ml.microcausal_check(ml.same_cone_kernel(), P).passed


@pytest.mark.parametrize("make", [lambda: ml.vacuum_line(64), lambda: ml.oscillatory_family(SH)],
                         ids=["vacuum_line", "oscillatory"])
def test_monotone_in_degree(make):
    arr = make()
    prev = None
    for d in (2.0, 3.0, 4.0, 5.0):
        est = ml.wf_estimate(arr, replace(P, degree=d))
        flags = {(pt, b) for pt, dirs in est.entries.items() for b in dirs}
        if prev is not None:
            assert prev <= flags
        prev = flags


def test_translation_covariance():
    pp = replace(P, periodic=True)
    base = ml.wf_estimate(ml.delta(SH, (10, 12)), pp)
    moved = ml.wf_estimate(np.roll(ml.delta(SH, (10, 12)), (5, -7), axis=(0, 1)), pp)
    assert moved == base.shifted((5, -7))


def test_reproducible():
    a = ml.wf_estimate(ml.oscillatory_family(SH), P)
    b = ml.wf_estimate(ml.oscillatory_family(SH), P)
    assert a == b and a.dumps() == b.dumps()


def test_grid_too_small():
    with pytest.raises(ml.WindowError):
        ml.wf_estimate(np.zeros((10, 10)), P)


def test_json_export(wf_delta):
    doc = json.loads(wf_delta.dumps())
    assert doc["points"] == [{"t": 16, "x": 16, "dirs": list(range(P.n_dirs))}]
    assert doc["params"]["D"] == P.n_dirs and doc["params"]["w"] == P.w
    scaled = wf_delta.to_json(dt=0.5, dx=0.25)
    assert scaled["points"][0]["t"] == 8.0 and scaled["points"][0]["x"] == 4.0


def test_lightlike_buckets():
    assert ml.lightlike_buckets(16) == {2, 6, 10, 14}


@pytest.mark.parametrize("disc", ["lattice", "fourier"])
def test_causal_propagator_flags_null_directions(disc):
    from aqftlab.geometry import GridConfig, build_grid
    from aqftlab.propagators import assemble_K, kernel

    g = build_grid(GridConfig(48, 48, 2 * np.pi, 2 * np.pi, mass=1.0, discretization=disc))
    D = kernel(assemble_K(g), "pauli_jordan")
    src = np.zeros(g.shape)
    src[24, 24] = 1.0
    est = ml.wf_estimate(np.real(D.apply(src)), P)
    rep = ml.propagation_check(est, slack=0)
    assert rep.passed, rep.failures()
