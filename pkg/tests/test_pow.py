import numpy as np
import pytest

from tinygroups import pow as pw
from tinygroups.idring import IdPoint


@pytest.fixture
def params():
    return pw.PuzzleParams.calibrated(T=20, rate=1, n=20_000)


def test_tau_calibration():
    assert pw.calibrate_tau(20, 1) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        pw.calibrate_tau(2, 1)
    with pytest.raises(ValueError):
        pw.calibrate_tau(0, 1)


def test_string_length():
    assert pw.string_bytes(20_000, 8.0) == 10


def test_budget_respects_beta():
    b = pw.ComputeBudget.for_network(20_000, 0.05)
    assert b.adversary_units == 1000
    with pytest.raises(ValueError):
        pw.ComputeBudget(90, 20, 0.05)


def test_certificate_roundtrip(params):
    rng = np.random.default_rng(0)
    r = rng.bytes(params.nbytes)
    cert = pw.attempt_generate(r, 200, rng, params)
    assert cert is not None
    assert pw.verify_certificate(cert, [r], params)
    assert not pw.verify_certificate(cert, [bytes(params.nbytes)], params)
    forged = pw.IdCertificate(cert.sigma, r, IdPoint((cert.id_value.value + 1) % (1 << 64)), 0, "x")
    assert not pw.verify_certificate(forged, [r], params)
    assert "sigma_hex" in cert.to_json()


def test_window_limit(params):
    b = pw.ComputeBudget.for_network(100, 0.05)
    with pytest.raises(ValueError):
        pw.adversary_generate(b, 31, np.random.default_rng(0), params, bytes(params.nbytes))


def test_generated_certificates_verify(params):
    b = pw.ComputeBudget.for_network(200, 0.05)
    r = np.random.default_rng(1).bytes(params.nbytes)
    certs = pw.adversary_generate(b, 11, np.random.default_rng(2), params, r)
    assert certs and all(pw.verify_certificate(c, [r], params) for c in certs)


def test_bias_only_matters_for_single_hash(params):
    b = pw.ComputeBudget.for_network(20_000, 0.05)
    r = np.random.default_rng(3).bytes(params.nbytes)
    single = pw.adversary_generate(b, 11, np.random.default_rng(4), params, r, "bias_small_outputs", True)
    double = pw.adversary_generate(b, 11, np.random.default_rng(4), params, r, "bias_small_outputs")
    assert pw.chi_square_uniform([float(c.id_value) for c in single]) < 1e-6
    assert all(float(c.id_value) < 2 ** -32 for c in single)
    assert pw.chi_square_uniform([float(c.id_value) for c in double]) > 1e-6


def test_lifecycle():
    assert [pw.lifecycle_state(3, c) for c in (3, 4, 5, 6)] == ["pending", "active", "passive", "expired"]
    with pytest.raises(ValueError):
        pw.lifecycle_state(3, 2)
    assert pw.expire_ids({"a": 0, "b": 2}, 2) == {"a": "passive", "b": "pending"}


def test_rotating_strings_void_hoards(params):
    b = pw.ComputeBudget.for_network(2000, 0.05)
    valid, total = pw.precompute_attack(b, params, np.random.default_rng(5), epochs=3)
    fixed_valid, fixed_total = pw.precompute_attack(b, params, np.random.default_rng(5), epochs=3,
                                                    rotate_strings=False)
    assert valid < total and fixed_valid == fixed_total
    assert valid <= 1.5 * total / 3


def test_count_bound():
    assert pw.count_bound(1000, 0.1) == pytest.approx(1210)
