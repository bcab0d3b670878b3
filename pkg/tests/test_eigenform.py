import math

import mpmath
import numpy as np
import pytest

from qtwist.arithmetic import primes_up_to, spf_sieve
from qtwist.cache import load_table
from qtwist.eigenform import (EigenformTable, estimated_generation_bytes, exact_coefficients,
                              generate_eigenform, hecke_from_primes, lambda_tilde, read_table,
                              sym_square_L1, write_table)
from qtwist.errors import CacheFormatError, ConfigurationError, DomainError, RangeError, ResourceError

N_SERIES = 60


def _series_oracle():
    """Delta = q prod (1 - q^n)^24 and Delta * E6 by schoolbook multiplication in Python ints."""
    N = N_SERIES

    def mul(a, b):
        c = [0] * (N + 1)
        for i, x in enumerate(a):
            if x:
                for j in range(N + 1 - i):
                    c[i + j] += x * b[j]
        return c

    prod = [1] + [0] * N
    for n in range(1, N + 1):
        f = [0] * (N + 1)
        f[0], f[n] = 1, -1
        for _ in range(24):
            prod = mul(prod, f)
    delta = [0] + prod[:N]

    def sigma(n, k):
        return sum(d**k for d in range(1, n + 1) if n % d == 0)
    e6 = [1] + [-504 * sigma(n, 5) for n in range(1, N + 1)]
    return delta, mul(delta, e6)


def test_coefficients_match_schoolbook_series():
    delta, f18 = _series_oracle()
    assert exact_coefficients(12, N_SERIES)[1:] == delta[1:]
    assert exact_coefficients(18, N_SERIES)[1:] == f18[1:]


def test_known_coefficients():
    tau = exact_coefficients(12, 12)
    assert tau[1:13] == [1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920, 534612, -370944]
    a18 = exact_coefficients(18, 12)
    assert a18[1:8] == [1, -528, -4284, 147712, -1025850, 2261952, 3225992]


@pytest.mark.parametrize("weight", [16, 20, 22, 26])
def test_other_weights_hecke_consistent(weight):
    a = exact_coefficients(weight, 400)
    ap = {int(p): a[p] for p in primes_up_to(400)}
    assert hecke_from_primes(ap, weight, 400) == a


def test_normalisation_correctly_rounded():
    t = generate_eigenform(12, 200)
    with mpmath.workdps(60):
        for n in (2, 3, 7, 97, 199):
            a = exact_coefficients(12, n)[n]
            exact = mpmath.mpf(a) / mpmath.mpf(n) ** mpmath.mpf(5.5)
            assert t.lam[n] == float(exact)


def test_generation_is_deterministic():
    a = generate_eigenform(18, 5000)
    b = generate_eigenform(18, 5000)
    assert a.digest == b.digest
    assert np.array_equal(a.lam, b.lam)
    assert a.lam[1] == 1.0 and a.lam[0] == 0.0


def test_prefix_agrees_with_longer_table(table18):
    short = generate_eigenform(18, 3000)
    assert np.array_equal(short.lam, table18.lam[:3001])


def test_argument_errors():
    with pytest.raises(ConfigurationError):
        generate_eigenform(14, 100)
    with pytest.raises(DomainError):
        generate_eigenform(12, 1)
    with pytest.raises(ResourceError):
        generate_eigenform(12, 10**6, memory_cap=10**6)
    assert estimated_generation_bytes(12, 10**7) < 2 * 1024**3


def test_lambda_tilde():
    t = generate_eigenform(12, 100)
    assert lambda_tilde(t, 1) == 1.0
    assert lambda_tilde(t, 12) == pytest.approx(t.lam[2] ** 2 * t.lam[3], rel=1e-15)
    assert lambda_tilde(t, 9) != pytest.approx(t.lam[9])
    with pytest.raises(RangeError):
        lambda_tilde(t, 101 * 3, spf_sieve(303))
    with pytest.raises(DomainError):
        lambda_tilde(t, 0)


def test_sym_square_L1(table12):
    value, tail = sym_square_L1(table12, 10**6)
    assert value == pytest.approx(0.6318355957356788, rel=1e-12)
    assert tail < 1e-3
    with pytest.raises(RangeError):
        sym_square_L1(generate_eigenform(12, 2000), 10**4)


def test_table_round_trip(tmp_path):
    t = generate_eigenform(12, 1000)
    path = tmp_path / "t.qtmf"
    write_table(t, path)
    back = read_table(path)
    assert back.digest == t.digest and np.array_equal(back.lam, t.lam) and back.weight == 12


@pytest.mark.parametrize("damage", ["truncate", "magic", "flip"])
def test_corrupt_table_detected(tmp_path, damage):
    path = tmp_path / "t.qtmf"
    write_table(generate_eigenform(12, 1000), path)
    raw = bytearray(path.read_bytes())
    if damage == "truncate":
        raw = raw[:-40]
    elif damage == "magic":
        raw[0:4] = b"XXXX"
    else:
        raw[100] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheFormatError):
        read_table(path)


def test_corrupt_cache_regenerated(tmp_path, caplog):
    t = load_table(12, 500, tmp_path)
    path = tmp_path / "eigen_12_500.qtmf"
    path.write_bytes(path.read_bytes()[:50])
    again = load_table(12, 500, tmp_path)
    assert again.digest == t.digest
    assert "corrupt" in caplog.text
    # a longer cached table serves shorter requests
    load_table(12, 800, tmp_path)
    assert load_table(12, 600, tmp_path).n_max == 800


def test_table_is_read_only():
    t = generate_eigenform(12, 50)
    with pytest.raises(ValueError):
        t.lam[2] = 0.0
    assert isinstance(t, EigenformTable) and t[1] == 1.0
    assert math.isclose(t[2], -24 / 2**5.5, rel_tol=1e-15)
