import numpy as np
import pytest

from tt2cp import _kernels_py, kernels

NAMES = ("psi_right_step", "psi_left_step", "core_mttkrp")


def _operands(rng, name, complex_valued, a=3, i=4, b=5, r=6):
    def draw(*shape):
        x = rng.standard_normal(shape)
        return x + 1j * rng.standard_normal(shape) if complex_valued else x

    core = draw(a, i, b)
    if name == "psi_right_step":
        return core, draw(i, r), draw(b, r)
    if name == "psi_left_step":
        return core, draw(i, r), draw(a, r)
    return core, draw(a, r), draw(b, r)


def _einsum_reference(name, core, p, q):
    if name == "psi_right_step":
        return np.einsum("aib,ir,br->ar", core, p.conj(), q)
    if name == "psi_left_step":
        return np.einsum("aib,ir,ar->br", core, p.conj(), q)
    return np.einsum("aib,ar,br->ir", core, p, q)


@pytest.mark.parametrize("name", NAMES)
@pytest.mark.parametrize("complex_valued", [False, True])
def test_numpy_kernels_match_einsum(rng, name, complex_valued):
    ops = _operands(rng, name, complex_valued)
    got = getattr(_kernels_py, name)(*ops)
    assert np.allclose(got, _einsum_reference(name, *ops), rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
@pytest.mark.parametrize("name", NAMES)
@pytest.mark.parametrize("complex_valued", [False, True])
def test_compiled_kernels_match_numpy(rng, name, complex_valued):
    ops = _operands(rng, name, complex_valued)
    got = getattr(kernels, name)(*ops)
    ref = getattr(_kernels_py, name)(*ops)
    assert got.dtype == ref.dtype
    assert np.allclose(got, ref, rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_compiled_kernels_accept_mixed_dtypes_and_layouts(rng):
    core = np.asfortranarray(rng.standard_normal((2, 3, 4)))
    factor = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    psi = rng.standard_normal((4, 2))
    got = kernels.psi_right_step(core, factor, psi)
    assert np.allclose(got, _kernels_py.psi_right_step(core, factor, psi))


def test_degenerate_sizes(rng):
    core = rng.standard_normal((1, 3, 1))
    out = kernels.psi_right_step(core, rng.standard_normal((3, 1)), np.ones((1, 1)))
    assert out.shape == (1, 1)


def test_shape_mismatch_raises(rng):
    with pytest.raises(ValueError):
        kernels.psi_right_step(rng.standard_normal((2, 3, 4)), rng.standard_normal((3, 2)),
                               rng.standard_normal((5, 2)))
